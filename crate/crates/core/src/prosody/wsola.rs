//! Waveform-similarity overlap-add time stretching.

use std::f64::consts::PI;

use super::SampleSpan;

/// Frame length in seconds; two periods of the lowest expected voice.
const FRAME: f64 = 0.04;

fn at(x: &[f64], i: isize) -> f64 {
    if i < 0 {
        0.0
    } else {
        x.get(i as usize).copied().unwrap_or(0.0)
    }
}

fn similarity(x: &[f64], a: isize, b: isize, len: usize) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for j in 0..len as isize {
        let (u, v) = (at(x, a + j), at(x, b + j));
        ab += u * v;
        aa += u * u;
        bb += v * v;
    }
    ab / (aa * bb).sqrt().max(1e-12)
}

/// Stretch `x[span]` to `out_len` samples. The first and last half-frames
/// are pinned to the original so the result joins its surroundings.
pub(crate) fn stretch_span(x: &[f64], sr: f64, span: SampleSpan, out_len: usize, max_period: f64) -> Vec<f64> {
    let half = ((FRAME * sr / 2.0).round() as usize).max(1);
    let frame = 2 * half;
    let tolerance = (max_period / 2.0).ceil() as isize + 1;
    let window: Vec<f64> = (0..frame).map(|j| 0.5 * (1.0 - (2.0 * PI * j as f64 / frame as f64).cos())).collect();
    let in_len = span.len();
    let factor = out_len as f64 / in_len as f64;
    let base = span.start as isize;

    let mut acc = vec![0.0; out_len];
    let mut weight = vec![0.0; out_len];
    let mut add = |synth: isize, analysis: isize| {
        for (j, &wj) in window.iter().enumerate().take(frame) {
            let n = synth + j as isize;
            if n >= 0 && (n as usize) < out_len {
                acc[n as usize] += wj * at(x, base + analysis + j as isize);
                weight[n as usize] += wj;
            }
        }
    };

    // frame -1 reproduces the audio leading into the span
    let h = half as isize;
    add(-h, -h);
    let mut previous = -h;
    let mut k = 0isize;
    while k * h < out_len as isize - h {
        let ideal = (k as f64 * half as f64 / factor).round() as isize;
        let natural = previous + h;
        let mut best = (f64::NEG_INFINITY, ideal);
        for delta in -tolerance..=tolerance {
            let cand = ideal + delta;
            if cand < -h {
                continue;
            }
            let score = similarity(x, base + natural, base + cand, frame);
            if score > best.0 {
                best = (score, cand);
            }
        }
        add(k * h, best.1);
        previous = best.1;
        k += 1;
    }
    // the closing frame runs into the audio after the span
    add(out_len as isize - h, in_len as isize - h);

    acc.iter()
        .zip(&weight)
        .enumerate()
        .map(|(n, (a, w))| if *w > 1e-9 { a / w } else { at(x, base + (n as f64 / factor) as isize) })
        .collect()
}
