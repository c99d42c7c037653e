//! Pitch-synchronous overlap-add pitch flattening.

use std::f64::consts::PI;

use super::f0::{estimate_f0_samples, F0Config, F0Contour};
use super::{read_cubic, PitchTarget, SampleSpan};
use crate::error::{Error, Result};

/// Crossfade at the edges of each voiced run, seconds.
const EDGE_RAMP: f64 = 0.005;

pub(crate) struct Flattened {
    pub samples: Vec<f64>,
    pub target_hz: Option<f64>,
    pub voiced_frames: usize,
}

pub(crate) fn flatten(
    x: &[f64],
    sr: f64,
    span: SampleSpan,
    target: PitchTarget,
    f0: &F0Config,
) -> Result<Flattened> {
    let contour = estimate_f0_samples(x, sr, f0)?;
    let hop = contour.hop * sr;
    let half_window = (f0.window * sr).round() / 2.0;
    // frame index -> centre sample
    let centre = |i: usize| i as f64 * hop + half_window;
    let in_span: Vec<usize> = (0..contour.frames.len())
        .filter(|&i| {
            let c = centre(i);
            contour.frames[i].f0.is_some() && c >= span.start as f64 && c < span.end as f64
        })
        .collect();
    if in_span.is_empty() {
        return Ok(Flattened { samples: x.to_vec(), target_hz: None, voiced_frames: 0 });
    }
    let target_hz = match target {
        PitchTarget::SpanMean => {
            in_span.iter().map(|&i| contour.frames[i].f0.unwrap_or(0.0)).sum::<f64>() / in_span.len() as f64
        }
        PitchTarget::FixedHz(hz) => {
            if !(hz >= f0.min_hz && hz <= f0.max_hz) {
                return Err(Error::Prosody(format!(
                    "pitch target {hz} Hz is outside {}..{} Hz",
                    f0.min_hz, f0.max_hz
                )));
            }
            hz
        }
    };
    let target_period = sr / target_hz;
    let period_at = period_curve(&contour, sr, half_window);

    let mut out = x.to_vec();
    let ramp = (EDGE_RAMP * sr).max(1.0);
    for run in runs(&in_span) {
        let seg_start = (centre(run[0]) - hop / 2.0).max(span.start as f64).floor() as usize;
        let seg_end = ((centre(*run.last().unwrap_or(&run[0])) + hop / 2.0).min(span.end as f64)).ceil() as usize;
        if seg_end <= seg_start {
            continue;
        }
        let reach = 1.5 * period_at(seg_start as f64).max(target_period);
        let from = (seg_start as f64 - reach).max(0.0);
        let to = (seg_end as f64 + reach).min((x.len() - 1) as f64);
        let marks = pitch_marks(x, &period_at, from, to);
        if marks.len() < 2 {
            continue;
        }
        let (acc, weight) = overlap_add(x, &marks, &period_at, target_period, seg_start, seg_end);
        for n in seg_start..seg_end {
            let w = weight[n - seg_start];
            if w <= 1e-6 {
                continue;
            }
            let synth = acc[n - seg_start] / w;
            let pos = n as f64;
            let beta = ((pos - seg_start as f64 + 0.5) / ramp)
                .min((seg_end as f64 - pos - 0.5) / ramp)
                .clamp(0.0, 1.0);
            out[n] = beta * synth + (1.0 - beta) * x[n];
        }
    }
    Ok(Flattened { samples: out, target_hz: Some(target_hz), voiced_frames: in_span.len() })
}

/// Split sorted frame indices into consecutive runs.
fn runs(indices: &[usize]) -> Vec<&[usize]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=indices.len() {
        if i == indices.len() || indices[i] != indices[i - 1] + 1 {
            out.push(&indices[start..i]);
            start = i;
        }
    }
    out
}

/// Period in samples at any sample position, linearly interpolated between
/// voiced frames and held constant beyond them.
fn period_curve(contour: &F0Contour, sr: f64, half_window: f64) -> impl Fn(f64) -> f64 {
    let hop = contour.hop * sr;
    let points: Vec<(f64, f64)> = contour
        .frames
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.f0.map(|hz| (i as f64 * hop + half_window, sr / hz)))
        .collect();
    move |pos: f64| {
        let k = points.partition_point(|(c, _)| *c <= pos);
        if k == 0 {
            points[0].1
        } else if k == points.len() {
            points[k - 1].1
        } else {
            let (c0, p0) = points[k - 1];
            let (c1, p1) = points[k];
            p0 + (p1 - p0) * (pos - c0) / (c1 - c0)
        }
    }
}

/// Fractional position of the largest sample in `[lo, hi]`.
fn peak(x: &[f64], lo: f64, hi: f64) -> f64 {
    let lo = lo.max(0.0).ceil() as usize;
    let hi = (hi.floor() as usize).min(x.len() - 1);
    let mut best = lo;
    for i in lo..=hi.max(lo) {
        if x[i] > x[best] {
            best = i;
        }
    }
    if best > 0 && best + 1 < x.len() {
        let (a, b, c) = (x[best - 1], x[best], x[best + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            return best as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    best as f64
}

/// Analysis marks one local period apart, each snapped to the waveform peak.
fn pitch_marks(x: &[f64], period_at: &impl Fn(f64) -> f64, from: f64, to: f64) -> Vec<f64> {
    let mut marks = vec![peak(x, from, from + period_at(from))];
    loop {
        let last = marks[marks.len() - 1];
        let p = period_at(last);
        let predicted = last + p;
        if predicted - 0.3 * p > to {
            break;
        }
        let next = peak(x, predicted - 0.3 * p, predicted + 0.3 * p);
        if next <= last + 0.5 * p {
            marks.push(predicted);
        } else {
            marks.push(next);
        }
    }
    marks
}

/// Hann-windowed grains taken at the analysis marks and laid down one target
/// period apart. Returns the summed grains and window weights over
/// `[seg_start, seg_end)`.
fn overlap_add(
    x: &[f64],
    marks: &[f64],
    period_at: &impl Fn(f64) -> f64,
    target_period: f64,
    seg_start: usize,
    seg_end: usize,
) -> (Vec<f64>, Vec<f64>) {
    let len = seg_end - seg_start;
    let mut acc = vec![0.0; len];
    let mut weight = vec![0.0; len];
    let last = marks[marks.len() - 1];
    let mut s = marks[0];
    let mut nearest = 0;
    while s <= last {
        while nearest + 1 < marks.len() && (marks[nearest + 1] - s).abs() <= (marks[nearest] - s).abs() {
            nearest += 1;
        }
        let a = marks[nearest];
        let half = period_at(a).max(target_period);
        let lo = ((s - half).ceil().max(seg_start as f64)) as usize;
        let hi = ((s + half).floor().min(seg_end as f64 - 1.0)).max(-1.0);
        if hi >= lo as f64 {
            for n in lo..=hi as usize {
                let u = n as f64 - s;
                let w = 0.5 * (1.0 + (PI * u / half).cos());
                acc[n - seg_start] += w * read_cubic(x, a + u);
                weight[n - seg_start] += w;
            }
        }
        s += target_period;
    }
    (acc, weight)
}
