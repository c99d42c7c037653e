//! Static three-panel plot: mel spectrogram, p_now and p_fut.

use std::path::Path;

use image::{Rgb, RgbImage};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use vapcue::aggregation::ProbTrace;
use vapcue::audio::AudioBuffer;
use vapcue::metrics::{TurnMarkers, TurnRegions};

const WIDTH: u32 = 1000;
const SPEC_HEIGHT: u32 = 240;
const PROB_HEIGHT: u32 = 140;
const GAP: u32 = 8;
const MEL_BANDS: usize = 80;
const FFT_SIZE: usize = 512;
const DYNAMIC_RANGE_DB: f64 = 80.0;

#[derive(Debug, Serialize)]
pub struct Panel {
    pub name: &'static str,
    pub top: u32,
    pub height: u32,
}

#[derive(Debug, Serialize)]
pub struct RegionMark {
    pub name: &'static str,
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub x0: u32,
    pub x1: u32,
}

#[derive(Debug, Serialize)]
pub struct Layout {
    pub width: u32,
    pub height: u32,
    pub duration: f64,
    pub panels: Vec<Panel>,
    pub reference_line: f64,
    pub regions: Vec<RegionMark>,
}

pub struct Rendered {
    pub layout: Layout,
    pub warning: Option<String>,
}

fn mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Log-mel power, one column per 10 ms, scaled to `[0, 1]`.
fn mel_spectrogram(audio: &AudioBuffer) -> Vec<[f64; MEL_BANDS]> {
    let sr = audio.sample_rate() as f64;
    let hop = ((sr / 100.0).round() as usize).max(1);
    let x = audio.samples();
    let window: Vec<f64> = (0..FFT_SIZE)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / FFT_SIZE as f64).cos())
        .collect();
    let bins = FFT_SIZE / 2 + 1;
    let edges: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(mel(sr / 2.0) * i as f64 / (MEL_BANDS + 1) as f64) * FFT_SIZE as f64 / sr)
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
    let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    let mut columns = Vec::new();
    let mut start = 0;
    while start < x.len() {
        for (i, b) in buf.iter_mut().enumerate() {
            let v = x.get(start + i).copied().unwrap_or(0.0) as f64;
            *b = Complex::new(v * window[i], 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..bins].iter().map(|c| c.norm_sqr()).collect();
        let mut col = [0.0; MEL_BANDS];
        for (m, v) in col.iter_mut().enumerate() {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut acc = 0.0;
            for (k, p) in power.iter().enumerate() {
                let f = k as f64;
                let w = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                acc += w * p;
            }
            *v = 10.0 * (acc + 1e-12).log10();
        }
        columns.push(col);
        start += hop;
    }
    let peak = columns.iter().flat_map(|c| c.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);
    for col in &mut columns {
        for v in col.iter_mut() {
            *v = ((*v - peak + DYNAMIC_RANGE_DB) / DYNAMIC_RANGE_DB).clamp(0.0, 1.0);
        }
    }
    columns
}

/// Dark blue to yellow.
fn colormap(v: f64) -> Rgb<u8> {
    let stops = [(0.0, [20.0, 12.0, 60.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let (a, b) = if v < 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let t = (v - a.0) / (b.0 - a.0);
    Rgb([0, 1, 2].map(|i| (a.1[i] + (b.1[i] - a.1[i]) * t).round() as u8))
}

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

pub fn render(
    audio: &AudioBuffer,
    probs: &ProbTrace,
    markers: Option<&TurnMarkers>,
    regions: Option<&TurnRegions>,
    path: &Path,
) -> anyhow::Result<Rendered> {
    let fr = probs.frame_rate();
    let trace_duration = probs.len() as f64 / fr;
    let duration = audio.duration().min(trace_duration);
    let warning = (trace_duration + 1.0 / fr < audio.duration()).then(|| {
        format!(
            "trace covers {trace_duration:.3} s of {:.3} s of audio; plot truncated",
            audio.duration()
        )
    });
    let height = SPEC_HEIGHT + 2 * (GAP + PROB_HEIGHT);
    let panels = vec![
        Panel { name: "mel_spectrogram", top: 0, height: SPEC_HEIGHT },
        Panel { name: "p_now", top: SPEC_HEIGHT + GAP, height: PROB_HEIGHT },
        Panel { name: "p_fut", top: SPEC_HEIGHT + 2 * GAP + PROB_HEIGHT, height: PROB_HEIGHT },
    ];
    let x_of = |t: f64| ((t / duration) * WIDTH as f64).round().clamp(0.0, WIDTH as f64 - 1.0) as u32;
    let mut img = RgbImage::from_pixel(WIDTH, height, Rgb([255, 255, 255]));

    let spec = mel_spectrogram(audio);
    for x in 0..WIDTH {
        let t = (x as f64 + 0.5) / WIDTH as f64 * duration;
        let col = &spec[((t * 100.0) as usize).min(spec.len() - 1)];
        for y in 0..SPEC_HEIGHT {
            let band = ((SPEC_HEIGHT - 1 - y) as usize * MEL_BANDS) / SPEC_HEIGHT as usize;
            img.put_pixel(x, y, colormap(col[band]));
        }
    }

    let shades: [(&'static str, Rgb<u8>, Rgb<u8>); 3] = [
        ("pause", Rgb([220, 232, 250]), Rgb([40, 90, 200])),
        ("early_yield", Rgb([252, 232, 210]), Rgb([220, 120, 20])),
        ("late_yield", Rgb([222, 244, 222]), Rgb([30, 150, 60])),
    ];
    let mut marks = Vec::new();
    if let Some(r) = regions {
        for ((name, shade, edge), span) in shades.iter().zip([&r.pause, &r.early_yield, &r.late_yield]) {
            let (t0, t1) = (span.start as f64 / fr, span.end as f64 / fr);
            let (x0, x1) = (x_of(t0), x_of(t1));
            for p in &panels[1..] {
                for x in x0..x1.max(x0 + 1).min(WIDTH) {
                    for y in p.top..p.top + p.height {
                        img.put_pixel(x, y, *shade);
                    }
                }
            }
            for x in [x0, x1] {
                line(&mut img, (x as i64, 0), (x as i64, height as i64 - 1), *edge);
            }
            marks.push(RegionMark {
                name,
                start_frame: span.start,
                end_frame: span.end,
                start_time: t0,
                end_time: t1,
                x0,
                x1,
            });
        }
    }

    let y_of = |p: &Panel, v: f64| p.top as i64 + ((1.0 - v.clamp(0.0, 1.0)) * (p.height - 1) as f64).round() as i64;
    let colors = [Rgb([200, 30, 30]), Rgb([30, 30, 200])];
    for (k, p) in panels[1..].iter().enumerate() {
        let mid = y_of(p, 0.5);
        for x in (0..WIDTH).step_by(8) {
            line(&mut img, (x as i64, mid), ((x + 3).min(WIDTH - 1) as i64, mid), Rgb([120, 120, 120]));
        }
        let visible = ((duration * fr).ceil() as usize).min(probs.len());
        let mut prev: Option<(i64, i64)> = None;
        for (i, f) in probs.frames()[..visible].iter().enumerate() {
            let v = if k == 0 { f.p_now } else { f.p_fut };
            let pt = (x_of((i as f64 + 0.5) / fr) as i64, y_of(p, v));
            if let Some(q) = prev {
                line(&mut img, q, pt, colors[k]);
            }
            prev = Some(pt);
        }
    }
    if let Some(m) = markers {
        for t in [m.statement_end, m.question_start, m.question_end] {
            if t <= duration {
                let x = x_of(t) as i64;
                line(&mut img, (x, 0), (x, SPEC_HEIGHT as i64 - 1), Rgb([255, 255, 255]));
            }
        }
    }
    crate::tree::ensure_parent(path)?;
    img.save(path)?;
    Ok(Rendered {
        layout: Layout {
            width: WIDTH,
            height,
            duration,
            panels,
            reference_line: 0.5,
            regions: marks,
        },
        warning,
    })
}
