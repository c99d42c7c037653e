//! Fundamental frequency estimation.
//!
//! Each frame is scored with the cumulative-mean-normalized difference
//! function: for lag `τ`, `d(τ) = Σ (x[j] − x[j+τ])²` over the window,
//! divided by the running mean of `d` over smaller lags. The first lag whose
//! score falls below the threshold, walked down to its local minimum and
//! refined with a parabola, is the period. Frames without such a lag, or too
//! quiet to analyze, are unvoiced.

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct F0Config {
    pub min_hz: f64,
    pub max_hz: f64,
    /// Analysis window in seconds.
    pub window: f64,
    /// Frame step in seconds.
    pub hop: f64,
    /// Largest normalized difference accepted as periodic.
    pub threshold: f64,
    /// Frames below this RMS are unvoiced.
    pub silence_rms: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            min_hz: 60.0,
            max_hz: 400.0,
            window: 0.025,
            hop: 0.010,
            threshold: 0.15,
            silence_rms: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Frame {
    /// Centre of the analysis window, seconds.
    pub time: f64,
    /// `None` when unvoiced.
    pub f0: Option<f64>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Contour {
    pub hop: f64,
    pub frames: Vec<F0Frame>,
}

impl F0Contour {
    pub fn voiced(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frames.iter().filter_map(|f| f.f0.map(|hz| (f.time, hz)))
    }

    /// Voiced F0 values of frames centred in `[start, end)` seconds.
    pub fn voiced_in(&self, start: f64, end: f64) -> Vec<f64> {
        self.voiced()
            .filter(|(t, _)| *t >= start && *t < end)
            .map(|(_, hz)| hz)
            .collect()
    }
}

pub fn estimate_f0(audio: &AudioBuffer, cfg: &F0Config) -> Result<F0Contour> {
    audio.require_mono("F0 estimation")?;
    let x: Vec<f64> = audio.samples().iter().map(|&s| s as f64).collect();
    estimate_f0_samples(&x, audio.sample_rate() as f64, cfg)
}

pub(crate) fn estimate_f0_samples(x: &[f64], sr: f64, cfg: &F0Config) -> Result<F0Contour> {
    if !(cfg.min_hz > 0.0 && cfg.max_hz > cfg.min_hz && cfg.hop > 0.0 && cfg.window > 0.0) {
        return Err(Error::Prosody("invalid F0 estimator settings".into()));
    }
    let window = (cfg.window * sr).round() as usize;
    let hop = ((cfg.hop * sr).round() as usize).max(1);
    if x.len() < window {
        return Err(Error::Prosody(format!(
            "audio of {} samples is shorter than one {window}-sample analysis window",
            x.len()
        )));
    }
    let min_lag = ((sr / cfg.max_hz).floor() as usize).max(2);
    let max_lag = (sr / cfg.min_hz).ceil() as usize;
    let count = (x.len() - window) / hop + 1;
    let mut diff = vec![0.0; max_lag + 2];
    let frames = (0..count)
        .map(|i| {
            let start = i * hop;
            let time = (start as f64 + window as f64 / 2.0) / sr;
            let lag_limit = max_lag.min(x.len() - start - window);
            let frame = &x[start..start + window];
            let energy = (frame.iter().map(|v| v * v).sum::<f64>() / window as f64).sqrt();
            let unvoiced = F0Frame { time, f0: None, confidence: 0.0 };
            if energy < cfg.silence_rms || lag_limit < min_lag + 1 {
                return unvoiced;
            }
            match best_lag(x, start, window, min_lag, lag_limit, cfg.threshold, &mut diff) {
                Some((period, score)) => {
                    let hz = sr / period;
                    let confidence = (1.0 - score).clamp(0.0, 1.0);
                    if (cfg.min_hz..=cfg.max_hz).contains(&hz) {
                        F0Frame { time, f0: Some(hz), confidence }
                    } else {
                        F0Frame { confidence, ..unvoiced }
                    }
                }
                None => unvoiced,
            }
        })
        .collect();
    Ok(F0Contour { hop: hop as f64 / sr, frames })
}

/// Refined period in samples and its normalized score.
fn best_lag(
    x: &[f64],
    start: usize,
    window: usize,
    min_lag: usize,
    lag_limit: usize,
    threshold: f64,
    diff: &mut [f64],
) -> Option<(f64, f64)> {
    let frame = &x[start..start + window];
    diff[0] = 0.0;
    for lag in 1..=lag_limit {
        let shifted = &x[start + lag..start + lag + window];
        diff[lag] = frame.iter().zip(shifted).map(|(a, b)| (a - b) * (a - b)).sum();
    }
    let mut norm = vec![1.0; lag_limit + 1];
    let mut running = 0.0;
    for lag in 1..=lag_limit {
        running += diff[lag];
        norm[lag] = if running > 0.0 { diff[lag] * lag as f64 / running } else { 1.0 };
    }
    let mut lag = (min_lag..=lag_limit).find(|&l| norm[l] < threshold)?;
    while lag < lag_limit && norm[lag + 1] < norm[lag] {
        lag += 1;
    }
    let score = norm[lag];
    let period = if lag > 1 && lag < lag_limit {
        let (a, b, c) = (diff[lag - 1], diff[lag], diff[lag + 1]);
        let denom = a - 2.0 * b + c;
        if denom > 0.0 {
            lag as f64 + 0.5 * (a - c) / denom
        } else {
            lag as f64
        }
    } else {
        lag as f64
    };
    Some((period, score))
}

/// Pitch difference in cents.
pub fn cents(hz: f64, reference: f64) -> f64 {
    1200.0 * (hz / reference).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const SR: u32 = 16_000;

    fn buffer(f: impl Fn(f64) -> f64, secs: f64) -> AudioBuffer {
        let n = (secs * SR as f64) as usize;
        AudioBuffer::mono((0..n).map(|i| f(i as f64 / SR as f64) as f32).collect(), SR).unwrap()
    }

    #[test]
    fn pure_tone() {
        let c = estimate_f0(&buffer(|t| 0.5 * (2.0 * PI * 220.0 * t).sin(), 1.0), &F0Config::default()).unwrap();
        let voiced: Vec<f64> = c.voiced().map(|(_, hz)| hz).collect();
        assert!(voiced.len() > 90, "{} voiced frames", voiced.len());
        for hz in voiced {
            assert!((hz - 220.0).abs() <= 1.0, "{hz}");
        }
    }

    #[test]
    fn sawtooth() {
        let saw = |t: f64| 0.4 * (2.0 * (t * 100.0).fract() - 1.0);
        let c = estimate_f0(&buffer(saw, 1.0), &F0Config::default()).unwrap();
        let voiced: Vec<f64> = c.voiced().map(|(_, hz)| hz).collect();
        assert!(voiced.len() > 90);
        for hz in voiced {
            assert!((hz - 100.0).abs() <= 1.0, "{hz}");
        }
    }

    #[test]
    fn silence_is_unvoiced() {
        let c = estimate_f0(&buffer(|_| 0.0, 1.0), &F0Config::default()).unwrap();
        assert!(!c.frames.is_empty());
        assert!(c.frames.iter().all(|f| f.f0.is_none()));
    }

    #[test]
    fn too_short() {
        let a = AudioBuffer::mono(vec![0.1; 100], SR).unwrap();
        assert!(matches!(estimate_f0(&a, &F0Config::default()), Err(Error::Prosody(_))));
    }

    #[test]
    fn noise_is_mostly_unvoiced() {
        let mut state = 0x2545_f491_u32;
        let mut noise = || {
            state ^= state << 13;
            state ^= state >> 17;
            state ^= state << 5;
            state as f64 / u32::MAX as f64 - 0.5
        };
        let samples: Vec<f32> = (0..16_000).map(|_| (0.5 * noise()) as f32).collect();
        let c = estimate_f0(&AudioBuffer::mono(samples, SR).unwrap(), &F0Config::default()).unwrap();
        let voiced = c.frames.iter().filter(|f| f.f0.is_some()).count();
        assert!(voiced * 10 < c.frames.len(), "{voiced} of {} voiced", c.frames.len());
    }

    #[test]
    fn cents_math() {
        assert!((cents(440.0, 220.0) - 1200.0).abs() < 1e-9);
        assert_eq!(cents(220.0, 220.0), 0.0);
    }
}
