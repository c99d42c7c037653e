//! Prosodic edits on the final syllable of the statement.
//!
//! The manipulation lengthens the last statement word, flattens its pitch and
//! raises its level: the cues a speaker uses to signal that they are not done
//! yet. Everything outside the edited span is left sample-identical, and the
//! words after it move by exactly the added duration.

mod f0;
mod psola;
mod wsola;

use serde::{Deserialize, Serialize};

pub use f0::{cents, estimate_f0, F0Config, F0Contour, F0Frame};

use crate::audio::{AlignedWord, Alignment, AudioBuffer};
use crate::error::{Error, Result};

/// Slack allowed between a span end and the end of the audio, in seconds.
const SPAN_TOLERANCE: f64 = 0.05;

/// A time range in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: f64,
    pub end: f64,
}

impl TimeSpan {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SampleSpan {
    pub start: usize,
    pub end: usize,
}

impl SampleSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    fn resolve(audio: &AudioBuffer, span: TimeSpan) -> Result<Self> {
        if !(span.start.is_finite() && span.end.is_finite() && span.start >= 0.0 && span.end > span.start) {
            return Err(Error::Prosody(format!("invalid span {:.3}..{:.3} s", span.start, span.end)));
        }
        if span.end > audio.duration() + SPAN_TOLERANCE {
            return Err(Error::Prosody(format!(
                "span ends at {:.3} s but the audio lasts {:.3} s",
                span.end,
                audio.duration()
            )));
        }
        let end = audio.sample_at(span.end).min(audio.frames());
        let start = audio.sample_at(span.start).min(end);
        if start == end {
            return Err(Error::Prosody(format!("span {:.3}..{:.3} s holds no samples", span.start, span.end)));
        }
        Ok(Self { start, end })
    }
}

/// Catmull-Rom interpolation, zero outside the signal.
pub(crate) fn read_cubic(x: &[f64], pos: f64) -> f64 {
    let i = pos.floor();
    let t = pos - i;
    let i = i as isize;
    let get = |k: isize| if k < 0 { 0.0 } else { x.get(k as usize).copied().unwrap_or(0.0) };
    let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
    p1 + 0.5
        * t
        * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PitchTarget {
    /// Mean voiced F0 inside the span.
    #[default]
    SpanMean,
    FixedHz(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManipulationParams {
    pub gain_db: f64,
    pub stretch_factor: f64,
    pub pitch_target: PitchTarget,
    pub f0: F0Config,
}

impl Default for ManipulationParams {
    fn default() -> Self {
        Self {
            gain_db: 3.0,
            stretch_factor: 1.5,
            pitch_target: PitchTarget::SpanMean,
            f0: F0Config::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlattenOutcome {
    pub audio: AudioBuffer,
    /// The pitch the span was flattened to, `None` if it had no voiced frames.
    pub target_hz: Option<f64>,
    pub voiced_frames: usize,
    pub warning: Option<String>,
}

fn mono_f64(audio: &AudioBuffer, what: &str) -> Result<Vec<f64>> {
    audio.require_mono(what)?;
    Ok(audio.samples().iter().map(|&s| s as f64).collect())
}

/// Replace the pitch inside `span` by a constant target.
///
/// A span without voiced frames is returned unchanged with a warning.
pub fn flatten_pitch(audio: &AudioBuffer, span: TimeSpan, target: PitchTarget, f0: &F0Config) -> Result<FlattenOutcome> {
    let x = mono_f64(audio, "pitch flattening")?;
    let samples = SampleSpan::resolve(audio, span)?;
    let sr = audio.sample_rate() as f64;
    let flat = psola::flatten(&x, sr, samples, target, f0)?;
    let warning = flat
        .target_hz
        .is_none()
        .then(|| format!("no voiced frames in {:.3}..{:.3} s, pitch left unchanged", span.start, span.end));
    let audio = if flat.target_hz.is_some() {
        let mut out = audio.samples().to_vec();
        for (o, &v) in out[samples.start..samples.end].iter_mut().zip(&flat.samples[samples.start..samples.end]) {
            *o = v as f32;
        }
        AudioBuffer::mono(out, audio.sample_rate())?
    } else {
        audio.clone()
    };
    Ok(FlattenOutcome { audio, target_hz: flat.target_hz, voiced_frames: flat.voiced_frames, warning })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StretchOutcome {
    pub audio: AudioBuffer,
    /// Where the stretched span lies in the output.
    pub span: TimeSpan,
    /// Seconds added to the audio.
    pub delta: f64,
}

/// Lengthen `span` by `factor` without changing its pitch.
pub fn stretch(audio: &AudioBuffer, span: TimeSpan, factor: f64) -> Result<StretchOutcome> {
    if !(factor.is_finite() && factor >= 1.0) {
        return Err(Error::Prosody(format!("stretch factor must be at least 1, got {factor}")));
    }
    let x = mono_f64(audio, "time stretching")?;
    let samples = SampleSpan::resolve(audio, span)?;
    let sr = audio.sample_rate() as f64;
    let out_len = (samples.len() as f64 * factor).round() as usize;
    let start = samples.start as f64 / sr;
    if out_len == samples.len() {
        return Ok(StretchOutcome {
            audio: audio.clone(),
            span: TimeSpan::new(start, samples.end as f64 / sr),
            delta: 0.0,
        });
    }
    let max_period = sr / F0Config::default().min_hz;
    let body = wsola::stretch_span(&x, sr, samples, out_len, max_period);
    let src = audio.samples();
    let mut out = Vec::with_capacity(src.len() + out_len - samples.len());
    out.extend_from_slice(&src[..samples.start]);
    out.extend(body.iter().map(|&v| v as f32));
    out.extend_from_slice(&src[samples.end..]);
    Ok(StretchOutcome {
        audio: AudioBuffer::mono(out, audio.sample_rate())?,
        span: TimeSpan::new(start, start + out_len as f64 / sr),
        delta: (out_len - samples.len()) as f64 / sr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainOutcome {
    pub audio: AudioBuffer,
    /// Samples that had to be clamped to full scale.
    pub clipped: usize,
}

/// Scale `span` by `db` decibels, clamping to `[-1, 1]`.
pub fn apply_gain(audio: &AudioBuffer, span: TimeSpan, db: f64) -> Result<GainOutcome> {
    audio.require_mono("gain")?;
    if !db.is_finite() {
        return Err(Error::Prosody(format!("gain must be finite, got {db}")));
    }
    let samples = SampleSpan::resolve(audio, span)?;
    if db == 0.0 {
        return Ok(GainOutcome { audio: audio.clone(), clipped: 0 });
    }
    let g = 10f64.powf(db / 20.0);
    let mut out = audio.samples().to_vec();
    let mut clipped = 0;
    for s in &mut out[samples.start..samples.end] {
        let v = *s as f64 * g;
        if v.abs() > 1.0 {
            clipped += 1;
        }
        *s = v.clamp(-1.0, 1.0) as f32;
    }
    Ok(GainOutcome { audio: AudioBuffer::mono(out, audio.sample_rate())?, clipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationReport {
    pub word: String,
    pub original_span: TimeSpan,
    pub span: TimeSpan,
    pub target_hz: Option<f64>,
    pub clipped: usize,
    pub warnings: Vec<String>,
}

/// Stretch, flatten and amplify the last statement word.
///
/// The word's offset and every later word move by the added duration.
pub fn manipulate_final_syllable(
    audio: &AudioBuffer,
    alignment: &Alignment,
    params: &ManipulationParams,
) -> Result<(AudioBuffer, Alignment, ManipulationReport)> {
    let index = alignment.statement_words().len() - 1;
    let word = alignment.last_statement_word().clone();
    let original_span = TimeSpan::new(word.on, word.off);

    let stretched = stretch(audio, original_span, params.stretch_factor)?;
    let flat = flatten_pitch(&stretched.audio, stretched.span, params.pitch_target, &params.f0)?;
    let gained = apply_gain(&flat.audio, stretched.span, params.gain_db)?;

    let mut warnings: Vec<String> = flat.warning.into_iter().collect();
    if gained.clipped > 0 {
        warnings.push(format!("{} samples clipped by the gain", gained.clipped));
    }
    let moved = AlignedWord { off: word.off + stretched.delta, ..word.clone() };
    let shifted = alignment.shift_from(index + 1, stretched.delta).replace_word(index, moved);
    let report = ManipulationReport {
        word: word.w,
        original_span,
        span: TimeSpan::new(word.on, word.off + stretched.delta),
        target_hz: flat.target_hz,
        clipped: gained.clipped,
        warnings,
    };
    Ok((gained.audio, shifted, report))
}
