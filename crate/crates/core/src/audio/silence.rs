use serde::{Deserialize, Serialize};

use super::{Alignment, AudioBuffer};
use crate::error::{Error, Result};

/// How far the alignment may run past the end of the audio, in seconds.
const LENGTH_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SilenceFill {
    /// Replace the gap and tail with zeros.
    #[default]
    Digital,
    /// Keep the original gap audio, cut in the middle or padded with zeros
    /// in the middle to reach the target length.
    PreserveEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SilenceConfig {
    pub pause: f64,
    pub tail: f64,
    pub fill: SilenceFill,
}

impl Default for SilenceConfig {
    fn default() -> Self {
        Self {
            pause: 0.4,
            tail: 0.4,
            fill: SilenceFill::Digital,
        }
    }
}

fn fit(original: &[f32], target: usize, fill: SilenceFill, keep_start_only: bool) -> Vec<f32> {
    match fill {
        SilenceFill::Digital => vec![0.0; target],
        SilenceFill::PreserveEdges if keep_start_only => {
            let mut out: Vec<f32> = original.iter().copied().take(target).collect();
            out.resize(target, 0.0);
            out
        }
        SilenceFill::PreserveEdges => {
            if original.len() >= target {
                let head = target / 2;
                let tail = target - head;
                [&original[..head], &original[original.len() - tail..]].concat()
            } else {
                let head = original.len() / 2;
                let mut out = original[..head].to_vec();
                out.resize(target - (original.len() - head), 0.0);
                out.extend_from_slice(&original[head..]);
                out
            }
        }
    }
}

/// Set the statement–question gap and the post-turn tail to fixed lengths.
///
/// Speech before the gap and between the gap and the end of the question is
/// copied unchanged; anything after the question is replaced by the tail.
pub fn normalize_silences(
    audio: &AudioBuffer,
    alignment: &Alignment,
    cfg: &SilenceConfig,
) -> Result<(AudioBuffer, Alignment)> {
    audio.require_mono("silence normalization")?;
    if !(cfg.pause > 0.0 && cfg.tail >= 0.0) {
        return Err(Error::Audio("pause must be positive and tail non-negative".into()));
    }
    let markers = alignment.markers();
    if markers.question_end > audio.duration() + LENGTH_TOLERANCE {
        return Err(Error::Audio(format!(
            "alignment ends at {:.3} s but the audio lasts {:.3} s",
            markers.question_end,
            audio.duration()
        )));
    }
    let sr = audio.sample_rate() as f64;
    let samples = audio.samples();
    let len = samples.len();
    let stmt_end = audio.sample_at(markers.statement_end).min(len);
    let q_start = audio.sample_at(markers.question_start).min(len);
    let q_end = audio.sample_at(markers.question_end).min(len);
    let pause = (cfg.pause * sr).round() as usize;
    let tail = (cfg.tail * sr).round() as usize;

    let mut out = Vec::with_capacity(stmt_end + pause + (q_end - q_start) + tail);
    out.extend_from_slice(&samples[..stmt_end]);
    out.extend(fit(&samples[stmt_end..q_start], pause, cfg.fill, false));
    out.extend_from_slice(&samples[q_start..q_end]);
    out.extend(fit(&samples[q_end..], tail, cfg.fill, true));

    let delta = (stmt_end + pause) as f64 / sr - q_start as f64 / sr;
    let shifted = alignment.shift_from(alignment.statement_words().len(), delta);
    Ok((AudioBuffer::new(out, audio.sample_rate(), 1)?, shifted))
}
