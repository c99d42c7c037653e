//! Audio buffers, WAV I/O, alignments and silence normalization.

mod alignment;
mod silence;
mod wav;

pub use alignment::{textgrid_to_alignment, AlignedWord, Alignment};
pub use silence::{normalize_silences, SilenceConfig, SilenceFill};
pub use wav::{read_wav, resample, write_wav};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Interleaved samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
    channels: u16,
}

impl AudioBuffer {
    /// Values outside [-1, 1] are clamped; NaN is rejected.
    pub fn new(mut samples: Vec<f32>, sample_rate: u32, channels: u16) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Audio("buffer is empty".into()));
        }
        if !(channels == 1 || channels == 2) {
            return Err(Error::Audio(format!("{channels} channels; only mono and stereo are supported")));
        }
        if !samples.len().is_multiple_of(channels as usize) {
            return Err(Error::Audio("sample count is not a multiple of the channel count".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate is zero".into()));
        }
        for s in &mut samples {
            if s.is_nan() {
                return Err(Error::Audio("buffer contains NaN".into()));
            }
            *s = s.clamp(-1.0, 1.0);
        }
        Ok(Self {
            samples,
            sample_rate,
            channels,
        })
    }

    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        Self::new(samples, sample_rate, 1)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    pub fn is_mono(&self) -> bool {
        self.channels == 1
    }

    /// Samples per channel.
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, index: usize) -> Vec<f32> {
        self.samples
            .iter()
            .skip(index)
            .step_by(self.channels as usize)
            .copied()
            .collect()
    }

    pub(crate) fn require_mono(&self, what: &str) -> Result<()> {
        if self.is_mono() {
            Ok(())
        } else {
            Err(Error::Audio(format!("{what} expects mono audio, got {} channels", self.channels)))
        }
    }

    /// Sample index nearest to `t` seconds.
    pub fn sample_at(&self, t: f64) -> usize {
        (t * self.sample_rate as f64).round().max(0.0) as usize
    }
}

/// Two-channel model input: the agent on channel 0, silence on channel 1.
pub fn assemble_stereo(agent: &AudioBuffer) -> Result<AudioBuffer> {
    agent.require_mono("stereo assembly")?;
    let samples = agent.samples().iter().flat_map(|&s| [s, 0.0]).collect();
    AudioBuffer::new(samples, agent.sample_rate(), 2)
}

pub fn rms(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / samples.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereo_assembly() {
        let tone: Vec<f32> = (0..16_000).map(|i| (i as f32 * 0.05).sin() * 0.8).collect();
        let mono = AudioBuffer::mono(tone.clone(), 16_000).unwrap();
        let stereo = assemble_stereo(&mono).unwrap();
        assert_eq!(stereo.channels(), 2);
        assert_eq!(stereo.frames(), 16_000);
        assert_eq!(stereo.channel(0), tone);
        assert_eq!(rms(&stereo.channel(1)), 0.0);
        let peak = |v: &[f32]| v.iter().fold(0f32, |m, s| m.max(s.abs()));
        assert_eq!(peak(&stereo.channel(0)).to_bits(), peak(&tone).to_bits());
        assert!(assemble_stereo(&stereo).is_err());
    }

    #[test]
    fn buffer_validation() {
        assert!(AudioBuffer::mono(vec![], 16_000).is_err());
        assert!(AudioBuffer::new(vec![0.0; 3], 16_000, 2).is_err());
        assert!(AudioBuffer::mono(vec![f32::NAN], 16_000).is_err());
        let b = AudioBuffer::mono(vec![1.5, -2.0, 0.25], 16_000).unwrap();
        assert_eq!(b.samples(), &[1.0, -1.0, 0.25]);
    }
}
