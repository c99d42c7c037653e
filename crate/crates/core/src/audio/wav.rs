use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use rubato::{FftFixedIn, Resampler};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Read a WAV file, converting to `target_rate` when it differs.
pub fn read_wav(path: impl AsRef<Path>, target_rate: Option<u32>) -> Result<AudioBuffer> {
    let mut reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let samples: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<Result<_, _>>()?
        }
    };
    let buffer = AudioBuffer::new(samples, spec.sample_rate, spec.channels)?;
    match target_rate {
        Some(rate) if rate != buffer.sample_rate() => resample(&buffer, rate),
        _ => Ok(buffer),
    }
}

/// Write 16-bit PCM.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let spec = WavSpec {
        channels: audio.channels(),
        sample_rate: audio.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path.as_ref(), spec)?;
    for &s in audio.samples() {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn resample(audio: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == audio.sample_rate() {
        return Ok(audio.clone());
    }
    let channels = audio.channels() as usize;
    let resample_err = |e: &dyn std::fmt::Display| Error::Audio(format!("resampling failed: {e}"));
    let mut resampler = FftFixedIn::<f64>::new(
        audio.sample_rate() as usize,
        target_rate as usize,
        1024,
        2,
        channels,
    )
    .map_err(|e| resample_err(&e))?;
    let input: Vec<Vec<f64>> = (0..channels)
        .map(|c| audio.channel(c).into_iter().map(f64::from).collect())
        .collect();
    let expected = (audio.frames() as f64 * target_rate as f64 / audio.sample_rate() as f64).round() as usize;
    let delay = resampler.output_delay();
    let mut output: Vec<Vec<f64>> = vec![Vec::with_capacity(expected + delay); channels];
    let mut pos = 0;
    while output[0].len() < expected + delay {
        let need = resampler.input_frames_next();
        let chunk = if pos + need <= input[0].len() {
            let slices: Vec<&[f64]> = input.iter().map(|c| &c[pos..pos + need]).collect();
            resampler.process(&slices, None)
        } else if pos < input[0].len() {
            let rest: Vec<&[f64]> = input.iter().map(|c| &c[pos..]).collect();
            resampler.process_partial(Some(&rest), None)
        } else {
            resampler.process_partial::<&[f64]>(None, None)
        }
        .map_err(|e| resample_err(&e))?;
        pos += need;
        for (out, part) in output.iter_mut().zip(chunk) {
            out.extend(part);
        }
    }
    let mut samples = Vec::with_capacity(expected * channels);
    for i in delay..delay + expected {
        for ch in &output {
            samples.push(ch[i] as f32);
        }
    }
    AudioBuffer::new(samples, target_rate, audio.channels())
}
