use std::path::Path;

use super::LoadError;

/// Mono samples scaled to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, LoadError> {
        if samples.is_empty() {
            return Err(LoadError::EmptyAudio);
        }
        if sample_rate_hz == 0 {
            return Err(LoadError::UnsupportedAudio("sample rate is zero".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, LoadError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(LoadError::NonMonoAudio {
            channels: spec.channels,
        });
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(LoadError::UnsupportedAudio(format!(
            "{:?} {}-bit samples, expected 16-bit PCM",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let declared = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            // the header was readable, so a failing data read means a short file
            hound::Error::IoError(_) => LoadError::TruncatedAudio,
            other => wav_error(path, other),
        })?;
    if samples.len() != declared {
        return Err(LoadError::TruncatedAudio);
    }
    AudioBuffer::new(samples, spec.sample_rate)
}

fn wav_error(path: &Path, err: hound::Error) -> LoadError {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => LoadError::TruncatedAudio,
        hound::Error::IoError(source) => LoadError::Io {
            path: path.to_path_buf(),
            source,
        },
        hound::Error::Unsupported => LoadError::UnsupportedAudio("unsupported WAV layout".into()),
        other => LoadError::UnsupportedAudio(other.to_string()),
    }
}

/// Writes 16-bit mono PCM, clipping samples to [-1, 1).
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate_hz: u32) -> Result<(), LoadError> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}
