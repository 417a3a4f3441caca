use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::clip::{peak_normalize, resample_linear, AudioClip, PEAK_LEVEL, SAMPLE_RATE};
use crate::{Error, Result};

/// Reads a PCM WAV file (8/16/24/32-bit integer or 32-bit float, mono or
/// stereo), mixes it down to mono, resamples to 48 kHz and peak-normalizes.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = WavReader::new(BufReader::new(file))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if !(1..=2).contains(&channels) {
        return Err(Error::Format(format!(
            "{}: {channels} channels (mono or stereo expected)",
            path.display()
        )));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| (f64::from(v) * scale) as f32))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        }
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "{}: unsupported sample format {fmt:?} with {bits} bits",
                path.display()
            )))
        }
    };
    let mono: Vec<f32> = if channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|f| 0.5 * (f[0] + f[1]))
            .collect()
    } else {
        interleaved
    };
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if mono.is_empty() {
        return Err(Error::EmptyClip(id));
    }
    let mut samples = resample_linear(&mono, spec.sample_rate, SAMPLE_RATE);
    for s in samples.iter_mut() {
        *s = s.clamp(-1.0, 1.0);
    }
    peak_normalize(&mut samples, PEAK_LEVEL);
    AudioClip::new(samples, SAMPLE_RATE, id)
}

/// Writes a clip as 32-bit float mono WAV.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    };
    let mut writer = WavWriter::create(path, spec).map_err(to_err)?;
    for &s in &clip.samples {
        writer.write_sample(s).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_i16(path: &Path, rate: u32, channels: u16, samples: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn mono_48k_keeps_length() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let samples: Vec<i16> = (0..48_000).map(|i| ((i % 200) as i16 - 100) * 50).collect();
        write_i16(&p, 48_000, 1, &samples);
        let clip = load_wav(&p).unwrap();
        assert_eq!(clip.len(), 48_000);
        assert_eq!(clip.sample_rate, SAMPLE_RATE);
        assert_eq!(clip.id, "a");
    }

    #[test]
    fn mono_24k_is_upsampled() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.wav");
        let samples: Vec<i16> = (0..24_000).map(|i| ((i % 50) as i16) * 100).collect();
        write_i16(&p, 24_000, 1, &samples);
        assert_eq!(load_wav(&p).unwrap().len(), 48_000);
    }

    #[test]
    fn constant_input_normalizes_to_peak() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        write_i16(&p, 48_000, 1, &vec![8192i16; 100]);
        let clip = load_wav(&p).unwrap();
        assert!(clip.samples.iter().all(|&s| s == PEAK_LEVEL));
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.wav");
        write_i16(&p, 48_000, 2, &[16384, 0, 8192, 8192, 0, 0]);
        let clip = load_wav(&p).unwrap();
        assert_eq!(clip.len(), 3);
        assert_eq!(clip.samples[0], clip.samples[1]);
        assert_eq!(clip.samples[2], 0.0);
    }

    #[test]
    fn float_and_24bit_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let clip = AudioClip::new(vec![0.1, -0.5, 0.25], SAMPLE_RATE, "f").unwrap();
        write_wav(&p, &clip).unwrap();
        let back = load_wav(&p).unwrap();
        assert_eq!(back.samples[1], -PEAK_LEVEL);

        let p24 = dir.path().join("g.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 48_000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p24, spec).unwrap();
        for s in [1_000_000i32, -4_000_000, 0] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        let c = load_wav(&p24).unwrap();
        assert_eq!(c.samples[1], -PEAK_LEVEL);
        assert!((c.samples[0] - PEAK_LEVEL / 4.0).abs() < 1e-6);
    }

    #[test]
    fn malformed_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"RIFF\x00\x00\x00\x00WAVEjunkjunk").unwrap();
        assert!(matches!(load_wav(&p), Err(Error::Format(_))));

        let e = dir.path().join("empty.wav");
        write_i16(&e, 48_000, 1, &[]);
        assert!(matches!(load_wav(&e), Err(Error::EmptyClip(_))));

        assert!(matches!(load_wav(dir.path().join("missing.wav")), Err(Error::Io { .. })));
    }
}
