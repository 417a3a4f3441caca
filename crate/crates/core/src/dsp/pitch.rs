use super::clip::{interpolate, AudioClip};
use crate::{Error, Result};

/// Resampling pitch shift: output sample `n` is the input linearly
/// interpolated at `n * factor`, so pitch and duration change together.
pub fn pitch_shift(clip: &AudioClip, factor: f64) -> Result<AudioClip> {
    if !(0.5..=2.0).contains(&factor) {
        return Err(Error::InvalidArgument(format!(
            "pitch factor {factor} outside [0.5, 2.0]"
        )));
    }
    let out_len = ((clip.len() as f64 / factor).round() as usize).max(1);
    let samples = (0..out_len)
        .map(|n| interpolate(&clip.samples, n as f64 * factor))
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate: clip.sample_rate,
        id: clip.id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::clip::synth_tone;
    use super::*;

    /// Frequency estimate from the number of upward zero crossings.
    fn zero_crossing_freq(samples: &[f32], rate: f64) -> f64 {
        let ups: Vec<usize> = samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
            .map(|(i, _)| i)
            .collect();
        let periods = (ups.len() - 1) as f64;
        periods * rate / (ups[ups.len() - 1] - ups[0]) as f64
    }

    #[test]
    fn unit_factor_is_identity() {
        let clip = synth_tone(440.0, 0.5, 0.7).unwrap();
        assert_eq!(pitch_shift(&clip, 1.0).unwrap(), clip);
    }

    #[test]
    fn shifted_tone_frequency() {
        let clip = synth_tone(440.0, 1.0, 0.5).unwrap();
        let out = pitch_shift(&clip, 1.08).unwrap();
        let f = zero_crossing_freq(&out.samples, 48_000.0);
        assert!((f - 475.2).abs() < 1.0, "measured {f}");
        assert!((zero_crossing_freq(&clip.samples, 48_000.0) - 440.0).abs() < 1.0);
    }

    #[test]
    fn shifted_length() {
        let clip = AudioClip::new(vec![0.1; 48_000], 48_000, "c").unwrap();
        assert_eq!(pitch_shift(&clip, 1.06).unwrap().len(), 45_283);
    }

    #[test]
    fn out_of_range_factor() {
        let clip = AudioClip::new(vec![0.1; 10], 48_000, "c").unwrap();
        assert!(pitch_shift(&clip, 0.4).is_err());
        assert!(pitch_shift(&clip, 2.1).is_err());
    }
}
