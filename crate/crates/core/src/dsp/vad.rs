use super::clip::AudioClip;
use crate::{Error, Result};

/// Noise floor estimates are capped this far (in dB) below the loudest frame,
/// so a clip made entirely of speech still has frames above threshold.
const FLOOR_CAP_DB: f64 = 30.0;

/// And never further than this below it, so stretches of digital silence
/// do not drag the floor to zero.
const FLOOR_MIN_DB: f64 = 60.0;

/// Shortest utterance kept, in seconds.
const MIN_SEGMENT_SECS: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadParams {
    pub frame_ms: f64,
    pub energy_ratio: f64,
    pub hangover_frames: usize,
}

impl Default for VadParams {
    fn default() -> Self {
        Self {
            frame_ms: 30.0,
            energy_ratio: 2.0,
            hangover_frames: 8,
        }
    }
}

/// Energy-based utterance segmentation.
///
/// A frame is speech when its mean-square energy exceeds `energy_ratio` times
/// the noise floor (the 10th-percentile frame energy, clamped to between 30
/// and 60 dB below the loudest frame). Speech runs separated by fewer than
/// `hangover_frames` non-speech frames are merged; segments shorter than
/// 300 ms are dropped.
pub fn vad_segment(clip: &AudioClip, params: &VadParams) -> Result<Vec<AudioClip>> {
    vad_boundaries(clip, params)?
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            AudioClip::new(
                clip.samples[a..b].to_vec(),
                clip.sample_rate,
                format!("{}-u{i:04}", clip.id),
            )
        })
        .collect()
}

/// Sample ranges `[start, end)` of the utterances `vad_segment` extracts.
pub fn vad_boundaries(clip: &AudioClip, params: &VadParams) -> Result<Vec<(usize, usize)>> {
    let frame_len = (params.frame_ms * f64::from(clip.sample_rate) / 1000.0).round() as usize;
    if frame_len == 0 || clip.len() < frame_len {
        return Err(Error::InvalidArgument(format!(
            "clip {} has {} samples, shorter than one {} ms frame",
            clip.id,
            clip.len(),
            params.frame_ms
        )));
    }
    let energies: Vec<f64> = clip
        .samples
        .chunks(frame_len)
        .map(|f| f.iter().map(|&s| f64::from(s) * f64::from(s)).sum::<f64>() / f.len() as f64)
        .collect();
    let peak = energies.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(Vec::new());
    }
    let mut sorted = energies.clone();
    sorted.sort_by(f64::total_cmp);
    let p10 = sorted[(sorted.len() - 1) / 10];
    let floor = p10
        .min(peak * 10f64.powf(-FLOOR_CAP_DB / 10.0))
        .max(peak * 10f64.powf(-FLOOR_MIN_DB / 10.0));
    let threshold = params.energy_ratio * floor;
    let speech: Vec<bool> = energies.iter().map(|&e| e > threshold).collect();

    // (start_frame, end_frame_exclusive)
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < speech.len() {
        if speech[i] {
            let start = i;
            while i < speech.len() && speech[i] {
                i += 1;
            }
            match runs.last_mut() {
                Some(last) if start - last.1 < params.hangover_frames => last.1 = i,
                _ => runs.push((start, i)),
            }
        } else {
            i += 1;
        }
    }

    let min_len = (MIN_SEGMENT_SECS * f64::from(clip.sample_rate)).round() as usize;
    Ok(runs
        .into_iter()
        .map(|(start, end)| (start * frame_len, (end * frame_len).min(clip.len())))
        .filter(|(a, b)| b - a >= min_len)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::clip::{synth_tone, SAMPLE_RATE};
    use super::*;

    fn concat(parts: &[Vec<f32>]) -> AudioClip {
        AudioClip::new(parts.concat(), SAMPLE_RATE, "synthetic").unwrap()
    }

    fn silence(secs: f64) -> Vec<f32> {
        vec![0.0; (secs * SAMPLE_RATE as f64) as usize]
    }

    fn tone(secs: f64) -> Vec<f32> {
        synth_tone(440.0, secs, 0.5).unwrap().samples
    }

    #[test]
    fn single_tone_burst_bounds() {
        let clip = concat(&[silence(1.0), tone(1.0), silence(1.0)]);
        let segs = vad_boundaries(&clip, &VadParams::default()).unwrap();
        assert_eq!(segs.len(), 1);
        let frame = 1440.0;
        let (start, end) = (segs[0].0 as f64, segs[0].1 as f64);
        assert!((start - 48_000.0).abs() <= 2.0 * frame, "start {start}");
        assert!((end - 96_000.0).abs() <= 2.0 * frame, "end {end}");
    }

    #[test]
    fn silent_clip_yields_nothing() {
        let clip = concat(&[silence(3.0)]);
        assert!(vad_segment(&clip, &VadParams::default()).unwrap().is_empty());
    }

    #[test]
    fn long_gap_splits_short_gap_merges() {
        let clip = concat(&[tone(1.0), silence(5.0), tone(1.0)]);
        assert_eq!(vad_segment(&clip, &VadParams::default()).unwrap().len(), 2);
        let clip = concat(&[tone(1.0), silence(0.1), tone(1.0)]);
        assert_eq!(vad_segment(&clip, &VadParams::default()).unwrap().len(), 1);
    }

    #[test]
    fn short_bursts_are_dropped() {
        let clip = concat(&[silence(1.0), tone(0.2), silence(1.0)]);
        assert!(vad_segment(&clip, &VadParams::default()).unwrap().is_empty());
    }

    #[test]
    fn resegmenting_a_segment_is_idempotent() {
        let clip = concat(&[silence(0.7), tone(1.3), silence(0.9)]);
        let segs = vad_segment(&clip, &VadParams::default()).unwrap();
        let again = vad_segment(&segs[0], &VadParams::default()).unwrap();
        assert_eq!(again.len(), 1);
        assert!(again[0].len() as f64 >= 0.95 * segs[0].len() as f64);
    }

    #[test]
    fn clip_shorter_than_frame_is_rejected() {
        let clip = AudioClip::new(vec![0.1; 100], SAMPLE_RATE, "x").unwrap();
        assert!(vad_segment(&clip, &VadParams::default()).is_err());
    }
}
