//! Deterministic binaural renderer: linear distance roll-off, cosine head
//! shadow, fractional-sample interaural delay and soft saturation.

use serde::{Deserialize, Serialize};

use super::clip::SAMPLE_RATE;
use crate::{Error, Result};

/// Samples of per-source history the renderer may reach back into for the
/// interaural delay. Must exceed the largest delay in samples plus one.
pub const ITD_HISTORY: usize = 64;

/// Exponent of the directional microphone pattern `max(0, cos α)^p`.
pub const DIRECTIONAL_EXPONENT: i32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinauralGeometry {
    pub head_width: f64,
    pub speed_of_sound: f64,
    pub max_audible_distance: f64,
}

impl Default for BinauralGeometry {
    fn default() -> Self {
        Self {
            head_width: 0.2,
            speed_of_sound: 343.0,
            max_audible_distance: 15.0,
        }
    }
}

impl BinauralGeometry {
    /// Checks the invariants; `room_diagonal` is the longest distance any
    /// source can be from the listener.
    pub fn validate(&self, room_diagonal: f64) -> Result<()> {
        if !(self.head_width > 0.0) || !(self.speed_of_sound > 0.0) {
            return Err(Error::Config(
                "head width and speed of sound must be positive".into(),
            ));
        }
        let max_delay = self.head_width / self.speed_of_sound * f64::from(SAMPLE_RATE);
        if max_delay + 2.0 > ITD_HISTORY as f64 {
            return Err(Error::Config(format!(
                "head width {} m gives a {max_delay:.1}-sample interaural delay, beyond the {ITD_HISTORY}-sample history",
                self.head_width
            )));
        }
        if !(self.max_audible_distance > room_diagonal) {
            return Err(Error::Config(format!(
                "max audible distance {} m must exceed the room diagonal {room_diagonal:.3} m",
                self.max_audible_distance
            )));
        }
        Ok(())
    }
}

/// Listener pose. The head faces along azimuth/elevation; azimuth is
/// measured from +y toward +x, elevation upward from the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Listener {
    pub position: [f64; 3],
    pub azimuth: f64,
    pub elevation: f64,
    /// `Some(p)` applies the directional pattern `max(0, cos α)^p` to both ears.
    pub directional_exponent: Option<i32>,
}

impl Listener {
    /// Unit vectors (right, forward, up) of the listener frame.
    pub fn axes(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (st, ct) = self.azimuth.sin_cos();
        let (sp, cp) = self.elevation.sin_cos();
        let right = [ct, -st, 0.0];
        let forward = [st * cp, ct * cp, sp];
        let up = [-st * sp, -ct * sp, cp];
        (right, forward, up)
    }

    /// Source position expressed as (right, forward, up) offsets from the head centre.
    pub fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [
            p[0] - self.position[0],
            p[1] - self.position[1],
            p[2] - self.position[2],
        ];
        let (r, f, u) = self.axes();
        let dot = |a: [f64; 3]| a[0] * d[0] + a[1] * d[1] + a[2] * d[2];
        [dot(r), dot(f), dot(u)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// tanh saturation of the summed mix.
    pub saturate: bool,
    /// Cosine head-shadow level cue; disabling it isolates the timing cue.
    pub head_shadow: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            saturate: true,
            head_shadow: true,
        }
    }
}

/// One source's contribution to a frame.
///
/// `signal` holds `ITD_HISTORY` samples of history followed by the `n`
/// samples of the current frame.
#[derive(Debug, Clone, Copy)]
pub struct SourceFeed<'a> {
    pub position: [f64; 3],
    pub signal: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoFrame {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl StereoFrame {
    pub fn silent(n: usize) -> Self {
        Self {
            left: vec![0.0; n],
            right: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// Left channel followed by right channel.
    pub fn to_observation(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.len());
        v.extend_from_slice(&self.left);
        v.extend_from_slice(&self.right);
        v
    }
}

/// Per-ear gains and delays of one source for the current pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarResponse {
    pub gain_left: f64,
    pub gain_right: f64,
    /// Delays in samples; at most one of them is non-zero.
    pub delay_left: f64,
    pub delay_right: f64,
}

pub fn ear_response(
    listener: &Listener,
    geometry: &BinauralGeometry,
    options: &RenderOptions,
    source: [f64; 3],
) -> EarResponse {
    let [x, y, z] = listener.to_local(source);
    let half = 0.5 * geometry.head_width;
    let rolloff = |dx: f64| {
        let d = (dx * dx + y * y + z * z).sqrt();
        (1.0 - d / geometry.max_audible_distance).clamp(0.0, 1.0)
    };
    let g_left = rolloff(x + half);
    let g_right = rolloff(x - half);

    let horizontal = x.hypot(y);
    let sin_az = if horizontal > 0.0 { x / horizontal } else { 0.0 };
    let (h_left, h_right) = if options.head_shadow {
        (0.5 * (1.0 - sin_az), 0.5 * (1.0 + sin_az))
    } else {
        (1.0, 1.0)
    };

    let directional = match listener.directional_exponent {
        Some(p) => {
            let dist = (x * x + y * y + z * z).sqrt();
            let cos_alpha = if dist > 0.0 { y / dist } else { 1.0 };
            cos_alpha.max(0.0).powi(p)
        }
        None => 1.0,
    };

    let itd = geometry.head_width / geometry.speed_of_sound * sin_az * f64::from(SAMPLE_RATE);
    EarResponse {
        gain_left: g_left * h_left * directional,
        gain_right: g_right * h_right * directional,
        delay_left: itd.max(0.0),
        delay_right: (-itd).max(0.0),
    }
}

/// Adds `gain * signal(t - delay)` for the current frame into `out`.
fn accumulate_delayed(out: &mut [f64], signal: &[f64], gain: f64, delay: f64) {
    if gain == 0.0 {
        return;
    }
    let whole = delay.floor();
    let frac = delay - whole;
    let whole = whole as usize;
    let base = ITD_HISTORY - whole;
    if frac == 0.0 {
        for (o, s) in out.iter_mut().zip(&signal[base..]) {
            *o += gain * s;
        }
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            let a = signal[base + i];
            let b = signal[base + i - 1];
            *o += gain * (a + (b - a) * frac);
        }
    }
}

/// Renders one stereo frame of `n` samples from all sources.
pub fn render_binaural_frame(
    listener: &Listener,
    geometry: &BinauralGeometry,
    options: &RenderOptions,
    sources: &[SourceFeed<'_>],
    n: usize,
) -> Result<StereoFrame> {
    let mut frame = StereoFrame::silent(n);
    for src in sources {
        if src.signal.len() != ITD_HISTORY + n {
            return Err(Error::Shape(format!(
                "source feed has {} samples, expected {}",
                src.signal.len(),
                ITD_HISTORY + n
            )));
        }
        let resp = ear_response(listener, geometry, options, src.position);
        accumulate_delayed(&mut frame.left, src.signal, resp.gain_left, resp.delay_left);
        accumulate_delayed(&mut frame.right, src.signal, resp.gain_right, resp.delay_right);
    }
    if options.saturate {
        for v in frame.left.iter_mut().chain(frame.right.iter_mut()) {
            *v = v.tanh();
        }
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const N: usize = 1024;

    fn listener_at(x: f64, y: f64) -> Listener {
        Listener {
            position: [x, y, 1.5],
            azimuth: 0.0,
            elevation: 0.0,
            directional_exponent: None,
        }
    }

    fn noise(seed: u64, len: usize) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    fn rms(v: &[f64]) -> f64 {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn source_ahead_is_symmetric() {
        let sig = noise(1, ITD_HISTORY + N);
        let l = listener_at(3.0, 1.0);
        let feed = SourceFeed {
            position: [3.0, 4.0, 1.5],
            signal: &sig,
        };
        let f = render_binaural_frame(&l, &BinauralGeometry::default(), &Default::default(), &[feed], N)
            .unwrap();
        for (a, b) in f.left.iter().zip(&f.right) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(rms(&f.left) > 0.0);
    }

    #[test]
    fn rolloff_endpoint_is_silent() {
        let geo = BinauralGeometry::default();
        let sig = noise(2, ITD_HISTORY + N);
        let l = listener_at(0.0, 0.0);
        let feed = SourceFeed {
            position: [0.0, geo.max_audible_distance, 1.5],
            signal: &sig,
        };
        let f = render_binaural_frame(&l, &geo, &Default::default(), &[feed], N).unwrap();
        assert!(f.left.iter().chain(&f.right).all(|&v| v == 0.0));
    }

    #[test]
    fn directional_pattern_blocks_rear_sources() {
        let mut l = listener_at(5.0, 5.0);
        l.directional_exponent = Some(DIRECTIONAL_EXPONENT);
        let geo = BinauralGeometry::default();
        let opts = RenderOptions::default();
        let behind = ear_response(&l, &geo, &opts, [5.0, 2.0, 1.5]);
        assert_eq!(behind.gain_left, 0.0);
        assert_eq!(behind.gain_right, 0.0);
        let ahead = ear_response(&l, &geo, &opts, [5.0, 8.0, 1.5]);
        let plain = ear_response(&listener_at(5.0, 5.0), &geo, &opts, [5.0, 8.0, 1.5]);
        assert!((ahead.gain_left - plain.gain_left).abs() < 1e-15);
        // 60 degrees off-axis: cos^8 = 1/256
        let off = ear_response(&l, &geo, &opts, [5.0 + 3f64.sqrt(), 6.0, 1.5]);
        let off_plain =
            ear_response(&listener_at(5.0, 5.0), &geo, &opts, [5.0 + 3f64.sqrt(), 6.0, 1.5]);
        assert!((off.gain_right / off_plain.gain_right - 1.0 / 256.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_listener_hears_source_on_the_right() {
        let mut l = listener_at(5.0, 5.0);
        l.azimuth = -std::f64::consts::FRAC_PI_2; // facing -x; +y is to the right
        let r = ear_response(&l, &BinauralGeometry::default(), &Default::default(), [5.0, 7.0, 1.5]);
        assert!(r.gain_right > r.gain_left);
        assert!(r.delay_left > 27.0 && r.delay_right == 0.0);
    }

    #[test]
    fn wrong_feed_length_is_rejected() {
        let sig = vec![0.0; N];
        let feed = SourceFeed {
            position: [1.0, 1.0, 1.0],
            signal: &sig,
        };
        assert!(render_binaural_frame(
            &listener_at(0.0, 0.0),
            &BinauralGeometry::default(),
            &Default::default(),
            &[feed],
            N
        )
        .is_err());
    }

    #[test]
    fn geometry_validation() {
        let g = BinauralGeometry::default();
        g.validate(14.0).unwrap();
        assert!(g.validate(15.0).is_err());
        let wide = BinauralGeometry {
            head_width: 1.0,
            ..g
        };
        assert!(wide.validate(1.0).is_err());
    }

    proptest! {
        #[test]
        fn moving_away_never_gets_louder(
            sx in 1.0f64..9.0, sy in 1.0f64..9.0, dir in 0.0f64..std::f64::consts::TAU,
            r in 0.3f64..4.0, dr in 0.01f64..3.0,
        ) {
            let geo = BinauralGeometry::default();
            let sig = noise(3, ITD_HISTORY + N);
            let feed = SourceFeed { position: [sx, sy, 1.5], signal: &sig };
            let render = |dist: f64| {
                let l = listener_at(sx - dist * dir.sin(), sy - dist * dir.cos());
                render_binaural_frame(&l, &geo, &Default::default(), &[feed], N).unwrap()
            };
            let near = render(r);
            let far = render(r + dr);
            prop_assert!(rms(&far.left) <= rms(&near.left) + 1e-12);
            prop_assert!(rms(&far.right) <= rms(&near.right) + 1e-12);
        }

        #[test]
        fn mirrored_scene_swaps_channels(
            // dyadic offsets keep the mirror image exactly representable
            dx in -64i32..64, dy in 1i32..64, dz in -8i32..8, dx2 in -64i32..64, dy2 in -64i32..64,
        ) {
            let geo = BinauralGeometry::default();
            let l = listener_at(4.0, 2.0);
            let s1 = noise(4, ITD_HISTORY + N);
            let s2 = noise(5, ITD_HISTORY + N);
            let p1 = [dx as f64 / 16.0, dy as f64 / 16.0, dz as f64 / 16.0];
            let p2 = [dx2 as f64 / 16.0, dy2 as f64 / 16.0, 0.0];
            let place = |p: [f64; 3], m: f64| [4.0 + m * p[0], 2.0 + p[1], 1.5 + p[2]];
            let scene = |m: f64| {
                let feeds = [
                    SourceFeed { position: place(p1, m), signal: &s1 },
                    SourceFeed { position: place(p2, m), signal: &s2 },
                ];
                render_binaural_frame(&l, &geo, &Default::default(), &feeds, N).unwrap()
            };
            let a = scene(1.0);
            let b = scene(-1.0);
            prop_assert_eq!(&a.left, &b.right);
            prop_assert_eq!(&a.right, &b.left);
        }

        #[test]
        fn superposition_without_saturation(
            x1 in 0.0f64..10.0, y1 in 0.0f64..10.0, x2 in 0.0f64..10.0, y2 in 0.0f64..10.0,
        ) {
            let geo = BinauralGeometry::default();
            let opts = RenderOptions { saturate: false, head_shadow: true };
            let l = listener_at(5.0, 5.0);
            let s1 = noise(6, ITD_HISTORY + N);
            let s2 = noise(7, ITD_HISTORY + N);
            let f1 = SourceFeed { position: [x1, y1, 1.7], signal: &s1 };
            let f2 = SourceFeed { position: [x2, y2, 1.8], signal: &s2 };
            let both = render_binaural_frame(&l, &geo, &opts, &[f1, f2], N).unwrap();
            let a = render_binaural_frame(&l, &geo, &opts, &[f1], N).unwrap();
            let b = render_binaural_frame(&l, &geo, &opts, &[f2], N).unwrap();
            for i in 0..N {
                prop_assert!((both.left[i] - a.left[i] - b.left[i]).abs() < 1e-12);
                prop_assert!((both.right[i] - a.right[i] - b.right[i]).abs() < 1e-12);
            }
        }
    }
}
