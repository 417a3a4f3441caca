//! Audio ingestion, utterance segmentation, test-time perturbations and the
//! binaural rendering chain.

mod binaural;
mod clip;
mod pitch;
mod reverb;
mod vad;
mod wav;

pub use binaural::{
    ear_response, render_binaural_frame, BinauralGeometry, EarResponse, Listener, RenderOptions, SourceFeed, StereoFrame,
    DIRECTIONAL_EXPONENT, ITD_HISTORY,
};
pub use clip::{
    peak_normalize, resample_linear, synth_tone, AudioClip, UtterancePool, PEAK_LEVEL,
    SAMPLE_RATE,
};
pub use pitch::pitch_shift;
pub use reverb::{reverb_apply, ReverbKind, ReverbPreset, ReverbState};
pub use vad::{vad_boundaries, vad_segment, VadParams};
pub use wav::{load_wav, write_wav};
