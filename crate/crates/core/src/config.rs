//! Run configuration: a line-oriented `key = value` file with `[section]`
//! headers. Every key has a default, so an empty file is a valid config.
//!
//! ```text
//! [environment]
//! kind = navigation
//! room_width = 6
//!
//! [run]
//! seed = 3
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dsp::{BinauralGeometry, ReverbKind};
use crate::env::{AudioSettings, EnvKind, LocalizationConfig, NavigationConfig, BUFFER_LENGTHS};
use crate::neural::{ConvLayerSpec, NetworkSpec, Variant};
use crate::ppo::PpoConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSection {
    pub kind: EnvKind,
    pub room_width: f64,
    pub room_depth: f64,
    /// Navigation speaker count, target included.
    pub nav_speakers: usize,
    /// Empty selects the first speaker of the dataset.
    pub target_speaker: String,
    pub nav_time_limit: Option<u64>,
    /// The localization room is separate: sources sit up to 5 m from a
    /// centred microphone, which a desk-sized navigation room cannot hold.
    pub loc_room_width: f64,
    pub loc_room_depth: f64,
    pub loc_speakers_min: usize,
    pub loc_speakers_max: usize,
    pub loc_time_limit: u64,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        let nav = NavigationConfig::default();
        let loc = LocalizationConfig::default();
        Self {
            kind: EnvKind::Navigation,
            room_width: nav.room.0,
            room_depth: nav.room.1,
            nav_speakers: nav.speakers,
            target_speaker: nav.target_speaker,
            nav_time_limit: nav.time_limit,
            loc_room_width: loc.room.0,
            loc_room_depth: loc.room.1,
            loc_speakers_min: loc.speakers_min,
            loc_speakers_max: loc.speakers_max,
            loc_time_limit: loc.time_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSection {
    /// Directory holding a prepared dataset manifest; `None` uses tone voices.
    pub dataset: Option<PathBuf>,
    pub tone_frequencies: Vec<f64>,
    pub tone_train_clips: usize,
    pub tone_test_clips: usize,
    /// Training-time utterances per speaker; `None` is unlimited.
    pub utterance_cap: Option<usize>,
    pub reverb: ReverbKind,
    pub pitch_shift: bool,
    pub head_width: f64,
    pub speed_of_sound: f64,
    pub max_audible_distance: f64,
}

impl Default for AudioSection {
    fn default() -> Self {
        let g = BinauralGeometry::default();
        Self {
            dataset: None,
            tone_frequencies: vec![440.0, 880.0, 660.0, 330.0, 550.0],
            tone_train_clips: 50,
            tone_test_clips: 10,
            utterance_cap: None,
            reverb: ReverbKind::None,
            pitch_shift: false,
            head_width: g.head_width,
            speed_of_sound: g.speed_of_sound,
            max_audible_distance: g.max_audible_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSection {
    pub variant: Variant,
    /// Fully connected widths; `None` takes the variant's default.
    pub hidden: Option<Vec<usize>>,
    /// Convolution stack (CNN only); `None` takes the default stack.
    pub conv: Option<Vec<ConvLayerSpec>>,
    /// Samples per ear fed to the network.
    pub buffer_length: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            variant: Variant::Dnn,
            hidden: None,
            conv: None,
            buffer_length: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Steps between periodic checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: u64,
    pub eval_episodes: usize,
    /// Evaluation episodes still running after this many steps end as timeouts.
    pub eval_step_cap: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs"),
            checkpoint_interval: 100_000,
            eval_episodes: 100,
            eval_step_cap: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub environment: EnvironmentSection,
    pub audio: AudioSection,
    pub network: NetworkSection,
    /// `total_steps` is set from the `[run]` section.
    pub ppo: PpoConfig,
    pub run: RunSection,
}

fn parse<T: FromStr>(value: &str, what: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("expected {what}, got {value:?}"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {value:?}")),
    }
}

fn parse_opt<T: FromStr>(value: &str, what: &str) -> std::result::Result<Option<T>, String> {
    match value {
        "none" => Ok(None),
        v => parse(v, what).map(Some),
    }
}

fn parse_list<T: FromStr>(value: &str, what: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(|s| parse(s.trim(), what))
        .collect()
}

fn parse_conv(value: &str) -> std::result::Result<Vec<ConvLayerSpec>, String> {
    value
        .split(',')
        .map(|layer| {
            let parts: Vec<&str> = layer.trim().split(':').collect();
            match parts[..] {
                [f, k, s] => Ok(ConvLayerSpec {
                    filters: parse(f, "a filter count")?,
                    kernel: parse(k, "a kernel size")?,
                    stride: parse(s, "a stride")?,
                }),
                _ => Err(format!("conv layer {layer:?} is not filters:kernel:stride")),
            }
        })
        .collect()
}

fn parse_err(value: &str) -> impl Fn(Error) -> String + '_ {
    move |e| format!("{value:?}: {e}")
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn show_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        let (e, a, n, p, r) = (
            &mut self.environment,
            &mut self.audio,
            &mut self.network,
            &mut self.ppo,
            &mut self.run,
        );
        match (section, key) {
            ("environment", "kind") => e.kind = v.parse().map_err(parse_err(v))?,
            ("environment", "room_width") => e.room_width = parse(v, "a number")?,
            ("environment", "room_depth") => e.room_depth = parse(v, "a number")?,
            ("environment", "nav_speakers") => e.nav_speakers = parse(v, "an integer")?,
            ("environment", "target_speaker") => e.target_speaker = v.to_string(),
            ("environment", "nav_time_limit") => e.nav_time_limit = parse_opt(v, "an integer or none")?,
            ("environment", "loc_room_width") => e.loc_room_width = parse(v, "a number")?,
            ("environment", "loc_room_depth") => e.loc_room_depth = parse(v, "a number")?,
            ("environment", "loc_speakers_min") => e.loc_speakers_min = parse(v, "an integer")?,
            ("environment", "loc_speakers_max") => e.loc_speakers_max = parse(v, "an integer")?,
            ("environment", "loc_time_limit") => e.loc_time_limit = parse(v, "an integer")?,

            ("audio", "dataset") => a.dataset = (!v.is_empty() && v != "none").then(|| PathBuf::from(v)),
            ("audio", "tone_frequencies") => a.tone_frequencies = parse_list(v, "a frequency")?,
            ("audio", "tone_train_clips") => a.tone_train_clips = parse(v, "an integer")?,
            ("audio", "tone_test_clips") => a.tone_test_clips = parse(v, "an integer")?,
            ("audio", "utterance_cap") => a.utterance_cap = parse_opt(v, "an integer or none")?,
            ("audio", "reverb") => a.reverb = v.parse().map_err(parse_err(v))?,
            ("audio", "pitch_shift") => a.pitch_shift = parse_bool(v)?,
            ("audio", "head_width") => a.head_width = parse(v, "a number")?,
            ("audio", "speed_of_sound") => a.speed_of_sound = parse(v, "a number")?,
            ("audio", "max_audible_distance") => a.max_audible_distance = parse(v, "a number")?,

            ("network", "variant") => n.variant = v.parse().map_err(parse_err(v))?,
            ("network", "hidden") => {
                n.hidden = if v == "auto" { None } else { Some(parse_list(v, "a layer width")?) }
            }
            ("network", "conv") => n.conv = if v == "auto" { None } else { Some(parse_conv(v)?) },
            ("network", "buffer_length") => n.buffer_length = parse(v, "an integer")?,

            ("ppo", "gamma") => p.gamma = parse(v, "a number")?,
            ("ppo", "gae_lambda") => p.gae_lambda = parse(v, "a number")?,
            ("ppo", "clip_epsilon") => p.clip_epsilon = parse(v, "a number")?,
            ("ppo", "value_coef") => p.value_coef = parse(v, "a number")?,
            ("ppo", "entropy_coef") => p.entropy_coef = parse(v, "a number")?,
            ("ppo", "horizon") => p.horizon = parse(v, "an integer")?,
            ("ppo", "epochs") => p.epochs = parse(v, "an integer")?,
            ("ppo", "minibatch_size") => p.minibatch_size = parse(v, "an integer")?,
            ("ppo", "num_envs") => p.num_envs = parse(v, "an integer")?,
            ("ppo", "learning_rate") => p.learning_rate = parse(v, "a number")?,
            ("ppo", "max_grad_norm") => p.max_grad_norm = parse(v, "a number")?,
            ("ppo", "normalize_advantages") => p.normalize_advantages = parse_bool(v)?,

            ("run", "seed") => r.seed = parse(v, "an integer")?,
            ("run", "total_steps") => p.total_steps = parse(v, "an integer")?,
            ("run", "output_dir") => r.output_dir = PathBuf::from(v),
            ("run", "checkpoint_interval") => r.checkpoint_interval = parse(v, "an integer")?,
            ("run", "eval_episodes") => r.eval_episodes = parse(v, "an integer")?,
            ("run", "eval_step_cap") => r.eval_step_cap = parse(v, "an integer")?,

            ("environment" | "audio" | "network" | "ppo" | "run", _) => {
                return Err(format!("unknown key {key:?} in [{section}]"))
            }
            _ => return Err(format!("unknown section [{section}]")),
        }
        Ok(())
    }

    /// Every key with its current value, grouped by section.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let (e, a, n, p, r) = (&self.environment, &self.audio, &self.network, &self.ppo, &self.run);
        vec![
            ("environment", "kind", e.kind.to_string()),
            ("environment", "room_width", e.room_width.to_string()),
            ("environment", "room_depth", e.room_depth.to_string()),
            ("environment", "nav_speakers", e.nav_speakers.to_string()),
            ("environment", "target_speaker", e.target_speaker.clone()),
            ("environment", "nav_time_limit", show_opt(&e.nav_time_limit)),
            ("environment", "loc_room_width", e.loc_room_width.to_string()),
            ("environment", "loc_room_depth", e.loc_room_depth.to_string()),
            ("environment", "loc_speakers_min", e.loc_speakers_min.to_string()),
            ("environment", "loc_speakers_max", e.loc_speakers_max.to_string()),
            ("environment", "loc_time_limit", e.loc_time_limit.to_string()),
            (
                "audio",
                "dataset",
                a.dataset.as_ref().map_or("none".into(), |d| d.display().to_string()),
            ),
            ("audio", "tone_frequencies", show_list(&a.tone_frequencies)),
            ("audio", "tone_train_clips", a.tone_train_clips.to_string()),
            ("audio", "tone_test_clips", a.tone_test_clips.to_string()),
            ("audio", "utterance_cap", show_opt(&a.utterance_cap)),
            ("audio", "reverb", a.reverb.to_string()),
            ("audio", "pitch_shift", a.pitch_shift.to_string()),
            ("audio", "head_width", a.head_width.to_string()),
            ("audio", "speed_of_sound", a.speed_of_sound.to_string()),
            ("audio", "max_audible_distance", a.max_audible_distance.to_string()),
            ("network", "variant", n.variant.to_string()),
            ("network", "hidden", n.hidden.as_ref().map_or("auto".into(), |h| show_list(h))),
            (
                "network",
                "conv",
                n.conv.as_ref().map_or("auto".into(), |c| {
                    c.iter()
                        .map(|l| format!("{}:{}:{}", l.filters, l.kernel, l.stride))
                        .collect::<Vec<_>>()
                        .join(",")
                }),
            ),
            ("network", "buffer_length", n.buffer_length.to_string()),
            ("ppo", "gamma", p.gamma.to_string()),
            ("ppo", "gae_lambda", p.gae_lambda.to_string()),
            ("ppo", "clip_epsilon", p.clip_epsilon.to_string()),
            ("ppo", "value_coef", p.value_coef.to_string()),
            ("ppo", "entropy_coef", p.entropy_coef.to_string()),
            ("ppo", "horizon", p.horizon.to_string()),
            ("ppo", "epochs", p.epochs.to_string()),
            ("ppo", "minibatch_size", p.minibatch_size.to_string()),
            ("ppo", "num_envs", p.num_envs.to_string()),
            ("ppo", "learning_rate", p.learning_rate.to_string()),
            ("ppo", "max_grad_norm", p.max_grad_norm.to_string()),
            ("ppo", "normalize_advantages", p.normalize_advantages.to_string()),
            ("run", "seed", r.seed.to_string()),
            ("run", "total_steps", p.total_steps.to_string()),
            ("run", "output_dir", r.output_dir.display().to_string()),
            ("run", "checkpoint_interval", r.checkpoint_interval.to_string()),
            ("run", "eval_episodes", r.eval_episodes.to_string()),
            ("run", "eval_step_cap", r.eval_step_cap.to_string()),
        ]
    }

    /// Writes a complete config file that parses back to `self`.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, value) in self.entries() {
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        self.apply_overrides(&[assignment])
    }

    /// Applies several overrides, validating once at the end so that keys
    /// which only make sense together can be changed together.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, assignments: &[S]) -> Result<()> {
        for a in assignments {
            self.set_assignment(a.as_ref())?;
        }
        self.validate()
    }

    fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override key {path:?} is not section.key")))?;
        self.set(section, key, value)
            .map_err(|m| Error::Config(format!("override {assignment:?}: {m}")))
    }

    pub fn navigation(&self) -> NavigationConfig {
        let e = &self.environment;
        NavigationConfig {
            room: (e.room_width, e.room_depth),
            speakers: e.nav_speakers,
            target_speaker: e.target_speaker.clone(),
            time_limit: e.nav_time_limit,
            ..Default::default()
        }
    }

    pub fn localization(&self) -> LocalizationConfig {
        let e = &self.environment;
        LocalizationConfig {
            room: (e.loc_room_width, e.loc_room_depth),
            speakers_min: e.loc_speakers_min,
            speakers_max: e.loc_speakers_max,
            time_limit: e.loc_time_limit,
            ..Default::default()
        }
    }

    /// Audio settings used for training. Perturbations from the `[audio]`
    /// section are not applied here; they are evaluation-time only.
    pub fn audio_settings(&self) -> AudioSettings {
        let a = &self.audio;
        AudioSettings {
            geometry: BinauralGeometry {
                head_width: a.head_width,
                speed_of_sound: a.speed_of_sound,
                max_audible_distance: a.max_audible_distance,
            },
            buffer_len: self.network.buffer_length,
            ..Default::default()
        }
    }

    pub fn network_spec(&self) -> NetworkSpec {
        let n = &self.network;
        let input = 2 * n.buffer_length;
        let mut spec = match n.variant {
            Variant::Dnn => NetworkSpec::dnn(input),
            Variant::Cnn => NetworkSpec::cnn(input),
        };
        if let Some(h) = &n.hidden {
            spec.hidden = h.clone();
        }
        if let (Variant::Cnn, Some(c)) = (n.variant, &n.conv) {
            spec.conv = c.clone();
        }
        spec
    }

    /// Cross-field checks; the error names the offending key.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let n = &self.network;
        if !BUFFER_LENGTHS.contains(&n.buffer_length) {
            return Err((
                "network.buffer_length",
                format!("buffer length {} is not one of {BUFFER_LENGTHS:?}", n.buffer_length),
            ));
        }
        if n.variant == Variant::Dnn && n.conv.is_some() {
            return Err(("network.conv", "the dnn variant takes no conv layers".into()));
        }
        let spec = self.network_spec();
        if spec.input_len != 2 * n.buffer_length {
            return Err(("network.buffer_length", "network input must be twice the buffer length".into()));
        }
        spec.validate().map_err(|e| ("network.hidden", e.to_string()))?;
        let nav = self.navigation();
        nav.validate().map_err(|e| ("environment.nav_speakers", e.to_string()))?;
        let loc = self.localization();
        loc.validate()
            .map_err(|e| ("environment.loc_room_width", e.to_string()))?;
        self.audio_settings()
            .validate(nav.diagonal().max(loc.diagonal()))
            .map_err(|e| ("audio.max_audible_distance", e.to_string()))?;
        let a = &self.audio;
        if a.dataset.is_none() {
            if a.tone_frequencies.is_empty() || a.tone_frequencies.iter().any(|f| !(*f > 0.0 && *f < 24_000.0)) {
                return Err(("audio.tone_frequencies", "tone frequencies must lie in (0, 24000) Hz".into()));
            }
            if a.tone_train_clips == 0 || a.tone_test_clips == 0 {
                return Err(("audio.tone_train_clips", "tone voices need at least one clip per partition".into()));
            }
        }
        if a.utterance_cap == Some(0) {
            return Err(("audio.utterance_cap", "utterance cap must be at least 1".into()));
        }
        self.ppo.validate().map_err(|e| ("ppo.horizon", e.to_string()))?;
        if self.run.eval_episodes == 0 {
            return Err(("run.eval_episodes", "evaluation needs at least one episode".into()));
        }
        if self.run.eval_step_cap == 0 {
            return Err(("run.eval_step_cap", "eval step cap must be positive".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(key, m)| Error::Config(format!("{key}: {m}")))
    }
}

/// Parses and validates a config file's text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section: Option<String> = None;
    let mut lines: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::ConfigLine {
            line: line_no,
            message,
        };
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(format!("unterminated section header {line:?}")))?
                .trim();
            if !["environment", "audio", "network", "ppo", "run"].contains(&name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let sec = section
            .as_deref()
            .ok_or_else(|| err("key outside of any [section]".into()))?;
        let key = key.trim();
        let full = format!("{sec}.{key}");
        if let Some(prev) = lines.get(&full) {
            return Err(err(format!("{full} already set on line {prev}")));
        }
        cfg.set(sec, key, value).map_err(err)?;
        lines.insert(full, line_no);
    }
    cfg.check().map_err(|(key, message)| match lines.get(key) {
        Some(&line) => Error::ConfigLine { line, message },
        None => Error::Config(format!("{key}: {message}")),
    })?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.network_spec().input_len, 2048);
        assert_eq!(cfg.ppo, PpoConfig::default());
    }

    #[test]
    fn sections_keys_and_comments() {
        let text = "\
# desk run
[environment]
kind = localization   ; inline comment
room_width = 6
[network]
buffer_length = 512
hidden = 64,32
[run]
total_steps = 1000
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.environment.kind, EnvKind::Localization);
        assert_eq!(cfg.environment.room_width, 6.0);
        assert_eq!(cfg.network_spec().input_len, 1024);
        assert_eq!(cfg.network_spec().hidden, vec![64, 32]);
        assert_eq!(cfg.ppo.total_steps, 1000);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[run]\nseed = 1\nbogus = 2\n", 3),
            ("[run]\nseed = x\n", 2),
            ("seed = 1\n", 1),
            ("[nope]\n", 1),
            ("[run]\nseed = 1\nseed = 2\n", 3),
            ("[network]\n\nbuffer_length = 100\n", 3),
        ];
        for (text, want) in cases {
            match parse_config(text) {
                Err(Error::ConfigLine { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_buffer_length_names_the_allowed_set() {
        let e = parse_config("[network]\nbuffer_length = 100\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("256") && msg.contains("4096"), "{msg}");
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.environment.nav_time_limit = Some(700);
        cfg.audio.tone_frequencies = vec![440.0, 880.5];
        cfg.audio.utterance_cap = Some(50);
        cfg.network.variant = Variant::Cnn;
        cfg.network.conv = Some(vec![ConvLayerSpec { filters: 4, kernel: 8, stride: 4 }]);
        cfg.ppo.learning_rate = 1.2345e-4;
        cfg.ppo.gamma = 0.1 + 0.2;
        cfg.run.output_dir = "out/x".into();
        let text = cfg.to_ini();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_ini(), text);
        assert_eq!(parse_config(&RunConfig::default().to_ini()).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("ppo.horizon=512").unwrap();
        cfg.apply_override("environment.kind = localization").unwrap();
        assert_eq!(cfg.ppo.horizon, 512);
        assert_eq!(cfg.environment.kind, EnvKind::Localization);
        assert!(cfg.apply_override("ppo.horizon").is_err());
        assert!(cfg.apply_override("horizon=3").is_err());
        assert!(cfg.apply_override("ppo.nope=3").is_err());
        assert!(cfg.apply_override("network.buffer_length=100").is_err());
    }

    #[test]
    fn cross_field_violations() {
        assert!(parse_config("[environment]\nnav_speakers = 9\n").is_err());
        assert!(parse_config("[environment]\nloc_speakers_min = 4\nloc_speakers_max = 2\n").is_err());
        assert!(parse_config("[network]\nconv = 4:8:4\n").is_err());
        assert!(parse_config("[ppo]\ngamma = 1.5\n").is_err());
        assert!(parse_config("[audio]\nutterance_cap = 0\n").is_err());
        let small = parse_config("[environment]\nloc_room_width = 6\n").unwrap_err().to_string();
        assert!(small.contains("line 2"), "{small}");
        // a desk-sized navigation room is fine on its own
        assert!(parse_config("[environment]\nroom_width = 6\nroom_depth = 6\n").is_ok());
    }
}
