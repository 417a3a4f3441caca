use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Clamp range of the state-independent action log standard deviations.
pub const LOG_STD_RANGE: (f64, f64) = (-5.0, 2.0);

/// Hidden-layer biases start uniform in `(-r, r)`; output heads start at zero.
pub const HIDDEN_BIAS_RANGE: f64 = 1.0;

/// Starting exploration noise, sigma = e^-0.5 ~ 0.61. At sigma = 1 most samples
/// are clamped to the action bounds, which drags the mean toward them.
pub const INITIAL_LOG_STD: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dnn,
    Cnn,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dnn" => Ok(Variant::Dnn),
            "cnn" => Ok(Variant::Cnn),
            other => Err(Error::InvalidArgument(format!(
                "unknown network variant {other:?} (expected dnn or cnn)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Dnn => "dnn",
            Variant::Cnn => "cnn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Architecture description. The input is the left channel followed by the
/// right channel; the CNN variant reads it as two channels of
/// `input_len / 2` samples, the DNN variant as one flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub variant: Variant,
    pub input_len: usize,
    /// Fully connected tanh layers. For the CNN these follow the pooled
    /// convolutional features.
    pub hidden: Vec<usize>,
    /// Convolutional front-end, CNN only.
    pub conv: Vec<ConvLayerSpec>,
    pub action_dim: usize,
}

impl NetworkSpec {
    /// Two 256-unit tanh layers on the raw concatenated stereo buffer.
    pub fn dnn(input_len: usize) -> Self {
        Self {
            variant: Variant::Dnn,
            input_len,
            hidden: vec![256, 256],
            conv: Vec::new(),
            action_dim: 2,
        }
    }

    /// Three 1-D convolutions (32/64/64 filters, kernels 8/4/3, strides
    /// 4/2/1), time-averaged, then one 256-unit layer.
    pub fn cnn(input_len: usize) -> Self {
        Self {
            variant: Variant::Cnn,
            input_len,
            hidden: vec![256],
            conv: vec![
                ConvLayerSpec { filters: 32, kernel: 8, stride: 4 },
                ConvLayerSpec { filters: 64, kernel: 4, stride: 2 },
                ConvLayerSpec { filters: 64, kernel: 3, stride: 1 },
            ],
            action_dim: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Shape(m));
        if self.input_len == 0 || self.action_dim == 0 {
            return bad("input length and action dimension must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden sizes {:?} must be non-empty and positive", self.hidden));
        }
        match self.variant {
            Variant::Dnn if !self.conv.is_empty() => {
                bad("the DNN variant takes no convolutional layers".into())
            }
            Variant::Cnn => {
                if self.conv.is_empty() {
                    return bad("the CNN variant needs at least one convolutional layer".into());
                }
                if self.input_len % 2 != 0 {
                    return bad(format!("CNN input length {} is not two channels", self.input_len));
                }
                self.conv_lengths().map(|_| ())
            }
            Variant::Dnn => Ok(()),
        }
    }

    /// Time lengths of the input and of each convolutional feature map.
    pub fn conv_lengths(&self) -> Result<Vec<usize>> {
        let mut lens = vec![self.input_len / 2];
        for (i, c) in self.conv.iter().enumerate() {
            let l = *lens.last().unwrap();
            if c.kernel == 0 || c.stride == 0 || c.filters == 0 || l < c.kernel {
                return Err(Error::Shape(format!(
                    "conv layer {i} ({c:?}) does not fit an input of length {l}"
                )));
            }
            lens.push((l - c.kernel) / c.stride + 1);
        }
        Ok(lens)
    }

    /// Width of the vector entering the fully connected trunk.
    pub fn trunk_input(&self) -> usize {
        match self.variant {
            Variant::Dnn => self.input_len,
            Variant::Cnn => self.conv.last().map_or(0, |c| c.filters),
        }
    }

    pub fn layout(&self) -> Vec<TensorSlot> {
        let mut slots = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: (usize, usize)| {
            slots.push(TensorSlot {
                name,
                offset,
                rows: shape.0,
                cols: shape.1,
            });
            offset += shape.0 * shape.1;
        };
        let mut channels = 2;
        for (i, c) in self.conv.iter().enumerate() {
            push(format!("conv{i}.weight"), (c.kernel * channels, c.filters));
            push(format!("conv{i}.bias"), (1, c.filters));
            channels = c.filters;
        }
        let mut width = self.trunk_input();
        for (i, &h) in self.hidden.iter().enumerate() {
            push(format!("hidden{i}.weight"), (width, h));
            push(format!("hidden{i}.bias"), (1, h));
            width = h;
        }
        push("policy.weight".into(), (width, self.action_dim));
        push("policy.bias".into(), (1, self.action_dim));
        push("value.weight".into(), (width, 1));
        push("value.bias".into(), (1, 1));
        push("log_std".into(), (1, self.action_dim));
        slots
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(TensorSlot::len).sum()
    }
}

/// A named `rows x cols` row-major block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSlot {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSlot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// All network weights plus the action log standard deviations, stored as
/// one flat vector so optimizers and serializers can treat it uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub spec: NetworkSpec,
    pub values: Vec<f64>,
    slots: Vec<TensorSlot>,
}

impl PolicyParams {
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let slots = spec.layout();
        let n = slots.iter().map(TensorSlot::len).sum();
        Ok(Self {
            spec,
            values: vec![0.0; n],
            slots,
        })
    }

    pub fn from_values(spec: NetworkSpec, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        if values.len() != p.values.len() {
            return Err(Error::Shape(format!(
                "{} parameter values for a network of {}",
                values.len(),
                p.values.len()
            )));
        }
        p.values = values;
        Ok(p)
    }

    /// Orthogonal initialization: gain sqrt(2) for hidden layers, 0.01 for
    /// the policy head and 1.0 for the value head. Hidden biases are drawn
    /// from `HIDDEN_BIAS_RANGE`, head biases start at zero and log-std at
    /// `INITIAL_LOG_STD`.
    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        for slot in p.slots.clone() {
            if !slot.name.ends_with(".weight") {
                continue;
            }
            let gain = match slot.name.as_str() {
                "policy.weight" => 0.01,
                "value.weight" => 1.0,
                _ => std::f64::consts::SQRT_2,
            };
            let w = orthogonal(slot.rows, slot.cols, gain, rng);
            p.values[slot.range()].copy_from_slice(&w);
        }
        // With zero biases a tanh trunk is an odd function of its input and
        // cannot respond to the power of sign-symmetric waveforms.
        for slot in p.slots.clone() {
            if slot.name.starts_with("hidden") && slot.name.ends_with(".bias") {
                for v in &mut p.values[slot.range()] {
                    *v = rng.random_range(-HIDDEN_BIAS_RANGE..HIDDEN_BIAS_RANGE);
                }
            }
        }
        p.set_log_std(&vec![INITIAL_LOG_STD; p.spec.action_dim]);
        Ok(p)
    }

    pub fn slots(&self) -> &[TensorSlot] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> &TensorSlot {
        self.slots
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("no parameter tensor named {name}"))
    }

    pub fn tensor(&self, name: &str) -> &[f64] {
        &self.values[self.slot(name).range()]
    }

    pub fn log_std(&self) -> &[f64] {
        self.tensor("log_std")
    }

    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        self.slot("log_std").range()
    }

    pub fn set_log_std(&mut self, v: &[f64]) {
        let r = self.log_std_range();
        self.values[r].copy_from_slice(v);
    }

    pub fn clamp_log_std(&mut self) {
        let r = self.log_std_range();
        for v in &mut self.values[r] {
            *v = v.clamp(LOG_STD_RANGE.0, LOG_STD_RANGE.1);
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A `rows x cols` matrix whose columns (or rows, whichever are fewer) are
/// orthonormal, scaled by `gain`. Row-major.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (long, short) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // `short` vectors of length `long`, Gram-Schmidt orthonormalized.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain
                * if rows >= cols {
                    basis[c][r]
                } else {
                    basis[r][c]
                };
        }
    }
    out
}
