//! Forward and backward passes of the policy-value network.
//!
//! Dense weights are stored `(in, out)` so a batch `X (B x in)` maps to
//! `X W + b`. Convolution activations are kept time-major `(L x channels)`,
//! which makes every receptive field a contiguous `kernel * channels` slice
//! and lets each layer run as one matrix product over im2col patches.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};

use super::params::{PolicyParams, TensorSlot, Variant};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `B x action_dim`, each entry in [-1, 1].
    pub mean: Array2<f64>,
    pub value: Array1<f64>,
}

/// Intermediates of a forward pass needed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    param_len: usize,
    /// Per convolution layer (index 0 is the reshaped input), per sample.
    conv_acts: Vec<Vec<Array2<f64>>>,
    /// Trunk input followed by each hidden activation, all `B x width`.
    trunk_acts: Vec<Array2<f64>>,
    mean: Array2<f64>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.mean.nrows()
    }
}

fn view<'a>(params: &'a PolicyParams, slot: &TensorSlot) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((slot.rows, slot.cols), &params.values[slot.range()])
        .expect("slot shape matches layout")
}

fn view_mut<'a>(grads: &'a mut [f64], slot: &TensorSlot) -> ArrayViewMut2<'a, f64> {
    ArrayViewMut2::from_shape((slot.rows, slot.cols), &mut grads[slot.range()])
        .expect("slot shape matches layout")
}

/// `x W + b` for a batch.
fn affine(x: &ArrayView2<f64>, w: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), w.ncols()));
    out.assign(&b.row(0));
    general_mat_mul(1.0, x, w, 1.0, &mut out);
    out
}

/// Receptive fields of a time-major activation as rows of a patch matrix.
fn im2col(act: &Array2<f64>, kernel: usize, stride: usize, out_len: usize) -> Array2<f64> {
    let ch = act.ncols();
    let flat = act.as_slice().expect("activations are contiguous");
    let mut patches = Array2::zeros((out_len, kernel * ch));
    for (t, mut row) in patches.outer_iter_mut().enumerate() {
        let start = t * stride * ch;
        row.as_slice_mut()
            .unwrap()
            .copy_from_slice(&flat[start..start + kernel * ch]);
    }
    patches
}

fn conv_trunk_input(
    params: &PolicyParams,
    states: &ArrayView2<f64>,
) -> Result<(Vec<Vec<Array2<f64>>>, Array2<f64>)> {
    let spec = &params.spec;
    let lens = spec.conv_lengths()?;
    let half = spec.input_len / 2;
    let batch = states.nrows();
    let mut acts: Vec<Vec<Array2<f64>>> = vec![Vec::with_capacity(batch); spec.conv.len() + 1];
    let mut pooled = Array2::zeros((batch, spec.trunk_input()));
    for (b, state) in states.outer_iter().enumerate() {
        let mut x = Array2::zeros((half, 2));
        x.column_mut(0).assign(&state.slice(s![..half]));
        x.column_mut(1).assign(&state.slice(s![half..]));
        for (i, layer) in spec.conv.iter().enumerate() {
            let w = view(params, params.slot(&format!("conv{i}.weight")));
            let bias = view(params, params.slot(&format!("conv{i}.bias")));
            let patches = im2col(&x, layer.kernel, layer.stride, lens[i + 1]);
            let mut y = affine(&patches.view(), &w, &bias);
            y.mapv_inplace(f64::tanh);
            acts[i].push(x);
            x = y;
        }
        pooled.row_mut(b).assign(&x.mean_axis(Axis(0)).expect("non-empty feature map"));
        acts[spec.conv.len()].push(x);
    }
    Ok((acts, pooled))
}

/// Batched forward pass; `states` is `B x input_len`.
pub fn forward_batch(
    params: &PolicyParams,
    states: ArrayView2<f64>,
) -> Result<(ForwardOutput, ForwardCache)> {
    let spec = &params.spec;
    if states.ncols() != spec.input_len {
        return Err(Error::Shape(format!(
            "state length {} but the network expects {}",
            states.ncols(),
            spec.input_len
        )));
    }
    let (conv_acts, trunk_in) = match spec.variant {
        Variant::Dnn => (Vec::new(), states.to_owned()),
        Variant::Cnn => conv_trunk_input(params, &states)?,
    };
    let mut trunk_acts = vec![trunk_in];
    for i in 0..spec.hidden.len() {
        let w = view(params, params.slot(&format!("hidden{i}.weight")));
        let b = view(params, params.slot(&format!("hidden{i}.bias")));
        let mut h = affine(&trunk_acts[i].view(), &w, &b);
        h.mapv_inplace(f64::tanh);
        trunk_acts.push(h);
    }
    let top = trunk_acts.last().unwrap().view();
    let mut mean = affine(
        &top,
        &view(params, params.slot("policy.weight")),
        &view(params, params.slot("policy.bias")),
    );
    mean.mapv_inplace(f64::tanh);
    let value = affine(
        &top,
        &view(params, params.slot("value.weight")),
        &view(params, params.slot("value.bias")),
    )
    .column(0)
    .to_owned();
    let cache = ForwardCache {
        param_len: params.len(),
        conv_acts,
        trunk_acts,
        mean: mean.clone(),
    };
    Ok((ForwardOutput { mean, value }, cache))
}

/// Single-state forward pass.
pub fn forward(params: &PolicyParams, state: &[f64]) -> Result<(ForwardOutput, ForwardCache)> {
    let states = ArrayView2::from_shape((1, state.len()), state)
        .map_err(|e| Error::Shape(e.to_string()))?;
    forward_batch(params, states)
}

/// Forward pass that insists on the convolutional variant.
pub fn cnn_forward(params: &PolicyParams, state: &[f64]) -> Result<(ForwardOutput, ForwardCache)> {
    if params.spec.variant != Variant::Cnn {
        return Err(Error::Shape("cnn_forward called on a DNN parameter set".into()));
    }
    forward(params, state)
}

/// Gradients of `sum(d_mean * mean) + sum(d_value * value)` with respect to
/// every network parameter. The log-std block is left at zero; it does not
/// enter the network outputs.
pub fn backward(
    params: &PolicyParams,
    cache: &ForwardCache,
    d_mean: ArrayView2<f64>,
    d_value: ArrayView1<f64>,
) -> Result<Vec<f64>> {
    let spec = &params.spec;
    let batch = cache.batch();
    if cache.param_len != params.len()
        || cache.trunk_acts.len() != spec.hidden.len() + 1
        || cache.mean.ncols() != spec.action_dim
    {
        return Err(Error::Shape("forward cache does not match these parameters".into()));
    }
    if d_mean.dim() != (batch, spec.action_dim) || d_value.len() != batch {
        return Err(Error::Shape(format!(
            "upstream gradients {:?}/{} do not match batch {batch}",
            d_mean.dim(),
            d_value.len()
        )));
    }
    let mut grads = vec![0.0; params.len()];

    // Heads.
    let top = cache.trunk_acts.last().unwrap();
    let d_mean_pre = &d_mean * &cache.mean.mapv(|m| 1.0 - m * m);
    let d_value_col = d_value.insert_axis(Axis(1));
    let heads = [
        ("policy", d_mean_pre.view()),
        ("value", d_value_col.view()),
    ];
    let mut d_top = Array2::zeros(top.raw_dim());
    for (name, d_out) in heads {
        let w_slot = params.slot(&format!("{name}.weight"));
        let b_slot = params.slot(&format!("{name}.bias"));
        general_mat_mul(1.0, &top.t(), &d_out, 0.0, &mut view_mut(&mut grads, w_slot));
        view_mut(&mut grads, b_slot)
            .row_mut(0)
            .assign(&d_out.sum_axis(Axis(0)));
        general_mat_mul(1.0, &d_out, &view(params, w_slot).t(), 1.0, &mut d_top);
    }

    // Dense trunk, top down.
    let mut d_act = d_top;
    for i in (0..spec.hidden.len()).rev() {
        let h = &cache.trunk_acts[i + 1];
        let input = &cache.trunk_acts[i];
        let d_pre = &d_act * &h.mapv(|v| 1.0 - v * v);
        let w_slot = params.slot(&format!("hidden{i}.weight"));
        let b_slot = params.slot(&format!("hidden{i}.bias"));
        general_mat_mul(1.0, &input.t(), &d_pre, 0.0, &mut view_mut(&mut grads, w_slot));
        view_mut(&mut grads, b_slot)
            .row_mut(0)
            .assign(&d_pre.sum_axis(Axis(0)));
        let needs_input_grad = i > 0 || spec.variant == Variant::Cnn;
        if needs_input_grad {
            let mut d_in = Array2::zeros(input.raw_dim());
            general_mat_mul(1.0, &d_pre, &view(params, w_slot).t(), 0.0, &mut d_in);
            d_act = d_in;
        }
    }

    if spec.variant == Variant::Cnn {
        conv_backward(params, cache, &d_act, &mut grads)?;
    }
    Ok(grads)
}

fn conv_backward(
    params: &PolicyParams,
    cache: &ForwardCache,
    d_pooled: &Array2<f64>,
    grads: &mut [f64],
) -> Result<()> {
    let spec = &params.spec;
    let lens = spec.conv_lengths()?;
    let n_layers = spec.conv.len();
    let slots: Vec<(TensorSlot, TensorSlot)> = (0..n_layers)
        .map(|i| {
            (
                params.slot(&format!("conv{i}.weight")).clone(),
                params.slot(&format!("conv{i}.bias")).clone(),
            )
        })
        .collect();
    for b in 0..cache.batch() {
        let last = &cache.conv_acts[n_layers][b];
        let mut d_act = Array2::zeros(last.raw_dim());
        let scale = 1.0 / last.nrows() as f64;
        for mut row in d_act.outer_iter_mut() {
            row.assign(&(&d_pooled.row(b) * scale));
        }
        for i in (0..n_layers).rev() {
            let layer = spec.conv[i];
            let out = &cache.conv_acts[i + 1][b];
            let input = &cache.conv_acts[i][b];
            let d_pre = &d_act * &out.mapv(|v| 1.0 - v * v);
            let patches = im2col(input, layer.kernel, layer.stride, lens[i + 1]);
            let (w_slot, b_slot) = &slots[i];
            general_mat_mul(1.0, &patches.t(), &d_pre, 1.0, &mut view_mut(grads, w_slot));
            let mut gb = view_mut(grads, b_slot);
            let mut gb_row = gb.row_mut(0);
            gb_row += &d_pre.sum_axis(Axis(0));
            if i > 0 {
                let mut d_patches = Array2::zeros(patches.raw_dim());
                general_mat_mul(1.0, &d_pre, &view(params, w_slot).t(), 0.0, &mut d_patches);
                let ch = input.ncols();
                let mut d_in = Array2::<f64>::zeros(input.raw_dim());
                {
                    let flat = d_in.as_slice_mut().unwrap();
                    for (t, row) in d_patches.outer_iter().enumerate() {
                        let start = t * layer.stride * ch;
                        for (dst, src) in flat[start..start + layer.kernel * ch].iter_mut().zip(row) {
                            *dst += src;
                        }
                    }
                }
                d_act = d_in;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::params::{ConvLayerSpec, NetworkSpec};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(spec: NetworkSpec, seed: u64, scale: f64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = PolicyParams::zeros(spec).unwrap();
        for v in p.values.iter_mut() {
            *v = rng.random_range(-scale..scale);
        }
        p
    }

    fn small_cnn() -> NetworkSpec {
        NetworkSpec {
            variant: Variant::Cnn,
            input_len: 48,
            hidden: vec![5],
            conv: vec![
                ConvLayerSpec { filters: 3, kernel: 4, stride: 2 },
                ConvLayerSpec { filters: 4, kernel: 3, stride: 1 },
            ],
            action_dim: 2,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        for spec in [NetworkSpec::dnn(2048), NetworkSpec::cnn(2048)] {
            let p = PolicyParams::zeros(spec).unwrap();
            let state: Vec<f64> = (0..2048).map(|i| ((i % 17) as f64 / 17.0) - 0.5).collect();
            let (out, _) = forward(&p, &state).unwrap();
            assert_eq!(out.mean.row(0).to_vec(), vec![0.0, 0.0]);
            assert_eq!(out.value[0], 0.0);
        }
    }

    #[test]
    fn means_are_bounded_and_pure() {
        let p = random_params(NetworkSpec::dnn(16), 1, 3.0);
        let state: Vec<f64> = (0..16).map(|i| (i as f64 / 8.0) - 1.0).collect();
        let (a, _) = forward(&p, &state).unwrap();
        let (b, _) = forward(&p, &state).unwrap();
        assert_eq!(a, b);
        assert!(a.mean.iter().all(|m| (-1.0..=1.0).contains(m)));
    }

    #[test]
    fn wrong_input_length() {
        let p = PolicyParams::zeros(NetworkSpec::dnn(16)).unwrap();
        assert!(forward(&p, &[0.0; 15]).is_err());
        assert!(cnn_forward(&p, &[0.0; 16]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        for spec in [NetworkSpec::dnn(12), small_cnn()] {
            let n = spec.input_len;
            let p = random_params(spec, 2, 0.5);
            let x = Array2::from_shape_fn((3, n), |(i, j)| ((i * 5 + j) % 7) as f64 / 7.0 - 0.5);
            let (_, cache) = forward_batch(&p, x.view()).unwrap();
            let g = backward(&p, &cache, Array2::zeros((3, 2)).view(), Array1::zeros(3).view()).unwrap();
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn duplicated_rows_give_identical_per_sample_gradients() {
        let p = random_params(NetworkSpec::dnn(10), 3, 0.5);
        let row: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let single = ArrayView2::from_shape((1, 10), &row).unwrap();
        let (_, c1) = forward_batch(&p, single).unwrap();
        let dm = Array2::from_elem((1, 2), 0.3);
        let dv = Array1::from_elem(1, -0.7);
        let g1 = backward(&p, &c1, dm.view(), dv.view()).unwrap();

        let doubled = Array2::from_shape_fn((2, 10), |(_, j)| row[j]);
        let (_, c2) = forward_batch(&p, doubled.view()).unwrap();
        let g2 = backward(&p, &c2, Array2::from_elem((2, 2), 0.3).view(), Array1::from_elem(2, -0.7).view())
            .unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn cache_mismatch_is_rejected() {
        let p = random_params(NetworkSpec::dnn(10), 4, 0.5);
        let q = random_params(NetworkSpec::dnn(12), 4, 0.5);
        let (_, cache) = forward(&q, &[0.1; 12]).unwrap();
        assert!(backward(&p, &cache, Array2::zeros((1, 2)).view(), Array1::zeros(1).view()).is_err());
    }

    /// With zero biases, stride-aligned trailing zeros leave the feature
    /// maps over the original span untouched.
    #[test]
    fn cnn_prefix_features_ignore_aligned_trailing_zeros() {
        let mut p = random_params(small_cnn(), 5, 0.8);
        for i in 0..2 {
            let r = p.slot(&format!("conv{i}.bias")).range();
            p.values[r].iter_mut().for_each(|v| *v = 0.0);
        }
        let half = 24;
        let pad = 4; // multiple of the total stride (2 * 1) and of the first kernel
        let base: Vec<f64> = (0..2 * half).map(|i| ((i * 13) % 9) as f64 / 9.0 - 0.4).collect();
        let mut longer_spec = small_cnn();
        longer_spec.input_len = 2 * (half + pad);
        let longer = PolicyParams::from_values(longer_spec, p.values.clone()).unwrap();
        let mut padded = base[..half].to_vec();
        padded.extend(std::iter::repeat_n(0.0, pad));
        padded.extend_from_slice(&base[half..]);
        padded.extend(std::iter::repeat_n(0.0, pad));

        let (_, c_short) = forward(&p, &base).unwrap();
        let (_, c_long) = forward(&longer, &padded).unwrap();
        for layer in 1..=2 {
            let a = &c_short.conv_acts[layer][0];
            let b = &c_long.conv_acts[layer][0];
            assert!(b.nrows() > a.nrows());
            assert_eq!(a, &b.slice(s![..a.nrows(), ..]).to_owned());
        }
    }
}
