//! Iterative disparity refinement: cost-volume lookup plus a minimal
//! convolutional GRU producing additive disparity updates at quarter scale.
//!
//! With all-zero weights a step is the identity (gates sit at one half, the
//! candidate hidden state is zero, the update head emits zero), which is the
//! anchor the zero-initialization tests rely on.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::kernels::{concat_channels, conv2d, leaky_relu, sigmoid};
use crate::rng::{fanin_kernel, seeded_rng};
use crate::tensor::{
    axes_chw, axes_kernel2d, CoreError, CoreResult, Scalar, Tensor,
};
use crate::volume::FusedVolume;

/// Hidden state width of the GRU.
pub const HIDDEN_CHANNELS: usize = 32;
/// Channels produced by the motion encoder.
pub const MOTION_CHANNELS: usize = 16;

/// Disparity estimate under refinement, with its GRU hidden state and the
/// full iteration history `d_0 .. d_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityState<T> {
    pub d: Tensor<T>,
    pub hidden: Tensor<T>,
    pub history: Vec<Tensor<T>>,
}

impl<T: Scalar> DisparityState<T> {
    /// Fresh state at `d_0` with a zero hidden state.
    pub fn new(d0: Tensor<T>, hidden_channels: usize) -> CoreResult<Self> {
        let (h, w) = d0.dims2("disparity state")?;
        Ok(Self {
            hidden: Tensor::zeros(axes_chw(hidden_channels, h, w)),
            history: alloc::vec![d0.clone()],
            d: d0,
        })
    }

    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

/// Kernels of the motion encoder, the GRU gates, and the update head.
/// The head carries a scalar bias so tests can pin its output.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdaterWeights<T> {
    pub motion: Tensor<T>,
    pub gate_update: Tensor<T>,
    pub gate_reset: Tensor<T>,
    pub candidate: Tensor<T>,
    pub head: Tensor<T>,
    pub head_bias: T,
    pub lookup_radius: usize,
    pub context_channels: usize,
}

impl<T: Scalar> UpdaterWeights<T> {
    fn shapes(radius: usize, context_channels: usize) -> (usize, usize) {
        // Motion encoder sees the lookup slab plus the disparity map itself.
        let motion_in = 2 * radius + 1 + 1;
        let gate_in = HIDDEN_CHANNELS + context_channels + MOTION_CHANNELS;
        (motion_in, gate_in)
    }

    pub fn seeded(seed: u64, radius: usize, context_channels: usize) -> Self {
        let (motion_in, gate_in) = Self::shapes(radius, context_channels);
        let mut rng = seeded_rng(seed);
        Self {
            motion: fanin_kernel(&mut rng, axes_kernel2d(MOTION_CHANNELS, motion_in, 3, 3)),
            gate_update: fanin_kernel(&mut rng, axes_kernel2d(HIDDEN_CHANNELS, gate_in, 3, 3)),
            gate_reset: fanin_kernel(&mut rng, axes_kernel2d(HIDDEN_CHANNELS, gate_in, 3, 3)),
            candidate: fanin_kernel(&mut rng, axes_kernel2d(HIDDEN_CHANNELS, gate_in, 3, 3)),
            head: fanin_kernel(&mut rng, axes_kernel2d(1, HIDDEN_CHANNELS, 3, 3)),
            head_bias: T::zero(),
            lookup_radius: radius,
            context_channels,
        }
    }

    pub fn zeros(radius: usize, context_channels: usize) -> Self {
        let (motion_in, gate_in) = Self::shapes(radius, context_channels);
        Self {
            motion: Tensor::zeros(axes_kernel2d(MOTION_CHANNELS, motion_in, 3, 3)),
            gate_update: Tensor::zeros(axes_kernel2d(HIDDEN_CHANNELS, gate_in, 3, 3)),
            gate_reset: Tensor::zeros(axes_kernel2d(HIDDEN_CHANNELS, gate_in, 3, 3)),
            candidate: Tensor::zeros(axes_kernel2d(HIDDEN_CHANNELS, gate_in, 3, 3)),
            head: Tensor::zeros(axes_kernel2d(1, HIDDEN_CHANNELS, 3, 3)),
            head_bias: T::zero(),
            lookup_radius: radius,
            context_channels,
        }
    }
}

/// Sample the fused volume at disparities `d + o` for offsets
/// `o in [-r, r]`, interpolating linearly along the disparity axis and
/// clamping out-of-range positions to the volume edge.
pub fn lookup<T: Scalar>(
    volume: &FusedVolume<T>,
    d: &Tensor<T>,
    radius: usize,
) -> CoreResult<Tensor<T>> {
    let (d_max, h, w) = volume.fused.dims3("lookup")?;
    let (dh, dw) = d.dims2("lookup")?;
    if (dh, dw) != (h, w) {
        return Err(CoreError::shape(
            "lookup",
            format!("disparity {dh}x{dw} vs volume {h}x{w}"),
        ));
    }
    let slots = 2 * radius + 1;
    let top = T::from_f64((d_max - 1) as f64);
    let mut out = Tensor::zeros(axes_chw(slots, h, w));
    for (slot, off) in (-(radius as isize)..=radius as isize).enumerate() {
        let off = T::from_f64(off as f64);
        for y in 0..h {
            for x in 0..w {
                let pos = (d.at2(y, x) + off).max(T::zero()).min(top);
                let i0 = Float::floor(pos).as_f64() as usize;
                let i1 = (i0 + 1).min(d_max - 1);
                let frac = pos - T::from_f64(i0 as f64);
                let v = volume.fused.at3(i0, y, x)
                    + frac * (volume.fused.at3(i1, y, x) - volume.fused.at3(i0, y, x));
                out.set3(slot, y, x, v);
            }
        }
    }
    Ok(out)
}

/// One GRU step: encode motion from the lookup slab and the current
/// disparity, gate the hidden state against the context, then apply the
/// update head. Appends `d' = d + delta` to the history.
pub fn gru_step<T: Scalar>(
    state: &mut DisparityState<T>,
    context: &Tensor<T>,
    lookup_feats: &Tensor<T>,
    weights: &UpdaterWeights<T>,
) -> CoreResult<()> {
    let (h, w) = state.d.dims2("gru_step")?;
    let (ctx_c, ctx_h, ctx_w) = context.dims3("gru_step")?;
    if (ctx_h, ctx_w) != (h, w) || ctx_c != weights.context_channels {
        return Err(CoreError::shape(
            "gru_step",
            format!(
                "context [{ctx_c},{ctx_h},{ctx_w}] does not match state {h}x{w} with {} channels",
                weights.context_channels
            ),
        ));
    }
    let slope = T::from_f64(crate::pyramid::LEAKY_SLOPE);
    let d_plane = Tensor::new(axes_chw(1, h, w), state.d.data().to_vec())?;
    let motion_in = concat_channels(&[lookup_feats, &d_plane])?;
    let mut motion = conv2d(&motion_in, &weights.motion)?;
    motion.map_inplace(|v| leaky_relu(v, slope));

    let gate_in = concat_channels(&[&state.hidden, context, &motion])?;
    let mut update = conv2d(&gate_in, &weights.gate_update)?;
    update.map_inplace(sigmoid);
    let mut reset = conv2d(&gate_in, &weights.gate_reset)?;
    reset.map_inplace(sigmoid);

    let gated_hidden = state.hidden.zip_map(&reset, "gru_step", |hv, rv| hv * rv)?;
    let cand_in = concat_channels(&[&gated_hidden, context, &motion])?;
    let mut cand = conv2d(&cand_in, &weights.candidate)?;
    cand.map_inplace(|v| v.tanh());

    // h' = (1 - z) * h + z * h~
    let mut new_hidden = state.hidden.clone();
    {
        let hd = new_hidden.data_mut();
        let (zd, cd) = (update.data(), cand.data());
        for i in 0..hd.len() {
            hd[i] = (T::one() - zd[i]) * hd[i] + zd[i] * cd[i];
        }
    }

    let delta = conv2d(&new_hidden, &weights.head)?;
    let bias = weights.head_bias;
    let new_d = Tensor::from_fn(state.d.axes().to_vec(), |idx| {
        state.d.at2(idx[0], idx[1]) + delta.at3(0, idx[0], idx[1]) + bias
    });
    state.hidden = new_hidden;
    state.d = new_d;
    state.history.push(state.d.clone());
    Ok(())
}

/// Run `n_iters` GRU steps from `d_0`; the returned history holds
/// `d_0 .. d_n` in order.
pub fn iterate<T: Scalar>(
    volume: &FusedVolume<T>,
    d0: Tensor<T>,
    context: &Tensor<T>,
    weights: &UpdaterWeights<T>,
    n_iters: usize,
) -> CoreResult<DisparityState<T>> {
    let mut state = DisparityState::new(d0, HIDDEN_CHANNELS)?;
    for _ in 0..n_iters {
        let feats = lookup(volume, &state.d, weights.lookup_radius)?;
        gru_step(&mut state, context, &feats, weights)?;
    }
    Ok(state)
}
