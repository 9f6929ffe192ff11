//! The motif-channel correlation volume: group-wise correlation, the
//! channel-affinity product, embedded channel correlation, broadcast fusion,
//! and the soft-argmax initial disparity.
//!
//! Disparity `d` at quarter resolution pairs the left column `w` with the
//! right column `w + d` under the default [`ShiftSign::Plus`] convention
//! (the form the correlation equations are written in); [`ShiftSign::Minus`]
//! flips the pairing to `w - d`. Out-of-range pairings contribute zero cost.

use alloc::format;

use crate::kernels::{conv3d, leaky_relu, softmax};
use crate::motif::MotifChannels;
use crate::rng::{fanin_kernel, seeded_rng};
use crate::tensor::{
    axes_dhw, axes_gdhw, axes_hw, axes_kernel3d, axes_schw, Axis, AxisRole, CoreError,
    CoreResult, Scalar, Tensor,
};

/// Which right-view column a disparity level selects.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShiftSign {
    /// Pair left `w` with right `w + d` (the printed correlation form, and
    /// the convention the synthetic generator produces).
    #[default]
    Plus,
    /// Pair left `w` with right `w - d`.
    Minus,
}

impl ShiftSign {
    /// Right-view column paired with left column `w` at disparity `d`, or
    /// `None` when it falls outside `[0, width)`.
    #[inline]
    pub fn shifted(self, w: usize, d: usize, width: usize) -> Option<usize> {
        match self {
            ShiftSign::Plus => {
                let ws = w + d;
                (ws < width).then_some(ws)
            }
            ShiftSign::Minus => w.checked_sub(d),
        }
    }
}

/// Group-wise correlation volume `[N_g, D_max, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupVolume<T> {
    pub volume: Tensor<T>,
    /// Feature channel count the groups were split from.
    pub channels: usize,
    pub shift: ShiftSign,
}

impl<T: Scalar> GroupVolume<T> {
    pub fn groups(&self) -> usize {
        self.volume.dim(0)
    }

    pub fn d_max(&self) -> usize {
        self.volume.dim(1)
    }
}

/// Group-wise correlation of quarter-scale features: per group, the inner
/// product of left features at `w` with right features at the shifted
/// column, scaled by the reciprocal group width.
pub fn gwc_volume<T: Scalar>(
    f_l: &Tensor<T>,
    f_r: &Tensor<T>,
    d_max: usize,
    n_g: usize,
    shift: ShiftSign,
) -> CoreResult<GroupVolume<T>> {
    let (n_c, h, w) = f_l.dims3("gwc_volume")?;
    if f_r.shape() != f_l.shape() {
        return Err(CoreError::shape(
            "gwc_volume",
            format!("left {:?} vs right {:?}", f_l.shape(), f_r.shape()),
        ));
    }
    if n_g == 0 || n_c % n_g != 0 {
        return Err(CoreError::invalid(
            "gwc_volume",
            format!("{n_c} channels do not split into {n_g} groups"),
        ));
    }
    if d_max == 0 || d_max > w {
        return Err(CoreError::invalid(
            "gwc_volume",
            format!("d_max {d_max} exceeds feature width {w}"),
        ));
    }
    let group = n_c / n_g;
    let scale = T::one() / T::from_f64(group as f64);
    let mut volume = Tensor::zeros(axes_gdhw(n_g, d_max, h, w));
    for g in 0..n_g {
        for d in 0..d_max {
            for y in 0..h {
                for x in 0..w {
                    let Some(xs) = shift.shifted(x, d, w) else {
                        continue;
                    };
                    let mut acc = T::zero();
                    for c in g * group..(g + 1) * group {
                        acc = acc + f_l.at3(c, y, x) * f_r.at3(c, y, xs);
                    }
                    volume.set4(g, d, y, x, acc * scale);
                }
            }
        }
    }
    Ok(GroupVolume {
        volume,
        channels: n_c,
        shift,
    })
}

/// Channel-affinity product `[N_s, N_c, H, W]`: every motif plane scales
/// every feature channel elementwise. No reduction happens here.
#[derive(Clone, Debug, PartialEq)]
pub struct CampTensor<T> {
    pub values: Tensor<T>,
}

pub fn camp<T: Scalar>(mc: &MotifChannels<T>, f: &Tensor<T>) -> CoreResult<CampTensor<T>> {
    let (n_s, mh, mw) = mc.planes.dims3("camp")?;
    let (n_c, h, w) = f.dims3("camp")?;
    if (mh, mw) != (h, w) {
        return Err(CoreError::shape(
            "camp",
            format!("motif planes {mh}x{mw} vs features {h}x{w}"),
        ));
    }
    let mut values = Tensor::zeros(axes_schw(n_s, n_c, h, w));
    for s in 0..n_s {
        for c in 0..n_c {
            for y in 0..h {
                for x in 0..w {
                    values.set4(s, c, y, x, mc.planes.at3(s, y, x) * f.at3(c, y, x));
                }
            }
        }
    }
    Ok(CampTensor { values })
}

/// Seeded 3x3x3 embedding kernels with `k_e` outputs for the channel
/// correlation.
pub fn embed_weights<T: Scalar>(k_e: usize, seed: u64) -> Tensor<T> {
    let mut rng = seeded_rng(seed);
    fanin_kernel(&mut rng, axes_kernel3d(k_e, 1, 3, 3, 3))
}

/// Channel correlation volume `[D_max, H, W]` plus the embedding kernels
/// that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelCorrVolume<T> {
    pub volume: Tensor<T>,
    pub embed: Tensor<T>,
}

/// Embed one affinity stack: each motif slice `[N_c, H, W]` runs through the
/// 3-D convolution as a single-channel volume over (channel, height, width),
/// giving `k_e` embedding values per site.
fn embed_camp<T: Scalar>(camp: &CampTensor<T>, embed: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let (n_s, n_c, h, w) = camp.values.dims4("channel_correlation")?;
    let k_e = embed.dim(0);
    let mut out = Tensor::zeros(alloc::vec![
        Axis::new(AxisRole::Motif, n_s),
        Axis::new(AxisRole::Channel, k_e),
        Axis::new(AxisRole::Index, n_c),
        Axis::new(AxisRole::Height, h),
        Axis::new(AxisRole::Width, w),
    ]);
    let plane = n_c * h * w;
    for s in 0..n_s {
        let slice = Tensor::new(
            alloc::vec![
                Axis::new(AxisRole::Channel, 1),
                Axis::new(AxisRole::Index, n_c),
                Axis::new(AxisRole::Height, h),
                Axis::new(AxisRole::Width, w),
            ],
            camp.values.data()[s * plane..(s + 1) * plane].to_vec(),
        )?;
        let emb = conv3d(&slice, embed)?;
        out.data_mut()[s * k_e * plane..(s + 1) * k_e * plane].copy_from_slice(emb.data());
    }
    Ok(out)
}

/// Correlate embedded affinity stacks across the disparity shift.
///
/// With `camp_r = None` the left stack is correlated with its own shifted
/// copy, exactly as the single-view equation is written; passing the
/// right-view stack correlates left against right instead.
pub fn channel_correlation<T: Scalar>(
    camp_l: &CampTensor<T>,
    camp_r: Option<&CampTensor<T>>,
    embed: &Tensor<T>,
    d_max: usize,
    shift: ShiftSign,
) -> CoreResult<ChannelCorrVolume<T>> {
    let (n_s, n_c, h, w) = camp_l.values.dims4("channel_correlation")?;
    let (k_e, e_cin, k1, k2, k3) = embed.dims5("channel_correlation")?;
    if (e_cin, k1, k2, k3) != (1, 3, 3, 3) {
        return Err(CoreError::shape(
            "channel_correlation",
            format!("embedding kernels must be [K_e,1,3,3,3], got {:?}", embed.shape()),
        ));
    }
    if d_max == 0 || d_max > w {
        return Err(CoreError::invalid(
            "channel_correlation",
            format!("d_max {d_max} exceeds width {w}"),
        ));
    }
    let e_l = embed_camp(camp_l, embed)?;
    let e_r = match camp_r {
        Some(r) => {
            if r.values.shape() != camp_l.values.shape() {
                return Err(CoreError::shape(
                    "channel_correlation",
                    format!(
                        "left stack {:?} vs right stack {:?}",
                        camp_l.values.shape(),
                        r.values.shape()
                    ),
                ));
            }
            Some(embed_camp(r, embed)?)
        }
        None => None,
    };
    let e_r = e_r.as_ref().unwrap_or(&e_l);
    let mut volume = Tensor::zeros(axes_dhw(d_max, h, w));
    for d in 0..d_max {
        for y in 0..h {
            for x in 0..w {
                let Some(xs) = shift.shifted(x, d, w) else {
                    continue;
                };
                let mut acc = T::zero();
                for s in 0..n_s {
                    for c in 0..n_c {
                        for k in 0..k_e {
                            acc = acc + e_l.at5(s, k, c, y, x) * e_r.at5(s, k, c, y, xs);
                        }
                    }
                }
                volume.set3(d, y, x, acc);
            }
        }
    }
    Ok(ChannelCorrVolume {
        volume,
        embed: embed.clone(),
    })
}

/// Fused cost volume `[D_max, H, W]` with the per-group projected volumes
/// `[N_g, D_max, H, W]` retained for the initial-disparity head.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedVolume<T> {
    pub fused: Tensor<T>,
    pub per_group: Tensor<T>,
}

impl<T: Scalar> FusedVolume<T> {
    pub fn d_max(&self) -> usize {
        self.fused.dim(0)
    }
}

/// Broadcast the channel correlation over the group volume and sum groups:
/// `V_g = C_g(g) * C_c`, `C = sum_g V_g`.
pub fn mccv_combine<T: Scalar>(
    gv: &GroupVolume<T>,
    cc: &ChannelCorrVolume<T>,
) -> CoreResult<FusedVolume<T>> {
    let (n_g, d_max, h, w) = gv.volume.dims4("mccv_combine")?;
    let (cd, ch, cw) = cc.volume.dims3("mccv_combine")?;
    if (cd, ch, cw) != (d_max, h, w) {
        return Err(CoreError::shape(
            "mccv_combine",
            format!("group volume {:?} vs channel volume {:?}", gv.volume.shape(), cc.volume.shape()),
        ));
    }
    let mut per_group = Tensor::zeros(axes_gdhw(n_g, d_max, h, w));
    let mut fused = Tensor::zeros(axes_dhw(d_max, h, w));
    for g in 0..n_g {
        for d in 0..d_max {
            for y in 0..h {
                for x in 0..w {
                    let v = gv.volume.at4(g, d, y, x) * cc.volume.at3(d, y, x);
                    per_group.set4(g, d, y, x, v);
                    fused.set3(d, y, x, fused.at3(d, y, x) + v);
                }
            }
        }
    }
    Ok(FusedVolume { fused, per_group })
}

/// Two-layer 3-D aggregation head reducing the group stack to one score per
/// volume site.
#[derive(Clone, Debug, PartialEq)]
pub struct AggWeights<T> {
    pub w1: Tensor<T>,
    pub w2: Tensor<T>,
}

/// Hidden width of the aggregation head.
pub const AGG_HIDDEN: usize = 8;

impl<T: Scalar> AggWeights<T> {
    pub fn seeded(n_g: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let w1 = fanin_kernel(&mut rng, axes_kernel3d(AGG_HIDDEN, n_g, 3, 3, 3));
        let w2 = fanin_kernel(&mut rng, axes_kernel3d(1, AGG_HIDDEN, 3, 3, 3));
        Self { w1, w2 }
    }
}

/// Expected disparity under the softmax of scores `[D, H, W]`; lies in
/// `[0, D-1]` for any input and is invariant to constant score offsets.
pub fn disparity_expectation<T: Scalar>(scores: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let (d_max, h, w) = scores.dims3("disparity_expectation")?;
    let p = softmax(scores, 0)?;
    let mut out = Tensor::zeros(axes_hw(h, w));
    for d in 0..d_max {
        let dv = T::from_f64(d as f64);
        for y in 0..h {
            for x in 0..w {
                out.set2(y, x, out.at2(y, x) + dv * p.at3(d, y, x));
            }
        }
    }
    Ok(out)
}

/// Initial disparity map: aggregate the per-group volumes with the two-layer
/// head (leaky rectifier between), then take the soft-argmax expectation
/// over the disparity axis.
pub fn init_disparity<T: Scalar>(
    per_group: &Tensor<T>,
    agg: &AggWeights<T>,
) -> CoreResult<Tensor<T>> {
    let (_, d_max, h, w) = per_group.dims4("init_disparity")?;
    let slope = T::from_f64(crate::pyramid::LEAKY_SLOPE);
    let mut hidden = conv3d(per_group, &agg.w1)?;
    hidden.map_inplace(|v| leaky_relu(v, slope));
    let scores = conv3d(&hidden, &agg.w2)?;
    let scores = Tensor::new(axes_dhw(d_max, h, w), scores.into_data())?;
    disparity_expectation(&scores)
}

/// Hard argmax over the disparity axis of a fused volume (ties to the
/// lowest disparity). This is the zero-training readout.
pub fn volume_argmax<T: Scalar>(volume: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let (d_max, h, w) = volume.dims3("volume_argmax")?;
    let mut out = Tensor::zeros(axes_hw(h, w));
    for y in 0..h {
        for x in 0..w {
            let mut best = 0usize;
            for d in 1..d_max {
                if volume.at3(d, y, x) > volume.at3(best, y, x) {
                    best = d;
                }
            }
            out.set2(y, x, T::from_f64(best as f64));
        }
    }
    Ok(out)
}
