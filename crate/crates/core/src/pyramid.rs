//! Seeded Siamese convolutional pyramids standing in for pretrained
//! feature and context extractors.
//!
//! Five stages of 3x3 stride-2 convolution with a leaky rectifier produce
//! feature maps at 1/4, 1/8, 1/16 and 1/32 scale (the 1/2-scale stem output
//! is internal). Weights come from a seeded generator scaled by
//! `1/sqrt(fan_in)` and are shared between the left and right views.

use alloc::format;
use alloc::vec::Vec;

use crate::kernels::leaky_relu;
use crate::rng::{fanin_kernel, seeded_rng};
use crate::tensor::{axes_chw, axes_kernel2d, CoreError, CoreResult, Scalar, Tensor};

/// Channel widths per pyramid scale.
pub const FEATURE_CHANNELS: [(usize, usize); 4] = [(4, 32), (8, 48), (16, 64), (32, 96)];
/// Channels of every context map.
pub const CONTEXT_CHANNELS: usize = 32;
/// Stem width at 1/2 scale.
const STEM_CHANNELS: usize = 16;
/// Leaky rectifier slope used by both extractors.
pub const LEAKY_SLOPE: f64 = 0.1;

/// Multi-scale features for one view.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewPyramid<T> {
    pub l4: Tensor<T>,
    pub l8: Tensor<T>,
    pub l16: Tensor<T>,
    pub l32: Tensor<T>,
}

impl<T: Scalar> ViewPyramid<T> {
    pub fn level(&self, scale: usize) -> CoreResult<&Tensor<T>> {
        match scale {
            4 => Ok(&self.l4),
            8 => Ok(&self.l8),
            16 => Ok(&self.l16),
            32 => Ok(&self.l32),
            _ => Err(CoreError::invalid(
                "pyramid",
                format!("no level at scale 1/{scale}"),
            )),
        }
    }
}

/// Left/right feature pyramids produced by shared weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid<T> {
    pub left: ViewPyramid<T>,
    pub right: ViewPyramid<T>,
}

/// Context maps of the left view at 1/4, 1/8 and 1/16 scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextSet<T> {
    pub c4: Tensor<T>,
    pub c8: Tensor<T>,
    pub c16: Tensor<T>,
}

impl<T: Scalar> ContextSet<T> {
    pub fn level(&self, scale: usize) -> CoreResult<&Tensor<T>> {
        match scale {
            4 => Ok(&self.c4),
            8 => Ok(&self.c8),
            16 => Ok(&self.c16),
            _ => Err(CoreError::invalid(
                "context",
                format!("no context at scale 1/{scale}"),
            )),
        }
    }
}

/// 3x3 stride-2 cross-correlation with zero padding; halves each side.
fn conv2d_stride2<T: Scalar>(input: &Tensor<T>, kernels: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let (cin, h, w) = input.dims3("conv2d_stride2")?;
    let (cout, kcin, kh, kw) = kernels.dims4("conv2d_stride2")?;
    if kcin != cin || kh != 3 || kw != 3 {
        return Err(CoreError::shape(
            "conv2d_stride2",
            format!("kernels {:?} do not fit input {:?}", kernels.shape(), input.shape()),
        ));
    }
    if h % 2 != 0 || w % 2 != 0 {
        return Err(CoreError::invalid(
            "conv2d_stride2",
            format!("spatial size {h}x{w} must be even"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(axes_chw(cout, oh, ow));
    for o in 0..cout {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = T::zero();
                for ci in 0..cin {
                    for dy in 0..3usize {
                        let iy = 2 * y as isize + dy as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for dx in 0..3usize {
                            let ix = 2 * x as isize + dx as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc = acc
                                + kernels.at4(o, ci, dy, dx)
                                    * input.at3(ci, iy as usize, ix as usize);
                        }
                    }
                }
                out.set3(o, y, x, acc);
            }
        }
    }
    Ok(out)
}

fn stage<T: Scalar>(input: &Tensor<T>, kernels: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let slope = T::from_f64(LEAKY_SLOPE);
    let mut out = conv2d_stride2(input, kernels)?;
    out.map_inplace(|v| leaky_relu(v, slope));
    Ok(out)
}

fn feature_weights<T: Scalar>(seed: u64) -> Vec<Tensor<T>> {
    let mut rng = seeded_rng(seed);
    let widths = [
        (3, STEM_CHANNELS),
        (STEM_CHANNELS, FEATURE_CHANNELS[0].1),
        (FEATURE_CHANNELS[0].1, FEATURE_CHANNELS[1].1),
        (FEATURE_CHANNELS[1].1, FEATURE_CHANNELS[2].1),
        (FEATURE_CHANNELS[2].1, FEATURE_CHANNELS[3].1),
    ];
    widths
        .iter()
        .map(|&(ci, co)| fanin_kernel(&mut rng, axes_kernel2d(co, ci, 3, 3)))
        .collect()
}

fn context_weights<T: Scalar>(seed: u64) -> Vec<Tensor<T>> {
    let mut rng = seeded_rng(seed);
    let widths = [
        (3, STEM_CHANNELS),
        (STEM_CHANNELS, CONTEXT_CHANNELS),
        (CONTEXT_CHANNELS, CONTEXT_CHANNELS),
        (CONTEXT_CHANNELS, CONTEXT_CHANNELS),
    ];
    widths
        .iter()
        .map(|&(ci, co)| fanin_kernel(&mut rng, axes_kernel2d(co, ci, 3, 3)))
        .collect()
}

fn check_input<T: Scalar>(op: &'static str, img: &Tensor<T>) -> CoreResult<(usize, usize)> {
    let (c, h, w) = img.dims3(op)?;
    if c != 3 {
        return Err(CoreError::shape(
            op,
            format!("expected a 3-channel image, got {c} channels"),
        ));
    }
    if h % 32 != 0 || w % 32 != 0 {
        return Err(CoreError::invalid(
            op,
            format!("image size {h}x{w} must divide by 32"),
        ));
    }
    Ok((h, w))
}

fn run_feature_stages<T: Scalar>(
    img: &Tensor<T>,
    weights: &[Tensor<T>],
) -> CoreResult<ViewPyramid<T>> {
    let s1 = stage(img, &weights[0])?;
    let l4 = stage(&s1, &weights[1])?;
    let l8 = stage(&l4, &weights[2])?;
    let l16 = stage(&l8, &weights[3])?;
    let l32 = stage(&l16, &weights[4])?;
    Ok(ViewPyramid { l4, l8, l16, l32 })
}

/// Extract Siamese feature pyramids for a rectified pair. Deterministic for
/// a fixed seed; both views share the same weights.
pub fn extract_features<T: Scalar>(
    img_l: &Tensor<T>,
    img_r: &Tensor<T>,
    seed: u64,
) -> CoreResult<FeaturePyramid<T>> {
    let dims_l = check_input("extract_features", img_l)?;
    let dims_r = check_input("extract_features", img_r)?;
    if dims_l != dims_r {
        return Err(CoreError::shape(
            "extract_features",
            format!("views differ: {dims_l:?} vs {dims_r:?}"),
        ));
    }
    let weights = feature_weights::<T>(seed);
    Ok(FeaturePyramid {
        left: run_feature_stages(img_l, &weights)?,
        right: run_feature_stages(img_r, &weights)?,
    })
}

/// Extract left-view context maps at 1/4, 1/8 and 1/16 scale.
pub fn extract_context<T: Scalar>(img_l: &Tensor<T>, seed: u64) -> CoreResult<ContextSet<T>> {
    check_input("extract_context", img_l)?;
    let weights = context_weights::<T>(seed);
    let s1 = stage(img_l, &weights[0])?;
    let c4 = stage(&s1, &weights[1])?;
    let c8 = stage(&c4, &weights[2])?;
    let c16 = stage(&c8, &weights[3])?;
    Ok(ContextSet { c4, c8, c16 })
}
