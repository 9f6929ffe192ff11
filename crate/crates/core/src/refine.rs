//! Full-resolution refinement: disparity upsampling, plane-induced
//! reconstruction error, and the frequency-split penalty stage.
//!
//! The reconstruction error warps the right image into the left view and
//! subtracts the left image. Under the disparity convention used throughout
//! this crate (left column `x` pairs with right column `x + d`), the
//! rectified fast path samples the right image at `(x + d, y)`; the general
//! path evaluates the per-pixel plane-induced homography
//! `K_l (R - T N^T / D) K_r^-1`, which reduces to the fast path for
//! `R = I`, `T = (-B, 0, 0)`, `N = (0, 0, 1)` and equal intrinsics.

use alloc::format;

use crate::kernels::{
    avg_pool, bilinear_sample, concat_channels, conv2d, leaky_relu, sigmoid, upsample_bilinear,
};
use crate::rng::{fanin_kernel, seeded_rng};
use crate::tensor::{
    axes_chw, axes_hw, axes_kernel2d, CoreError, CoreResult, Mask, Scalar, Tensor,
};

/// Column-vector 3-vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Scalar> Vec3<T> {
    pub fn norm(&self) -> T {
        (self.0[0] * self.0[0] + self.0[1] * self.0[1] + self.0[2] * self.0[2]).sqrt()
    }
}

/// Row-major 3x3 matrix with just enough algebra for homographies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Scalar> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Mat3([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn mul(&self, rhs: &Mat3<T>) -> Mat3<T> {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = T::zero();
                for k in 0..3 {
                    acc = acc + self.0[i][k] * rhs.0[k][j];
                }
                *cell = acc;
            }
        }
        Mat3(out)
    }

    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let mut out = [T::zero(); 3];
        for (i, cell) in out.iter_mut().enumerate() {
            *cell = self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2];
        }
        Vec3(out)
    }

    pub fn transpose(&self) -> Mat3<T> {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn sub(&self, rhs: &Mat3<T>) -> Mat3<T> {
        let mut out = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = self.0[i][j] - rhs.0[i][j];
            }
        }
        Mat3(out)
    }

    pub fn scale(&self, a: T) -> Mat3<T> {
        let mut out = self.0;
        for row in &mut out {
            for v in row {
                *v = *v * a;
            }
        }
        Mat3(out)
    }

    pub fn det(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> CoreResult<Mat3<T>> {
        let det = self.det();
        if det == T::zero() || !det.is_finite() {
            return Err(CoreError::invalid(
                "mat3",
                format!("matrix is singular (det = {det})"),
            ));
        }
        let m = &self.0;
        let inv_det = T::one() / det;
        let cof = |a: T, b: T, c: T, d: T| (a * d - b * c) * inv_det;
        Ok(Mat3([
            [
                cof(m[1][1], m[1][2], m[2][1], m[2][2]),
                cof(m[0][2], m[0][1], m[2][2], m[2][1]),
                cof(m[0][1], m[0][2], m[1][1], m[1][2]),
            ],
            [
                cof(m[1][2], m[1][0], m[2][2], m[2][0]),
                cof(m[0][0], m[0][2], m[2][0], m[2][2]),
                cof(m[0][2], m[0][0], m[1][2], m[1][0]),
            ],
            [
                cof(m[1][0], m[1][1], m[2][0], m[2][1]),
                cof(m[0][1], m[0][0], m[2][1], m[2][0]),
                cof(m[0][0], m[0][1], m[1][0], m[1][1]),
            ],
        ]))
    }

    /// Outer product `a * b^T`.
    pub fn outer(a: &Vec3<T>, b: &Vec3<T>) -> Mat3<T> {
        let mut out = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = a.0[i] * b.0[j];
            }
        }
        Mat3(out)
    }
}

/// Calibrated stereo rig. `rot`/`trans` map right-view coordinates into the
/// left view; `baseline` and `focal` drive the disparity-to-depth
/// conversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StereoRig<T> {
    pub k_l: Mat3<T>,
    pub k_r: Mat3<T>,
    pub rot: Mat3<T>,
    pub trans: Vec3<T>,
    pub baseline: T,
    pub focal: T,
}

impl<T: Scalar> StereoRig<T> {
    /// Rectified rig: equal intrinsics, identity rotation, translation
    /// `(-B, 0, 0)`. With a fronto-parallel plane normal `(0, 0, 1)` the
    /// induced homography samples the right view at `x + d`.
    pub fn rectified(baseline: T, focal: T, cx: T, cy: T) -> Self {
        let z = T::zero();
        let k = Mat3([[focal, z, cx], [z, focal, cy], [z, z, T::one()]]);
        Self {
            k_l: k,
            k_r: k,
            rot: Mat3::identity(),
            trans: Vec3([-baseline, z, z]),
            baseline,
            focal,
        }
    }

    pub fn validate(&self) -> CoreResult<()> {
        self.k_l.inverse()?;
        self.k_r.inverse()?;
        let rtr = self.rot.transpose().mul(&self.rot);
        let eye = Mat3::identity();
        let tol = T::from_f64(1e-6);
        for i in 0..3 {
            for j in 0..3 {
                if (rtr.0[i][j] - eye.0[i][j]).abs() > tol {
                    return Err(CoreError::invalid(
                        "stereo rig",
                        format!("rotation is not orthonormal at ({i},{j})"),
                    ));
                }
            }
        }
        if !(self.baseline > T::zero()) || !(self.focal > T::zero()) {
            return Err(CoreError::invalid(
                "stereo rig",
                "baseline and focal length must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fronto-parallel (or tilted) scene plane in the right-view frame, with a
/// per-pixel perpendicular distance derived from disparity.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneModel<T> {
    pub normal: Vec3<T>,
    pub depth: Tensor<T>,
    pub valid: Mask,
}

impl<T: Scalar> PlaneModel<T> {
    pub fn from_disparity(d: &Tensor<T>, rig: &StereoRig<T>, normal: Vec3<T>) -> CoreResult<Self> {
        let n = normal.norm();
        if (n - T::one()).abs() > T::from_f64(1e-6) {
            return Err(CoreError::invalid(
                "plane model",
                format!("normal must be unit length, |N| = {n}"),
            ));
        }
        let (depth, valid) = disparity_to_depth(d, rig)?;
        Ok(Self {
            normal,
            depth,
            valid,
        })
    }
}

/// Disparities below this many pixels are treated as unresolvable.
pub const MIN_DISPARITY: f64 = 1e-3;

/// Pinhole depth `focal * baseline / d` in meters; pixels with
/// `d <= 1e-3 px` are marked invalid.
pub fn disparity_to_depth<T: Scalar>(
    d: &Tensor<T>,
    rig: &StereoRig<T>,
) -> CoreResult<(Tensor<T>, Mask)> {
    let (h, w) = d.dims2("disparity_to_depth")?;
    let eps = T::from_f64(MIN_DISPARITY);
    let fb = rig.focal * rig.baseline;
    let mut depth = Tensor::zeros(axes_hw(h, w));
    let mut valid = Mask::filled(axes_hw(h, w), false);
    for y in 0..h {
        for x in 0..w {
            let dv = d.at2(y, x);
            if dv > eps {
                depth.set2(y, x, fb / dv);
                valid.set2(y, x, true);
            }
        }
    }
    Ok((depth, valid))
}

/// Bilinear upsample a quarter-scale disparity by 4 and rescale its values
/// to full-resolution pixels.
pub fn upsample_disparity<T: Scalar>(d_quarter: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let (h, w) = d_quarter.dims2("upsample_disparity")?;
    let plane = Tensor::new(axes_chw(1, h, w), d_quarter.data().to_vec())?;
    let up = upsample_bilinear(&plane, 4)?;
    let four = T::from_f64(4.0);
    Tensor::new(axes_hw(4 * h, 4 * w), up.into_data()).map(|t| t.scale(four))
}

/// Signed per-channel difference between the warped right image and the
/// left image; invalid pixels carry zero error.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionError<T> {
    pub error: Tensor<T>,
    pub valid: Mask,
}

fn error_from_coords<T: Scalar>(
    i_l: &Tensor<T>,
    i_r: &Tensor<T>,
    coords: &Tensor<T>,
    extra_valid: Option<&Mask>,
) -> CoreResult<ReconstructionError<T>> {
    let (c, h, w) = i_l.dims3("reconstruction_error")?;
    let (warped, mut valid) = bilinear_sample(i_r, coords)?;
    if let Some(extra) = extra_valid {
        for (v, &e) in valid.data_mut().iter_mut().zip(extra.data()) {
            *v = *v && e;
        }
    }
    let mut error = Tensor::zeros(axes_chw(c, h, w));
    for y in 0..h {
        for x in 0..w {
            if !valid.at2(y, x) {
                continue;
            }
            for ci in 0..c {
                error.set3(ci, y, x, warped.at3(ci, y, x) - i_l.at3(ci, y, x));
            }
        }
    }
    Ok(ReconstructionError { error, valid })
}

/// Rectified fast path: sample the right image at `(x + d, y)` and subtract
/// the left image.
pub fn reconstruction_error_rectified<T: Scalar>(
    i_l: &Tensor<T>,
    i_r: &Tensor<T>,
    d: &Tensor<T>,
) -> CoreResult<ReconstructionError<T>> {
    let (_, h, w) = i_l.dims3("reconstruction_error")?;
    if i_r.shape() != i_l.shape() {
        return Err(CoreError::shape(
            "reconstruction_error",
            format!("left {:?} vs right {:?}", i_l.shape(), i_r.shape()),
        ));
    }
    let (dh, dw) = d.dims2("reconstruction_error")?;
    if (dh, dw) != (h, w) {
        return Err(CoreError::shape(
            "reconstruction_error",
            format!("disparity {dh}x{dw} vs image {h}x{w}"),
        ));
    }
    let coords = Tensor::from_fn(axes_chw(2, h, w), |idx| {
        let (plane, y, x) = (idx[0], idx[1], idx[2]);
        if plane == 0 {
            T::from_f64(x as f64) + d.at2(y, x)
        } else {
            T::from_f64(y as f64)
        }
    });
    error_from_coords(i_l, i_r, &coords, None)
}

/// General path: per pixel, map left homogeneous coordinates through the
/// plane-induced homography `K_l (R - T N^T / D) K_r^-1` and sample the
/// right image there.
pub fn reconstruction_error_homography<T: Scalar>(
    i_l: &Tensor<T>,
    i_r: &Tensor<T>,
    rig: &StereoRig<T>,
    plane: &PlaneModel<T>,
) -> CoreResult<ReconstructionError<T>> {
    rig.validate()?;
    let (_, h, w) = i_l.dims3("reconstruction_error")?;
    if i_r.shape() != i_l.shape() {
        return Err(CoreError::shape(
            "reconstruction_error",
            format!("left {:?} vs right {:?}", i_l.shape(), i_r.shape()),
        ));
    }
    let (dh, dw) = plane.depth.dims2("reconstruction_error")?;
    if (dh, dw) != (h, w) {
        return Err(CoreError::shape(
            "reconstruction_error",
            format!("depth {dh}x{dw} vs image {h}x{w}"),
        ));
    }
    let k_r_inv = rig.k_r.inverse()?;
    // H(p) = K_l R K_r^-1 - K_l (T N^T) K_r^-1 / D(p); only the scalar 1/D
    // varies per pixel.
    let fixed = rig.k_l.mul(&rig.rot).mul(&k_r_inv);
    let plane_part = rig.k_l.mul(&Mat3::outer(&rig.trans, &plane.normal)).mul(&k_r_inv);

    let mut coords = Tensor::zeros(axes_chw(2, h, w));
    let mut depth_ok = Mask::filled(axes_hw(h, w), false);
    let nan = T::from_f64(f64::NAN);
    for y in 0..h {
        for x in 0..w {
            if !plane.valid.at2(y, x) {
                // NaN coordinates make the sampler mark the pixel invalid.
                coords.set3(0, y, x, nan);
                coords.set3(1, y, x, nan);
                continue;
            }
            let inv_depth = T::one() / plane.depth.at2(y, x);
            let hmat = fixed.sub(&plane_part.scale(inv_depth));
            let p = Vec3([T::from_f64(x as f64), T::from_f64(y as f64), T::one()]);
            let q = hmat.mul_vec(&p);
            if q.0[2].abs() <= T::epsilon() {
                coords.set3(0, y, x, nan);
                coords.set3(1, y, x, nan);
                continue;
            }
            depth_ok.set2(y, x, true);
            coords.set3(0, y, x, q.0[0] / q.0[2]);
            coords.set3(1, y, x, q.0[1] / q.0[2]);
        }
    }
    error_from_coords(i_l, i_r, &coords, Some(&depth_ok))
}

/// Weights of the penalty stage: a 2-level UNet encoder/decoder, the gate
/// branch, and the final projection to a single-channel correction.
#[derive(Clone, Debug, PartialEq)]
pub struct RempWeights<T> {
    pub enc1: Tensor<T>,
    pub enc2: Tensor<T>,
    pub dec1: Tensor<T>,
    pub gate1: Tensor<T>,
    pub gate2: Tensor<T>,
    pub final_conv: Tensor<T>,
    pub pool_factor: usize,
}

/// UNet widths: encoder level one / level two.
pub const REMP_CHANNELS: (usize, usize) = (16, 32);
/// Pooling factor of the low-frequency branch.
pub const REMP_POOL: usize = 4;

impl<T: Scalar> RempWeights<T> {
    pub fn seeded(seed: u64) -> Self {
        let (c1, c2) = REMP_CHANNELS;
        let mut rng = seeded_rng(seed);
        Self {
            enc1: fanin_kernel(&mut rng, axes_kernel2d(c1, 4, 3, 3)),
            enc2: fanin_kernel(&mut rng, axes_kernel2d(c2, c1, 3, 3)),
            dec1: fanin_kernel(&mut rng, axes_kernel2d(c1, c1 + c2, 3, 3)),
            gate1: fanin_kernel(&mut rng, axes_kernel2d(c1, c1, 3, 3)),
            gate2: fanin_kernel(&mut rng, axes_kernel2d(c1, c1, 3, 3)),
            final_conv: fanin_kernel(&mut rng, axes_kernel2d(1, c1, 3, 3)),
            pool_factor: REMP_POOL,
        }
    }

    /// Zero the final projection; the penalty then returns its input
    /// unchanged regardless of the other weights.
    pub fn with_zero_final(mut self) -> Self {
        self.final_conv = Tensor::zeros(self.final_conv.axes().to_vec());
        self
    }
}

/// Multi-channel encoding of (disparity, error): 2-level UNet with a skip
/// connection, leaky rectifier activations, mean-pool downsampling and
/// bilinear upsampling.
fn remp_unet<T: Scalar>(
    d_prime: &Tensor<T>,
    e: &ReconstructionError<T>,
    w: &RempWeights<T>,
) -> CoreResult<Tensor<T>> {
    let (h, wd) = d_prime.dims2("remp")?;
    let slope = T::from_f64(crate::pyramid::LEAKY_SLOPE);
    let d_plane = Tensor::new(axes_chw(1, h, wd), d_prime.data().to_vec())?;
    let input = concat_channels(&[&d_plane, &e.error])?;
    let mut enc1 = conv2d(&input, &w.enc1)?;
    enc1.map_inplace(|v| leaky_relu(v, slope));
    let mut enc2 = conv2d(&avg_pool(&enc1, 2)?, &w.enc2)?;
    enc2.map_inplace(|v| leaky_relu(v, slope));
    let up = upsample_bilinear(&enc2, 2)?;
    let mut dec = conv2d(&concat_channels(&[&up, &enc1])?, &w.dec1)?;
    dec.map_inplace(|v| leaky_relu(v, slope));
    Ok(dec)
}

/// Gate branch: two 3x3 convolutions with a sigmoid head, values strictly
/// inside (0, 1).
fn latent_gate<T: Scalar>(o: &Tensor<T>, w: &RempWeights<T>) -> CoreResult<Tensor<T>> {
    let slope = T::from_f64(crate::pyramid::LEAKY_SLOPE);
    let mut g = conv2d(o, &w.gate1)?;
    g.map_inplace(|v| leaky_relu(v, slope));
    let mut g = conv2d(&g, &w.gate2)?;
    g.map_inplace(sigmoid);
    Ok(g)
}

/// Combine the branches for a given gate and subtract the projected
/// correction: `d' - Conv(LFE(o) * (1 - g) + o * g)`. Split out so the
/// gate-extreme behavior is testable directly.
pub fn remp_apply<T: Scalar>(
    d_prime: &Tensor<T>,
    o: &Tensor<T>,
    gate: &Tensor<T>,
    w: &RempWeights<T>,
) -> CoreResult<Tensor<T>> {
    let (h, wd) = d_prime.dims2("remp")?;
    let low = upsample_bilinear(&avg_pool(o, w.pool_factor)?, w.pool_factor)?;
    let mut combined = Tensor::zeros(o.axes().to_vec());
    {
        let out = combined.data_mut();
        let (od, ld, gd) = (o.data(), low.data(), gate.data());
        for i in 0..out.len() {
            out[i] = ld[i] * (T::one() - gd[i]) + od[i] * gd[i];
        }
    }
    let correction = conv2d(&combined, &w.final_conv)?;
    let mut out = Tensor::zeros(axes_hw(h, wd));
    for y in 0..h {
        for x in 0..wd {
            out.set2(y, x, d_prime.at2(y, x) - correction.at3(0, y, x));
        }
    }
    Ok(out)
}

/// Penalty refinement of a full-resolution disparity: encode (d', E),
/// split the encoding into pooled low-frequency, gated motif, and raw
/// high-frequency branches, and subtract the projected correction.
pub fn remp<T: Scalar>(
    d_prime: &Tensor<T>,
    e: &ReconstructionError<T>,
    w: &RempWeights<T>,
) -> CoreResult<Tensor<T>> {
    let (h, wd) = d_prime.dims2("remp")?;
    let (_, eh, ew) = e.error.dims3("remp")?;
    if (eh, ew) != (h, wd) {
        return Err(CoreError::shape(
            "remp",
            format!("error map {eh}x{ew} vs disparity {h}x{wd}"),
        ));
    }
    if h % w.pool_factor != 0 || wd % w.pool_factor != 0 {
        return Err(CoreError::invalid(
            "remp",
            format!("{h}x{wd} not divisible by pool factor {}", w.pool_factor),
        ));
    }
    let o = remp_unet(d_prime, e, w)?;
    let gate = latent_gate(&o, w)?;
    remp_apply(d_prime, &o, &gate, w)
}
