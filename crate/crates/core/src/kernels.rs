//! Dense numeric kernels: convolution, DFT, filtering, sampling, pooling,
//! softmax. Everything higher up in the pipeline is built from these.
//!
//! All operations are pure and evaluated in a fixed order, so results are
//! bit-identical run to run. Convolutions use cross-correlation semantics
//! (no kernel flip) with zero padding of half the kernel width, keeping the
//! output spatial size equal to the input.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex;
use num_traits::Float;

use crate::tensor::{
    axes_chw, axes_hw, Axis, AxisRole, ComplexTensor, CoreError, CoreResult, Mask, Scalar, Tensor,
};

/// Leaky rectifier, `x` for `x >= 0` else `slope * x`.
#[inline]
pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        slope * x
    }
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// 2-D cross-correlation of `input [Cin,H,W]` with `kernels [Cout,Cin,kh,kw]`.
///
/// Kernel sides must be odd; zero padding of `(kh/2, kw/2)` keeps the output
/// at `[Cout,H,W]`.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, kernels: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let (cin, h, w) = input.dims3("conv2d")?;
    let (cout, kcin, kh, kw) = kernels.dims4("conv2d")?;
    if kcin != cin {
        return Err(CoreError::shape(
            "conv2d",
            format!("input has {cin} channels but kernels expect {kcin}"),
        ));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(CoreError::invalid(
            "conv2d",
            format!("kernel sides must be odd, got {kh}x{kw}"),
        ));
    }
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut out = Tensor::zeros(axes_chw(cout, h, w));
    for o in 0..cout {
        for y in 0..h {
            for x in 0..w {
                let mut acc = T::zero();
                for ci in 0..cin {
                    for dy in 0..kh {
                        let iy = y as isize + dy as isize - ph;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for dx in 0..kw {
                            let ix = x as isize + dx as isize - pw;
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

/// 3-D cross-correlation of `input [Cin,D1,D2,D3]` with
/// `kernels [Cout,Cin,k1,k2,k3]`; same padding contract as [`conv2d`].
pub fn conv3d<T: Scalar>(input: &Tensor<T>, kernels: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let (cin, d1, d2, d3) = input.dims4("conv3d")?;
    let (cout, kcin, k1, k2, k3) = kernels.dims5("conv3d")?;
    if kcin != cin {
        return Err(CoreError::shape(
            "conv3d",
            format!("input has {cin} channels but kernels expect {kcin}"),
        ));
    }
    if k1 % 2 == 0 || k2 % 2 == 0 || k3 % 2 == 0 {
        return Err(CoreError::invalid(
            "conv3d",
            format!("kernel sides must be odd, got {k1}x{k2}x{k3}"),
        ));
    }
    let (p1, p2, p3) = ((k1 / 2) as isize, (k2 / 2) as isize, (k3 / 2) as isize);
    let mut out = Tensor::zeros(alloc::vec![
        Axis::new(AxisRole::Channel, cout),
        Axis::new(AxisRole::Index, d1),
        Axis::new(AxisRole::Height, d2),
        Axis::new(AxisRole::Width, d3),
    ]);
    for o in 0..cout {
        for z in 0..d1 {
            for y in 0..d2 {
                for x in 0..d3 {
                    let mut acc = T::zero();
                    for ci in 0..cin {
                        for e1 in 0..k1 {
                            let iz = z as isize + e1 as isize - p1;
                            if iz < 0 || iz >= d1 as isize {
                                continue;
                            }
                            for e2 in 0..k2 {
                                let iy = y as isize + e2 as isize - p2;
                                if iy < 0 || iy >= d2 as isize {
                                    continue;
                                }
                                for e3 in 0..k3 {
                                    let ix = x as isize + e3 as isize - p3;
                                    if ix < 0 || ix >= d3 as isize {
                                        continue;
                                    }
                                    acc = acc
                                        + kernels.at5(o, ci, e1, e2, e3)
                                            * input.at4(
                                                ci,
                                                iz as usize,
                                                iy as usize,
                                                ix as usize,
                                            );
                                }
                            }
                        }
                    }
                    out.set4(o, z, y, x, acc);
                }
            }
        }
    }
    Ok(out)
}

/// Unit-sum 3x3 Gaussian weights for sigma = 1.
fn gaussian3x3<T: Scalar>() -> [[T; 3]; 3] {
    let mut k = [[T::zero(); 3]; 3];
    let mut sum = 0.0f64;
    let mut raw = [[0.0f64; 3]; 3];
    for (dy, row) in raw.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (ry, rx) = (dy as f64 - 1.0, dx as f64 - 1.0);
            *v = (-(ry * ry + rx * rx) / 2.0).exp();
            sum += *v;
        }
    }
    for dy in 0..3 {
        for dx in 0..3 {
            k[dy][dx] = T::from_f64(raw[dy][dx] / sum);
        }
    }
    k
}

/// Per-channel 3x3 Gaussian low-pass (sigma = 1, kernel normalized to sum 1).
///
/// Borders use clamped (replicate) indexing and the filter is evaluated as
/// identity plus weighted residuals, so a constant image passes through
/// bit-exactly everywhere. This is what lets the high-pass stage kill the DC
/// component of its input exactly.
pub fn gaussian_lowpass<T: Scalar>(input: &Tensor<T>) -> CoreResult<Tensor<T>> {
    let (c, h, w) = input.dims3("gaussian_lowpass")?;
    let k = gaussian3x3::<T>();
    let mut out = Tensor::zeros(axes_chw(c, h, w));
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                let center = input.at3(ci, y, x);
                let mut acc = T::zero();
                for (dy, row) in k.iter().enumerate() {
                    let iy = (y as isize + dy as isize - 1).clamp(0, h as isize - 1) as usize;
                    for (dx, &kv) in row.iter().enumerate() {
                        let ix = (x as isize + dx as isize - 1).clamp(0, w as isize - 1) as usize;
                        acc = acc + kv * (input.at3(ci, iy, ix) - center);
                    }
                }
                out.set3(ci, y, x, center + acc);
            }
        }
    }
    Ok(out)
}

fn twiddles<T: Scalar>(n: usize, sign: f64) -> Vec<Complex<T>> {
    (0..n)
        .map(|j| {
            let theta = sign * core::f64::consts::TAU * j as f64 / n as f64;
            Complex::new(T::from_f64(theta.cos()), T::from_f64(theta.sin()))
        })
        .collect()
}

fn dft2d_planes<T: Scalar>(
    c: usize,
    h: usize,
    w: usize,
    read: impl Fn(usize, usize, usize) -> Complex<T>,
    sign: f64,
    axes: Vec<Axis>,
) -> ComplexTensor<T> {
    let tw_w = twiddles::<T>(w, sign);
    let tw_h = twiddles::<T>(h, sign);
    let mut out = ComplexTensor::zeros(axes);
    let mut tmp = alloc::vec![Complex::new(T::zero(), T::zero()); h * w];
    for ci in 0..c {
        // Rows first, then columns; the 2-D transform is separable.
        for y in 0..h {
            for v in 0..w {
                let mut acc = Complex::new(T::zero(), T::zero());
                for x in 0..w {
                    acc = acc + read(ci, y, x) * tw_w[(v * x) % w];
                }
                tmp[y * w + v] = acc;
            }
        }
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex::new(T::zero(), T::zero());
                for y in 0..h {
                    acc = acc + tmp[y * w + v] * tw_h[(u * y) % h];
                }
                out.set3(ci, u, v, acc);
            }
        }
    }
    out
}

/// Unnormalized forward 2-D DFT applied per channel.
pub fn dft2d<T: Scalar>(input: &Tensor<T>) -> CoreResult<ComplexTensor<T>> {
    let (c, h, w) = input.dims3("dft2d")?;
    Ok(dft2d_planes(
        c,
        h,
        w,
        |ci, y, x| Complex::new(input.at3(ci, y, x), T::zero()),
        -1.0,
        input.axes().to_vec(),
    ))
}

/// Inverse 2-D DFT (scaled by `1/(H*W)`). Returns the real part as the
/// result and the imaginary part separately for diagnostics; for spectra of
/// real images the latter is numerical noise.
pub fn idft2d<T: Scalar>(input: &ComplexTensor<T>) -> CoreResult<(Tensor<T>, Tensor<T>)> {
    let (c, h, w) = input.dims3("idft2d")?;
    let full = dft2d_planes(c, h, w, |ci, y, x| input.at3(ci, y, x), 1.0, input.axes().to_vec());
    let scale = T::one() / T::from_f64((h * w) as f64);
    let mut re = Tensor::zeros(input.axes().to_vec());
    let mut im = Tensor::zeros(input.axes().to_vec());
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                let v = full.at3(ci, y, x);
                re.set3(ci, y, x, v.re * scale);
                im.set3(ci, y, x, v.im * scale);
            }
        }
    }
    Ok((re, im))
}

/// Softmax along `axis` with max subtraction; output sums to one along the
/// axis for every input.
pub fn softmax<T: Scalar>(input: &Tensor<T>, axis: usize) -> CoreResult<Tensor<T>> {
    if axis >= input.rank() {
        return Err(CoreError::invalid(
            "softmax",
            format!("axis {axis} out of range for rank {}", input.rank()),
        ));
    }
    let shape = input.shape();
    let axis_len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = input.clone();
    let data = out.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let base = o * axis_len * inner + i;
            let mut max = data[base];
            for j in 1..axis_len {
                let v = data[base + j * inner];
                if v > max {
                    max = v;
                }
            }
            let mut sum = T::zero();
            for j in 0..axis_len {
                let e = (data[base + j * inner] - max).exp();
                data[base + j * inner] = e;
                sum = sum + e;
            }
            for j in 0..axis_len {
                data[base + j * inner] = data[base + j * inner] / sum;
            }
        }
    }
    Ok(out)
}

/// Bilinear sampling of `img [C,H,W]` at real-valued positions.
///
/// `coords [2,H',W']` holds x in plane 0 and y in plane 1. Samples outside
/// `[0,W-1] x [0,H-1]` are invalid and return zero.
pub fn bilinear_sample<T: Scalar>(
    img: &Tensor<T>,
    coords: &Tensor<T>,
) -> CoreResult<(Tensor<T>, Mask)> {
    let (c, h, w) = img.dims3("bilinear_sample")?;
    let (two, oh, ow) = coords.dims3("bilinear_sample")?;
    if two != 2 {
        return Err(CoreError::shape(
            "bilinear_sample",
            format!("coords must have 2 planes (x, y), got {two}"),
        ));
    }
    let mut values = Tensor::zeros(axes_chw(c, oh, ow));
    let mut valid = Mask::filled(axes_hw(oh, ow), false);
    let (wf, hf) = (T::from_f64((w - 1) as f64), T::from_f64((h - 1) as f64));
    for y in 0..oh {
        for x in 0..ow {
            let sx = coords.at3(0, y, x);
            let sy = coords.at3(1, y, x);
            // NaN coordinates fail these comparisons and stay invalid.
            let inside = sx >= T::zero() && sx <= wf && sy >= T::zero() && sy <= hf;
            if !inside {
                continue;
            }
            valid.set2(y, x, true);
            let x0 = sx.floor().as_f64() as usize;
            let y0 = sy.floor().as_f64() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = sx - T::from_f64(x0 as f64);
            let fy = sy - T::from_f64(y0 as f64);
            for ci in 0..c {
                let v00 = img.at3(ci, y0, x0);
                let v01 = img.at3(ci, y0, x1);
                let v10 = img.at3(ci, y1, x0);
                let v11 = img.at3(ci, y1, x1);
                let top = v00 + fx * (v01 - v00);
                let bot = v10 + fx * (v11 - v10);
                values.set3(ci, y, x, top + fy * (bot - top));
            }
        }
    }
    Ok((values, valid))
}

/// Non-overlapping k x k mean pooling; `H` and `W` must divide by `k`.
pub fn avg_pool<T: Scalar>(input: &Tensor<T>, k: usize) -> CoreResult<Tensor<T>> {
    let (c, h, w) = input.dims3("avg_pool")?;
    if k == 0 || h % k != 0 || w % k != 0 {
        return Err(CoreError::invalid(
            "avg_pool",
            format!("{h}x{w} not divisible by window {k}"),
        ));
    }
    let (oh, ow) = (h / k, w / k);
    let inv = T::one() / T::from_f64((k * k) as f64);
    let mut out = Tensor::zeros(axes_chw(c, oh, ow));
    for ci in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = T::zero();
                for dy in 0..k {
                    for dx in 0..k {
                        acc = acc + input.at3(ci, y * k + dy, x * k + dx);
                    }
                }
                out.set3(ci, y, x, acc * inv);
            }
        }
    }
    Ok(out)
}

/// Bilinear upsampling by an integer factor using half-pixel centers
/// (`src = (dst + 0.5)/factor - 0.5`, clamped at the borders).
pub fn upsample_bilinear<T: Scalar>(input: &Tensor<T>, factor: usize) -> CoreResult<Tensor<T>> {
    let (c, h, w) = input.dims3("upsample_bilinear")?;
    if factor == 0 {
        return Err(CoreError::invalid(
            "upsample_bilinear",
            format!("factor must be positive, got {factor}"),
        ));
    }
    let (oh, ow) = (h * factor, w * factor);
    let mut out = Tensor::zeros(axes_chw(c, oh, ow));
    let inv = 1.0 / factor as f64;
    for y in 0..oh {
        let sy = ((y as f64 + 0.5) * inv - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = T::from_f64(sy - y0 as f64);
        for x in 0..ow {
            let sx = ((x as f64 + 0.5) * inv - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = T::from_f64(sx - x0 as f64);
            for ci in 0..c {
                let v00 = input.at3(ci, y0, x0);
                let v01 = input.at3(ci, y0, x1);
                let v10 = input.at3(ci, y1, x0);
                let v11 = input.at3(ci, y1, x1);
                let top = v00 + fx * (v01 - v00);
                let bot = v10 + fx * (v11 - v10);
                out.set3(ci, y, x, top + fy * (bot - top));
            }
        }
    }
    Ok(out)
}

/// Concatenate tensors of shape `[Ci,H,W]` along the channel axis.
pub fn concat_channels<T: Scalar>(parts: &[&Tensor<T>]) -> CoreResult<Tensor<T>> {
    let (_, h, w) = parts
        .first()
        .ok_or_else(|| CoreError::invalid("concat_channels", "empty input list".into()))?
        .dims3("concat_channels")?;
    let mut total = 0;
    for p in parts {
        let (pc, ph, pw) = p.dims3("concat_channels")?;
        if (ph, pw) != (h, w) {
            return Err(CoreError::shape(
                "concat_channels",
                format!("spatial sizes differ: {ph}x{pw} vs {h}x{w}"),
            ));
        }
        total += pc;
    }
    let mut data = Vec::with_capacity(total * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor::new(axes_chw(total, h, w), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, uniform_tensor};
    use crate::tensor::axes_kernel2d;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn conv2d_one_by_one_identity() {
        let mut rng = seeded_rng(11);
        let img = uniform_tensor::<f64>(&mut rng, axes_chw(2, 4, 5), -1.0, 1.0);
        let k = Tensor::new(
            axes_kernel2d(2, 2, 1, 1),
            alloc::vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let out = conv2d(&img, &k).unwrap();
        assert_eq!(out.data(), img.data());
    }

    #[test]
    fn conv2d_box_filter_keeps_interior_constants() {
        let img = Tensor::<f64>::filled(axes_chw(1, 5, 5), 3.0);
        let k = Tensor::filled(axes_kernel2d(1, 1, 3, 3), 1.0 / 9.0);
        let out = conv2d(&img, &k).unwrap();
        // Zero padding shrinks border sums; the interior keeps the constant.
        for y in 1..4 {
            for x in 1..4 {
                assert_close(out.at3(0, y, x), 3.0, 1e-12);
            }
        }
        assert_close(out.at3(0, 0, 0), 3.0 * 4.0 / 9.0, 1e-12);
    }

    #[test]
    fn conv2d_matches_nested_loop_oracle() {
        let mut rng = seeded_rng(7);
        let img = uniform_tensor::<f64>(&mut rng, axes_chw(1, 4, 4), -1.0, 1.0);
        let k = uniform_tensor::<f64>(&mut rng, axes_kernel2d(1, 1, 3, 3), -1.0, 1.0);
        let out = conv2d(&img, &k).unwrap();
        for y in 0..4usize {
            for x in 0..4usize {
                let mut want = 0.0;
                for dy in 0..3usize {
                    for dx in 0..3usize {
                        let iy = y as isize + dy as isize - 1;
                        let ix = x as isize + dx as isize - 1;
                        if iy < 0 || iy >= 4 || ix < 0 || ix >= 4 {
                            continue;
                        }
                        want += k.at4(0, 0, dy, dx) * img.at3(0, iy as usize, ix as usize);
                    }
                }
                assert_eq!(out.at3(0, y, x), want);
            }
        }
    }

    #[test]
    fn conv2d_rejects_channel_mismatch_and_even_kernels() {
        let img = Tensor::<f64>::filled(axes_chw(2, 4, 4), 1.0);
        let bad_ch = Tensor::filled(axes_kernel2d(1, 3, 3, 3), 1.0);
        assert!(matches!(
            conv2d(&img, &bad_ch).unwrap_err(),
            CoreError::ShapeMismatch { .. }
        ));
        let bad_k = Tensor::filled(axes_kernel2d(1, 2, 2, 2), 1.0);
        assert!(matches!(
            conv2d(&img, &bad_k).unwrap_err(),
            CoreError::InvalidArgument { .. }
        ));
    }

    #[test]
    fn conv3d_delta_kernel_is_identity() {
        let mut rng = seeded_rng(3);
        let vol = uniform_tensor::<f64>(&mut rng, crate::tensor::axes_gdhw(1, 3, 4, 4), -1.0, 1.0);
        let mut k = Tensor::zeros(crate::tensor::axes_kernel3d(1, 1, 3, 3, 3));
        k.set5(0, 0, 1, 1, 1, 1.0);
        let out = conv3d(&vol, &k).unwrap();
        assert_eq!(out.data(), vol.data());
    }

    #[test]
    fn conv3d_zero_kernel_gives_zero() {
        let mut rng = seeded_rng(4);
        let vol = uniform_tensor::<f64>(&mut rng, crate::tensor::axes_gdhw(2, 3, 4, 4), -1.0, 1.0);
        let k = Tensor::zeros(crate::tensor::axes_kernel3d(1, 2, 3, 3, 3));
        let out = conv3d(&vol, &k).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv3d_matches_nested_loop_oracle() {
        let mut rng = seeded_rng(5);
        let vol = uniform_tensor::<f64>(&mut rng, crate::tensor::axes_gdhw(2, 3, 4, 4), -1.0, 1.0);
        let k = uniform_tensor::<f64>(&mut rng, crate::tensor::axes_kernel3d(2, 2, 3, 3, 3), -1.0, 1.0);
        let out = conv3d(&vol, &k).unwrap();
        for o in 0..2usize {
            for z in 0..3usize {
                for y in 0..4usize {
                    for x in 0..4usize {
                        let mut want = 0.0;
                        for ci in 0..2usize {
                            for e1 in 0..3usize {
                                for e2 in 0..3usize {
                                    for e3 in 0..3usize {
                                        let iz = z as isize + e1 as isize - 1;
                                        let iy = y as isize + e2 as isize - 1;
                                        let ix = x as isize + e3 as isize - 1;
                                        if iz < 0 || iz >= 3 || iy < 0 || iy >= 4 || ix < 0 || ix >= 4 {
                                            continue;
                                        }
                                        want += k.at5(o, ci, e1, e2, e3)
                                            * vol.at4(ci, iz as usize, iy as usize, ix as usize);
                                    }
                                }
                            }
                        }
                        assert_eq!(out.at4(o, z, y, x), want);
                    }
                }
            }
        }
    }

    #[test]
    fn gaussian_keeps_constants_exactly() {
        let img = Tensor::<f64>::filled(axes_chw(2, 6, 7), 4.25);
        let out = gaussian_lowpass(&img).unwrap();
        assert_eq!(out.data(), img.data());
    }

    #[test]
    fn gaussian_impulse_response_reproduces_kernel() {
        let mut img = Tensor::<f64>::zeros(axes_chw(1, 5, 5));
        img.set3(0, 2, 2, 1.0);
        let out = gaussian_lowpass(&img).unwrap();
        let k = gaussian3x3::<f64>();
        for dy in 0..3 {
            for dx in 0..3 {
                assert_close(out.at3(0, 1 + dy, 1 + dx), k[dy][dx], 1e-12);
            }
        }
        assert_close(out.at3(0, 0, 0), 0.0, 1e-12);
    }

    #[test]
    fn gaussian_matches_nested_loop_oracle() {
        let mut rng = seeded_rng(9);
        let img = uniform_tensor::<f64>(&mut rng, axes_chw(1, 6, 6), -2.0, 2.0);
        let out = gaussian_lowpass(&img).unwrap();
        let k = gaussian3x3::<f64>();
        for y in 0..6usize {
            for x in 0..6usize {
                let center = img.at3(0, y, x);
                let mut residual = 0.0;
                for dy in 0..3usize {
                    for dx in 0..3usize {
                        let iy = (y as isize + dy as isize - 1).clamp(0, 5) as usize;
                        let ix = (x as isize + dx as isize - 1).clamp(0, 5) as usize;
                        residual += k[dy][dx] * (img.at3(0, iy, ix) - center);
                    }
                }
                assert_eq!(out.at3(0, y, x), center + residual);
            }
        }
    }

    #[test]
    fn dft_constant_image_is_dc_only() {
        let img = Tensor::<f64>::filled(axes_chw(1, 4, 4), 2.5);
        let spec = dft2d(&img).unwrap();
        assert_close(spec.at3(0, 0, 0).re, 16.0 * 2.5, 1e-9);
        assert_close(spec.at3(0, 0, 0).im, 0.0, 1e-9);
        for u in 0..4 {
            for v in 0..4 {
                if (u, v) != (0, 0) {
                    assert!(spec.at3(0, u, v).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn dft_impulse_has_flat_spectrum() {
        let mut img = Tensor::<f64>::zeros(axes_chw(1, 4, 4));
        img.set3(0, 1, 2, 1.0);
        let spec = dft2d(&img).unwrap();
        for u in 0..4 {
            for v in 0..4 {
                assert_close(spec.at3(0, u, v).norm(), 1.0, 1e-12);
            }
        }
    }

    #[test]
    fn dft_round_trip_recovers_input() {
        let mut rng = seeded_rng(21);
        let img = uniform_tensor::<f64>(&mut rng, axes_chw(1, 8, 8), -3.0, 3.0);
        let (re, im) = idft2d(&dft2d(&img).unwrap()).unwrap();
        let mut max = 0.0f64;
        for (a, b) in re.data().iter().zip(img.data()) {
            max = max.max((a - b).abs());
        }
        assert!(max < 1e-6 * img.abs_max());
        assert!(im.abs_max() < 1e-9);
    }

    #[test]
    fn softmax_uniform_and_peaked() {
        let t = Tensor::<f64>::filled(axes_hw(1, 4), 7.0);
        let s = softmax(&t, 1).unwrap();
        for &v in s.data() {
            assert_close(v, 0.25, 1e-12);
        }
        let t = Tensor::new(axes_hw(1, 4), alloc::vec![0.0, 1000.0, 0.0, 0.0]).unwrap();
        let s = softmax(&t, 1).unwrap();
        assert_close(s.at2(0, 1), 1.0, 1e-6);
        assert!(s.at2(0, 0) < 1e-6);
    }

    #[test]
    fn softmax_matches_direct_formula() {
        let mut rng = seeded_rng(13);
        let t = uniform_tensor::<f64>(&mut rng, axes_chw(2, 3, 4), -2.0, 2.0);
        let s = softmax(&t, 0).unwrap();
        for y in 0..3 {
            for x in 0..4 {
                let sum: f64 = (0..2).map(|c| t.at3(c, y, x).exp()).sum();
                for c in 0..2 {
                    assert_close(s.at3(c, y, x), t.at3(c, y, x).exp() / sum, 1e-12);
                }
            }
        }
    }

    #[test]
    fn bilinear_integer_coords_are_exact() {
        let mut rng = seeded_rng(17);
        let img = uniform_tensor::<f64>(&mut rng, axes_chw(2, 3, 4), -1.0, 1.0);
        let coords = Tensor::new(
            axes_chw(2, 1, 2),
            alloc::vec![3.0, 0.0, 2.0, 1.0], // (x=3,y=2), (x=0,y=1)
        )
        .unwrap();
        let (vals, mask) = bilinear_sample(&img, &coords).unwrap();
        assert!(mask.all());
        assert_eq!(vals.at3(0, 0, 0), img.at3(0, 2, 3));
        assert_eq!(vals.at3(1, 0, 1), img.at3(1, 1, 0));
    }

    #[test]
    fn bilinear_outside_is_invalid_zero() {
        let img = Tensor::<f64>::filled(axes_chw(1, 3, 3), 5.0);
        let coords = Tensor::new(
            axes_chw(2, 1, 2),
            alloc::vec![-0.5, 2.5, 1.0, 1.0],
        )
        .unwrap();
        let (vals, mask) = bilinear_sample(&img, &coords).unwrap();
        assert!(!mask.at2(0, 0));
        assert!(!mask.at2(0, 1));
        assert_eq!(vals.at3(0, 0, 0), 0.0);
        assert_eq!(vals.at3(0, 0, 1), 0.0);
    }

    #[test]
    fn bilinear_midpoint_is_patch_mean() {
        let img = Tensor::new(axes_chw(1, 2, 2), alloc::vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let coords = Tensor::new(axes_chw(2, 1, 1), alloc::vec![0.5, 0.5]).unwrap();
        let (vals, mask) = bilinear_sample(&img, &coords).unwrap();
        assert!(mask.all());
        assert_close(vals.at3(0, 0, 0), 4.0, 1e-12);
    }

    #[test]
    fn avg_pool_mean_and_constants() {
        let img = Tensor::new(axes_chw(1, 2, 2), alloc::vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let out = avg_pool(&img, 2).unwrap();
        assert_close(out.at3(0, 0, 0), 4.0, 1e-12);
        let c = Tensor::<f64>::filled(axes_chw(1, 4, 4), 2.0);
        assert!(avg_pool(&c, 2).unwrap().data().iter().all(|&v| (v - 2.0).abs() < 1e-12));
        assert!(upsample_bilinear(&c, 3).unwrap().data().iter().all(|&v| (v - 2.0).abs() < 1e-12));
        assert!(matches!(
            avg_pool(&c, 3).unwrap_err(),
            CoreError::InvalidArgument { .. }
        ));
    }

    #[test]
    fn pool_then_upsample_matches_composed_oracle() {
        let mut rng = seeded_rng(23);
        let img = uniform_tensor::<f64>(&mut rng, axes_chw(1, 4, 4), -1.0, 1.0);
        let got = upsample_bilinear(&avg_pool(&img, 2).unwrap(), 2).unwrap();

        // Independent composition: nested-loop pool, then nested-loop
        // half-pixel bilinear resize.
        let mut pooled = [[0.0f64; 2]; 2];
        for y in 0..2 {
            for x in 0..2 {
                let mut acc = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        acc += img.at3(0, 2 * y + dy, 2 * x + dx);
                    }
                }
                pooled[y][x] = acc / 4.0;
            }
        }
        for y in 0..4usize {
            for x in 0..4usize {
                let sy = ((y as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0);
                let sx = ((x as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0);
                let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(1), (x0 + 1).min(1));
                let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
                let top = pooled[y0][x0] + fx * (pooled[y0][x1] - pooled[y0][x0]);
                let bot = pooled[y1][x0] + fx * (pooled[y1][x1] - pooled[y1][x0]);
                assert_close(got.at3(0, y, x), top + fy * (bot - top), 1e-12);
            }
        }
    }
}
