//! Motif mining: the 1-D matrix-profile reference and the 2-D motif-channel
//! attention that distils geometry repeated across feature channels.
//!
//! The 1-D path is the textbook brute-force matrix profile and serves as the
//! conceptual oracle. The 2-D path high-passes a feature stack, applies a
//! bank of learnable 3x3 windows to the spectrum of every channel, sums over
//! channels, and returns the inverse transform of each motif plane.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex;
use num_traits::Float;

use crate::kernels::{dft2d, gaussian_lowpass, idft2d};
use crate::rng::{seeded_rng, uniform_tensor};
use crate::tensor::{
    Axis, AxisRole, ComplexTensor, CoreError, CoreResult, Scalar, Tensor,
};

/// A real-valued series queried for repeated subsequences.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per-start-index nearest-neighbor distances under the exclusion rule.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProfile {
    /// Distance to the nearest non-overlapping subsequence; `INFINITY` when
    /// no admissible neighbor exists (possible near `n = 2L`).
    pub distances: Vec<f64>,
    /// Start index of that nearest neighbor (ties resolved to the lowest).
    pub indices: Vec<usize>,
    /// Subsequence length.
    pub window: usize,
}

impl MatrixProfile {
    /// The motif pair: the start index with the smallest distance and its
    /// neighbor, ties broken by lowest first then lowest second index.
    pub fn motif_pair(&self) -> (usize, usize) {
        let mut best = 0;
        for i in 1..self.distances.len() {
            if self.distances[i] < self.distances[best] {
                best = i;
            }
        }
        (best, self.indices[best])
    }

    pub fn motif_distance(&self) -> f64 {
        let (a, _) = self.motif_pair();
        self.distances[a]
    }
}

fn subseq_dist(values: &[f64], a: usize, b: usize, len: usize) -> f64 {
    let mut acc = 0.0;
    for k in 0..len {
        let d = values[a + k] - values[b + k];
        acc += d * d;
    }
    Float::sqrt(acc)
}

/// Brute-force matrix profile with plain Euclidean distances and the
/// exclusion zone `|i - j| >= L` that forbids trivially overlapping matches.
pub fn matrix_profile_1d(series: &TimeSeries, window: usize) -> CoreResult<MatrixProfile> {
    let n = series.len();
    if window < 2 {
        return Err(CoreError::invalid(
            "matrix_profile_1d",
            format!("subsequence length must be at least 2, got {window}"),
        ));
    }
    if n < 2 * window {
        return Err(CoreError::invalid(
            "matrix_profile_1d",
            format!("series of length {n} is shorter than 2L = {}", 2 * window),
        ));
    }
    let starts = n - window + 1;
    let values = series.values();
    let mut distances = Vec::with_capacity(starts);
    let mut indices = Vec::with_capacity(starts);
    for i in 0..starts {
        let mut best = f64::INFINITY;
        let mut best_j = i;
        for j in 0..starts {
            if i.abs_diff(j) < window {
                continue;
            }
            let d = subseq_dist(values, i, j, window);
            if d < best {
                best = d;
                best_j = j;
            }
        }
        distances.push(best);
        indices.push(best_j);
    }
    Ok(MatrixProfile {
        distances,
        indices,
        window,
    })
}

/// Normalization applied to each motif plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NormMode {
    /// Scale every nonzero plane to unit L2 norm; zero planes stay zero.
    #[default]
    L2,
    None,
}

/// A bank of learnable 3x3 sliding windows, one per motif channel.
#[derive(Clone, Debug, PartialEq)]
pub struct MotifBank<T> {
    windows: Tensor<T>,
    seed: u64,
}

impl<T: Scalar> MotifBank<T> {
    /// Fresh bank with `n_s` windows of independent uniform weights in
    /// `[-0.5, 0.5]` from the given seed.
    pub fn seeded(n_s: usize, seed: u64) -> CoreResult<Self> {
        if n_s == 0 {
            return Err(CoreError::invalid(
                "motif bank",
                "need at least one window".into(),
            ));
        }
        let mut rng = seeded_rng(seed);
        let windows = uniform_tensor(&mut rng, bank_axes(n_s), -0.5, 0.5);
        Ok(Self { windows, seed })
    }

    pub fn from_windows(windows: Tensor<T>) -> CoreResult<Self> {
        let (n_s, kh, kw) = windows.dims3("motif bank")?;
        if n_s == 0 || (kh, kw) != (3, 3) {
            return Err(CoreError::invalid(
                "motif bank",
                format!("expected [N_s,3,3] windows, got {:?}", windows.shape()),
            ));
        }
        Ok(Self { windows, seed: 0 })
    }

    pub fn n_s(&self) -> usize {
        self.windows.dim(0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn windows(&self) -> &Tensor<T> {
        &self.windows
    }

    /// Flat view of the `N_s * 9` window weights (the trainable parameters).
    pub fn params(&self) -> Vec<f64> {
        self.windows.data().iter().map(|v| v.as_f64()).collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> CoreResult<()> {
        if params.len() != self.windows.numel() {
            return Err(CoreError::shape(
                "motif bank",
                format!(
                    "expected {} parameters, got {}",
                    self.windows.numel(),
                    params.len()
                ),
            ));
        }
        for (dst, &src) in self.windows.data_mut().iter_mut().zip(params) {
            *dst = T::from_f64(src);
        }
        Ok(())
    }

    /// One window per line, nine scalars each, parseable by [`MotifBank::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n_s() {
            for i in 0..3 {
                for j in 0..3 {
                    if i + j > 0 {
                        out.push(' ');
                    }
                    out.push_str(&format!("{}", self.windows.at3(s, i, j).as_f64()));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> CoreResult<Self> {
        let mut rows: Vec<T> = Vec::new();
        let mut n_s = 0;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|e| {
                CoreError::invalid("motif bank", format!("line {}: {e}", ln + 1))
            })?;
            if vals.len() != 9 {
                return Err(CoreError::invalid(
                    "motif bank",
                    format!("line {}: expected 9 weights, got {}", ln + 1, vals.len()),
                ));
            }
            rows.extend(vals.into_iter().map(T::from_f64));
            n_s += 1;
        }
        if n_s == 0 {
            return Err(CoreError::invalid(
                "motif bank",
                "no windows in text".into(),
            ));
        }
        Self::from_windows(Tensor::new(bank_axes(n_s), rows)?)
    }
}

fn bank_axes(n_s: usize) -> Vec<Axis> {
    alloc::vec![
        Axis::new(AxisRole::Motif, n_s),
        Axis::new(AxisRole::Height, 3),
        Axis::new(AxisRole::Width, 3),
    ]
}

/// Spatial motif planes produced by the attention stage.
#[derive(Clone, Debug, PartialEq)]
pub struct MotifChannels<T> {
    /// `[N_s, H, W]` planes, independent of the input channel count.
    pub planes: Tensor<T>,
    pub norm: NormMode,
}

/// High-pass a feature stack and move it to the frequency domain:
/// the spectrum of `f - G(f)` with `G` the 3x3 Gaussian low-pass.
pub fn highpass_frequency<T: Scalar>(f: &Tensor<T>) -> CoreResult<ComplexTensor<T>> {
    let low = gaussian_lowpass(f)?;
    dft2d(&f.sub(&low)?)
}

/// Motif channels of a feature stack: high-pass, per-window spectral
/// cross-correlation summed over channels, inverse transform, normalization.
pub fn motif_channels<T: Scalar>(
    f: &Tensor<T>,
    bank: &MotifBank<T>,
    norm: NormMode,
) -> CoreResult<MotifChannels<T>> {
    let (_, h, w) = f.dims3("motif_channels")?;
    if h < 3 || w < 3 {
        return Err(CoreError::invalid(
            "motif_channels",
            format!("need at least 3x3 spatial extent, got {h}x{w}"),
        ));
    }
    let ffre = highpass_frequency(f)?;
    motif_channels_from_freq(&ffre, bank, norm)
}

/// Same as [`motif_channels`] but starting from a precomputed high-passed
/// spectrum; the fitting loop caches that spectrum because only the window
/// weights change between evaluations.
pub fn motif_channels_from_freq<T: Scalar>(
    ffre: &ComplexTensor<T>,
    bank: &MotifBank<T>,
    norm: NormMode,
) -> CoreResult<MotifChannels<T>> {
    let (c, h, w) = ffre.dims3("motif_channels")?;
    let n_s = bank.n_s();
    let mut freq = ComplexTensor::zeros(alloc::vec![
        Axis::new(AxisRole::Motif, n_s),
        Axis::new(AxisRole::Height, h),
        Axis::new(AxisRole::Width, w),
    ]);
    // The 3x3 window runs as a zero-padded cross-correlation over each
    // channel's spectral plane; channel contributions accumulate in a fixed
    // order so results are reproducible.
    for s in 0..n_s {
        for y in 0..h {
            for x in 0..w {
                let mut acc = Complex::new(T::zero(), T::zero());
                for ci in 0..c {
                    for dy in 0..3usize {
                        let iy = y as isize + dy as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for dx in 0..3usize {
                            let ix = x as isize + dx as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let wgt = bank.windows().at3(s, dy, dx);
                            let v = ffre.at3(ci, iy as usize, ix as usize);
                            acc = acc + Complex::new(wgt * v.re, wgt * v.im);
                        }
                    }
                }
                freq.set3(s, y, x, acc);
            }
        }
    }
    let (mut planes, _imag) = idft2d(&freq)?;
    if norm == NormMode::L2 {
        for s in 0..n_s {
            let mut sq = T::zero();
            for y in 0..h {
                for x in 0..w {
                    let v = planes.at3(s, y, x);
                    sq = sq + v * v;
                }
            }
            let l2 = sq.sqrt();
            if l2 > T::zero() {
                for y in 0..h {
                    for x in 0..w {
                        let v = planes.at3(s, y, x);
                        planes.set3(s, y, x, v / l2);
                    }
                }
            }
        }
    }
    Ok(MotifChannels { planes, norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::conv2d;
    use crate::rng::{seeded_rng, uniform_tensor};
    use crate::tensor::{axes_chw, axes_kernel2d};

    #[test]
    fn exact_repeat_is_the_motif() {
        let series = TimeSeries::new(alloc::vec![0.0, 1.0, 0.0, 5.0, 5.0, 0.0, 1.0, 0.0]);
        let mp = matrix_profile_1d(&series, 3).unwrap();
        assert_eq!(mp.motif_pair(), (0, 5));
        assert_eq!(mp.motif_distance(), 0.0);
    }

    #[test]
    fn constant_series_breaks_ties_low() {
        let series = TimeSeries::new(alloc::vec![2.0; 12]);
        let mp = matrix_profile_1d(&series, 3).unwrap();
        assert!(mp.distances.iter().all(|&d| d == 0.0));
        assert_eq!(mp.motif_pair(), (0, 3));
    }

    #[test]
    fn rejects_short_series_and_tiny_windows() {
        let series = TimeSeries::new(alloc::vec![1.0; 7]);
        assert!(matrix_profile_1d(&series, 4).is_err());
        assert!(matrix_profile_1d(&series, 1).is_err());
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = seeded_rng(31);
        let series = TimeSeries::new(
            (0..32).map(|_| rand::Rng::random::<f64>(&mut rng) * 4.0 - 2.0).collect(),
        );
        let window = 4;
        let mp = matrix_profile_1d(&series, window).unwrap();

        // Independently coded O(n^2 L) sweep.
        let v = series.values();
        let starts = v.len() - window + 1;
        for i in 0..starts {
            let mut best = f64::INFINITY;
            let mut best_j = i;
            for j in 0..starts {
                if (i as isize - j as isize).unsigned_abs() < window {
                    continue;
                }
                let mut acc = 0.0;
                for k in 0..window {
                    acc += (v[i + k] - v[j + k]).powi(2);
                }
                let d = acc.sqrt();
                if d < best {
                    best = d;
                    best_j = j;
                }
            }
            assert_eq!(mp.distances[i], best);
            assert_eq!(mp.indices[i], best_j);
        }
        // Pair distance is symmetric.
        let (a, b) = mp.motif_pair();
        assert_eq!(
            subseq_dist(v, a, b, window),
            subseq_dist(v, b, a, window)
        );
    }

    #[test]
    fn highpass_kills_constant_images_exactly() {
        let img = Tensor::<f64>::filled(axes_chw(2, 6, 6), 3.75);
        let spec = highpass_frequency(&img).unwrap();
        assert_eq!(spec.abs_max(), 0.0);
    }

    #[test]
    fn highpass_is_linear() {
        let mut rng = seeded_rng(41);
        let a = uniform_tensor::<f64>(&mut rng, axes_chw(1, 6, 6), -1.0, 1.0);
        let b = uniform_tensor::<f64>(&mut rng, axes_chw(1, 6, 6), -1.0, 1.0);
        let combo = a.scale(2.0).add(&b.scale(-0.5)).unwrap();
        let left = highpass_frequency(&combo).unwrap();
        let fa = highpass_frequency(&a).unwrap();
        let fb = highpass_frequency(&b).unwrap();
        let mut max = 0.0f64;
        for i in 0..left.numel() {
            let want = fa.data()[i] * 2.0 + fb.data()[i] * -0.5;
            max = max.max((left.data()[i] - want).norm());
        }
        assert!(max < 1e-9);
    }

    #[test]
    fn zero_windows_give_zero_planes() {
        let mut rng = seeded_rng(43);
        let f = uniform_tensor::<f64>(&mut rng, axes_chw(2, 5, 5), -1.0, 1.0);
        let bank = MotifBank::from_windows(Tensor::zeros(bank_axes(3))).unwrap();
        let mc = motif_channels(&f, &bank, NormMode::L2).unwrap();
        assert_eq!(mc.planes.shape(), alloc::vec![3, 5, 5]);
        assert!(mc.planes.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_input_gives_zero_planes() {
        let f = Tensor::<f64>::filled(axes_chw(3, 6, 6), 1.25);
        let bank = MotifBank::<f64>::seeded(4, 7).unwrap();
        let mc = motif_channels(&f, &bank, NormMode::L2).unwrap();
        assert!(mc.planes.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_step_by_step_composition_oracle() {
        let mut rng = seeded_rng(47);
        let f = uniform_tensor::<f64>(&mut rng, axes_chw(2, 8, 8), -1.0, 1.0);
        let bank = MotifBank::<f64>::seeded(2, 9).unwrap();
        let got = motif_channels(&f, &bank, NormMode::None).unwrap();

        // Oracle: run the window as conv2d over the real and imaginary
        // spectral planes separately, sum channels, inverse-transform.
        let ffre = highpass_frequency(&f).unwrap();
        let mut re_in = Tensor::<f64>::zeros(axes_chw(2, 8, 8));
        let mut im_in = Tensor::<f64>::zeros(axes_chw(2, 8, 8));
        for c in 0..2 {
            for y in 0..8 {
                for x in 0..8 {
                    re_in.set3(c, y, x, ffre.at3(c, y, x).re);
                    im_in.set3(c, y, x, ffre.at3(c, y, x).im);
                }
            }
        }
        for s in 0..2usize {
            // One output channel summing both input channels with the same
            // window reproduces the channel accumulation.
            let mut k = Tensor::<f64>::zeros(axes_kernel2d(1, 2, 3, 3));
            for ci in 0..2 {
                for dy in 0..3 {
                    for dx in 0..3 {
                        k.set4(0, ci, dy, dx, bank.windows().at3(s, dy, dx));
                    }
                }
            }
            let re_s = conv2d(&re_in, &k).unwrap();
            let im_s = conv2d(&im_in, &k).unwrap();
            let mut spec = ComplexTensor::<f64>::zeros(axes_chw(1, 8, 8));
            for y in 0..8 {
                for x in 0..8 {
                    spec.set3(0, y, x, Complex::new(re_s.at3(0, y, x), im_s.at3(0, y, x)));
                }
            }
            let (plane, _) = idft2d(&spec).unwrap();
            for y in 0..8 {
                for x in 0..8 {
                    let diff = (got.planes.at3(s, y, x) - plane.at3(0, y, x)).abs();
                    assert!(diff < 1e-12, "motif plane {s} differs at ({y},{x})");
                }
            }
        }
    }

    #[test]
    fn l2_mode_is_scale_and_offset_invariant() {
        let mut rng = seeded_rng(53);
        let f = uniform_tensor::<f64>(&mut rng, axes_chw(2, 8, 8), -1.0, 1.0);
        let bank = MotifBank::<f64>::seeded(4, 11).unwrap();
        let base = motif_channels(&f, &bank, NormMode::L2).unwrap();
        let scaled = motif_channels(&f.scale(3.7), &bank, NormMode::L2).unwrap();
        let offset = motif_channels(&f.map(|v| v + 2.5), &bank, NormMode::L2).unwrap();
        let mut max_s = 0.0f64;
        let mut max_o = 0.0f64;
        for i in 0..base.planes.numel() {
            max_s = max_s.max((base.planes.data()[i] - scaled.planes.data()[i]).abs());
            max_o = max_o.max((base.planes.data()[i] - offset.planes.data()[i]).abs());
        }
        assert!(max_s < 1e-6, "scale invariance violated: {max_s}");
        assert!(max_o < 1e-6, "offset invariance violated: {max_o}");
        // Nonzero planes carry unit norm.
        for s in 0..4 {
            let mut sq = 0.0;
            for y in 0..8 {
                for x in 0..8 {
                    sq += base.planes.at3(s, y, x).powi(2);
                }
            }
            assert!((sq.sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bank_text_round_trip() {
        let bank = MotifBank::<f64>::seeded(4, 99).unwrap();
        let text = bank.to_text();
        assert_eq!(text.lines().count(), 4);
        let back = MotifBank::<f64>::from_text(&text).unwrap();
        assert_eq!(back.windows(), bank.windows());
        assert!(MotifBank::<f64>::from_text("1 2 3\n").is_err());
    }
}
