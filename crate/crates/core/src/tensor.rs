//! Dense row-major tensors with role-tagged axes.
//!
//! `Tensor` is the universal carrier for images, feature maps, kernels and
//! cost volumes. Axes carry a semantic role (channel, height, disparity, ...)
//! so shape errors read as domain errors rather than bare index mismatches.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex;
use num_traits::Float;

/// Scalar element type. `f64` is the oracle/test mode, `f32` the runtime
/// default; all tolerances quoted in this crate assume `f64`.
pub trait Scalar: Float + fmt::Debug + fmt::Display + Default + 'static {
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Semantic role of a tensor axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisRole {
    Channel,
    Height,
    Width,
    Disparity,
    Group,
    Motif,
    /// Generic index axis (lookup offsets, coordinate pairs, ...).
    Index,
}

impl fmt::Display for AxisRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AxisRole::Channel => "channel",
            AxisRole::Height => "height",
            AxisRole::Width => "width",
            AxisRole::Disparity => "disparity",
            AxisRole::Group => "group",
            AxisRole::Motif => "motif",
            AxisRole::Index => "index",
        };
        f.write_str(name)
    }
}

/// One tensor axis: a role tag plus its length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Axis {
    pub role: AxisRole,
    pub len: usize,
}

impl Axis {
    pub fn new(role: AxisRole, len: usize) -> Self {
        Self { role, len }
    }
}

pub fn axes_hw(h: usize, w: usize) -> Vec<Axis> {
    vec![
        Axis::new(AxisRole::Height, h),
        Axis::new(AxisRole::Width, w),
    ]
}

pub fn axes_chw(c: usize, h: usize, w: usize) -> Vec<Axis> {
    vec![
        Axis::new(AxisRole::Channel, c),
        Axis::new(AxisRole::Height, h),
        Axis::new(AxisRole::Width, w),
    ]
}

pub fn axes_dhw(d: usize, h: usize, w: usize) -> Vec<Axis> {
    vec![
        Axis::new(AxisRole::Disparity, d),
        Axis::new(AxisRole::Height, h),
        Axis::new(AxisRole::Width, w),
    ]
}

pub fn axes_gdhw(g: usize, d: usize, h: usize, w: usize) -> Vec<Axis> {
    vec![
        Axis::new(AxisRole::Group, g),
        Axis::new(AxisRole::Disparity, d),
        Axis::new(AxisRole::Height, h),
        Axis::new(AxisRole::Width, w),
    ]
}

pub fn axes_schw(s: usize, c: usize, h: usize, w: usize) -> Vec<Axis> {
    vec![
        Axis::new(AxisRole::Motif, s),
        Axis::new(AxisRole::Channel, c),
        Axis::new(AxisRole::Height, h),
        Axis::new(AxisRole::Width, w),
    ]
}

/// 2-D convolution kernel stack: `[out, in, kh, kw]`.
pub fn axes_kernel2d(co: usize, ci: usize, kh: usize, kw: usize) -> Vec<Axis> {
    vec![
        Axis::new(AxisRole::Channel, co),
        Axis::new(AxisRole::Channel, ci),
        Axis::new(AxisRole::Height, kh),
        Axis::new(AxisRole::Width, kw),
    ]
}

/// 3-D convolution kernel stack: `[out, in, k1, k2, k3]`.
pub fn axes_kernel3d(co: usize, ci: usize, k1: usize, k2: usize, k3: usize) -> Vec<Axis> {
    vec![
        Axis::new(AxisRole::Channel, co),
        Axis::new(AxisRole::Channel, ci),
        Axis::new(AxisRole::Index, k1),
        Axis::new(AxisRole::Height, k2),
        Axis::new(AxisRole::Width, k3),
    ]
}

/// Errors shared by every numeric module in this crate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoreError {
    ShapeMismatch { op: &'static str, detail: String },
    InvalidArgument { op: &'static str, detail: String },
}

impl CoreError {
    pub fn shape(op: &'static str, detail: String) -> Self {
        Self::ShapeMismatch { op, detail }
    }

    pub fn invalid(op: &'static str, detail: String) -> Self {
        Self::InvalidArgument { op, detail }
    }
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch { op, detail } => write!(f, "{op}: shape mismatch: {detail}"),
            Self::InvalidArgument { op, detail } => write!(f, "{op}: invalid argument: {detail}"),
        }
    }
}

impl core::error::Error for CoreError {}

pub type CoreResult<T> = Result<T, CoreError>;

/// Dense row-major tensor over the declared axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    axes: Vec<Axis>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(axes: Vec<Axis>, data: Vec<T>) -> CoreResult<Self> {
        let numel = checked_numel(&axes)?;
        if numel != data.len() {
            return Err(CoreError::shape(
                "tensor",
                format!("axes hold {numel} elements but data has {}", data.len()),
            ));
        }
        Ok(Self { axes, data })
    }

    pub fn zeros(axes: Vec<Axis>) -> Self {
        let numel = checked_numel(&axes).expect("axis lengths must be positive");
        Self {
            axes,
            data: vec![T::zero(); numel],
        }
    }

    pub fn filled(axes: Vec<Axis>, value: T) -> Self {
        let numel = checked_numel(&axes).expect("axis lengths must be positive");
        Self {
            axes,
            data: vec![value; numel],
        }
    }

    /// Build from a function of the multi-index (row-major visit order).
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let numel = checked_numel(&axes).expect("axis lengths must be positive");
        let mut idx = vec![0usize; axes.len()];
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(f(&idx));
            for ax in (0..axes.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < axes[ax].len {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { axes, data }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.axes[i].len
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn dims2(&self, op: &'static str) -> CoreResult<(usize, usize)> {
        self.expect_rank(op, 2)?;
        Ok((self.dim(0), self.dim(1)))
    }

    pub fn dims3(&self, op: &'static str) -> CoreResult<(usize, usize, usize)> {
        self.expect_rank(op, 3)?;
        Ok((self.dim(0), self.dim(1), self.dim(2)))
    }

    pub fn dims4(&self, op: &'static str) -> CoreResult<(usize, usize, usize, usize)> {
        self.expect_rank(op, 4)?;
        Ok((self.dim(0), self.dim(1), self.dim(2), self.dim(3)))
    }

    pub fn dims5(&self, op: &'static str) -> CoreResult<(usize, usize, usize, usize, usize)> {
        self.expect_rank(op, 5)?;
        Ok((self.dim(0), self.dim(1), self.dim(2), self.dim(3), self.dim(4)))
    }

    fn expect_rank(&self, op: &'static str, rank: usize) -> CoreResult<()> {
        if self.rank() != rank {
            return Err(CoreError::shape(
                op,
                format!("expected rank {rank}, got shape {:?}", self.shape()),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn at2(&self, y: usize, x: usize) -> T {
        self.data[y * self.axes[1].len + x]
    }

    #[inline]
    pub fn set2(&mut self, y: usize, x: usize, v: T) {
        let w = self.axes[1].len;
        self.data[y * w + x] = v;
    }

    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> T {
        let (h, w) = (self.axes[1].len, self.axes[2].len);
        self.data[(c * h + y) * w + x]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, y: usize, x: usize, v: T) {
        let (h, w) = (self.axes[1].len, self.axes[2].len);
        self.data[(c * h + y) * w + x] = v;
    }

    #[inline]
    pub fn at4(&self, a: usize, b: usize, y: usize, x: usize) -> T {
        let (d1, d2, d3) = (self.axes[1].len, self.axes[2].len, self.axes[3].len);
        self.data[((a * d1 + b) * d2 + y) * d3 + x]
    }

    #[inline]
    pub fn set4(&mut self, a: usize, b: usize, y: usize, x: usize, v: T) {
        let (d1, d2, d3) = (self.axes[1].len, self.axes[2].len, self.axes[3].len);
        self.data[((a * d1 + b) * d2 + y) * d3 + x] = v;
    }

    #[inline]
    pub fn at5(&self, a: usize, b: usize, c: usize, y: usize, x: usize) -> T {
        let (d1, d2, d3, d4) = (
            self.axes[1].len,
            self.axes[2].len,
            self.axes[3].len,
            self.axes[4].len,
        );
        self.data[(((a * d1 + b) * d2 + c) * d3 + y) * d4 + x]
    }

    #[inline]
    pub fn set5(&mut self, a: usize, b: usize, c: usize, y: usize, x: usize, v: T) {
        let (d1, d2, d3, d4) = (
            self.axes[1].len,
            self.axes[2].len,
            self.axes[3].len,
            self.axes[4].len,
        );
        self.data[(((a * d1 + b) * d2 + c) * d3 + y) * d4 + x] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            axes: self.axes.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(T) -> T) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> CoreResult<Self> {
        if self.shape() != other.shape() {
            return Err(CoreError::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(Self {
            axes: self.axes.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> CoreResult<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> CoreResult<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| a * v)
    }

    pub fn sum(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.data {
            acc = acc + v;
        }
        acc
    }

    pub fn abs_max(&self) -> T {
        let mut m = T::zero();
        for &v in &self.data {
            let a = v.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convert element type, preserving axes.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            axes: self.axes.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

fn checked_numel(axes: &[Axis]) -> CoreResult<usize> {
    let mut numel = 1usize;
    for a in axes {
        if a.len == 0 {
            return Err(CoreError::invalid(
                "tensor",
                format!("axis {} has zero length", a.role),
            ));
        }
        numel = numel.checked_mul(a.len).ok_or_else(|| {
            CoreError::invalid("tensor", String::from("axis product overflows usize"))
        })?;
    }
    Ok(numel)
}

/// Complex-valued tensor with the same shape contract as `Tensor`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor<T> {
    axes: Vec<Axis>,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexTensor<T> {
    pub fn new(axes: Vec<Axis>, data: Vec<Complex<T>>) -> CoreResult<Self> {
        let numel = checked_numel(&axes)?;
        if numel != data.len() {
            return Err(CoreError::shape(
                "complex tensor",
                format!("axes hold {numel} elements but data has {}", data.len()),
            ));
        }
        Ok(Self { axes, data })
    }

    pub fn zeros(axes: Vec<Axis>) -> Self {
        let numel = checked_numel(&axes).expect("axis lengths must be positive");
        Self {
            axes,
            data: vec![Complex::new(T::zero(), T::zero()); numel],
        }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.axes[i].len
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn dims3(&self, op: &'static str) -> CoreResult<(usize, usize, usize)> {
        if self.rank() != 3 {
            return Err(CoreError::shape(
                op,
                format!("expected rank 3, got shape {:?}", self.shape()),
            ));
        }
        Ok((self.dim(0), self.dim(1), self.dim(2)))
    }

    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> Complex<T> {
        let (h, w) = (self.axes[1].len, self.axes[2].len);
        self.data[(c * h + y) * w + x]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, y: usize, x: usize, v: Complex<T>) {
        let (h, w) = (self.axes[1].len, self.axes[2].len);
        self.data[(c * h + y) * w + x] = v;
    }

    /// Largest |re| or |im| over all elements.
    pub fn abs_max(&self) -> T {
        let mut m = T::zero();
        for v in &self.data {
            if v.re.abs() > m {
                m = v.re.abs();
            }
            if v.im.abs() > m {
                m = v.im.abs();
            }
        }
        m
    }
}

/// Boolean mask sharing the axis contract of `Tensor`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    axes: Vec<Axis>,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(axes: Vec<Axis>, data: Vec<bool>) -> CoreResult<Self> {
        let numel = checked_numel(&axes)?;
        if numel != data.len() {
            return Err(CoreError::shape(
                "mask",
                format!("axes hold {numel} elements but data has {}", data.len()),
            ));
        }
        Ok(Self { axes, data })
    }

    pub fn filled(axes: Vec<Axis>, value: bool) -> Self {
        let numel = checked_numel(&axes).expect("axis lengths must be positive");
        Self {
            axes,
            data: vec![value; numel],
        }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn at2(&self, y: usize, x: usize) -> bool {
        self.data[y * self.axes[1].len + x]
    }

    #[inline]
    pub fn set2(&mut self, y: usize, x: usize, v: bool) {
        let w = self.axes[1].len;
        self.data[y * w + x] = v;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn all(&self) -> bool {
        self.data.iter().all(|&b| b)
    }
}
