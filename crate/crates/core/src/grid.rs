//! Square images and the matrix-free first- and second-order difference
//! operators built from the backward difference matrix `D`.
//!
//! Pixel ordering is row-major: pixel `(r, c)` lives at index `r * n + c`.
//! With this vectorisation a Kronecker product `X ⊗ Y` applies `X` along the
//! row index `r` and `Y` along the column index `c`. Consequently
//!
//! * `I ⊗ D` differences *within* each row (along `c`),
//! * `D ⊗ I` differences *across* rows (along `r`).
//!
//! `D` is the `n × n` backward difference matrix with `D[j][j] = 1`,
//! `D[j][j-1] = -1` for `j >= 1` and an all-zero first row, so there is no
//! wrap-around and no padding at the image border.
//!
//! ```text
//! B1 = [ I ⊗ D ;  D ⊗ I ]
//! B2 = [ I ⊗ (-DᵀD) ; (-Dᵀ) ⊗ D ; (-DᵀD) ⊗ I ; D ⊗ (-Dᵀ) ]
//! ```

use crate::error::{Error, Result};
use crate::linop::LinearOperator;

/// A nonnegative activity map on an `n × n` grid, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    n: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::shape(format!(
                "image of side {n} needs {} pixels, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Image { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Image {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Image {
            n,
            data: vec![value; n * n],
        }
    }

    /// Builds an image of side `n` where pixel `(r, c)` is `f(r, c)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        Image { n, data }
    }

    /// Grid side length.
    pub fn side(&self) -> usize {
        self.n
    }

    /// Number of pixels, `n²`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        crate::linop::norm(&self.data)
    }

    fn check_side(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::shape(format!(
                "expected image of side {n}, got side {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Output of `B1`: two stacked `d`-vectors. Group `i` is `(data[i], data[d + i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderField {
    n: usize,
    data: Vec<f64>,
}

/// Output of `B2`: four stacked `d`-vectors. Group `i` is
/// `(data[i], data[d + i], data[2d + i], data[3d + i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderField {
    n: usize,
    data: Vec<f64>,
}

/// Common view over the stacked difference fields, used by the groupwise
/// regularizer code.
pub trait GroupField: Sized + Clone {
    /// Number of stacked blocks (2 for first order, 4 for second order).
    const BLOCKS: usize;

    fn from_parts(n: usize, data: Vec<f64>) -> Result<Self>;
    fn side(&self) -> usize;
    fn as_slice(&self) -> &[f64];
    fn as_mut_slice(&mut self) -> &mut [f64];

    fn zeros(n: usize) -> Self {
        Self::from_parts(n, vec![0.0; Self::BLOCKS * n * n]).expect("length is consistent")
    }

    /// Pixel count `d`, which is also the number of groups.
    fn groups(&self) -> usize {
        self.side() * self.side()
    }

    /// Copies group `i` into `out` (length `BLOCKS`).
    fn group(&self, i: usize, out: &mut [f64]) {
        let d = self.groups();
        let data = self.as_slice();
        for (b, o) in out.iter_mut().enumerate().take(Self::BLOCKS) {
            *o = data[b * d + i];
        }
    }
}

macro_rules! impl_group_field {
    ($ty:ident, $blocks:expr, $what:expr) => {
        impl $ty {
            pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
                <Self as GroupField>::from_parts(n, data)
            }

            pub fn len(&self) -> usize {
                self.data.len()
            }

            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.data
            }
        }

        impl GroupField for $ty {
            const BLOCKS: usize = $blocks;

            fn from_parts(n: usize, data: Vec<f64>) -> Result<Self> {
                if data.len() != $blocks * n * n {
                    return Err(Error::shape(format!(
                        "{} for side {n} needs length {}, got {}",
                        $what,
                        $blocks * n * n,
                        data.len()
                    )));
                }
                Ok($ty { n, data })
            }

            fn side(&self) -> usize {
                self.n
            }

            fn as_slice(&self) -> &[f64] {
                &self.data
            }

            fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.data
            }
        }
    };
}

impl_group_field!(FirstOrderField, 2, "first-order field");
impl_group_field!(SecondOrderField, 4, "second-order field");

// 1D stencils applied along one axis of an n×n buffer. `out` is overwritten.

/// `out = (I ⊗ D) x`: backward difference along columns within each row.
fn diff_within_rows(n: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..n {
        let row = &x[r * n..(r + 1) * n];
        let dst = &mut out[r * n..(r + 1) * n];
        dst[0] = 0.0;
        for c in 1..n {
            dst[c] = row[c] - row[c - 1];
        }
    }
}

/// `out = (I ⊗ Dᵀ) y`.
fn diff_t_within_rows(n: usize, y: &[f64], out: &mut [f64]) {
    for r in 0..n {
        let row = &y[r * n..(r + 1) * n];
        let dst = &mut out[r * n..(r + 1) * n];
        for c in 0..n {
            let own = if c >= 1 { row[c] } else { 0.0 };
            let next = if c + 1 < n { row[c + 1] } else { 0.0 };
            dst[c] = own - next;
        }
    }
}

/// `out = (D ⊗ I) x`: backward difference across rows.
fn diff_across_rows(n: usize, x: &[f64], out: &mut [f64]) {
    out[..n].iter_mut().for_each(|v| *v = 0.0);
    for r in 1..n {
        for c in 0..n {
            out[r * n + c] = x[r * n + c] - x[(r - 1) * n + c];
        }
    }
}

/// `out = (Dᵀ ⊗ I) y`.
fn diff_t_across_rows(n: usize, y: &[f64], out: &mut [f64]) {
    for r in 0..n {
        for c in 0..n {
            let own = if r >= 1 { y[r * n + c] } else { 0.0 };
            let next = if r + 1 < n { y[(r + 1) * n + c] } else { 0.0 };
            out[r * n + c] = own - next;
        }
    }
}

/// Writes `B1 x` into `out` (length `2d`).
pub fn first_diff_into(n: usize, x: &[f64], out: &mut [f64]) {
    let d = n * n;
    let (h, v) = out.split_at_mut(d);
    diff_within_rows(n, x, h);
    diff_across_rows(n, x, v);
}

/// Writes `B1ᵀ y` into `out` (length `d`).
pub fn first_diff_adjoint_into(n: usize, y: &[f64], out: &mut [f64]) {
    let d = n * n;
    let mut tmp = vec![0.0; d];
    diff_t_within_rows(n, &y[..d], out);
    diff_t_across_rows(n, &y[d..2 * d], &mut tmp);
    for (o, t) in out.iter_mut().zip(&tmp) {
        *o += t;
    }
}

/// Writes `B2 x` into `out` (length `4d`).
pub fn second_diff_into(n: usize, x: &[f64], out: &mut [f64]) {
    let d = n * n;
    let mut dc = vec![0.0; d];
    let mut dr = vec![0.0; d];
    diff_within_rows(n, x, &mut dc);
    diff_across_rows(n, x, &mut dr);
    let (b1, rest) = out.split_at_mut(d);
    let (b2, rest) = rest.split_at_mut(d);
    let (b3, b4) = rest.split_at_mut(d);
    // I ⊗ (-DᵀD)
    diff_t_within_rows(n, &dc, b1);
    // (-Dᵀ) ⊗ D
    diff_t_across_rows(n, &dc, b2);
    // (-DᵀD) ⊗ I
    diff_t_across_rows(n, &dr, b3);
    // D ⊗ (-Dᵀ)
    diff_t_within_rows(n, &dr, b4);
    out.iter_mut().for_each(|v| *v = -*v);
}

/// Writes `B2ᵀ y` into `out` (length `d`).
pub fn second_diff_adjoint_into(n: usize, y: &[f64], out: &mut [f64]) {
    let d = n * n;
    let mut t1 = vec![0.0; d];
    let mut t2 = vec![0.0; d];
    // DᵀD along c for block 1, DᵀD along r for block 3.
    diff_within_rows(n, &y[..d], &mut t1);
    diff_across_rows(n, &y[2 * d..3 * d], &mut t2);
    let mut acc = vec![0.0; d];
    diff_t_within_rows(n, &t1, &mut acc);
    diff_t_across_rows(n, &t2, out);
    for (o, a) in out.iter_mut().zip(&acc) {
        *o += a;
    }
    // (-Dᵀ ⊗ D)ᵀ = -(Dᵀ along c)(D along r)
    diff_across_rows(n, &y[d..2 * d], &mut t1);
    diff_t_within_rows(n, &t1, &mut acc);
    for (o, a) in out.iter_mut().zip(&acc) {
        *o += a;
    }
    // (D ⊗ -Dᵀ)ᵀ = -(Dᵀ along r)(D along c)
    diff_within_rows(n, &y[3 * d..4 * d], &mut t1);
    diff_t_across_rows(n, &t1, &mut acc);
    for (o, a) in out.iter_mut().zip(&acc) {
        *o = -(*o + a);
    }
}

pub fn apply_first_diff(img: &Image) -> FirstOrderField {
    let n = img.side();
    let mut out = vec![0.0; 2 * n * n];
    first_diff_into(n, img.as_slice(), &mut out);
    FirstOrderField { n, data: out }
}

pub fn apply_first_diff_adjoint(field: &FirstOrderField) -> Image {
    let n = field.n;
    let mut out = vec![0.0; n * n];
    first_diff_adjoint_into(n, &field.data, &mut out);
    Image { n, data: out }
}

pub fn apply_second_diff(img: &Image) -> SecondOrderField {
    let n = img.side();
    let mut out = vec![0.0; 4 * n * n];
    second_diff_into(n, img.as_slice(), &mut out);
    SecondOrderField { n, data: out }
}

pub fn apply_second_diff_adjoint(field: &SecondOrderField) -> Image {
    let n = field.n;
    let mut out = vec![0.0; n * n];
    second_diff_adjoint_into(n, &field.data, &mut out);
    Image { n, data: out }
}

/// `B1` as a [`LinearOperator`] on flat vectors of an `n × n` grid.
#[derive(Clone, Copy, Debug)]
pub struct FirstDiff {
    pub n: usize,
}

/// `B2` as a [`LinearOperator`] on flat vectors of an `n × n` grid.
#[derive(Clone, Copy, Debug)]
pub struct SecondDiff {
    pub n: usize,
}

impl LinearOperator for FirstDiff {
    fn rows(&self) -> usize {
        2 * self.n * self.n
    }
    fn cols(&self) -> usize {
        self.n * self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        first_diff_into(self.n, x, y)
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        first_diff_adjoint_into(self.n, y, x)
    }
}

impl LinearOperator for SecondDiff {
    fn rows(&self) -> usize {
        4 * self.n * self.n
    }
    fn cols(&self) -> usize {
        self.n * self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        second_diff_into(self.n, x, y)
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        second_diff_adjoint_into(self.n, y, x)
    }
}

/// Checked variants that validate sizes before applying the stencils.
pub fn try_first_diff_adjoint(n: usize, field: &[f64]) -> Result<Image> {
    let f = FirstOrderField::new(n, field.to_vec())?;
    Ok(apply_first_diff_adjoint(&f))
}

pub fn try_second_diff_adjoint(n: usize, field: &[f64]) -> Result<Image> {
    let f = SecondOrderField::new(n, field.to_vec())?;
    Ok(apply_second_diff_adjoint(&f))
}

pub(crate) fn ensure_side(img: &Image, n: usize) -> Result<()> {
    img.check_side(n)
}
