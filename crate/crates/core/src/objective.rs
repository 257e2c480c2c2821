//! The reconstruction objective `Φ = F + φ̃∘B + ι`: Poisson fidelity,
//! smoothed higher-order isotropic TV, the proximity operators used by the
//! solvers and a global Lipschitz bound for `∇(F + φ̃∘B)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{
    ensure_side, first_diff_adjoint_into, first_diff_into, second_diff_adjoint_into,
    second_diff_into, GroupField, Image,
};
use crate::linop::{dot, power_iteration, LinearOperator, PowerIteration, SparseMatrix};

/// Smoothing radius `ε` of the surrogate `s_ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingParams {
    pub epsilon: f64,
}

impl SmoothingParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(SmoothingParams { epsilon })
    }
}

/// Weights of the first- and second-order terms. Zero disables a term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl RegWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(RegWeights { lambda1, lambda2 })
    }

    pub fn zero() -> Self {
        RegWeights {
            lambda1: 0.0,
            lambda2: 0.0,
        }
    }
}

/// Measured counts `g`, known background mean `γ` and the system operator `A`.
#[derive(Clone, Debug)]
pub struct PoissonData {
    n: usize,
    counts: Vec<f64>,
    background: Vec<f64>,
    system: Arc<SparseMatrix>,
}

impl PoissonData {
    /// Validates shapes and signs. Nonpositive background entries are floored
    /// at `1e-12 · mean(γ)` with a warning.
    pub fn new(n: usize, counts: Vec<f64>, mut background: Vec<f64>, system: Arc<SparseMatrix>) -> Result<Self> {
        if system.cols() != n * n {
            return Err(Error::shape(format!(
                "system has {} columns, image has {} pixels",
                system.cols(),
                n * n
            )));
        }
        if counts.len() != system.rows() || background.len() != system.rows() {
            return Err(Error::shape(format!(
                "system has {} rows, counts {} and background {}",
                system.rows(),
                counts.len(),
                background.len()
            )));
        }
        if let Some(i) = counts.iter().position(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::Domain(format!("count {i} is {} (must be >= 0)", counts[i])));
        }
        if background.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("background must be finite and nonnegative".into()));
        }
        if background.iter().any(|&v| v <= 0.0) {
            let mean = background.iter().sum::<f64>() / background.len().max(1) as f64;
            let floor = if mean > 0.0 { 1e-12 * mean } else { 1e-12 };
            log::warn!("background has zero entries; flooring at {floor:e}");
            background.iter_mut().for_each(|v| *v = v.max(floor));
        }
        Ok(PoissonData {
            n,
            counts,
            background,
            system,
        })
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }

    pub fn system(&self) -> &Arc<SparseMatrix> {
        &self.system
    }
}

/// `s_ε(x)`: the Huber-type smoothing of `‖x‖₂`.
pub fn smoothed_l2(x: &[f64], eps: f64) -> f64 {
    smoothed_l2_of_norm(dot(x, x).sqrt(), eps)
}

fn smoothed_l2_of_norm(r: f64, eps: f64) -> f64 {
    if r > eps {
        r - 0.5 * eps
    } else {
        r * r / (2.0 * eps)
    }
}

/// `∇s_ε(x) = x / max(‖x‖₂, ε)`, written into `out`.
pub fn smoothed_l2_grad(x: &[f64], eps: f64, out: &mut [f64]) {
    let scale = 1.0 / dot(x, x).sqrt().max(eps);
    for (o, v) in out.iter_mut().zip(x) {
        *o = v * scale;
    }
}

/// `λ Σ_i s_ε(group_i)` over a stacked field of `blocks` blocks of length `d`.
/// When `grad` is given, overwrites it with the gradient w.r.t. the field.
fn group_smoothed_sum(
    field: &[f64],
    blocks: usize,
    lambda: f64,
    eps: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let d = field.len() / blocks;
    let mut total = 0.0;
    for i in 0..d {
        let mut sq = 0.0;
        for b in 0..blocks {
            let v = field[b * d + i];
            sq += v * v;
        }
        let r = sq.sqrt();
        total += smoothed_l2_of_norm(r, eps);
        if let Some(g) = grad.as_deref_mut() {
            let scale = lambda / r.max(eps);
            for b in 0..blocks {
                g[b * d + i] = field[b * d + i] * scale;
            }
        }
    }
    lambda * total
}

/// `Σ_i ‖group_i‖₂` (the nonsmooth group norm).
fn group_l2_sum(field: &[f64], blocks: usize) -> f64 {
    let d = field.len() / blocks;
    (0..d)
        .map(|i| {
            (0..blocks)
                .map(|b| field[b * d + i] * field[b * d + i])
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Value of `φ̃(Bf)` on a flat image. If `grad` is given, the gradient
/// `B1ᵀ∇φ̃1(B1 f) + B2ᵀ∇φ̃2(B2 f)` is *added* to it.
fn shoitv_flat(n: usize, f: &[f64], w: RegWeights, s: SmoothingParams, mut grad: Option<&mut [f64]>) -> f64 {
    let d = n * n;
    let mut value = 0.0;
    let mut back = vec![0.0; if grad.is_some() { d } else { 0 }];
    if w.lambda1 > 0.0 {
        let mut field = vec![0.0; 2 * d];
        first_diff_into(n, f, &mut field);
        if let Some(g) = grad.as_deref_mut() {
            let mut gf = vec![0.0; 2 * d];
            value += group_smoothed_sum(&field, 2, w.lambda1, s.epsilon, Some(&mut gf));
            first_diff_adjoint_into(n, &gf, &mut back);
            g.iter_mut().zip(&back).for_each(|(a, b)| *a += b);
        } else {
            value += group_smoothed_sum(&field, 2, w.lambda1, s.epsilon, None);
        }
    }
    if w.lambda2 > 0.0 {
        let mut field = vec![0.0; 4 * d];
        second_diff_into(n, f, &mut field);
        if let Some(g) = grad.as_deref_mut() {
            let mut gf = vec![0.0; 4 * d];
            value += group_smoothed_sum(&field, 4, w.lambda2, s.epsilon, Some(&mut gf));
            second_diff_adjoint_into(n, &gf, &mut back);
            g.iter_mut().zip(&back).for_each(|(a, b)| *a += b);
        } else {
            value += group_smoothed_sum(&field, 4, w.lambda2, s.epsilon, None);
        }
    }
    value
}

/// `λ1 Σ s_ε(B1 f)_i + λ2 Σ s_ε(B2 f)_i`.
pub fn shoitv_value(img: &Image, w: RegWeights, s: SmoothingParams) -> f64 {
    shoitv_flat(img.side(), img.as_slice(), w, s, None)
}

/// Gradient of [`shoitv_value`].
pub fn shoitv_grad(img: &Image, w: RegWeights, s: SmoothingParams) -> Image {
    let n = img.side();
    let mut g = vec![0.0; n * n];
    shoitv_flat(n, img.as_slice(), w, s, Some(&mut g));
    Image::new(n, g).expect("gradient has image length")
}

/// Nonsmooth HOITV `λ1 Σ‖(B1 f)_i‖ + λ2 Σ‖(B2 f)_i‖`.
pub fn hoitv_value(img: &Image, w: RegWeights) -> f64 {
    let n = img.side();
    let d = n * n;
    let mut value = 0.0;
    if w.lambda1 > 0.0 {
        let mut field = vec![0.0; 2 * d];
        first_diff_into(n, img.as_slice(), &mut field);
        value += w.lambda1 * group_l2_sum(&field, 2);
    }
    if w.lambda2 > 0.0 {
        let mut field = vec![0.0; 4 * d];
        second_diff_into(n, img.as_slice(), &mut field);
        value += w.lambda2 * group_l2_sum(&field, 4);
    }
    value
}

/// `Af + γ`, checked to be positive.
fn expected_counts(f: &[f64], data: &PoissonData) -> Result<Vec<f64>> {
    let mut y = vec![0.0; data.system.rows()];
    data.system.apply(f, &mut y);
    for (i, (yi, gi)) in y.iter_mut().zip(&data.background).enumerate() {
        *yi += gi;
        if !(*yi > 0.0) {
            return Err(Error::Domain(format!(
                "expected count (Af+γ)[{i}] = {yi} is not positive"
            )));
        }
    }
    Ok(y)
}

fn fidelity_from_expected(y: &[f64], data: &PoissonData) -> f64 {
    // ⟨Af, 1⟩ − ⟨ln(Af+γ), g⟩ with ⟨Af,1⟩ = Σ(y − γ).
    y.iter()
        .zip(&data.background)
        .zip(&data.counts)
        .map(|((&yi, &bi), &gi)| (yi - bi) - if gi > 0.0 { gi * yi.ln() } else { 0.0 })
        .sum()
}

fn fidelity_grad_from_expected(y: &[f64], data: &PoissonData, out: &mut [f64]) {
    let r: Vec<f64> = y
        .iter()
        .zip(&data.counts)
        .map(|(&yi, &gi)| 1.0 - gi / yi)
        .collect();
    data.system.apply_adjoint(&r, out);
}

/// `F(f) = ⟨Af, 1⟩ − ⟨ln(Af + γ), g⟩`.
pub fn fidelity_value(img: &Image, data: &PoissonData) -> Result<f64> {
    ensure_side(img, data.n)?;
    let y = expected_counts(img.as_slice(), data)?;
    Ok(fidelity_from_expected(&y, data))
}

/// `∇F(f) = Aᵀ(1 − g/(Af + γ))`.
pub fn fidelity_grad(img: &Image, data: &PoissonData) -> Result<Image> {
    ensure_side(img, data.n)?;
    let y = expected_counts(img.as_slice(), data)?;
    let mut g = vec![0.0; data.n * data.n];
    fidelity_grad_from_expected(&y, data, &mut g);
    Image::new(data.n, g)
}

/// Groupwise shrinkage: the exact minimiser of `½‖u − x‖² + t Σ‖group(u)‖`.
pub fn prox_group_l2<F: GroupField>(field: &F, t: f64) -> Result<F> {
    let mut out = field.clone();
    prox_group_l2_in_place(out.as_mut_slice(), F::BLOCKS, t)?;
    Ok(out)
}

pub(crate) fn prox_group_l2_in_place(data: &mut [f64], blocks: usize, t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::param(format!("prox threshold must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(());
    }
    let d = data.len() / blocks;
    for i in 0..d {
        let r = (0..blocks)
            .map(|b| data[b * d + i] * data[b * d + i])
            .sum::<f64>()
            .sqrt();
        let scale = if r <= t { 0.0 } else { 1.0 - t / r };
        for b in 0..blocks {
            data[b * d + i] *= scale;
        }
    }
    Ok(())
}

/// Projection onto the nonnegative orthant.
pub fn prox_nonneg(img: &Image) -> Image {
    let mut out = img.clone();
    out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// The full smooth problem: data plus regularization. Cheap to clone (the
/// system matrix is shared).
#[derive(Clone, Debug)]
pub struct Problem {
    pub data: PoissonData,
    pub weights: RegWeights,
    pub smoothing: SmoothingParams,
}

impl Problem {
    pub fn new(data: PoissonData, weights: RegWeights, smoothing: SmoothingParams) -> Self {
        Problem {
            data,
            weights,
            smoothing,
        }
    }

    pub fn side(&self) -> usize {
        self.data.n
    }

    pub fn pixels(&self) -> usize {
        self.data.n * self.data.n
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.pixels() {
            return Err(Error::shape(format!(
                "iterate has {} entries, problem has {} pixels",
                f.len(),
                self.pixels()
            )));
        }
        Ok(())
    }

    /// `φ(f) = F(f) + φ̃(Bf)` without the indicator.
    pub fn smooth_value(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        let y = expected_counts(f, &self.data)?;
        Ok(fidelity_from_expected(&y, &self.data)
            + shoitv_flat(self.data.n, f, self.weights, self.smoothing, None))
    }

    /// `∇φ(f)` written into `out`.
    pub fn gradient(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        self.value_and_gradient(f, out).map(|_| ())
    }

    /// `φ(f)` and `∇φ(f)` sharing one forward projection.
    pub fn value_and_gradient(&self, f: &[f64], out: &mut [f64]) -> Result<f64> {
        self.check_len(f)?;
        let y = expected_counts(f, &self.data)?;
        fidelity_grad_from_expected(&y, &self.data, out);
        let reg = shoitv_flat(self.data.n, f, self.weights, self.smoothing, Some(out));
        Ok(fidelity_from_expected(&y, &self.data) + reg)
    }

    /// `Φ(f)`, returning `+∞` if any entry is negative or `f` is outside the
    /// fidelity's domain.
    pub fn objective(&self, f: &[f64]) -> f64 {
        if f.iter().any(|&v| v < 0.0) {
            return f64::INFINITY;
        }
        self.smooth_value(f).unwrap_or(f64::INFINITY)
    }

    /// `F(f) + λ1 Σ‖B1 f‖ + λ2 Σ‖B2 f‖ + ι(f)`, the unsmoothed model.
    pub fn nonsmooth_objective(&self, f: &[f64]) -> f64 {
        if f.iter().any(|&v| v < 0.0) {
            return f64::INFINITY;
        }
        let Ok(y) = expected_counts(f, &self.data) else {
            return f64::INFINITY;
        };
        let img = Image::new(self.data.n, f.to_vec()).expect("length checked");
        fidelity_from_expected(&y, &self.data) + hoitv_value(&img, self.weights)
    }
}

/// `Φ(img)` with the `+∞` sentinel for infeasible images.
pub fn objective_value(img: &Image, problem: &Problem) -> f64 {
    if img.side() != problem.side() {
        return f64::INFINITY;
    }
    problem.objective(img.as_slice())
}

/// `‖B1‖²` exactly and an upper bound on `‖B2‖²`, for an `n × n` grid.
pub fn difference_norms(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::shape("empty grid"));
    }
    // M = DᵀD is the path-graph Laplacian, top eigenvalue 4cos²(π/2n), and
    // B1ᵀB1 = I⊗M + M⊗I. B2ᵀB2 = I⊗M² + M²⊗I + N⊗M + M⊗N with N = DDᵀ,
    // which shares M's spectrum but not its eigenvectors, so each term is
    // at most ‖M‖² and ‖B2‖² <= 4‖M‖² = ‖B1‖⁴.
    let m = 4.0 * (std::f64::consts::PI / (2.0 * n as f64)).cos().powi(2);
    let b1 = 2.0 * m;
    Ok((b1, b1 * b1))
}

/// `L̂ = ‖A‖² max_i g_i/γ_i² + (2/ε)(λ1‖B1‖² + λ2‖B2‖²)`, with the
/// bound from [`difference_norms`] standing in for `‖B2‖²`.
pub fn lipschitz_upper_bound(problem: &Problem) -> Result<f64> {
    let data = &problem.data;
    let a2 = power_iteration(data.system.as_ref(), PowerIteration::default())?;
    let curvature = data
        .counts
        .iter()
        .zip(&data.background)
        .map(|(g, b)| g / (b * b))
        .fold(0.0, f64::max);
    let (b1, b2) = difference_norms(data.n)?;
    let w = problem.weights;
    Ok(a2 * curvature + (2.0 / problem.smoothing.epsilon) * (w.lambda1 * b1 + w.lambda2 * b2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FirstOrderField;

    fn scalar_data(g: f64, gamma: f64) -> PoissonData {
        PoissonData::new(1, vec![g], vec![gamma], Arc::new(SparseMatrix::identity(1))).unwrap()
    }

    #[test]
    fn smoothed_l2_branches() {
        let eps = 0.2;
        assert_eq!(smoothed_l2(&[0.0, 0.0], eps), 0.0);
        assert!((smoothed_l2(&[eps, 0.0], eps) - eps / 2.0).abs() < 1e-15);
        assert!((smoothed_l2(&[0.0, 2.0 * eps], eps) - 1.5 * eps).abs() < 1e-15);
        let mut g = [0.0; 2];
        smoothed_l2_grad(&[0.0, 3.0 * eps], eps, &mut g);
        assert!((g[1] - 1.0).abs() < 1e-15 && g[0] == 0.0);
    }

    #[test]
    fn scalar_fidelity_examples() {
        let f0 = Image::zeros(1);
        assert_eq!(fidelity_value(&f0, &scalar_data(0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(fidelity_value(&f0, &scalar_data(1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(fidelity_grad(&f0, &scalar_data(1.0, 1.0)).unwrap().as_slice(), &[0.0]);
        let neg = Image::new(1, vec![-2.0]).unwrap();
        assert!(matches!(
            fidelity_value(&neg, &scalar_data(1.0, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn objective_sentinel_for_negative_entries() {
        let p = Problem::new(
            scalar_data(1.0, 1.0),
            RegWeights::zero(),
            SmoothingParams::new(1e-3).unwrap(),
        );
        assert_eq!(objective_value(&Image::new(1, vec![-1.0]).unwrap(), &p), f64::INFINITY);
        assert_eq!(objective_value(&Image::new(1, vec![0.0]).unwrap(), &p), 0.0);
    }

    #[test]
    fn prox_examples() {
        let f = FirstOrderField::new(1, vec![3.0, 4.0]).unwrap();
        let p = prox_group_l2(&f, 2.0).unwrap();
        assert!((p.as_slice()[0] - 1.8).abs() < 1e-15 && (p.as_slice()[1] - 2.4).abs() < 1e-15);
        assert_eq!(prox_group_l2(&f, 5.0).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(prox_group_l2(&f, 0.0).unwrap(), f);
        assert!(matches!(prox_group_l2(&f, -1.0), Err(Error::Parameter(_))));
        let x = Image::new(1, vec![-1.0]).unwrap();
        assert_eq!(prox_nonneg(&x).as_slice(), &[0.0]);
    }

    #[test]
    fn scalar_lipschitz_bound() {
        let p = Problem::new(
            scalar_data(1.0, 1.0),
            RegWeights::zero(),
            SmoothingParams::new(1e-3).unwrap(),
        );
        assert!((lipschitz_upper_bound(&p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_background_is_floored() {
        let d = PoissonData::new(
            1,
            vec![1.0, 1.0],
            vec![0.0, 2.0],
            Arc::new(SparseMatrix::from_dense(2, 1, &[1.0, 1.0]).unwrap()),
        )
        .unwrap();
        assert!(d.background()[0] > 0.0);
    }
}
