//! Lyapunov-sequence checks on solver traces and a plateau detector for RE.

use serde::Serialize;

use crate::error::{Error, Result};

use super::trace::TraceRow;
use super::Reference;

/// `η_k`, `τ_k`, `h^k` and `ε_k` recomputed from stored iterates with a
/// single fixed preconditioner diagonal.
#[derive(Clone, Debug)]
pub struct LyapunovSeries {
    pub eta: Vec<f64>,
    pub tau: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub eps: Vec<f64>,
}

/// Row `k` uses `f^k`, `f^{k-1}` (with `f^{-1} = f^0`) and `t_k`:
/// `h^k = f^k + (t_k − 1)(f^k − f^{k−1})`, `ε_k = 2 t_k² η_k + ‖h^k − f*‖²_{P⁻¹}`.
pub fn lyapunov_diagnostics(
    iterates: &[Vec<f64>],
    phi: &[f64],
    t: &[f64],
    p: &[f64],
    reference: &Reference,
) -> Result<LyapunovSeries> {
    if iterates.is_empty() {
        return Err(Error::shape("no iterates supplied"));
    }
    if phi.len() != iterates.len() || t.len() < iterates.len() {
        return Err(Error::shape(format!(
            "{} iterates, {} objective values, {} momentum values",
            iterates.len(),
            phi.len(),
            t.len()
        )));
    }
    let d = reference.image.len();
    if p.len() != d || iterates.iter().any(|x| x.len() != d) {
        return Err(Error::shape("iterate, preconditioner and reference lengths differ"));
    }
    let mut out = LyapunovSeries {
        eta: Vec::with_capacity(iterates.len()),
        tau: Vec::with_capacity(iterates.len()),
        h: Vec::with_capacity(iterates.len()),
        eps: Vec::with_capacity(iterates.len()),
    };
    for (k, x) in iterates.iter().enumerate() {
        let prev = if k == 0 { x } else { &iterates[k - 1] };
        let eta = phi[k] - reference.phi;
        let tau = 0.5
            * x.iter()
                .zip(prev)
                .zip(p)
                .map(|((a, b), pi)| (a - b) * (a - b) / pi)
                .sum::<f64>();
        let h: Vec<f64> = x
            .iter()
            .zip(prev)
            .map(|(a, b)| a + (t[k] - 1.0) * (a - b))
            .collect();
        let dist: f64 = h
            .iter()
            .zip(&reference.image)
            .zip(p)
            .map(|((hi, s), pi)| (hi - s) * (hi - s) / pi)
            .sum();
        out.eps.push(2.0 * t[k] * t[k] * eta + dist);
        out.eta.push(eta);
        out.tau.push(tau);
        out.h.push(h);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovCheck {
    /// Smallest `K` such that `ε_{k+1} <= ε_k + tol` for all `k > K`.
    pub k_detected: usize,
    /// `K` lies in the first half of the run.
    pub eps_monotone: bool,
    /// `η_k <= ε_k / (2 t_k²) + tol` for all `k > K`.
    pub eta_bound: bool,
    /// `Σ [t_k² − t_{k+1}(t_{k+1} − 1)] η_k` over the run.
    pub weighted_eta_sum: f64,
    /// `ε` of the first row, halved.
    pub eps_half_first: f64,
    pub partial_sums_bounded: bool,
    pub tolerance: f64,
    /// Smallest `η` seen; negative values mean the reference is not a minimiser.
    pub min_eta: f64,
}

/// Checks the three Lyapunov properties on trace rows with tolerance
/// `rel_tol · |ε_first|`. The first row plays the role of `ε_1`.
pub fn check_lyapunov(rows: &[TraceRow], t: &[f64], rel_tol: f64) -> Result<LyapunovCheck> {
    if rows.len() < 2 {
        return Err(Error::shape("need at least two trace rows"));
    }
    if t.len() < rows.len() {
        return Err(Error::shape("momentum values shorter than the trace"));
    }
    if rows.iter().any(|r| !r.eps.is_finite() || !r.eta.is_finite()) {
        return Err(Error::shape("trace has no finite eps/eta; supply a reference"));
    }
    let eps1 = rows[0].eps;
    let tol = rel_tol * eps1.abs();
    let mut k_detected = 0;
    for k in 0..rows.len() - 1 {
        if rows[k + 1].eps > rows[k].eps + tol {
            k_detected = k + 1;
        }
    }
    let eta_bound = rows
        .iter()
        .enumerate()
        .skip(k_detected + 1)
        .all(|(k, r)| r.eta <= r.eps / (2.0 * t[k] * t[k]) + tol);
    let weighted_eta_sum: f64 = rows
        .iter()
        .enumerate()
        .filter(|(k, _)| k + 1 < t.len())
        .map(|(k, r)| (t[k] * t[k] - t[k + 1] * (t[k + 1] - 1.0)) * r.eta)
        .sum();
    Ok(LyapunovCheck {
        k_detected,
        eps_monotone: k_detected <= rows.len() / 2,
        eta_bound,
        weighted_eta_sum,
        eps_half_first: 0.5 * eps1,
        partial_sums_bounded: weighted_eta_sum <= 0.5 * eps1 + tol,
        tolerance: tol,
        min_eta: rows.iter().map(|r| r.eta).fold(f64::INFINITY, f64::min),
    })
}

/// True when RE stops improving: the smallest RE over the second half of the
/// run is no better than 0.8× the smallest RE over the first half.
pub fn plateau_detected(re: &[f64]) -> bool {
    let vals: Vec<f64> = re.iter().copied().skip(1).filter(|v| v.is_finite()).collect();
    if vals.len() < 4 {
        return false;
    }
    let mid = vals.len() / 2;
    let first = vals[..mid].iter().copied().fold(f64::INFINITY, f64::min);
    let second = vals[mid..].iter().copied().fold(f64::INFINITY, f64::min);
    second >= 0.8 * first
}
