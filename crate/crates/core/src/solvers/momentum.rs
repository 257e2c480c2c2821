//! Momentum schedules `θ_k = (t_{k-1} - 1)/t_k` and a numerical check of the
//! four-part momentum condition.

use serde::Serialize;

use crate::error::{Error, Result};

/// Generalized Nesterov schedule `t_k = a k^ω + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GnSchedule {
    pub a: f64,
    pub b: f64,
    pub omega: f64,
}

impl GnSchedule {
    /// Validates the schedule. `ω = 1` requires `a ∈ (0, 1/2)`; `ω ∈ (0, 1)`
    /// requires `a > 0`; `t_k` must never vanish.
    pub fn new(a: f64, b: f64, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega <= 1.0) {
            return Err(Error::Schedule(format!("omega must lie in (0, 1], got {omega}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Schedule(format!("a must be positive, got {a}")));
        }
        if omega == 1.0 && a >= 0.5 {
            return Err(Error::Schedule(format!(
                "omega = 1 requires a < 1/2 (a in (0, 1/2)), got a = {a}"
            )));
        }
        if !b.is_finite() {
            return Err(Error::Schedule(format!("b must be finite, got {b}")));
        }
        let s = Self { a, b, omega };
        if b <= 0.0 {
            // t_k = 0 exactly when k = (-b/a)^(1/ω) is a nonnegative integer.
            let k = (-b / a).powf(1.0 / omega);
            let nearest = k.round();
            if s.t(nearest as u64) == 0.0 {
                return Err(Error::Schedule(format!("t_k vanishes at k = {nearest}")));
            }
        }
        Ok(s)
    }

    pub fn t(&self, k: u64) -> f64 {
        self.a * (k as f64).powf(self.omega) + self.b
    }
}

/// Momentum rule driving the extrapolation step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Momentum {
    /// `θ_k ≡ 0` (`t_k ≡ 1`): plain PPGA / FPPA.
    None,
    Gn(GnSchedule),
    /// `t_0 = 1`, `t_k = (1 + √(1 + 4 t²_{k-1}))/2`.
    Nesterov,
}

impl Momentum {
    /// `t_0, …, t_{count-1}`.
    pub fn t_values(&self, count: usize) -> Vec<f64> {
        match self {
            Momentum::None => vec![1.0; count],
            Momentum::Gn(s) => (0..count as u64).map(|k| s.t(k)).collect(),
            Momentum::Nesterov => {
                let mut out = Vec::with_capacity(count);
                let mut t = 1.0f64;
                for _ in 0..count {
                    out.push(t);
                    t = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                }
                out
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Momentum::None => "none".into(),
            Momentum::Gn(s) => format!("gn(a={},b={},omega={})", s.a, s.b, s.omega),
            Momentum::Nesterov => "nesterov".into(),
        }
    }
}

/// `(t_k, θ_k)` for the generalized Nesterov schedule, `k >= 1`.
pub fn gn_momentum(schedule: &GnSchedule, k: u64) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Schedule("momentum is defined for k >= 1".into()));
    }
    let t_prev = schedule.t(k - 1);
    let t = schedule.t(k);
    if t == 0.0 {
        return Err(Error::Schedule(format!("t_{k} = 0")));
    }
    Ok((t, (t_prev - 1.0) / t))
}

/// Outcome of one momentum-condition item with its witnesses.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionItem {
    pub holds: bool,
    /// First index after which the item holds through the horizon.
    pub from_k: Option<u64>,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentumReport {
    pub horizon: u64,
    /// `t_k ≠ 0` over the horizon.
    pub nonzero: ConditionItem,
    /// `1 <= t_{k-1} < ρ [t²_{k-1} − t_k(t_k − 1)]` in the tail.
    pub gap: ConditionItem,
    pub rho: Option<f64>,
    /// `c1 t_k <= t_{k-1} <= c2 t_k` in the tail.
    pub ratio: ConditionItem,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// `t_k → ∞` and `Σ 1/t_k = ∞`, decided symbolically.
    pub divergence: ConditionItem,
    pub all_hold: bool,
}

/// Checks items (i)–(iii) numerically up to `kmax` and (iv) symbolically.
///
/// A tail item "holds" when it is satisfied for every `k` in
/// `(K, kmax]` with `K <= kmax / 2`. The gap must be strictly positive
/// relative to `t²_{k-1}` (threshold `1e-10`), so Nesterov's recurrence,
/// whose gap is exactly zero, fails.
pub fn momentum_condition_check(momentum: &Momentum, kmax: u64) -> Result<MomentumReport> {
    if kmax < 10 {
        return Err(Error::param(format!("horizon must be >= 10, got {kmax}")));
    }
    let t = momentum.t_values(kmax as usize + 1);
    let half = kmax / 2;

    let zero_at = t.iter().position(|&v| v == 0.0);
    let nonzero = ConditionItem {
        holds: zero_at.is_none(),
        from_k: Some(0),
        note: match zero_at {
            Some(k) => format!("t_{k} = 0"),
            None => format!("t_k != 0 for k <= {kmax}"),
        },
    };

    // Tail start for a per-k predicate over k = 1..=kmax.
    let tail_start = |ok: &dyn Fn(usize) -> bool| -> u64 {
        let mut start = 0u64;
        for k in 1..=kmax as usize {
            if !ok(k) {
                start = k as u64;
            }
        }
        start
    };

    let gap_ok = |k: usize| {
        let gap = t[k - 1] * t[k - 1] - t[k] * (t[k] - 1.0);
        t[k - 1] >= 1.0 && gap > 1e-10 * t[k - 1] * t[k - 1]
    };
    let k1 = tail_start(&gap_ok);
    let gap_holds = k1 <= half;
    let rho = gap_holds.then(|| {
        ((k1 as usize + 1)..=kmax as usize)
            .map(|k| t[k - 1] / (t[k - 1] * t[k - 1] - t[k] * (t[k] - 1.0)))
            .fold(0.0, f64::max)
            * (1.0 + 1e-12)
            + f64::MIN_POSITIVE
    });
    let gap = ConditionItem {
        holds: gap_holds,
        from_k: gap_holds.then_some(k1),
        note: if gap_holds {
            format!("gap positive for k > {k1}")
        } else {
            format!("gap t^2_(k-1) - t_k(t_k - 1) not strictly positive up to k = {k1}")
        },
    };

    let ratio_ok = |k: usize| t[k] > 0.0 && t[k - 1] > 0.0;
    let k2 = tail_start(&ratio_ok);
    let ratio_holds = k2 <= half;
    let ratios: Vec<f64> = ((k2 as usize + 1)..=kmax as usize)
        .map(|k| t[k - 1] / t[k])
        .collect();
    let (c1, c2) = if ratio_holds {
        (
            Some(ratios.iter().copied().fold(f64::INFINITY, f64::min)),
            Some(ratios.iter().copied().fold(0.0, f64::max)),
        )
    } else {
        (None, None)
    };
    let ratio = ConditionItem {
        holds: ratio_holds,
        from_k: ratio_holds.then_some(k2),
        note: format!("ratios t_(k-1)/t_k positive for k > {k2}"),
    };

    let divergence = match momentum {
        Momentum::None => ConditionItem {
            holds: false,
            from_k: None,
            note: "t_k = 1 is bounded".into(),
        },
        Momentum::Gn(s) => {
            let ok = s.a > 0.0 && s.omega > 0.0 && s.omega <= 1.0;
            ConditionItem {
                holds: ok,
                from_k: None,
                note: if ok {
                    format!("t_k ~ a k^{}, sum of k^-{} diverges", s.omega, s.omega)
                } else {
                    "requires a > 0 and omega in (0, 1]".into()
                },
            }
        }
        Momentum::Nesterov => ConditionItem {
            holds: true,
            from_k: None,
            note: "t_k ~ k/2, harmonic series diverges".into(),
        },
    };

    let all_hold = nonzero.holds && gap.holds && ratio.holds && divergence.holds;
    Ok(MomentumReport {
        horizon: kmax,
        nonzero,
        gap,
        rho,
        ratio,
        c1,
        c2,
        divergence,
        all_hold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_schedule_first_values() {
        let s = GnSchedule::new(0.125, 1.0, 1.0).unwrap();
        assert_eq!(s.t(0), 1.0);
        let (t1, th1) = gn_momentum(&s, 1).unwrap();
        assert_eq!((t1, th1), (1.125, 0.0));
        let (_, th2) = gn_momentum(&s, 2).unwrap();
        assert!((th2 - 0.1).abs() < 1e-15);
        let (_, big) = gn_momentum(&s, 1_000_000).unwrap();
        assert!((1.0 - big).abs() < 1e-5);
    }

    #[test]
    fn sqrt_schedule_values() {
        let s = GnSchedule::new(1.0, 1.0, 0.5).unwrap();
        assert_eq!(s.t(4), 3.0);
        assert_eq!(s.t(9), 4.0);
        let (t9, th9) = gn_momentum(&s, 9).unwrap();
        assert_eq!(t9, 4.0);
        assert!((th9 - (8f64.sqrt() + 1.0 - 1.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_schedules() {
        let err = GnSchedule::new(0.6, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("a < 1/2"));
        assert!(GnSchedule::new(-1.0, 1.0, 0.5).is_err());
        assert!(GnSchedule::new(0.25, 1.0, 1.5).is_err());
        assert!(GnSchedule::new(0.25, -1.0, 1.0).is_err());
        assert!(gn_momentum(&GnSchedule::new(0.25, 1.0, 1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn paper_schedule_satisfies_condition() {
        for omega in [0.25, 0.5, 0.75, 1.0] {
            let m = Momentum::Gn(GnSchedule::new(0.125, 1.0, omega).unwrap());
            let r = momentum_condition_check(&m, 10_000).unwrap();
            assert!(r.all_hold, "omega {omega}: {r:?}");
            assert!(r.rho.unwrap() > 0.0 && r.c1.unwrap() > 0.0);
        }
    }

    #[test]
    fn steep_linear_schedule_and_nesterov_fail_gap() {
        // a = 1 with ω = 1 is outside the admissible range; build it directly.
        let steep = Momentum::Gn(GnSchedule {
            a: 1.0,
            b: 1.0,
            omega: 1.0,
        });
        assert!(!momentum_condition_check(&steep, 1000).unwrap().gap.holds);
        let r = momentum_condition_check(&Momentum::Nesterov, 1000).unwrap();
        assert!(!r.gap.holds);
        assert!(r.divergence.holds);
    }
}
