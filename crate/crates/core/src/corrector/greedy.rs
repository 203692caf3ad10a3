use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::enumeration::PolynomialSource;
use crate::error::{invalid, Error, Result};
use crate::fourier::FourierPolynomial;
use crate::measure::{GridFunction, KahanSum};
use crate::par;
use crate::systems::{basis_values, OrthonormalSystem};

const CHUNK: u64 = 2048;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyStep {
    pub s: usize,
    pub k: u64,
    /// `|| f - sum_{r <= s} R_{k_r} ||_1`
    pub residual: f64,
    pub target: f64,
    /// `|| R_{k_s} ||_1`, checked against `b_s` for `s >= 1`
    pub r_norm1: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedySeries {
    pub steps: Vec<GreedyStep>,
    pub f_norm1: f64,
}

impl GreedySeries {
    pub fn indices(&self) -> Vec<u64> {
        self.steps.iter().map(|s| s.k).collect()
    }

    pub fn residuals_ok(&self) -> bool {
        self.steps.iter().all(|s| {
            if s.s == 0 {
                s.residual <= s.target
            } else {
                s.residual < s.target
            }
        })
    }

    pub fn norms_ok(&self) -> bool {
        self.steps.iter().skip(1).all(|s| s.r_norm1 < s.b)
    }
}

/// Basis samples for indices `1..=cap`, shared by every candidate evaluation.
struct Table {
    phi: Vec<Vec<f64>>,
    sup: Vec<f64>,
}

impl Table {
    fn new(sys: &(impl OrthonormalSystem + ?Sized), cap: usize) -> Result<Self> {
        let phi = (1..=cap).map(|n| basis_values(sys, n)).collect::<Result<Vec<_>>>()?;
        let sup = (1..=cap).map(|n| sys.sup_bound(n)).collect();
        Ok(Self { phi, sup })
    }

    fn residual_norm(&self, r: &[Complex64], w: &[f64], p: &FourierPolynomial) -> f64 {
        let terms: Vec<(&[f64], Complex64)> = p.coeffs().iter().map(|(&n, &c)| (&self.phi[n - 1][..], c)).collect();
        let mut k = KahanSum::new();
        for (i, (z, wi)) in r.iter().zip(w).enumerate() {
            let mut v = *z;
            for (phi, c) in &terms {
                v -= c * phi[i];
            }
            k.add(wi * v.norm());
        }
        k.value()
    }
}

/// Greedy dyadic series `f = sum_s R_{k_s}` with `k_0 < k_1 < ...`.
///
/// `k_0` is the smallest index with `||R_k - f||_1 <= min{||f||_1, b(1)} / 2`;
/// then each `k_s` is the smallest index past `k_{s-1}` that brings the
/// residual below `min{b(s), b(s+1), 1/s} / 2`. Candidates are screened with
/// `||h||_1 >= |c_n(h)| / sup|phi_n|` before the full norm is computed.
pub fn greedy_series(
    f: &GridFunction,
    b: impl Fn(usize) -> f64,
    sys: &(impl OrthonormalSystem + ?Sized),
    source: &(impl PolynomialSource + ?Sized),
    s_max: usize,
) -> Result<GreedySeries> {
    if !f.space().same_as(sys.space()) {
        return Err(Error::SpaceMismatch);
    }
    let f1 = f.norm1();
    if f1 == 0.0 {
        return Err(invalid("greedy series of the zero function"));
    }
    for s in 1..=s_max + 1 {
        if !(b(s) > 0.0) {
            return Err(invalid(format!("b_{s} must be positive")));
        }
    }
    let cap = source.degree_cap().min(sys.n_max());
    let table = Table::new(sys, cap)?;
    // coefficients past the cap cannot be touched by any candidate
    let probe = (4 * cap).max(256).min(sys.n_max());
    let w = sys.space().weights();

    let mut residual: Vec<Complex64> = f.values().to_vec();
    let mut steps = Vec::with_capacity(s_max + 1);
    let mut next_k = 1u64;
    for s in 0..=s_max {
        let target = if s == 0 {
            0.5 * f1.min(b(1))
        } else {
            0.5 * b(s).min(b(s + 1)).min(1.0 / s as f64)
        };
        let r_fn = GridFunction::new(f.space().clone(), residual.clone())?;
        let c = sys.coefficients(&r_fn, probe)?;
        let fail = |best: f64| Error::EnumerationBudgetExhausted {
            step: s,
            budget: source.budget(),
            target,
            best,
        };
        let out_of_reach = (cap..probe)
            .map(|i| c[i].norm() / sys.sup_bound(i + 1))
            .fold(0.0, f64::max);
        let admissible = |h: f64| if s == 0 { h <= target } else { h < target };
        if !admissible(out_of_reach) {
            return Err(fail(out_of_reach));
        }

        let mut found = None;
        let mut best = f64::INFINITY;
        while found.is_none() && next_k <= source.budget() {
            let hi = (next_k + CHUNK - 1).min(source.budget());
            let evals = par::map_range((hi - next_k + 1) as usize, |i| {
                let k = next_k + i as u64;
                let p = source.get(k)?;
                if p.max_index().is_some_and(|m| m > cap) {
                    return None;
                }
                let lb = (0..cap)
                    .map(|n| (c[n] - p.get(n + 1)).norm() / table.sup[n])
                    .fold(out_of_reach, f64::max);
                if !admissible(lb) {
                    return Some((k, p, lb, false));
                }
                let h = table.residual_norm(&residual, w, &p);
                Some((k, p, h, admissible(h)))
            });
            for (k, p, h, ok) in evals.into_iter().flatten() {
                best = best.min(h);
                if ok {
                    found = Some((k, p, h));
                    break;
                }
            }
            next_k = hi + 1;
        }
        let Some((k, p, h)) = found else {
            return Err(fail(best));
        };
        let r_norm1 = p.evaluate(sys)?.norm1();
        for (n, c) in p.coeffs() {
            for (z, phi) in residual.iter_mut().zip(&table.phi[n - 1]) {
                *z -= c * phi;
            }
        }
        steps.push(GreedyStep {
            s,
            k,
            residual: h,
            target,
            r_norm1,
            b: if s == 0 { f64::INFINITY } else { b(s) },
        });
        next_k = k + 1;
    }
    Ok(GreedySeries { steps, f_norm1: f1 })
}
