use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::budgets::Budgets;
use super::step::{imaginary_fraction, step_approximate, StepFunction, REAL_TOL};
use crate::bump::{build_bump, strict_lt, BumpOptions, BumpParams};
use crate::error::{invalid, Error, Result};
use crate::fourier::{FourierPolynomial, PartialSumScan};
use crate::measure::{refine_for_correction, GridFunction, NodeMask, ProductCell};
use crate::systems::OrthonormalSystem;

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub m_cap: usize,
    pub s0_max: usize,
    pub budgets: Budgets,
}

impl StepOptions {
    pub fn new(m_cap: usize) -> Self {
        Self {
            m_cap,
            s0_max: 1 << 20,
            budgets: Budgets::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpSummary {
    pub cell: ProductCell,
    pub gamma: f64,
    pub s0: usize,
    pub n_start: usize,
    pub m_end: usize,
    pub e_measure: f64,
    pub q_minus_g_1: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepMetrics {
    pub eps: f64,
    pub delta: f64,
    pub f1: f64,
    pub g1: f64,
    pub step_error: f64,
    pub cells: usize,
    pub bump_eps: f64,
    pub kept_measure: f64,
    pub g_minus_q_1: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStatements {
    pub kept_measure: bool,
    pub agrees_on_kept: bool,
    pub norm_sandwich: bool,
    pub approximates: bool,
    pub envelope_bounded: bool,
}

impl StepStatements {
    pub fn all(&self) -> bool {
        self.kept_measure && self.agrees_on_kept && self.norm_sandwich && self.approximates && self.envelope_bounded
    }
}

#[derive(Debug, Clone)]
pub struct StepCorrection {
    pub kept: NodeMask,
    pub g: GridFunction,
    /// `g - f`; vanishes exactly on `kept`.
    pub defect: GridFunction,
    pub q: FourierPolynomial,
    pub n_start: usize,
    /// Last index of the block carried by `q`.
    pub n_end: usize,
    pub step: Option<StepFunction>,
    pub bumps: Vec<BumpSummary>,
    pub metrics: StepMetrics,
    pub statements: StepStatements,
}

fn check_params(eps: f64, delta: f64, n_start: usize) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("eps = {eps}, delta = {delta} must lie in (0,1)")));
    }
    if n_start == 0 {
        return Err(invalid("n_start is 1-based"));
    }
    Ok(())
}

/// Corrects `f` on a set of measure `> 1 - delta` so that the result is
/// `eps`-close in `L1` to a Fourier polynomial on `[n_start, n_end]` whose
/// partial sums stay below `3 ||f||_1`.
///
/// Complex `f` is split into real and imaginary parts, each corrected with
/// half of `eps` and `delta`; the kept sets are intersected.
pub fn correct_step(
    f: &GridFunction,
    eps: f64,
    delta: f64,
    n_start: usize,
    sys: &(impl OrthonormalSystem + ?Sized),
    opts: &StepOptions,
) -> Result<StepCorrection> {
    check_params(eps, delta, n_start)?;
    if !f.space().same_as(sys.space()) {
        return Err(Error::SpaceMismatch);
    }
    if imaginary_fraction(f) <= REAL_TOL {
        return correct_real(f, eps, delta, n_start, sys, opts, true);
    }
    let space = f.space();
    let re = GridFunction::from_real(space, f.values().iter().map(|z| z.re).collect())?;
    let im = GridFunction::from_real(space, f.values().iter().map(|z| z.im).collect())?;
    if re.norm1() == 0.0 {
        let mut r = correct_real(&im, eps, delta, n_start, sys, opts, true)?;
        rotate_by_i(&mut r, f);
        return Ok(r);
    }
    let a = correct_real(&re, eps / 2.0, delta / 2.0, n_start, sys, opts, true)?;
    let b = correct_real(&im, eps / 2.0, delta / 2.0, a.n_end + 1, sys, opts, true)?;
    let i = Complex64::new(0.0, 1.0);
    let mut kept = a.kept.clone();
    kept.intersect_with(&b.kept)?;
    let mut defect = a.defect.clone();
    defect.axpy(i, &b.defect)?;
    let mut g = f.clone();
    g.axpy(Complex64::new(1.0, 0.0), &defect)?;
    let q = a.q.merged(&FourierPolynomial::from_pairs(
        b.q.coeffs().iter().map(|(n, z)| (*n, z * i)),
    )?);
    let mut bumps = a.bumps;
    bumps.extend(b.bumps);
    let (metrics, statements) = assess(
        f,
        &g,
        &kept,
        &q,
        n_start,
        b.n_end,
        sys,
        StepMetrics {
            cells: a.metrics.cells + b.metrics.cells,
            step_error: a.metrics.step_error + b.metrics.step_error,
            bump_eps: a.metrics.bump_eps.min(b.metrics.bump_eps),
            ..blank_metrics(eps, delta)
        },
    )?;
    Ok(StepCorrection {
        kept,
        g,
        defect,
        q,
        n_start,
        n_end: b.n_end,
        step: None,
        bumps,
        metrics,
        statements,
    })
}

fn rotate_by_i(r: &mut StepCorrection, f: &GridFunction) {
    let i = Complex64::new(0.0, 1.0);
    r.defect.scale(i);
    let mut g = f.clone();
    g.axpy(Complex64::new(1.0, 0.0), &r.defect).expect("same space");
    r.g = g;
    r.q = FourierPolynomial::from_pairs(r.q.coeffs().iter().map(|(n, z)| (*n, z * i))).expect("finite");
}

fn blank_metrics(eps: f64, delta: f64) -> StepMetrics {
    StepMetrics {
        eps,
        delta,
        f1: 0.0,
        g1: 0.0,
        step_error: 0.0,
        cells: 0,
        bump_eps: 0.0,
        kept_measure: 0.0,
        g_minus_q_1: 0.0,
        envelope: 0.0,
    }
}

#[allow(clippy::too_many_arguments)]
fn assess(
    f: &GridFunction,
    g: &GridFunction,
    kept: &NodeMask,
    q: &FourierPolynomial,
    n_start: usize,
    n_end: usize,
    sys: &(impl OrthonormalSystem + ?Sized),
    partial: StepMetrics,
) -> Result<(StepMetrics, StepStatements)> {
    let mut scan = PartialSumScan::new(sys, n_start);
    let mut envelope = 0.0f64;
    for n in n_start..=n_end {
        scan.push(q.get(n));
        envelope = envelope.max(scan.norm1());
    }
    let g_minus_q_1 = scan.norm1_diff(g.values());
    let f1 = f.norm1();
    let g1 = g.norm1();
    let kept_measure = kept.measure();
    let agrees = g
        .values()
        .iter()
        .zip(f.values())
        .zip(kept.bits())
        .all(|((a, b), &k)| !k || a == b);
    let m = StepMetrics {
        f1,
        g1,
        kept_measure,
        g_minus_q_1,
        envelope,
        ..partial
    };
    let s = StepStatements {
        kept_measure: strict_lt(1.0 - m.delta, kept_measure, 1.0),
        agrees_on_kept: agrees,
        norm_sandwich: strict_lt(f1 / 3.0, g1, f1) && strict_lt(g1, 3.0 * f1, f1),
        approximates: strict_lt(g_minus_q_1, m.eps, m.eps),
        envelope_bounded: strict_lt(envelope, 3.0 * f1, f1),
    };
    Ok((m, s))
}

pub(crate) fn correct_real(
    f: &GridFunction,
    eps: f64,
    delta: f64,
    n_start: usize,
    sys: &(impl OrthonormalSystem + ?Sized),
    opts: &StepOptions,
    check: bool,
) -> Result<StepCorrection> {
    check_params(eps, delta, n_start)?;
    let space = sys.space();
    let f1 = f.norm1();
    if f1 == 0.0 {
        return Err(invalid("the function to correct must have positive L1 norm"));
    }
    let budgets = &opts.budgets;
    let (coarse, step_error) = step_approximate(f, budgets.step_bound(eps, f1))?;
    let (partition, gammas) = refine_for_correction(
        space,
        &coarse.partition,
        &coarse.gammas,
        f1,
        delta,
        budgets.fine_partition,
    )?;
    let step = StepFunction { partition, gammas };
    let nu0 = step.partition.len();
    let bump_eps = budgets
        .bump_eps(eps, f1, nu0)
        .map_err(|e| e.context(format!("partition of {nu0} cells")))?;

    let mut kept = NodeMask::empty(space);
    let mut bump_sum = GridFunction::zeros(space);
    let mut q = FourierPolynomial::on_block(n_start, n_start.saturating_sub(1));
    let mut n_cur = n_start;
    let mut bumps = Vec::new();
    for (k, (cell, &gamma)) in step.partition.cells.iter().zip(&step.gammas).enumerate() {
        if gamma == 0.0 || cell.measure(space) == 0.0 {
            kept.union_with(&cell.mask(space))?;
            continue;
        }
        let params = BumpParams {
            cell: cell.clone(),
            gamma,
            eps: bump_eps,
            delta,
            n_start: n_cur,
        };
        let b = build_bump(
            &params,
            sys,
            BumpOptions {
                m_cap: opts.m_cap,
                s0_max: opts.s0_max,
            },
        )
        .map_err(|e| e.context(format!("bump {} of {nu0} (eps {bump_eps:.3e}, N {n_cur})", k + 1)))?;
        kept.union_with(&b.kept)?;
        bump_sum.axpy(Complex64::new(1.0, 0.0), &b.g)?;
        q = q.merged(&b.block);
        bumps.push(BumpSummary {
            cell: cell.clone(),
            gamma,
            s0: b.s0,
            n_start: n_cur,
            m_end: b.m_end,
            e_measure: b.measures.e,
            q_minus_g_1: b.norms.q_minus_g_1,
        });
        n_cur = b.m_end + 1;
    }
    let n_end = n_cur - 1;

    // g - f = sum g_k - Lambda, which is exactly 0 wherever a bump sits at its level gamma
    let defect = &bump_sum - &step.evaluate(space);
    let g = f + &defect;

    let (metrics, statements) = assess(
        f,
        &g,
        &kept,
        &q,
        n_start,
        n_end,
        sys,
        StepMetrics {
            cells: nu0,
            step_error,
            bump_eps,
            ..blank_metrics(eps, delta)
        },
    )?;
    if check && !statements.all() {
        return Err(Error::InternalInvariant(format!(
            "step correction statements {statements:?} failed with metrics {}",
            serde_json::to_string(&metrics)?
        )));
    }
    Ok(StepCorrection {
        kept,
        g,
        defect,
        q,
        n_start,
        n_end,
        step: Some(step),
        bumps,
        metrics,
        statements,
    })
}
