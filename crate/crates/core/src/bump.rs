//! Oscillating bumps `g = gamma I(s0 t) chi_Delta` with a Fourier block `Q`
//! that approximates `g` in `L1` and keeps a uniformly bounded envelope.
//!
//! `I` is the 1-periodic step `1 - (1/d) chi_[0,d)` with `d = delta/(1+delta)`.
//! On a uniform grid whose resolution is a multiple of `s0` each period holds
//! the same number of nodes; the low part is snapped to a whole number of
//! nodes and its depth adjusted so the sampled period still has mean zero.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{coefficients, CoefficientVector, FourierPolynomial, PartialSumScan};
use crate::measure::{gauss_legendre, GridFunction, KahanSum, MaskRle, NodeMask, ProductCell};
use crate::systems::OrthonormalSystem;

/// Relative slack for strict inequalities checked in floating point.
pub const STRICT_SLACK: f64 = 1e-6;

/// Seed of the randomized bump trials.
pub const TRIAL_SEED: u64 = 0x5EED_B0B0;

pub fn delta_star(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta = {delta} outside (0,1)")));
    }
    Ok(delta / (1.0 + delta))
}

/// `I(s t)` with `I = 1 - (1/d) chi_[0,d)` continued 1-periodically.
pub fn periodic_step(d: f64, s: f64, t: f64) -> f64 {
    let u = (s * t).rem_euclid(1.0);
    if u < d {
        1.0 - 1.0 / d
    } else {
        1.0
    }
}

/// `(1 - d)^2 / (d^2 (b - a))`, the scale `s0` must exceed.
pub fn scale_lower_bound(d: f64, width: f64) -> f64 {
    (1.0 - d) * (1.0 - d) / (d * d * width)
}

/// `int_a^b f(t) I(lambda t) dt`, integrating exactly piece by piece with
/// Gauss–Legendre of the given order on every constant stretch of `I`.
pub fn fejer_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, d: f64, lambda: f64, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let mut cuts = vec![a, b];
    let p0 = (a * lambda).floor() as i64;
    let p1 = (b * lambda).ceil() as i64;
    for p in p0..=p1 {
        for off in [0.0, d] {
            let c = (p as f64 + off) / lambda;
            if c > a && c < b {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut acc = KahanSum::new();
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let level = periodic_step(d, lambda, mid);
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(mid + half * xi);
        }
        acc.add(level * half * s);
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub cell: ProductCell,
    pub gamma: f64,
    pub eps: f64,
    pub delta: f64,
    pub n_start: usize,
}

impl BumpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma != 0.0) {
            return Err(invalid("gamma must be finite and nonzero"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps = {} outside (0,1)", self.eps)));
        }
        delta_star(self.delta)?;
        if self.n_start == 0 {
            return Err(invalid("n_start is 1-based"));
        }
        let (a, b) = self.cell.t;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(invalid(format!("bad cell interval [{a}, {b})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BumpOptions {
    pub m_cap: usize,
    pub s0_max: usize,
}

impl BumpOptions {
    pub fn new(m_cap: usize) -> Self {
        Self { m_cap, s0_max: 1 << 20 }
    }
}

/// Chosen scale together with the sampled duty cycle actually realized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleChoice {
    pub s0: usize,
    pub lower_bound: f64,
    /// Fraction of each period on the low level; equals `low_nodes / period_nodes` when aligned.
    pub duty: f64,
    pub aligned: bool,
    /// Largest `|c_n(g)|` over `n <= N` at this scale, and the bound it beat.
    pub worst_low: f64,
    pub low_bound: f64,
}

/// Duty cycle `L/P` nearest to `d` that keeps the bump statements intact:
/// `delta/(1+2 delta) <= L/P < min(delta, 1/2)`.
fn snapped_duty(d: f64, delta: f64, period_nodes: usize) -> Option<f64> {
    let p = period_nodes as f64;
    let lo = delta / (1.0 + 2.0 * delta);
    let hi = delta.min(0.5);
    let base = (d * p).round() as i64;
    [base, base - 1, base + 1]
        .into_iter()
        .filter(|&l| l >= 1 && (l as usize) < period_nodes)
        .map(|l| l as f64 / p)
        .filter(|&x| x >= lo && x < hi)
        .min_by(|x, y| (x - d).abs().total_cmp(&(y - d).abs()))
}

fn bump_values(params: &BumpParams, sys: &(impl OrthonormalSystem + ?Sized), s0: usize, duty: f64) -> GridFunction {
    let space = sys.space();
    let mut g = GridFunction::zeros(space);
    let tn = space.t_nodes();
    let vals = g.values_mut();
    let r = params.cell.t_range(space);
    for &b in &params.cell.base {
        for i in r.clone() {
            let level = periodic_step(duty, s0 as f64, tn[i]);
            vals[space.index(i, b)] = Complex64::new(params.gamma * level, 0.0);
        }
    }
    g
}

/// First `n` coefficients of a function supported on `cell`.
fn low_coefficients(
    g: &GridFunction,
    cell: &ProductCell,
    sys: &(impl OrthonormalSystem + ?Sized),
    n: usize,
) -> Result<Vec<Complex64>> {
    if n > 48 {
        return sys.coefficients(g, n);
    }
    let space = sys.space();
    let nodes: Vec<usize> = cell.nodes(space).collect();
    let w = space.weights();
    let mut phi = vec![0.0; space.len()];
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        sys.fill(k, &mut phi);
        let mut acc = KahanSum::new();
        for &i in &nodes {
            acc.add(g.values()[i].re * phi[i] * w[i]);
        }
        out.push(Complex64::new(acc.value(), 0.0));
    }
    Ok(out)
}

/// Smallest admissible `s0` above the lower bound whose low-order integrals
/// satisfy `|int_Delta I(s0 t) phi_n| < eps / (2 N |gamma|)` for `n <= N`.
///
/// Divisors of the `t`-resolution are tried first; other integers are only
/// used when no divisor is available.
pub fn select_scale(
    params: &BumpParams,
    sys: &(impl OrthonormalSystem + ?Sized),
    s0_max: usize,
) -> Result<ScaleChoice> {
    params.validate()?;
    let space = sys.space();
    if params.n_start > sys.n_max() {
        return Err(Error::IndexOutOfRange {
            index: params.n_start,
            available: sys.n_max(),
        });
    }
    let d = delta_star(params.delta)?;
    let lower = scale_lower_bound(d, params.cell.width());
    let nt = space.resolution();
    let n = params.n_start;
    let bound = params.eps / (2.0 * n as f64);
    let first = (lower.floor() as usize).saturating_add(1);

    let mut candidates: Vec<(usize, f64, bool)> = Vec::new();
    if space.is_uniform_midpoint() {
        for s in first..=s0_max.min(nt / 2) {
            if nt % s == 0 {
                if let Some(duty) = snapped_duty(d, params.delta, nt / s) {
                    candidates.push((s, duty, true));
                }
            }
        }
    }
    let fallback = candidates.is_empty();

    let mut last_fail = None;
    let mut check = |s: usize, duty: f64, aligned: bool| -> Result<Option<ScaleChoice>> {
        let g = bump_values(params, sys, s, duty);
        let c = low_coefficients(&g, &params.cell, sys, n)?;
        let mut worst = 0.0f64;
        let mut violated = 0;
        for (k, z) in c.iter().enumerate() {
            let v = z.norm();
            worst = worst.max(v);
            if v >= bound {
                violated = k + 1;
            }
        }
        if violated == 0 {
            return Ok(Some(ScaleChoice {
                s0: s,
                lower_bound: lower,
                duty,
                aligned,
                worst_low: worst,
                low_bound: bound,
            }));
        }
        last_fail = Some((violated, c[violated - 1].norm()));
        Ok(None)
    };

    if !fallback {
        for (s, duty, aligned) in candidates {
            if let Some(choice) = check(s, duty, aligned)? {
                return Ok(choice);
            }
        }
    } else {
        for s in first..=s0_max {
            if let Some(choice) = check(s, d, false)? {
                return Ok(choice);
            }
        }
    }
    let (violated, worst) = last_fail.unwrap_or((0, f64::NAN));
    Err(Error::ScaleSearchExhausted {
        s0_max,
        lower_bound: lower,
        violated,
        worst,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpMeasures {
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpNorms {
    pub g1: f64,
    pub g2: f64,
    /// `|| sum_{n <= M} Y_n(g) - g ||_2` from Bessel's identity.
    pub l2_tail: f64,
    #[serde(rename = "Q_minus_g_1")]
    pub q_minus_g_1: f64,
    pub envelope: f64,
    pub envelope_argmax: usize,
}

/// Raw pass/fail of the five bump statements (strict ones with [`STRICT_SLACK`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpStatements {
    pub kept_measure: bool,
    pub values_on_e_and_off_cell: bool,
    pub norm_sandwich: bool,
    pub block_approximates: bool,
    pub envelope_bounded: bool,
}

impl BumpStatements {
    pub fn all(&self) -> bool {
        self.kept_measure
            && self.values_on_e_and_off_cell
            && self.norm_sandwich
            && self.block_approximates
            && self.envelope_bounded
    }
}

#[derive(Debug, Clone)]
pub struct BumpResult {
    pub params: BumpParams,
    pub g: GridFunction,
    pub kept: NodeMask,
    pub block: FourierPolynomial,
    pub m_end: usize,
    pub s0: usize,
    pub delta_star: f64,
    pub scale: ScaleChoice,
    pub measures: BumpMeasures,
    pub norms: BumpNorms,
    pub envelope_bound: f64,
    pub statements: BumpStatements,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpReport {
    pub s0: usize,
    pub delta_star: f64,
    pub duty: f64,
    #[serde(rename = "M")]
    pub m_end: usize,
    #[serde(rename = "N")]
    pub n_start: usize,
    pub gamma: f64,
    pub eps: f64,
    pub delta: f64,
    pub cell: ProductCell,
    pub measures: BumpMeasures,
    pub norms: BumpNorms,
    pub envelope_bound: f64,
    pub statements: BumpStatements,
    pub mask: MaskRle,
}

impl BumpResult {
    pub fn report(&self) -> BumpReport {
        BumpReport {
            s0: self.s0,
            delta_star: self.delta_star,
            duty: self.scale.duty,
            m_end: self.m_end,
            n_start: self.params.n_start,
            gamma: self.params.gamma,
            eps: self.params.eps,
            delta: self.params.delta,
            cell: self.params.cell.clone(),
            measures: self.measures,
            norms: self.norms,
            envelope_bound: self.envelope_bound,
            statements: self.statements,
            mask: self.kept.to_rle(),
        }
    }
}

pub(crate) fn strict_lt(a: f64, b: f64, scale: f64) -> bool {
    a < b + STRICT_SLACK * scale.abs().max(f64::MIN_POSITIVE)
}

/// Builds the bump, its kept set and the block `Q = sum_{n=N}^{M} Y_n(g)`.
pub fn build_bump(
    params: &BumpParams,
    sys: &(impl OrthonormalSystem + ?Sized),
    opts: BumpOptions,
) -> Result<BumpResult> {
    params.validate()?;
    let space = sys.space();
    if opts.m_cap > sys.n_max() {
        return Err(invalid(format!("m_cap = {} exceeds n_max = {}", opts.m_cap, sys.n_max())));
    }
    if params.n_start > opts.m_cap {
        return Err(Error::BandwidthExhausted {
            m_cap: opts.m_cap,
            achieved: f64::NAN,
            required: params.eps / 2.0,
        });
    }
    let cell_measure = params.cell.measure(space);
    if cell_measure <= 0.0 {
        return Err(invalid("cell contains no grid nodes"));
    }
    let d = delta_star(params.delta)?;
    let scale = select_scale(params, sys, opts.s0_max)?;
    let g = bump_values(params, sys, scale.s0, scale.duty);

    let mut kept = NodeMask::empty(space);
    let tn = space.t_nodes();
    let r = params.cell.t_range(space);
    for &b in &params.cell.base {
        for i in r.clone() {
            if (scale.s0 as f64 * tn[i]).rem_euclid(1.0) >= scale.duty {
                kept.set(space.index(i, b), true);
            }
        }
    }

    let c = coefficients(&g, sys, opts.m_cap)?;
    let g2_sq = {
        let mut k = KahanSum::new();
        for (z, w) in g.values().iter().zip(space.weights()) {
            k.add(w * z.norm_sqr());
        }
        k.value()
    };
    let target = params.eps / 2.0;
    let mut bessel = KahanSum::new();
    let mut m_end = None;
    let mut tail = g2_sq.sqrt();
    for m in 1..=opts.m_cap {
        bessel.add(c.get(m).norm_sqr());
        tail = (g2_sq - bessel.value()).max(0.0).sqrt();
        if m >= params.n_start && tail < target {
            m_end = Some(m);
            break;
        }
    }
    let m_end = m_end.ok_or(Error::BandwidthExhausted {
        m_cap: opts.m_cap,
        achieved: tail,
        required: target,
    })?;

    let mut scan = PartialSumScan::new(sys, params.n_start);
    let mut envelope = 0.0f64;
    let mut argmax = params.n_start;
    for n in params.n_start..=m_end {
        scan.push(c.get(n));
        let v = scan.norm1();
        if v > envelope {
            envelope = v;
            argmax = n;
        }
    }
    let q_minus_g_1 = scan.norm1_diff(g.values());
    let block = FourierPolynomial::block(&c, params.n_start, m_end);

    let e_measure = kept.measure();
    let g1 = g.norm1();
    let gamma = params.gamma.abs();
    let envelope_bound = gamma * (cell_measure * (1.0 + params.delta) / params.delta).sqrt();

    let cell_mask = params.cell.mask(space);
    let exact_values = g.values().iter().enumerate().all(|(i, z)| {
        if kept.get(i) {
            z.re == params.gamma && z.im == 0.0
        } else if !cell_mask.get(i) {
            *z == Complex64::new(0.0, 0.0)
        } else {
            true
        }
    });

    let statements = BumpStatements {
        kept_measure: strict_lt(cell_measure * (1.0 - params.delta), e_measure, cell_measure),
        values_on_e_and_off_cell: exact_values,
        norm_sandwich: strict_lt(gamma * cell_measure, g1, gamma * cell_measure)
            && strict_lt(g1, 2.0 * gamma * cell_measure, gamma * cell_measure),
        block_approximates: strict_lt(q_minus_g_1, params.eps, params.eps),
        envelope_bounded: envelope <= envelope_bound * (1.0 + STRICT_SLACK),
    };

    Ok(BumpResult {
        params: params.clone(),
        g,
        kept,
        block,
        m_end,
        s0: scale.s0,
        delta_star: d,
        scale,
        measures: BumpMeasures {
            delta: cell_measure,
            e: e_measure,
        },
        norms: BumpNorms {
            g1,
            g2: g2_sq.sqrt(),
            l2_tail: tail,
            q_minus_g_1,
            envelope,
            envelope_argmax: argmax,
        },
        envelope_bound,
        statements,
    })
}

/// Coefficient vector of a finished bump up to `M`, for export.
pub fn bump_coefficients(res: &BumpResult, sys: &(impl OrthonormalSystem + ?Sized)) -> Result<CoefficientVector> {
    coefficients(&res.g, sys, res.m_end)
}

/// Range of the randomized bump trials on the interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrialRanges {
    pub delta: (f64, f64),
    pub eps: (f64, f64),
    pub gamma_abs: (f64, f64),
    pub width: (f64, f64),
    pub n_start: (usize, usize),
}

impl Default for TrialRanges {
    fn default() -> Self {
        Self {
            delta: (0.3, 0.9),
            eps: (0.3, 0.95),
            gamma_abs: (0.05, 0.5),
            width: (0.1, 0.5),
            n_start: (1, 8),
        }
    }
}

/// One random parameter set; cell ends sit on the `resolution` grid.
pub fn random_params(rng: &mut impl Rng, ranges: &TrialRanges, resolution: usize) -> BumpParams {
    let u = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.gen::<f64>();
    let width = u(rng, ranges.width);
    let cells = ((width * resolution as f64).round() as usize).clamp(2, resolution);
    let start = rng.gen_range(0..=resolution - cells);
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    BumpParams {
        cell: ProductCell::new(
            start as f64 / resolution as f64,
            (start + cells) as f64 / resolution as f64,
            vec![0],
        ),
        gamma: sign * u(rng, ranges.gamma_abs),
        eps: u(rng, ranges.eps),
        delta: u(rng, ranges.delta),
        n_start: rng.gen_range(ranges.n_start.0..=ranges.n_start.1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::CylinderSpace;
    use crate::systems::{Trigonometric, Walsh};

    #[test]
    fn delta_star_values() {
        assert!((delta_star(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((delta_star(1e-6).unwrap() - 1e-6).abs() < 1e-11);
        assert!(delta_star(1.0 - 1e-9).unwrap() < 0.5);
        assert!(delta_star(0.0).is_err());
        assert!(delta_star(1.0).is_err());
    }

    #[test]
    fn step_levels() {
        assert_eq!(periodic_step(1.0 / 3.0, 1.0, 0.5), 1.0);
        assert!((periodic_step(1.0 / 3.0, 1.0, 0.1) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_example() {
        assert!((scale_lower_bound(1.0 / 3.0, 0.5) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn walsh_dyadic_cell_has_zero_low_integrals() {
        let space = CylinderSpace::interval(1 << 12).unwrap();
        let w = Walsh::new(&space, 1 << 12).unwrap();
        let params = BumpParams {
            cell: ProductCell::new(0.25, 0.5, vec![0]),
            gamma: 1.0,
            eps: 0.5,
            delta: 1.0 / 3.0,
            n_start: 4,
        };
        let s = select_scale(&params, &w, 1 << 12).unwrap();
        assert_eq!(s.duty, 0.25);
        assert_eq!(s.worst_low, 0.0);
    }

    #[test]
    fn unit_cell_bump_on_trig() {
        let space = CylinderSpace::interval(1 << 14).unwrap();
        let t = Trigonometric::new(&space, 4096).unwrap();
        let params = BumpParams {
            cell: ProductCell::new(0.0, 1.0, vec![0]),
            gamma: 1.0,
            eps: 0.5,
            delta: 0.5,
            n_start: 1,
        };
        let r = build_bump(&params, &t, BumpOptions::new(4096)).unwrap();
        assert!(r.statements.all(), "{:?}", r.statements);
        // ||g||_1 = |E| + (1/d - 1)(|Delta| - |E|)
        let e = r.measures.e;
        let want = e + (1.0 / r.scale.duty - 1.0) * (1.0 - e);
        assert!((r.norms.g1 - want).abs() < 1e-12);
        assert!(r.norms.g2.powi(2) < (1.0 + 1.0 / params.delta) * 1.0);
    }
}
