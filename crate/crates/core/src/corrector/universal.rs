//! The universal set and the correction of arbitrary integrable functions.
//!
//! [`build_universal_set`] corrects every enumerated polynomial `R_k`,
//! `k <= K`, at accuracy `eps0_floor / 2^(k+7)` on a set of measure
//! `> 1 - delta / 2^k`, with consecutive frequency blocks. The intersection of
//! the kept sets does not depend on any target function. [`correct`] then
//! expands a target greedily into enumerated polynomials, swaps each term for
//! a corrected copy of itself from the bundle, and certifies the result.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::budgets::Budgets;
use super::enumeration::PolynomialSource;
use super::greedy::{greedy_series, GreedySeries};
use super::lemma::{correct_step, StepMetrics, StepOptions, StepStatements};
use crate::bump::strict_lt;
use crate::error::{invalid, Error, Result};
use crate::fourier::{FourierPolynomial, PartialSumScan};
use crate::measure::{GridFunction, MaskRle, NodeMask};
use crate::systems::OrthonormalSystem;

pub const PARAM_FLOOR: f64 = 1e-6;

/// Clamps `eps` or `delta` into `[1e-6, 1 - 1e-6]`; the flag says whether it moved.
pub fn clamp_param(x: f64) -> (f64, bool) {
    let c = x.clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR);
    (c, c != x)
}

#[derive(Debug, Clone)]
pub struct BundleRecord {
    pub k: u64,
    pub kept: NodeMask,
    pub g: GridFunction,
    /// `g_k - R_k`
    pub defect: GridFunction,
    pub q: FourierPolynomial,
    /// `Q_k` lives on `[n_prev, n_k - 1]`.
    pub n_prev: usize,
    pub n_k: usize,
    pub r_norm1: f64,
    pub r_max_index: usize,
    pub metrics: StepMetrics,
    pub statements: StepStatements,
}

#[derive(Debug, Clone)]
pub struct UniversalSetBundle {
    pub e: NodeMask,
    pub records: Vec<BundleRecord>,
    pub depth: usize,
    pub eps0_floor: f64,
    pub delta: f64,
    pub budgets: Budgets,
    pub source: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleSummary {
    pub depth: usize,
    pub eps0_floor: f64,
    pub delta: f64,
    pub e_measure: f64,
    pub n: Vec<usize>,
    pub source: String,
    pub records: Vec<RecordSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordSummary {
    pub k: u64,
    pub kept_measure: f64,
    pub n_prev: usize,
    pub n_k: usize,
    pub r_norm1: f64,
    pub metrics: StepMetrics,
    pub statements: StepStatements,
}

impl UniversalSetBundle {
    /// `N_0, N_1, ..., N_K`
    pub fn n_sequence(&self) -> Vec<usize> {
        let mut n = vec![self.records.first().map_or(1, |r| r.n_prev)];
        n.extend(self.records.iter().map(|r| r.n_k));
        n
    }

    pub fn record(&self, k: u64) -> Option<&BundleRecord> {
        self.records.get((k as usize).checked_sub(1)?)
    }

    pub fn summary(&self) -> BundleSummary {
        BundleSummary {
            depth: self.depth,
            eps0_floor: self.eps0_floor,
            delta: self.delta,
            e_measure: self.e.measure(),
            n: self.n_sequence(),
            source: self.source.clone(),
            records: self
                .records
                .iter()
                .map(|r| RecordSummary {
                    k: r.k,
                    kept_measure: r.kept.measure(),
                    n_prev: r.n_prev,
                    n_k: r.n_k,
                    r_norm1: r.r_norm1,
                    metrics: r.metrics,
                    statements: r.statements,
                })
                .collect(),
        }
    }
}

/// Corrects `R_1, ..., R_K` in sequence and intersects the kept sets.
///
/// Runs are chained through the block boundaries `N_k`, so they cannot be
/// done side by side.
pub fn build_universal_set(
    eps0_floor: f64,
    delta: f64,
    depth: usize,
    sys: &(impl OrthonormalSystem + ?Sized),
    source: &(impl PolynomialSource + ?Sized),
    opts: &StepOptions,
) -> Result<UniversalSetBundle> {
    if depth == 0 {
        return Err(invalid("universal set depth must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) || !(eps0_floor > 0.0) {
        return Err(invalid(format!("eps0 = {eps0_floor}, delta = {delta} out of range")));
    }
    if depth as u64 > source.budget() {
        return Err(invalid(format!("depth {depth} exceeds the enumeration budget {}", source.budget())));
    }
    let space = sys.space();
    let b = &opts.budgets;
    let mut e = NodeMask::full(space);
    let mut records = Vec::with_capacity(depth);
    let mut n_prev = 1usize;
    for k in 1..=depth as u64 {
        let r = source
            .get(k)
            .ok_or_else(|| Error::InternalInvariant(format!("R_{k} missing from the enumeration")))?;
        let r_fn = r.evaluate(sys)?;
        let eps_k = b.bundle_eps(eps0_floor, k as usize)?;
        let delta_k = b.bundle_delta(delta, k as usize);
        let c = correct_step(&r_fn, eps_k.min(1.0 - PARAM_FLOOR), delta_k, n_prev, sys, opts)
            .map_err(|err| err.context(format!("universal set level k = {k} (eps {eps_k:.3e}, delta {delta_k:.3e})")))?;
        e.intersect_with(&c.kept)?;
        records.push(BundleRecord {
            k,
            kept: c.kept,
            r_norm1: r_fn.norm1(),
            r_max_index: r.max_index().unwrap_or(0),
            g: c.g,
            defect: c.defect,
            q: c.q,
            n_prev,
            n_k: c.n_end + 1,
            metrics: c.metrics,
            statements: c.statements,
        });
        n_prev = c.n_end + 1;
    }
    Ok(UniversalSetBundle {
        e,
        records,
        depth,
        eps0_floor,
        delta,
        budgets: *b,
        source: source.describe(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCheck {
    pub r: usize,
    pub m: usize,
    pub tail: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Achieved {
    pub f_norm1: f64,
    pub g_norm1: f64,
    pub f_minus_g_1: f64,
    pub f_minus_g_bound: f64,
    pub e_measure: f64,
    /// `max |f - g|` over the nodes of `E`
    pub max_diff_on_e: f64,
    pub sup_partial_1: f64,
    pub sup_partial_argmax: usize,
    /// Last partial-sum order scanned, `min(N_K - 1, n_max)`.
    pub scanned_to: usize,
    pub min_f1_g1: f64,
    pub sup_over_min: f64,
    pub tails: Vec<TailCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateStatements {
    pub approximates: bool,
    pub agrees_on_e: bool,
    pub tails_decay: bool,
    pub envelope_bounded: bool,
}

impl CertificateStatements {
    pub fn all(&self) -> bool {
        self.approximates && self.agrees_on_e && self.tails_decay && self.envelope_bounded
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub k: Vec<u64>,
    pub nu: Vec<u64>,
    pub s_max: usize,
    pub nu_exceeds_s: bool,
    pub greedy: GreedySeries,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionCertificate {
    pub eps: f64,
    pub delta: f64,
    pub eps0: f64,
    pub clamped: bool,
    pub achieved: Achieved,
    pub statements: CertificateStatements,
    /// `25 ||f||_1 < 32 ||g||_1`
    pub norm_relation: bool,
    pub provenance: Provenance,
}

fn poly_distance(
    a: &FourierPolynomial,
    b: &FourierPolynomial,
    sys: &(impl OrthonormalSystem + ?Sized),
) -> Result<f64> {
    let neg = FourierPolynomial::from_pairs(b.coeffs().iter().map(|(n, z)| (*n, -z)))?;
    let d = a.merged(&neg);
    if d.coeffs().values().all(|z| z.norm() == 0.0) {
        return Ok(0.0);
    }
    Ok(d.evaluate(sys)?.norm1())
}

/// Smallest `nu` in `(after, limit]` whose `R_nu` is within `bound` of `target`
/// and whose predecessor block ends past `min_n`.
fn select_nu(
    target: &FourierPolynomial,
    after: u64,
    limit: u64,
    bound: f64,
    min_n: Option<usize>,
    n_seq: &[usize],
    sys: &(impl OrthonormalSystem + ?Sized),
    source: &(impl PolynomialSource + ?Sized),
) -> Result<Option<u64>> {
    for nu in after + 1..=limit {
        if let Some(m) = min_n {
            // N_{nu-1} > m
            if n_seq.get(nu as usize - 1).is_some_and(|&n| n <= m) {
                continue;
            }
        }
        let Some(r) = source.get(nu) else { break };
        if poly_distance(&r, target, sys)? < bound {
            return Ok(Some(nu));
        }
    }
    Ok(None)
}

/// Corrects `f` on the bundle's universal set.
///
/// `g = f + sum_s (g_{nu_s} - R_{nu_s})`, so `g` and `f` agree on `E` node for
/// node; the part of `f` the truncated greedy series did not reach is kept
/// in `g` unchanged.
pub fn correct(
    f: &GridFunction,
    eps: f64,
    delta: f64,
    bundle: &UniversalSetBundle,
    sys: &(impl OrthonormalSystem + ?Sized),
    source: &(impl PolynomialSource + ?Sized),
    s_max: usize,
) -> Result<(GridFunction, CorrectionCertificate)> {
    if !f.space().same_as(sys.space()) || !bundle.e.space().same_as(sys.space()) {
        return Err(Error::SpaceMismatch);
    }
    if bundle.source != source.describe() {
        return Err(Error::BundleMismatch(format!(
            "bundle built over '{}', correction requested over '{}'",
            bundle.source,
            source.describe()
        )));
    }
    let (eps, c1) = clamp_param(eps);
    let (delta, c2) = clamp_param(delta);
    let f1 = f.norm1();
    if f1 == 0.0 {
        return Err(invalid("the function to correct must have positive L1 norm"));
    }
    let eps0 = eps.min(f1);
    if bundle.delta > delta {
        return Err(Error::BundleMismatch(format!(
            "bundle delta {} exceeds requested {delta}",
            bundle.delta
        )));
    }
    if bundle.eps0_floor > eps0 * (1.0 + 1e-12) {
        return Err(Error::BundleMismatch(format!(
            "bundle accuracy floor {} exceeds eps0 = {eps0}",
            bundle.eps0_floor
        )));
    }
    let budgets = &bundle.budgets;
    let greedy = greedy_series(f, |s| budgets.greedy_b(eps0, s), sys, source, s_max)?;
    let ks = greedy.indices();
    let k0_poly = source.get(ks[0]).expect("greedy index within budget");
    let sigma0 = k0_poly.max_index().unwrap_or(0);

    let n_seq = bundle.n_sequence();
    let depth = bundle.depth as u64;
    let mut nus = Vec::with_capacity(s_max);
    let mut prev = 0u64;
    for s in 1..=s_max {
        let target = source.get(ks[s]).expect("greedy index within budget");
        let bound = budgets.select_bound(eps0, s);
        let min_n = (s == 1).then_some(sigma0);
        match select_nu(&target, prev, depth, bound, min_n, &n_seq, sys, source)? {
            Some(nu) => {
                nus.push(nu);
                prev = nu;
            }
            None => {
                let required = select_nu(&target, depth, source.budget(), bound, None, &[], sys, source)?;
                return Err(Error::UniversalSetTooShallow {
                    depth: bundle.depth,
                    step: s,
                    required,
                });
            }
        }
    }

    let mut g = f.clone();
    for &nu in &nus {
        let rec = bundle.record(nu).expect("nu <= depth");
        g.axpy(Complex64::new(1.0, 0.0), &rec.defect)?;
    }
    let achieved = measure_certificate(f, &g, bundle, &nus, eps0, sys)?;
    let statements = CertificateStatements {
        approximates: strict_lt(achieved.f_minus_g_1, eps, eps)
            && achieved.f_minus_g_1 <= achieved.f_minus_g_bound + 1e-6,
        agrees_on_e: achieved.max_diff_on_e == 0.0 && strict_lt(1.0 - delta, achieved.e_measure, 1.0),
        tails_decay: achieved.tails.iter().all(|t| t.tail < t.bound + 1e-6),
        envelope_bounded: strict_lt(achieved.sup_partial_1, 2.0 * achieved.min_f1_g1, achieved.min_f1_g1),
    };
    let norm_relation = 25.0 * f1 < 32.0 * achieved.g_norm1 + 1e-6;
    let nu_exceeds_s = nus.iter().enumerate().all(|(i, &nu)| nu > i as u64 + 1);
    Ok((
        g,
        CorrectionCertificate {
            eps,
            delta,
            eps0,
            clamped: c1 || c2,
            achieved,
            statements,
            norm_relation,
            provenance: Provenance {
                k: ks,
                nu: nus,
                s_max,
                nu_exceeds_s,
                greedy,
            },
        },
    ))
}

fn measure_certificate(
    f: &GridFunction,
    g: &GridFunction,
    bundle: &UniversalSetBundle,
    nus: &[u64],
    eps0: f64,
    sys: &(impl OrthonormalSystem + ?Sized),
) -> Result<Achieved> {
    let f_norm1 = f.norm1();
    let g_norm1 = g.norm1();
    let f_minus_g_1 = (f - g).norm1();
    let max_diff_on_e = f
        .values()
        .iter()
        .zip(g.values())
        .zip(bundle.e.bits())
        .filter(|(_, &k)| k)
        .map(|((a, b), _)| (a - b).norm())
        .fold(0.0, f64::max);

    let n_k = *bundle.n_sequence().last().expect("depth >= 1");
    let scanned_to = (n_k - 1).min(sys.n_max());
    let checkpoints: Vec<(usize, usize)> = nus
        .iter()
        .enumerate()
        .map(|(i, &nu)| (i + 1, bundle.record(nu).expect("nu <= depth").n_k - 1))
        .filter(|&(_, m)| m <= scanned_to)
        .collect();
    let c = sys.coefficients(g, scanned_to)?;
    let mut scan = PartialSumScan::new(sys, 1);
    let mut sup = 0.0f64;
    let mut argmax = 0;
    let mut tails = Vec::new();
    for (i, z) in c.iter().enumerate() {
        let m = i + 1;
        scan.push(*z);
        let v = scan.norm1();
        if v > sup {
            sup = v;
            argmax = m;
        }
        for &(r, _) in checkpoints.iter().filter(|(_, cm)| *cm == m) {
            tails.push(TailCheck {
                r,
                m,
                tail: scan.norm1_diff(g.values()),
                bound: 23.0 * eps0 / 2f64.powi(r as i32 + 4),
            });
        }
    }
    let min_f1_g1 = f_norm1.min(g_norm1);
    Ok(Achieved {
        f_norm1,
        g_norm1,
        f_minus_g_1,
        f_minus_g_bound: 7.0 * eps0 / 32.0,
        e_measure: bundle.e.measure(),
        max_diff_on_e,
        sup_partial_1: sup,
        sup_partial_argmax: argmax,
        scanned_to,
        min_f1_g1,
        sup_over_min: sup / min_f1_g1,
        tails,
    })
}

#[derive(Debug, Clone)]
pub struct SequenceEntry {
    pub m: usize,
    pub e: NodeMask,
    pub g: GridFunction,
    pub certificate: CorrectionCertificate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceRow {
    pub m: usize,
    pub eps: f64,
    pub f_minus_g_1: f64,
    pub e_measure: f64,
    /// `E_{m-1}` contained in `E_m`; `None` for the first entry.
    pub nested: Option<bool>,
    pub statements: CertificateStatements,
    pub e_rle: MaskRle,
}

/// `eps_m = delta_m = 1/m` for `m = 1..=m_max`, each with its own bundle.
///
/// Nesting of the sets is reported by [`sequence_rows`], not enforced.
pub fn correction_sequence(
    f: &GridFunction,
    m_max: usize,
    depth: usize,
    s_max: usize,
    sys: &(impl OrthonormalSystem + ?Sized),
    source: &(impl PolynomialSource + ?Sized),
    opts: &StepOptions,
) -> Result<Vec<SequenceEntry>> {
    if m_max == 0 {
        return Err(invalid("m_max must be at least 1"));
    }
    let f1 = f.norm1();
    (1..=m_max)
        .map(|m| {
            let (eps, _) = clamp_param(1.0 / m as f64);
            let bundle = build_universal_set(eps.min(f1), eps, depth, sys, source, opts)
                .map_err(|e| e.context(format!("sequence entry m = {m}")))?;
            let (g, certificate) = correct(f, eps, eps, &bundle, sys, source, s_max)
                .map_err(|e| e.context(format!("sequence entry m = {m}")))?;
            Ok(SequenceEntry {
                m,
                e: bundle.e,
                g,
                certificate,
            })
        })
        .collect()
}

pub fn sequence_rows(entries: &[SequenceEntry]) -> Vec<SequenceRow> {
    entries
        .iter()
        .enumerate()
        .map(|(i, en)| SequenceRow {
            m: en.m,
            eps: en.certificate.eps,
            f_minus_g_1: en.certificate.achieved.f_minus_g_1,
            e_measure: en.certificate.achieved.e_measure,
            nested: (i > 0).then(|| entries[i - 1].e.is_subset_of(&en.e)),
            statements: en.certificate.statements,
            e_rle: en.e.to_rle(),
        })
        .collect()
}
