//! Discretized cylinder spaces `[0,1] x B` with product measure.
//!
//! The `t` factor carries a quadrature rule (by default the composite midpoint
//! rule on a uniform grid), the base factor `B` is a finite set of weighted
//! cells. Nodes are stored base-major: node `b * nt + i` sits at `(t_i, b)`,
//! so each base cell owns one contiguous row of `t` samples.

use std::ops::{Add, Mul, Range, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const MEASURE_TOL: f64 = 1e-12;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut k = KahanSum::new();
    for x in xs {
        k.add(x);
    }
    k.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSpace {
    weights: Vec<f64>,
}

impl BaseSpace {
    /// One-point base with unit mass, i.e. the plain interval `[0,1]`.
    pub fn trivial() -> Self {
        Self { weights: vec![1.0] }
    }

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("base space needs at least one cell"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(invalid("base weights must be positive and finite"));
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(invalid(format!("base weights sum to {total}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// `n` cells of equal mass.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("base space needs at least one cell"));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.weights.len() == 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderSpace {
    t_nodes: Vec<f64>,
    t_weights: Vec<f64>,
    base: BaseSpace,
    weights: Vec<f64>,
    uniform_midpoint: bool,
}

impl CylinderSpace {
    /// Composite midpoint rule with `resolution` cells on `[0,1]`.
    pub fn uniform(resolution: usize, base: BaseSpace) -> Result<Arc<Self>> {
        if resolution == 0 {
            return Err(invalid("t-resolution must be positive"));
        }
        let h = 1.0 / resolution as f64;
        let t_nodes = (0..resolution).map(|i| (i as f64 + 0.5) * h).collect();
        let t_weights = vec![h; resolution];
        let mut s = Self::build(t_nodes, t_weights, base)?;
        s.uniform_midpoint = true;
        Ok(Arc::new(s))
    }

    /// Interval `[0,1]` alone, midpoint rule.
    pub fn interval(resolution: usize) -> Result<Arc<Self>> {
        Self::uniform(resolution, BaseSpace::trivial())
    }

    pub fn new(t_nodes: Vec<f64>, t_weights: Vec<f64>, base: BaseSpace) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::build(t_nodes, t_weights, base)?))
    }

    fn build(t_nodes: Vec<f64>, t_weights: Vec<f64>, base: BaseSpace) -> Result<Self> {
        if t_nodes.is_empty() || t_nodes.len() != t_weights.len() {
            return Err(invalid("t-nodes and t-weights must be non-empty and of equal length"));
        }
        if t_nodes.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("t-nodes must lie in [0,1]"));
        }
        if t_nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("t-nodes must be strictly increasing"));
        }
        if t_weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(invalid("t-weights must be positive and finite"));
        }
        let total = kahan_sum(t_weights.iter().copied()) * kahan_sum(base.weights.iter().copied());
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(invalid(format!("total measure is {total}, expected 1")));
        }
        let weights = base
            .weights
            .iter()
            .flat_map(|bw| t_weights.iter().map(move |tw| tw * bw))
            .collect();
        Ok(Self {
            t_nodes,
            t_weights,
            base,
            weights,
            uniform_midpoint: false,
        })
    }

    pub fn resolution(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn base(&self) -> &BaseSpace {
        &self.base
    }

    pub fn n_base(&self) -> usize {
        self.base.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn t_weights(&self) -> &[f64] {
        &self.t_weights
    }

    /// Node weights in storage order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform_midpoint(&self) -> bool {
        self.uniform_midpoint
    }

    #[inline]
    pub fn index(&self, i_t: usize, i_b: usize) -> usize {
        i_b * self.t_nodes.len() + i_t
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        let nt = self.t_nodes.len();
        (idx % nt, idx / nt)
    }

    pub fn total_measure(&self) -> f64 {
        kahan_sum(self.weights.iter().copied())
    }

    /// Indices of the `t`-nodes inside `[a,b)`; the right end is closed when `b >= 1`.
    pub fn t_range(&self, a: f64, b: f64) -> Range<usize> {
        let lo = self.t_nodes.partition_point(|&t| t < a);
        let hi = if b >= 1.0 {
            self.t_nodes.len()
        } else {
            self.t_nodes.partition_point(|&t| t < b)
        };
        lo..hi.max(lo)
    }

    pub fn t_measure(&self, a: f64, b: f64) -> f64 {
        kahan_sum(self.t_weights[self.t_range(a, b)].iter().copied())
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }

    pub fn descriptor(&self) -> GridDescriptor {
        let custom = !self.uniform_midpoint;
        GridDescriptor {
            t_resolution: (!custom).then(|| self.resolution()),
            t_nodes: custom.then(|| self.t_nodes.clone()),
            t_weights: custom.then(|| self.t_weights.clone()),
            base_cells: self
                .base
                .weights
                .iter()
                .enumerate()
                .map(|(id, &weight)| BaseCellDescriptor { id, weight })
                .collect(),
            partition: None,
        }
    }

    pub fn from_descriptor(d: &GridDescriptor) -> Result<Arc<Self>> {
        let mut cells = d.base_cells.clone();
        cells.sort_by_key(|c| c.id);
        if cells.iter().enumerate().any(|(i, c)| c.id != i) {
            return Err(invalid("base cell ids must be 0..n without gaps"));
        }
        let base = BaseSpace::new(cells.iter().map(|c| c.weight).collect())?;
        match (&d.t_nodes, &d.t_weights, d.t_resolution) {
            (Some(n), Some(w), _) => Self::new(n.clone(), w.clone(), base),
            (None, None, Some(r)) => Self::uniform(r, base),
            _ => Err(invalid("grid needs t_resolution or both t_nodes and t_weights")),
        }
    }
}

/// JSON form of a cylinder grid, optionally with a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    /// Uniform midpoint grid with this many `t` nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_nodes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_weights: Option<Vec<f64>>,
    pub base_cells: Vec<BaseCellDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<PartitionCellDescriptor>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseCellDescriptor {
    pub id: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCellDescriptor {
    pub a: f64,
    pub b: f64,
    pub base_ids: Vec<usize>,
}

impl GridDescriptor {
    pub fn with_partition(mut self, p: &ProductPartition) -> Self {
        self.partition = Some(
            p.cells
                .iter()
                .map(|c| PartitionCellDescriptor {
                    a: c.t.0,
                    b: c.t.1,
                    base_ids: c.base.clone(),
                })
                .collect(),
        );
        self
    }

    /// The partition, if any, validated against `space`.
    pub fn partition(&self, space: &CylinderSpace) -> Result<Option<ProductPartition>> {
        let Some(cells) = &self.partition else {
            return Ok(None);
        };
        let p = ProductPartition {
            cells: cells.iter().map(|c| ProductCell::new(c.a, c.b, c.base_ids.clone())).collect(),
        };
        p.validate(space)?;
        Ok(Some(p))
    }
}

#[derive(Debug, Clone)]
pub struct GridFunction {
    space: Arc<CylinderSpace>,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(space: Arc<CylinderSpace>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(invalid(format!(
                "expected {} values, got {}",
                space.len(),
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("grid function has non-finite values"));
        }
        Ok(Self { space, values })
    }

    pub fn zeros(space: &Arc<CylinderSpace>) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); space.len()],
            space: space.clone(),
        }
    }

    pub fn from_real(space: &Arc<CylinderSpace>, values: Vec<f64>) -> Result<Self> {
        Self::new(
            space.clone(),
            values.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Samples `f(t, base_index)` at every node.
    pub fn from_fn(space: &Arc<CylinderSpace>, f: impl Fn(f64, usize) -> Complex64) -> Self {
        let nt = space.resolution();
        let values = (0..space.len())
            .map(|idx| f(space.t_nodes[idx % nt], idx / nt))
            .collect();
        Self {
            space: space.clone(),
            values,
        }
    }

    pub fn from_real_fn(space: &Arc<CylinderSpace>, f: impl Fn(f64, usize) -> f64) -> Self {
        Self::from_fn(space, |t, b| Complex64::new(f(t, b), 0.0))
    }

    pub fn constant(space: &Arc<CylinderSpace>, c: Complex64) -> Self {
        Self {
            values: vec![c; space.len()],
            space: space.clone(),
        }
    }

    pub fn space(&self) -> &Arc<CylinderSpace> {
        &self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn check_same_space(&self, other: &GridFunction) -> Result<()> {
        if self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: Complex64, other: &GridFunction) -> Result<()> {
        self.check_same_space(other)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(())
    }

    /// Adds `a * phi` where `phi` is a real vector in node order.
    pub fn add_real_scaled(&mut self, a: Complex64, phi: &[f64]) {
        debug_assert_eq!(phi.len(), self.values.len());
        for (x, p) in self.values.iter_mut().zip(phi) {
            *x += a * p;
        }
    }

    pub fn scale(&mut self, a: Complex64) {
        for x in &mut self.values {
            *x *= a;
        }
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_space(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm1(&self) -> f64 {
        lp_norm(self, 1.0).expect("finite by construction")
    }

    pub fn norm2(&self) -> f64 {
        lp_norm(self, 2.0).expect("finite by construction")
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;

    /// Panics when the operands live on different spaces.
    fn add(self, rhs: &GridFunction) -> GridFunction {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), rhs)
            .expect("adding grid functions on different spaces");
        out
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;

    fn sub(self, rhs: &GridFunction) -> GridFunction {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), rhs)
            .expect("subtracting grid functions on different spaces");
        out
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;

    fn mul(self, rhs: f64) -> GridFunction {
        let mut out = self.clone();
        out.scale(Complex64::new(rhs, 0.0));
        out
    }
}

/// `(sum w |f|^p)^(1/p)` with compensated summation.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(invalid(format!("p = {p} is not a norm exponent")));
    }
    let w = f.space.weights();
    let mut acc = KahanSum::new();
    if p == 1.0 {
        for (z, wi) in f.values.iter().zip(w) {
            acc.add(wi * z.norm());
        }
        return finite(acc.value());
    }
    if p == 2.0 {
        for (z, wi) in f.values.iter().zip(w) {
            acc.add(wi * z.norm_sqr());
        }
        return finite(acc.value().sqrt());
    }
    for (z, wi) in f.values.iter().zip(w) {
        acc.add(wi * z.norm().powf(p));
    }
    finite(acc.value().powf(1.0 / p))
}

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid("norm is not finite"))
    }
}

/// `sum w f conj(g)`
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    f.check_same_space(g)?;
    let w = f.space.weights();
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    for ((a, b), wi) in f.values.iter().zip(&g.values).zip(w) {
        let z = a * b.conj() * wi;
        re.add(z.re);
        im.add(z.im);
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// Set of nodes, read as a measurable set of the cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMask {
    space: Arc<CylinderSpace>,
    bits: Vec<bool>,
}

impl NodeMask {
    pub fn empty(space: &Arc<CylinderSpace>) -> Self {
        Self {
            space: space.clone(),
            bits: vec![false; space.len()],
        }
    }

    pub fn full(space: &Arc<CylinderSpace>) -> Self {
        Self {
            space: space.clone(),
            bits: vec![true; space.len()],
        }
    }

    pub fn from_bits(space: &Arc<CylinderSpace>, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != space.len() {
            return Err(invalid("mask length does not match the grid"));
        }
        Ok(Self {
            space: space.clone(),
            bits,
        })
    }

    pub fn space(&self) -> &Arc<CylinderSpace> {
        &self.space
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: bool) {
        self.bits[idx] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn measure(&self) -> f64 {
        kahan_sum(
            self.bits
                .iter()
                .zip(self.space.weights())
                .filter(|(b, _)| **b)
                .map(|(_, w)| *w),
        )
    }

    pub fn union_with(&mut self, other: &NodeMask) -> Result<()> {
        if !self.space.same_as(&other.space) {
            return Err(Error::SpaceMismatch);
        }
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    pub fn intersect_with(&mut self, other: &NodeMask) -> Result<()> {
        if !self.space.same_as(&other.space) {
            return Err(Error::SpaceMismatch);
        }
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= *b;
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &NodeMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// Run-length encoding along storage order, first run counts `false` nodes.
    pub fn run_lengths(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut cur = false;
        let mut len = 0usize;
        for &b in &self.bits {
            if b == cur {
                len += 1;
            } else {
                runs.push(len);
                cur = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_run_lengths(space: &Arc<CylinderSpace>, runs: &[usize]) -> Result<Self> {
        let mut bits = Vec::with_capacity(space.len());
        let mut cur = false;
        for &r in runs {
            bits.extend(std::iter::repeat_n(cur, r));
            cur = !cur;
        }
        Self::from_bits(space, bits)
    }
}

/// Kept-set export: per base cell, half-open runs `[start, end)` of `t`-node indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRle {
    pub resolution: usize,
    pub n_base: usize,
    pub measure: f64,
    pub rows: Vec<Vec<[usize; 2]>>,
}

impl NodeMask {
    pub fn to_rle(&self) -> MaskRle {
        let nt = self.space.resolution();
        let rows = (0..self.space.n_base())
            .map(|b| {
                let row = &self.bits[b * nt..(b + 1) * nt];
                let mut runs = Vec::new();
                let mut start = None;
                for (i, &on) in row.iter().enumerate() {
                    match (on, start) {
                        (true, None) => start = Some(i),
                        (false, Some(s)) => {
                            runs.push([s, i]);
                            start = None;
                        }
                        _ => {}
                    }
                }
                if let Some(s) = start {
                    runs.push([s, nt]);
                }
                runs
            })
            .collect();
        MaskRle {
            resolution: nt,
            n_base: self.space.n_base(),
            measure: self.measure(),
            rows,
        }
    }

    pub fn from_rle(space: &Arc<CylinderSpace>, rle: &MaskRle) -> Result<Self> {
        if rle.resolution != space.resolution() || rle.n_base != space.n_base() || rle.rows.len() != rle.n_base {
            return Err(invalid("mask export does not match the grid"));
        }
        let mut m = Self::empty(space);
        for (b, runs) in rle.rows.iter().enumerate() {
            for &[s, e] in runs {
                if s > e || e > rle.resolution {
                    return Err(invalid("mask run out of range"));
                }
                for i in s..e {
                    m.set(space.index(i, b), true);
                }
            }
        }
        Ok(m)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `[a,b) x (union of base cells)`; the interval closes at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCell {
    pub t: (f64, f64),
    pub base: Vec<usize>,
}

impl ProductCell {
    pub fn new(a: f64, b: f64, base: Vec<usize>) -> Self {
        Self { t: (a, b), base }
    }

    pub fn whole_base(a: f64, b: f64, space: &CylinderSpace) -> Self {
        Self::new(a, b, (0..space.n_base()).collect())
    }

    pub fn width(&self) -> f64 {
        self.t.1 - self.t.0
    }

    pub fn t_range(&self, space: &CylinderSpace) -> Range<usize> {
        space.t_range(self.t.0, self.t.1)
    }

    pub fn base_measure(&self, space: &CylinderSpace) -> f64 {
        kahan_sum(self.base.iter().map(|&b| space.base().weights()[b]))
    }

    pub fn measure(&self, space: &CylinderSpace) -> f64 {
        space.t_measure(self.t.0, self.t.1) * self.base_measure(space)
    }

    /// Node indices in storage order.
    pub fn nodes<'a>(&'a self, space: &'a CylinderSpace) -> impl Iterator<Item = usize> + 'a {
        let r = self.t_range(space);
        self.base
            .iter()
            .flat_map(move |&b| r.clone().map(move |i| space.index(i, b)))
    }

    pub fn mask(&self, space: &Arc<CylinderSpace>) -> NodeMask {
        let mut m = NodeMask::empty(space);
        for idx in self.nodes(space) {
            m.set(idx, true);
        }
        m
    }

    fn validate(&self, space: &CylinderSpace) -> Result<()> {
        let (a, b) = self.t;
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= 1.0) {
            return Err(invalid(format!("bad t-interval [{a}, {b})")));
        }
        if self.base.is_empty() || self.base.iter().any(|&i| i >= space.n_base()) {
            return Err(invalid("cell refers to missing base cells"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPartition {
    pub cells: Vec<ProductCell>,
}

impl ProductPartition {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Every node is covered by exactly one cell.
    pub fn validate(&self, space: &CylinderSpace) -> Result<()> {
        let mut hits = vec![0u32; space.len()];
        for c in &self.cells {
            c.validate(space)?;
            for idx in c.nodes(space) {
                hits[idx] += 1;
            }
        }
        if let Some(idx) = hits.iter().position(|&h| h != 1) {
            let (i, b) = space.coords(idx);
            return Err(invalid(format!(
                "node (t = {}, base {b}) is covered {} times",
                space.t_nodes()[i],
                hits[idx]
            )));
        }
        let total = kahan_sum(self.cells.iter().map(|c| c.measure(space)));
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(invalid(format!("cells have total measure {total}")));
        }
        Ok(())
    }

    pub fn measures(&self, space: &CylinderSpace) -> Vec<f64> {
        self.cells.iter().map(|c| c.measure(space)).collect()
    }

    /// Cell index of every node.
    pub fn labels(&self, space: &CylinderSpace) -> Vec<usize> {
        let mut lab = vec![usize::MAX; space.len()];
        for (k, c) in self.cells.iter().enumerate() {
            for idx in c.nodes(space) {
                lab[idx] = k;
            }
        }
        lab
    }
}

/// Product of the `t`-intervals cut at `t_breaks` with the given base groups,
/// ordered `t`-major.
pub fn build_product_partition(
    space: &CylinderSpace,
    t_breaks: &[f64],
    base_groups: &[Vec<usize>],
) -> Result<ProductPartition> {
    if t_breaks.len() < 2 || t_breaks[0] != 0.0 || *t_breaks.last().unwrap() != 1.0 {
        return Err(invalid("t-breaks must run from 0 to 1"));
    }
    if t_breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("t-breaks must be strictly increasing"));
    }
    let mut seen = vec![false; space.n_base()];
    for g in base_groups {
        for &b in g {
            if b >= seen.len() || seen[b] {
                return Err(invalid("base groups must partition the base cells"));
            }
            seen[b] = true;
        }
    }
    if seen.iter().any(|s| !s) || base_groups.iter().any(|g| g.is_empty()) {
        return Err(invalid("base groups must partition the base cells"));
    }
    let cells = t_breaks
        .windows(2)
        .flat_map(|w| {
            base_groups
                .iter()
                .map(move |g| ProductCell::new(w[0], w[1], g.clone()))
        })
        .collect();
    let p = ProductPartition { cells };
    p.validate(space)?;
    Ok(p)
}

/// Bisects `t`-intervals until `factor * gamma^2 * |cell| * (1 + delta) < delta * f_norm1^2`
/// holds in every cell. Splits follow the node grid, so a single-node cell that
/// still violates the bound is reported as [`Error::ResolutionExhausted`].
pub fn refine_for_correction(
    space: &CylinderSpace,
    partition: &ProductPartition,
    gammas: &[f64],
    f_norm1: f64,
    delta: f64,
    factor: f64,
) -> Result<(ProductPartition, Vec<f64>)> {
    if gammas.len() != partition.len() {
        return Err(invalid("one gamma per cell is required"));
    }
    let limit = delta * f_norm1 * f_norm1;
    let mut cells = Vec::with_capacity(partition.len());
    let mut out_gammas = Vec::with_capacity(partition.len());
    for (cell, &gamma) in partition.cells.iter().zip(gammas) {
        let mut stack = vec![cell.clone()];
        while let Some(c) = stack.pop() {
            let m = c.measure(space);
            if factor * gamma * gamma * m * (1.0 + delta) < limit {
                cells.push(c);
                out_gammas.push(gamma);
                continue;
            }
            let r = c.t_range(space);
            if r.len() < 2 {
                return Err(Error::ResolutionExhausted {
                    measure: m,
                    required: limit / (factor * gamma * gamma * (1.0 + delta)),
                });
            }
            let mid = r.start + r.len() / 2;
            let tn = space.t_nodes();
            let cut = if space.is_uniform_midpoint() {
                mid as f64 / space.resolution() as f64
            } else {
                0.5 * (tn[mid - 1] + tn[mid])
            };
            stack.push(ProductCell::new(cut, c.t.1, c.base.clone()));
            stack.push(ProductCell::new(c.t.0, cut, c.base));
        }
    }
    Ok((ProductPartition { cells }, out_gammas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn four_cell_measures() {
        let space = CylinderSpace::uniform(64, BaseSpace::uniform(2).unwrap()).unwrap();
        let p = build_product_partition(&space, &[0.0, 0.25, 1.0], &[vec![0], vec![1]]).unwrap();
        let m = p.measures(&space);
        for (got, want) in m.iter().zip([0.125, 0.125, 0.375, 0.375]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn refinement_of_unit_cell() {
        let space = CylinderSpace::interval(2048).unwrap();
        let p = build_product_partition(&space, &[0.0, 1.0], &[vec![0]]).unwrap();
        let (r, g) = refine_for_correction(&space, &p, &[1.0], 1.0, 0.5, 144.0).unwrap();
        assert_eq!(r.len(), 512);
        assert!(g.iter().all(|&x| x == 1.0));
        r.validate(&space).unwrap();
        assert_abs_diff_eq!(r.cells[0].measure(&space), 1.0 / 512.0, epsilon = 1e-15);
    }

    #[test]
    fn refinement_runs_out_of_nodes() {
        let space = CylinderSpace::interval(64).unwrap();
        let p = build_product_partition(&space, &[0.0, 1.0], &[vec![0]]).unwrap();
        let err = refine_for_correction(&space, &p, &[1.0], 1.0, 0.5, 144.0).unwrap_err();
        assert!(matches!(err, Error::ResolutionExhausted { .. }));
    }

    #[test]
    fn mask_rle_round_trip() {
        let space = CylinderSpace::interval(10).unwrap();
        let bits = vec![true, true, false, true, false, false, false, true, true, true];
        let m = NodeMask::from_bits(&space, bits).unwrap();
        let runs = m.run_lengths();
        assert_eq!(runs, vec![0, 2, 1, 1, 3, 3]);
        assert_eq!(NodeMask::from_run_lengths(&space, &runs).unwrap(), m);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        let i12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_abs_diff_eq!(i12, 2.0 / 13.0, epsilon = 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn rle_export_round_trip() {
        let space = CylinderSpace::uniform(8, BaseSpace::uniform(2).unwrap()).unwrap();
        let bits = vec![
            false, true, true, false, false, true, true, true, true, false, false, false, false, false, false, true,
        ];
        let m = NodeMask::from_bits(&space, bits).unwrap();
        let rle = m.to_rle();
        assert_eq!(rle.rows, vec![vec![[1, 3], [5, 8]], vec![[0, 1], [7, 8]]]);
        assert_eq!(NodeMask::from_rle(&space, &rle).unwrap(), m);
    }

    #[test]
    fn descriptor_round_trip() {
        let space = CylinderSpace::uniform(16, BaseSpace::new(vec![0.25, 0.75]).unwrap()).unwrap();
        let p = build_product_partition(&space, &[0.0, 0.5, 1.0], &[vec![0, 1]]).unwrap();
        let d = space.descriptor().with_partition(&p);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"t_resolution\":16") && json.contains("base_ids"));
        let back: GridDescriptor = serde_json::from_str(&json).unwrap();
        let space2 = CylinderSpace::from_descriptor(&back).unwrap();
        assert!(space.same_as(&space2));
        assert_eq!(back.partition(&space2).unwrap(), Some(p));

        let (x, w) = gauss_legendre(5);
        let gl = CylinderSpace::new(x.iter().map(|x| (x + 1.0) / 2.0).collect(), w.iter().map(|w| w / 2.0).collect(), BaseSpace::trivial()).unwrap();
        assert!(gl.same_as(&CylinderSpace::from_descriptor(&gl.descriptor()).unwrap()));
    }

    #[test]
    fn rejects_unnormalized_space() {
        let err = CylinderSpace::new(vec![0.25, 0.75], vec![0.5, 0.6], BaseSpace::trivial());
        assert!(err.is_err());
    }
}
