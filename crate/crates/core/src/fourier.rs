//! Coefficients, partial sums and partial-sum envelopes with respect to an
//! [`OrthonormalSystem`]. Indices are 1-based throughout.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{GridFunction, KahanSum};
use crate::systems::OrthonormalSystem;

/// Relative spectrum threshold: `|c_n| > SPECTRUM_REL_TOL * ||c||_inf` counts as nonzero.
pub const SPECTRUM_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoefficientVector {
    c: Vec<Complex64>,
}

impl CoefficientVector {
    pub fn new(c: Vec<Complex64>) -> Result<Self> {
        if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("coefficients must be finite"));
        }
        Ok(Self { c })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            c: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    pub fn unit(m: usize, k: usize) -> Self {
        let mut v = Self::zeros(m);
        v.c[k - 1] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `c_n`, 1-based.
    pub fn get(&self, n: usize) -> Complex64 {
        self.c[n - 1]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.c
    }

    pub fn sup(&self) -> f64 {
        self.c.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Rows `n,Re,Im`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "n,Re,Im")?;
        for (i, z) in self.c.iter().enumerate() {
            writeln!(w, "{},{:e},{:e}", i + 1, z.re, z.im)?;
        }
        Ok(())
    }

    pub fn read_csv(mut r: impl Read) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)
            .map_err(|e| invalid(format!("reading coefficients: {e}")))?;
        let mut c = Vec::new();
        for (line_no, line) in s.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |x: &str| -> Result<f64> {
                x.parse()
                    .map_err(|_| invalid(format!("line {}: bad number {x:?}", line_no + 1)))
            };
            if parts.len() != 3 {
                return Err(invalid(format!("line {}: expected n,Re,Im", line_no + 1)));
            }
            let n: usize = parts[0]
                .parse()
                .map_err(|_| invalid(format!("line {}: bad index", line_no + 1)))?;
            if n != c.len() + 1 {
                return Err(invalid(format!("line {}: indices must be 1,2,3,...", line_no + 1)));
            }
            c.push(Complex64::new(parse(parts[1])?, parse(parts[2])?));
        }
        Self::new(c)
    }
}

/// Sparse `sum c_n phi_n`; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FourierPolynomial {
    coeffs: BTreeMap<usize, Complex64>,
    n_lo: usize,
    n_hi: usize,
}

impl FourierPolynomial {
    /// Empty polynomial declared on the index block `[n_lo, n_hi]`.
    pub fn on_block(n_lo: usize, n_hi: usize) -> Self {
        Self {
            coeffs: BTreeMap::new(),
            n_lo,
            n_hi,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Complex64)>) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (n, z) in pairs {
            if n == 0 {
                return Err(invalid("indices are 1-based"));
            }
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(invalid("coefficients must be finite"));
            }
            if z != Complex64::new(0.0, 0.0) {
                *coeffs.entry(n).or_insert(Complex64::new(0.0, 0.0)) += z;
            }
        }
        coeffs.retain(|_, z| *z != Complex64::new(0.0, 0.0));
        let n_lo = coeffs.keys().next().copied().unwrap_or(1);
        let n_hi = coeffs.keys().next_back().copied().unwrap_or(0);
        Ok(Self { coeffs, n_lo, n_hi })
    }

    /// `sum_{n = n_lo}^{n_hi} c_n phi_n` taken from a coefficient vector.
    pub fn block(c: &CoefficientVector, n_lo: usize, n_hi: usize) -> Self {
        let coeffs = (n_lo..=n_hi.min(c.len()))
            .filter(|&n| c.get(n) != Complex64::new(0.0, 0.0))
            .map(|n| (n, c.get(n)))
            .collect();
        Self { coeffs, n_lo, n_hi }
    }

    pub fn range(&self) -> (usize, usize) {
        (self.n_lo, self.n_hi)
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, Complex64> {
        &self.coeffs
    }

    pub fn get(&self, n: usize) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn min_index(&self) -> Option<usize> {
        self.coeffs.keys().next().copied()
    }

    pub fn evaluate(&self, sys: &(impl OrthonormalSystem + ?Sized)) -> Result<GridFunction> {
        let space = sys.space();
        let mut out = GridFunction::zeros(space);
        let mut phi = vec![0.0; space.len()];
        for (&n, &z) in &self.coeffs {
            crate::systems::check_index(sys, n)?;
            sys.fill(n, &mut phi);
            out.add_real_scaled(z, &phi);
        }
        Ok(out)
    }

    /// `self + other` on the union of both blocks.
    pub fn merged(&self, other: &FourierPolynomial) -> FourierPolynomial {
        let mut out = Self::from_pairs(
            self.coeffs
                .iter()
                .chain(&other.coeffs)
                .map(|(n, z)| (*n, *z)),
        )
        .expect("finite");
        let lo = [self.n_lo, other.n_lo, out.n_lo];
        out.n_lo = lo.into_iter().min().unwrap();
        out.n_hi = out.n_hi.max(self.n_hi).max(other.n_hi);
        out
    }
}

pub fn coefficients(
    f: &GridFunction,
    sys: &(impl OrthonormalSystem + ?Sized),
    m: usize,
) -> Result<CoefficientVector> {
    if m > sys.n_max() {
        return Err(Error::IndexOutOfRange {
            index: m,
            available: sys.n_max(),
        });
    }
    CoefficientVector::new(sys.coefficients(f, m)?)
}

/// `sum_{n <= m} c_n phi_n`
pub fn partial_sum(
    c: &CoefficientVector,
    sys: &(impl OrthonormalSystem + ?Sized),
    m: usize,
) -> Result<GridFunction> {
    if m > c.len() || m > sys.n_max() {
        return Err(invalid(format!("partial sum of order {m} exceeds available coefficients")));
    }
    let mut scan = PartialSumScan::new(sys, 1);
    for n in 1..=m {
        scan.push(c.get(n));
    }
    Ok(scan.into_function())
}

/// `{n : |c_n| > tol}`
pub fn spectrum(c: &CoefficientVector, tol: f64) -> Vec<usize> {
    c.c.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > tol)
        .map(|(i, _)| i + 1)
        .collect()
}

pub fn default_spectrum_tol(c: &CoefficientVector) -> f64 {
    SPECTRUM_REL_TOL * c.sup()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub max: f64,
    pub argmax: usize,
}

/// `max_{n1 <= m <= n2} || sum_{n=n1}^m c_n phi_n ||_1`, scanning once.
pub fn partial_sum_envelope(
    c: &CoefficientVector,
    sys: &(impl OrthonormalSystem + ?Sized),
    n1: usize,
    n2: usize,
) -> Result<Envelope> {
    if n1 == 0 || n1 > n2 || n2 > c.len() || n2 > sys.n_max() {
        return Err(invalid(format!("bad envelope range [{n1}, {n2}]")));
    }
    let mut scan = PartialSumScan::new(sys, n1);
    let mut best = Envelope {
        max: 0.0,
        argmax: n1,
    };
    for n in n1..=n2 {
        scan.push(c.get(n));
        let v = scan.norm1();
        if v > best.max {
            best = Envelope { max: v, argmax: n };
        }
    }
    Ok(best)
}

/// Running sum `sum_{n=n_start}^{m} c_n phi_n`, one function added per step.
pub struct PartialSumScan<'a, S: OrthonormalSystem + ?Sized> {
    sys: &'a S,
    acc: Vec<Complex64>,
    phi: Vec<f64>,
    next: usize,
}

impl<'a, S: OrthonormalSystem + ?Sized> PartialSumScan<'a, S> {
    pub fn new(sys: &'a S, n_start: usize) -> Self {
        let len = sys.space().len();
        Self {
            sys,
            acc: vec![Complex64::new(0.0, 0.0); len],
            phi: vec![0.0; len],
            next: n_start,
        }
    }

    /// Index of the last function added.
    pub fn last(&self) -> usize {
        self.next - 1
    }

    /// Adds `c * phi_next`; zero coefficients cost nothing.
    pub fn push(&mut self, c: Complex64) {
        let n = self.next;
        self.next += 1;
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        assert!(n <= self.sys.n_max(), "index {n} beyond the system");
        self.sys.fill(n, &mut self.phi);
        if c.im == 0.0 {
            for (a, p) in self.acc.iter_mut().zip(&self.phi) {
                a.re += c.re * p;
            }
        } else {
            for (a, p) in self.acc.iter_mut().zip(&self.phi) {
                *a += c * p;
            }
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.acc
    }

    pub fn norm1(&self) -> f64 {
        let mut k = KahanSum::new();
        for (a, w) in self.acc.iter().zip(self.sys.space().weights()) {
            k.add(w * a.norm());
        }
        k.value()
    }

    /// `|| S - g ||_1`
    pub fn norm1_diff(&self, g: &[Complex64]) -> f64 {
        let mut k = KahanSum::new();
        for ((a, b), w) in self.acc.iter().zip(g).zip(self.sys.space().weights()) {
            k.add(w * (a - b).norm());
        }
        k.value()
    }

    pub fn into_function(self) -> GridFunction {
        GridFunction::new(self.sys.space().clone(), self.acc).expect("finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::CylinderSpace;
    use crate::systems::{evaluate, Trigonometric};

    #[test]
    fn spectrum_threshold() {
        let c = CoefficientVector::new(vec![
            Complex64::new(1e-13, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1e-13, 0.0),
        ])
        .unwrap();
        assert_eq!(spectrum(&c, 1e-12), vec![2]);
        assert!(spectrum(&CoefficientVector::zeros(4), 1e-12).is_empty());
    }

    #[test]
    fn envelope_of_single_cosine() {
        let space = CylinderSpace::interval(1 << 14).unwrap();
        let t = Trigonometric::new(&space, 8).unwrap();
        let c = CoefficientVector::unit(8, 2);
        let e = partial_sum_envelope(&c, &t, 1, 8).unwrap();
        assert!((e.max - 2.0 * 2f64.sqrt() / std::f64::consts::PI).abs() < 1e-6);
        assert_eq!(e.argmax, 2);
        let z = partial_sum_envelope(&CoefficientVector::zeros(8), &t, 3, 8).unwrap();
        assert_eq!((z.max, z.argmax), (0.0, 3));
    }

    #[test]
    fn linear_combination_coefficients() {
        let space = CylinderSpace::interval(256).unwrap();
        let t = Trigonometric::new(&space, 16).unwrap();
        let mut f = &evaluate(&t, 1).unwrap() * 2.0;
        f.axpy(Complex64::new(0.0, 1.0), &evaluate(&t, 2).unwrap()).unwrap();
        let c = coefficients(&f, &t, 16).unwrap();
        assert!((c.get(1) - Complex64::new(2.0, 0.0)).norm() < 1e-8);
        assert!((c.get(2) - Complex64::new(0.0, 1.0)).norm() < 1e-8);
        for n in 3..=16 {
            assert!(c.get(n).norm() < 1e-8);
        }
        assert!(matches!(
            coefficients(&f, &t, 17),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let c = CoefficientVector::new(vec![Complex64::new(0.5, -1.25), Complex64::new(1e-17, 3.0)]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(CoefficientVector::read_csv(&buf[..]).unwrap(), c);
    }

    #[test]
    fn block_polynomial_keeps_range() {
        let c = CoefficientVector::new(vec![Complex64::new(1.0, 0.0); 6]).unwrap();
        let q = FourierPolynomial::block(&c, 3, 5);
        assert_eq!(q.range(), (3, 5));
        assert_eq!(q.coeffs().len(), 3);
        assert_eq!(q.min_index(), Some(3));
    }
}
