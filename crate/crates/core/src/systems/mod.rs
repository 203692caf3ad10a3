//! Bounded orthonormal systems on discretized cylinder spaces.
//!
//! All systems shipped here are real-valued, so `fill` writes `f64` samples;
//! coefficients stay complex because the functions being expanded may be.

mod atom;
mod trig;
mod walsh;

pub use atom::{atom_example_check, AtomCheck, AtomExample};
pub use trig::Trigonometric;
pub use walsh::Walsh;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{CylinderSpace, GridFunction, KahanSum};
use crate::par;

pub trait OrthonormalSystem: Send + Sync {
    fn space(&self) -> &Arc<CylinderSpace>;

    /// Number of available functions; indices run over `1..=n_max`.
    fn n_max(&self) -> usize;

    /// Writes `phi_n` at every node, in storage order. `n` is 1-based and
    /// must be in range; callers go through [`basis_values`] for checking.
    fn fill(&self, n: usize, out: &mut [f64]);

    /// `sup |phi_n|`
    fn sup_bound(&self, n: usize) -> f64;

    fn descriptor(&self) -> SystemDescriptor;

    /// `c_1 .. c_m` of `f`. The default is direct quadrature; systems with a
    /// fast transform override it.
    fn coefficients(&self, f: &GridFunction, m: usize) -> Result<Vec<Complex64>> {
        direct_coefficients(self, f, m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDescriptor {
    pub kind: String,
    pub n_max: usize,
    pub resolution: usize,
    /// How indices map to functions, recorded so certificates pin the order.
    pub ordering: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
}

pub(crate) fn check_index(sys: &(impl OrthonormalSystem + ?Sized), n: usize) -> Result<()> {
    if n == 0 || n > sys.n_max() {
        return Err(Error::IndexOutOfRange {
            index: n,
            available: sys.n_max(),
        });
    }
    Ok(())
}

pub fn basis_values(sys: &(impl OrthonormalSystem + ?Sized), n: usize) -> Result<Vec<f64>> {
    check_index(sys, n)?;
    let mut out = vec![0.0; sys.space().len()];
    sys.fill(n, &mut out);
    Ok(out)
}

pub fn evaluate(sys: &(impl OrthonormalSystem + ?Sized), n: usize) -> Result<GridFunction> {
    GridFunction::from_real(sys.space(), basis_values(sys, n)?)
}

/// Coefficients by plain weighted sums, one pass per index.
pub fn direct_coefficients(
    sys: &(impl OrthonormalSystem + ?Sized),
    f: &GridFunction,
    m: usize,
) -> Result<Vec<Complex64>> {
    if !f.space().same_as(sys.space()) {
        return Err(Error::SpaceMismatch);
    }
    if m > sys.n_max() {
        return Err(Error::IndexOutOfRange {
            index: m,
            available: sys.n_max(),
        });
    }
    let w = sys.space().weights();
    let vals = f.values();
    Ok(par::map_range(m, |i| {
        let mut phi = vec![0.0; w.len()];
        sys.fill(i + 1, &mut phi);
        let mut re = KahanSum::new();
        let mut im = KahanSum::new();
        for ((z, p), wi) in vals.iter().zip(&phi).zip(w) {
            re.add(z.re * p * wi);
            im.add(z.im * p * wi);
        }
        Complex64::new(re.value(), im.value())
    }))
}

/// Gram matrix of `phi_1..phi_m` together with `max |G_ij - delta_ij|`.
pub fn gram_matrix(sys: &(impl OrthonormalSystem + ?Sized), m: usize) -> Result<(Vec<Vec<f64>>, f64)> {
    if m == 0 || m > sys.n_max() {
        return Err(invalid(format!("gram size {m} outside 1..={}", sys.n_max())));
    }
    let w = sys.space().weights();
    let cols: Vec<Vec<f64>> = par::map_range(m, |i| {
        let mut phi = vec![0.0; w.len()];
        sys.fill(i + 1, &mut phi);
        phi
    });
    let rows: Vec<Vec<f64>> = par::map_range(m, |i| {
        (0..m)
            .map(|j| {
                let mut acc = KahanSum::new();
                for ((a, b), wi) in cols[i].iter().zip(&cols[j]).zip(w) {
                    acc.add(a * b * wi);
                }
                acc.value()
            })
            .collect()
    });
    let mut dev = 0.0f64;
    for (i, row) in rows.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((x - target).abs());
        }
    }
    Ok((rows, dev))
}

pub fn from_descriptor(d: &SystemDescriptor, space: &Arc<CylinderSpace>) -> Result<Box<dyn OrthonormalSystem>> {
    match d.kind.as_str() {
        "trig" => Ok(Box::new(Trigonometric::new(space, d.n_max)?)),
        "walsh" => Ok(Box::new(Walsh::new(space, d.n_max)?)),
        other => Err(invalid(format!(
            "system kind {other:?} cannot be rebuilt from a cylinder grid alone"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_of_one() {
        let space = CylinderSpace::interval(16).unwrap();
        let t = Trigonometric::new(&space, 3).unwrap();
        let (g, dev) = gram_matrix(&t, 1).unwrap();
        assert!((g[0][0] - 1.0).abs() < 1e-10);
        assert!(dev < 1e-10);
    }
}
