use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{
    build_product_partition, CylinderSpace, GridFunction, KahanSum, ProductPartition,
};

/// Relative size of the imaginary part below which a function counts as real.
pub const REAL_TOL: f64 = 1e-12;

/// `Lambda = sum_k gamma_k chi_{Delta_k}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub partition: ProductPartition,
    pub gammas: Vec<f64>,
}

impl StepFunction {
    pub fn evaluate(&self, space: &Arc<CylinderSpace>) -> GridFunction {
        let mut out = GridFunction::zeros(space);
        let v = out.values_mut();
        for (cell, &g) in self.partition.cells.iter().zip(&self.gammas) {
            for idx in cell.nodes(space) {
                v[idx] = Complex64::new(g, 0.0);
            }
        }
        out
    }

    pub fn norm1(&self, space: &CylinderSpace) -> f64 {
        let mut k = KahanSum::new();
        for (cell, g) in self.partition.cells.iter().zip(&self.gammas) {
            k.add(g.abs() * cell.measure(space));
        }
        k.value()
    }
}

pub(crate) fn imaginary_fraction(f: &GridFunction) -> f64 {
    let mut im = KahanSum::new();
    for (z, w) in f.values().iter().zip(f.space().weights()) {
        im.add(w * z.im.abs());
    }
    let total = f.norm1();
    if total == 0.0 {
        0.0
    } else {
        im.value() / total
    }
}

fn boundary(space: &CylinderSpace, i: usize) -> f64 {
    let nt = space.resolution();
    if i == 0 {
        0.0
    } else if i >= nt {
        1.0
    } else if space.is_uniform_midpoint() {
        i as f64 / nt as f64
    } else {
        0.5 * (space.t_nodes()[i - 1] + space.t_nodes()[i])
    }
}

fn averaged(f: &GridFunction, partition: ProductPartition) -> (StepFunction, f64) {
    let space = f.space();
    let w = space.weights();
    let vals = f.values();
    let gammas: Vec<f64> = partition
        .cells
        .iter()
        .map(|c| {
            let mut num = KahanSum::new();
            let mut den = KahanSum::new();
            for idx in c.nodes(space) {
                num.add(w[idx] * vals[idx].re);
                den.add(w[idx]);
            }
            if den.value() > 0.0 {
                num.value() / den.value()
            } else {
                0.0
            }
        })
        .collect();
    let step = StepFunction { partition, gammas };
    let lam = step.evaluate(space);
    let err = (&lam - f).norm1();
    (step, err)
}

/// Partition on which `f` is exactly constant, from the change points of its rows.
fn exact_partition(f: &GridFunction) -> Result<ProductPartition> {
    let space = f.space();
    let nt = space.resolution();
    let nb = space.n_base();
    let vals = f.values();
    let row = |b: usize| &vals[b * nt..(b + 1) * nt];
    let mut cuts = vec![false; nt];
    for b in 0..nb {
        let r = row(b);
        for i in 1..nt {
            if r[i] != r[i - 1] {
                cuts[i] = true;
            }
        }
    }
    let mut breaks = vec![0.0];
    breaks.extend((1..nt).filter(|&i| cuts[i]).map(|i| boundary(space, i)));
    breaks.push(1.0);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for b in 0..nb {
        match groups.last_mut() {
            Some(g) if row(*g.last().unwrap()) == row(b) => g.push(b),
            _ => groups.push(vec![b]),
        }
    }
    build_product_partition(space, &breaks, &groups)
}

fn uniform_partition(space: &CylinderSpace, n_int: usize, n_grp: usize) -> Result<ProductPartition> {
    let nt = space.resolution();
    let nb = space.n_base();
    let mut breaks: Vec<f64> = (0..=n_int).map(|k| boundary(space, k * nt / n_int)).collect();
    breaks.dedup();
    let groups: Vec<Vec<usize>> = (0..n_grp)
        .map(|g| (g * nb / n_grp..(g + 1) * nb / n_grp).collect::<Vec<_>>())
        .filter(|g| !g.is_empty())
        .collect();
    build_product_partition(space, &breaks, &groups)
}

/// Step function with `||Lambda - f||_1 < bound`, `gamma_k` the cell averages of `Re f`.
///
/// Uniform partitions are refined by doubling until the bound holds. If `f`
/// is itself a step function with fewer cells than the current uniform
/// candidate, its own partition is used and the error is zero.
pub fn step_approximate(f: &GridFunction, bound: f64) -> Result<(StepFunction, f64)> {
    if !(bound > 0.0) {
        return Err(invalid("step bound must be positive"));
    }
    if f.norm1() == 0.0 {
        return Err(invalid("cannot approximate the zero function"));
    }
    if imaginary_fraction(f) > REAL_TOL {
        return Err(Error::UnsupportedInput(
            "step approximation needs a real function".into(),
        ));
    }
    let space = f.space();
    let nt = space.resolution();
    let nb = space.n_base();
    let exact = exact_partition(f)?;
    let mut level = 0u32;
    loop {
        let n_int = (1usize << level.min(62)).min(nt);
        let n_grp = (1usize << level.min(62)).min(nb);
        if exact.len() <= n_int * n_grp {
            return Ok(averaged(f, exact));
        }
        let (step, err) = averaged(f, uniform_partition(space, n_int, n_grp)?);
        if err < bound {
            return Ok((step, err));
        }
        if n_int == nt && n_grp == nb {
            return Err(Error::ResolutionExhausted {
                measure: err,
                required: bound,
            });
        }
        level += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_needs_four_cells() {
        let space = CylinderSpace::interval(1 << 10).unwrap();
        let f = GridFunction::from_real_fn(&space, |t, _| t);
        let (step, err) = step_approximate(&f, 0.1).unwrap();
        assert_eq!(step.partition.len(), 4);
        assert!((err - 4.0 * 0.25f64.powi(2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn step_input_is_reproduced() {
        let space = CylinderSpace::interval(1000).unwrap();
        let f = GridFunction::from_real_fn(&space, |t, _| if t < 0.4 { 1.0 } else { -0.5 });
        let (step, err) = step_approximate(&f, 1e-9).unwrap();
        assert_eq!(err, 0.0);
        assert_eq!(step.partition.len(), 2);
        assert_eq!(step.gammas, vec![1.0, -0.5]);
    }

    #[test]
    fn complex_input_rejected() {
        let space = CylinderSpace::interval(16).unwrap();
        let f = GridFunction::from_fn(&space, |t, _| Complex64::new(t, 1.0));
        assert!(matches!(step_approximate(&f, 0.1), Err(Error::UnsupportedInput(_))));
    }
}
