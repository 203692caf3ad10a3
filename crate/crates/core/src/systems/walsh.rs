use std::sync::Arc;

use num_complex::Complex64;

use super::{OrthonormalSystem, SystemDescriptor};
use crate::error::{invalid, Error, Result};
use crate::measure::{CylinderSpace, GridFunction};

/// Walsh–Paley system, `w_n = prod r_k^{n_k}` over the binary digits of `n - 1`.
///
/// On `2^p` midpoint nodes the first `p` binary digits of `t_j` are the bits
/// of `j`, so `w_n(t_j) = (-1)^{popcount((n-1) & rev_p(j))}` and the sampled
/// system is exactly orthonormal.
pub struct Walsh {
    space: Arc<CylinderSpace>,
    n_max: usize,
    bits: u32,
}

impl Walsh {
    pub fn new(space: &Arc<CylinderSpace>, n_max: usize) -> Result<Self> {
        if !space.base().is_trivial() {
            return Err(invalid("the Walsh system needs a trivial base"));
        }
        let d = space.resolution();
        if !space.is_uniform_midpoint() || !d.is_power_of_two() {
            return Err(invalid(format!("Walsh needs a dyadic midpoint grid, got {d} nodes")));
        }
        if n_max == 0 || n_max > d {
            return Err(invalid(format!("n_max = {n_max} outside 1..={d}")));
        }
        Ok(Self {
            space: space.clone(),
            n_max,
            bits: d.trailing_zeros(),
        })
    }

    #[inline]
    fn rev(&self, j: usize) -> usize {
        if self.bits == 0 {
            0
        } else {
            j.reverse_bits() >> (usize::BITS - self.bits)
        }
    }

    #[inline]
    pub fn value(&self, n: usize, j: usize) -> f64 {
        if ((n - 1) & self.rev(j)).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// In-place Walsh–Hadamard transform, natural (Hadamard) order, unnormalized.
pub fn fwht(buf: &mut [Complex64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in buf.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

impl OrthonormalSystem for Walsh {
    fn space(&self) -> &Arc<CylinderSpace> {
        &self.space
    }

    fn n_max(&self) -> usize {
        self.n_max
    }

    fn fill(&self, n: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.value(n, j);
        }
    }

    fn sup_bound(&self, _n: usize) -> f64 {
        1.0
    }

    fn descriptor(&self) -> SystemDescriptor {
        SystemDescriptor {
            kind: "walsh".into(),
            n_max: self.n_max,
            resolution: self.space.resolution(),
            ordering: "Paley (dyadic) order".into(),
            l_max: None,
            dimension: None,
        }
    }

    fn coefficients(&self, f: &GridFunction, m: usize) -> Result<Vec<Complex64>> {
        if !f.space().same_as(&self.space) {
            return Err(Error::SpaceMismatch);
        }
        if m > self.n_max {
            return Err(Error::IndexOutOfRange {
                index: m,
                available: self.n_max,
            });
        }
        let mut buf = f.values().to_vec();
        fwht(&mut buf);
        let scale = 1.0 / self.space.resolution() as f64;
        // Paley index n-1 pairs with Hadamard row rev(n-1)
        Ok((1..=m).map(|n| buf[self.rev(n - 1)] * scale).collect())
    }
}
