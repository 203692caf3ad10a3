//! Two-point space with an atom: the correction theorem fails without
//! diffuseness. Exact checks run in rational arithmetic.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{invalid, Result};

type Q = Ratio<i128>;

fn qabs(q: Q) -> Q {
    if q < Q::from_integer(0) {
        -q
    } else {
        q
    }
}

#[derive(Debug, Clone)]
pub struct AtomExample {
    pub n: u32,
    /// `P({1}), P({2})`
    pub weights: (Q, Q),
    pub phi1: (Q, Q),
    /// Orthonormal companion of `phi1`; irrational in general, so kept in `f64`.
    pub phi2: (f64, f64),
}

impl AtomExample {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 || n > 1_000_000 {
            return Err(invalid("N must lie in 1..=1e6"));
        }
        let nn = n as i128;
        let p = Q::new(3, 16 * nn * nn - 1);
        let one = Q::from_integer(1);
        let phi1 = (Q::from_integer(2 * nn), Q::new(1, 2));
        let pf = 3.0 / (16.0 * (n as f64).powi(2) - 1.0);
        // p a 2N + (1-p) b / 2 = 0 with p a^2 + (1-p) b^2 = 1
        let ratio = -(1.0 - pf) / (4.0 * n as f64 * pf);
        let b = 1.0 / (pf * ratio * ratio + (1.0 - pf)).sqrt();
        Ok(Self {
            n,
            weights: (p, one - p),
            phi1,
            phi2: (ratio * b, b),
        })
    }

    pub fn phi1_norm2_sq(&self) -> Q {
        let (p, q) = self.weights;
        p * self.phi1.0 * self.phi1.0 + q * self.phi1.1 * self.phi1.1
    }

    pub fn phi1_norm1(&self) -> Q {
        let (p, q) = self.weights;
        p * qabs(self.phi1.0) + q * qabs(self.phi1.1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AtomCheck {
    pub n: u32,
    pub lhs: f64,
    pub rhs: f64,
    /// Exact rationals as `"num/den"`.
    pub lhs_exact: String,
    pub rhs_exact: String,
    pub holds: bool,
}

/// `f = (1, 0)`: compares `||Y_1(f)||_1 = |c_1(f)| ||phi_1||_1` with `N ||f||_1`.
pub fn atom_example_check(n: u32) -> Result<AtomCheck> {
    let ex = AtomExample::new(n)?;
    let p = ex.weights.0;
    let c1 = p * ex.phi1.0;
    let lhs = qabs(c1) * ex.phi1_norm1();
    let rhs = Q::from_integer(n as i128) * p;
    let to_f = |q: Q| *q.numer() as f64 / *q.denom() as f64;
    Ok(AtomCheck {
        n,
        lhs: to_f(lhs),
        rhs: to_f(rhs),
        lhs_exact: format!("{}/{}", lhs.numer(), lhs.denom()),
        rhs_exact: format!("{}/{}", rhs.numer(), rhs.denom()),
        holds: lhs > rhs,
    })
}
