//! Every accuracy budget of the correction pipeline, in one table.
//!
//! The defaults are the constants of the original construction. They are
//! deliberately not tuned: on a finite grid several of them cannot be met
//! (see the repository notes), and the pipeline reports that instead of
//! quietly substituting something weaker. Tests of the assembly logic may
//! build a [`Budgets`] with other values, and must say so.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    /// `c` in the cell condition `c gamma^2 |Delta| (1 + delta) < delta ||f||_1^2`.
    pub fine_partition: f64,
    /// Step approximation bound `min{eps * step_eps, ||f||_1 * step_norm}`.
    pub step_eps: f64,
    pub step_norm: f64,
    /// Per-bump accuracy `min{eps, ||f||_1} / 2^(nu0 + bump_shift)` for `nu0` cells.
    pub bump_shift: i32,
    /// Universal set: level `k` runs at accuracy `eps0 / 2^(k + bundle_shift)` ...
    pub bundle_shift: i32,
    /// ... and with `delta / 2^(k * bundle_delta_rate)`.
    pub bundle_delta_rate: i32,
    /// Greedy series bounds `b_s = eps0 / 2^(s + greedy_shift)`.
    pub greedy_shift: i32,
    /// Selection of `nu_s`: `||R_nu - target||_1 < eps0 / 2^(s + select_shift)`.
    pub select_shift: i32,
}

impl Default for Budgets {
    fn default() -> Self {
        Self::LITERAL
    }
}

impl Budgets {
    pub const LITERAL: Budgets = Budgets {
        fine_partition: 144.0,
        step_eps: 0.5,
        step_norm: 1.0 / 3.0,
        bump_shift: 2,
        bundle_shift: 7,
        bundle_delta_rate: 1,
        greedy_shift: 6,
        select_shift: 7,
    };

    pub fn is_literal(&self) -> bool {
        *self == Self::LITERAL
    }

    pub fn step_bound(&self, eps: f64, f_norm1: f64) -> f64 {
        (eps * self.step_eps).min(f_norm1 * self.step_norm)
    }

    /// Per-bump `eps` for a partition of `nu0` cells, or an underflow error.
    pub fn bump_eps(&self, eps: f64, f_norm1: f64, nu0: usize) -> Result<f64> {
        scaled("per-bump accuracy", eps.min(f_norm1), nu0 as f64 + self.bump_shift as f64)
    }

    pub fn bundle_eps(&self, eps0_floor: f64, k: usize) -> Result<f64> {
        scaled("universal-set accuracy", eps0_floor, k as f64 + self.bundle_shift as f64)
    }

    pub fn bundle_delta(&self, delta: f64, k: usize) -> f64 {
        delta / 2f64.powi(k as i32 * self.bundle_delta_rate)
    }

    pub fn greedy_b(&self, eps0: f64, s: usize) -> f64 {
        eps0 / 2f64.powi(s as i32 + self.greedy_shift)
    }

    pub fn select_bound(&self, eps0: f64, s: usize) -> f64 {
        eps0 / 2f64.powi(s as i32 + self.select_shift)
    }
}

/// `x / 2^e`, refusing results that are not normal doubles.
fn scaled(what: &str, x: f64, e: f64) -> Result<f64> {
    let v = x * (-e).exp2();
    if v.is_normal() {
        Ok(v)
    } else {
        Err(Error::BudgetUnderflow {
            what: what.to_string(),
            log2: x.log2() - e,
        })
    }
}
