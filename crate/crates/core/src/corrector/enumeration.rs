//! Enumeration of the nonzero Fourier polynomials with dyadic coefficients.
//!
//! Distinct polynomials `P_1, P_2, ...` are listed by level `s + d + j`,
//! where `s` is the support size, `d` the largest index and `2^j` the common
//! denominator; inside a level by `s`, then `d`. Within a shape the supports
//! (subsets of `1..=d` containing `d`) run in lexicographic order and the
//! numerators in the order `1, -1, 2, -2, ...`, last support element fastest.
//!
//! Global indices repeat every polynomial infinitely often through the
//! bijection `k = 2^r (2p - 1)`: `R_k = P_p`. Odd `k` are fresh polynomials,
//! so half of any index range is new material.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fourier::FourierPolynomial;

/// Source of the sequence `R_1, R_2, ...` used by the greedy series and the universal set.
pub trait PolynomialSource: Send + Sync {
    /// `R_k`, or `None` past the end of a finite source.
    fn get(&self, k: u64) -> Option<FourierPolynomial>;

    /// Largest index that may be requested.
    fn budget(&self) -> u64;

    /// Largest basis index any `R_k` uses.
    fn degree_cap(&self) -> usize;

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoeffGrid {
    /// Coefficients lie in `[-bound, bound]`.
    pub bound: u32,
    /// Denominators `2^j` with `j <= max_exp`.
    pub max_exp: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    s: usize,
    d: usize,
    j: u32,
}

#[derive(Debug, Clone)]
struct ShapeBlock {
    shape: Shape,
    start: u128,
    count: u128,
}

#[derive(Debug, Clone)]
pub struct RationalEnumeration {
    budget: u64,
    degree_cap: usize,
    grid: CoeffGrid,
    blocks: Vec<ShapeBlock>,
    distinct: u128,
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i as u128 + 1);
    }
    r
}

/// `pair(k) = (p, r)` with `k = 2^r (2p - 1)`.
pub fn unpair(k: u64) -> (u64, u32) {
    let r = k.trailing_zeros();
    ((k >> r).div_ceil(2), r)
}

pub fn pair(p: u64, r: u32) -> Option<u64> {
    (2 * p - 1).checked_mul(1u64.checked_shl(r)?)
}

impl RationalEnumeration {
    pub fn new(budget: u64, degree_cap: usize, grid: CoeffGrid) -> Result<Self> {
        if budget == 0 || degree_cap == 0 || grid.bound == 0 {
            return Err(invalid("budget, degree cap and coefficient bound must be positive"));
        }
        if grid.max_exp > 60 {
            return Err(invalid("denominator exponent above 60 is not supported"));
        }
        // only the first ceil(budget / 2) distinct polynomials are reachable
        let need = (budget as u128).div_ceil(2);
        let mut blocks = Vec::new();
        let mut total: u128 = 0;
        let max_level = degree_cap * 2 + grid.max_exp as usize;
        'levels: for level in 2..=max_level {
            for s in 1..=degree_cap {
                for d in s..=degree_cap {
                    if s + d > level || level - s - d > grid.max_exp as usize {
                        continue;
                    }
                    let j = (level - s - d) as u32;
                    let per = 2 * grid.bound as u128 * (1u128 << j);
                    let count = binom(d - 1, s - 1).saturating_mul(per.saturating_pow(s as u32));
                    blocks.push(ShapeBlock {
                        shape: Shape { s, d, j },
                        start: total,
                        count,
                    });
                    total = total.saturating_add(count);
                    if total >= need {
                        break 'levels;
                    }
                }
            }
        }
        Ok(Self {
            budget,
            degree_cap,
            grid,
            blocks,
            distinct: total,
        })
    }

    /// `P_p`, the `p`-th distinct polynomial (1-based).
    pub fn distinct(&self, p: u64) -> Option<FourierPolynomial> {
        let idx = (p as u128).checked_sub(1)?;
        if idx >= self.distinct {
            return None;
        }
        let bi = self.blocks.partition_point(|b| b.start + b.count <= idx);
        let block = &self.blocks[bi];
        let mut off = idx - block.start;
        let Shape { s, d, j } = block.shape;
        let per = 2 * self.grid.bound as u128 * (1u128 << j);
        let tuples = per.pow(s as u32);
        let subset_rank = off / tuples;
        off %= tuples;
        let mut support = unrank_subset(d - 1, s - 1, subset_rank);
        support.push(d);
        let mut numerators = vec![0i64; s];
        for slot in numerators.iter_mut().rev() {
            let digit = (off % per) as i64;
            off /= per;
            // 0 -> 1, 1 -> -1, 2 -> 2, 3 -> -2, ...
            let mag = digit / 2 + 1;
            *slot = if digit % 2 == 0 { mag } else { -mag };
        }
        let den = (1u64 << j) as f64;
        FourierPolynomial::from_pairs(
            support
                .into_iter()
                .zip(numerators)
                .map(|(n, a)| (n, Complex64::new(a as f64 / den, 0.0))),
        )
        .ok()
    }

    pub fn distinct_count(&self) -> u128 {
        self.distinct
    }

    pub fn coeff_grid(&self) -> CoeffGrid {
        self.grid
    }
}

/// `rank`-th `k`-subset of `1..=n` in lexicographic order.
fn unrank_subset(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 1;
    for remaining in (1..=k).rev() {
        loop {
            let with_next = binom(n - next, remaining - 1);
            if rank < with_next {
                out.push(next);
                next += 1;
                break;
            }
            rank -= with_next;
            next += 1;
        }
    }
    out
}

impl PolynomialSource for RationalEnumeration {
    fn get(&self, k: u64) -> Option<FourierPolynomial> {
        if k == 0 || k > self.budget {
            return None;
        }
        self.distinct(unpair(k).0)
    }

    fn budget(&self) -> u64 {
        self.budget
    }

    fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    fn describe(&self) -> String {
        format!(
            "dyadic polynomials by level s+d+j, degree <= {}, |c| <= {}, 2^j with j <= {}; R_k = P_p for k = 2^r (2p-1); budget {}",
            self.degree_cap, self.grid.bound, self.grid.max_exp, self.budget
        )
    }
}

/// Explicit finite list, mainly for tests of the assembly logic.
#[derive(Debug, Clone)]
pub struct FixedList(pub Vec<FourierPolynomial>);

impl PolynomialSource for FixedList {
    fn get(&self, k: u64) -> Option<FourierPolynomial> {
        self.0.get((k as usize).checked_sub(1)?).cloned()
    }

    fn budget(&self) -> u64 {
        self.0.len() as u64
    }

    fn degree_cap(&self) -> usize {
        self.0.iter().filter_map(|p| p.max_index()).max().unwrap_or(1)
    }

    fn describe(&self) -> String {
        format!("fixed list of {} polynomials", self.0.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en() -> RationalEnumeration {
        RationalEnumeration::new(1 << 20, 4, CoeffGrid { bound: 1, max_exp: 6 }).unwrap()
    }

    #[test]
    fn first_entry_is_phi1() {
        let r1 = en().get(1).unwrap();
        assert_eq!(r1.coeffs().len(), 1);
        assert_eq!(r1.get(1), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn pairing_is_a_bijection() {
        for k in 1..5000u64 {
            let (p, r) = unpair(k);
            assert!(p >= 1);
            assert_eq!(pair(p, r), Some(k));
        }
    }

    #[test]
    fn half_phi2_is_listed() {
        let e = en();
        let hit = (1..=e.budget()).find(|&k| {
            let p = e.get(k).unwrap();
            p.coeffs().len() == 1 && p.get(2) == Complex64::new(0.5, 0.0)
        });
        assert!(hit.is_some());
    }

    #[test]
    fn entries_nonzero_and_recurring() {
        let e = en();
        for k in 1..=2000 {
            assert!(!e.get(k).unwrap().is_zero());
        }
        let p7 = e.distinct(7).unwrap();
        for r in 0..10 {
            assert_eq!(e.get(pair(7, r).unwrap()).unwrap(), p7);
        }
    }

    #[test]
    fn subsets_in_lex_order() {
        let all: Vec<Vec<usize>> = (0..binom(4, 2)).map(|r| unrank_subset(4, 2, r)).collect();
        assert_eq!(
            all,
            vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4], vec![3, 4]]
        );
    }
}
