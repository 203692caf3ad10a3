use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{OrthonormalSystem, SystemDescriptor};
use crate::error::{invalid, Error, Result};
use crate::measure::{CylinderSpace, GridFunction};

/// `1, sqrt2 cos 2pi t, sqrt2 sin 2pi t, sqrt2 cos 4pi t, ...` on a uniform midpoint grid.
///
/// Index `2k` is the cosine of frequency `k`, index `2k+1` the sine. On `D`
/// midpoint nodes the sampled functions stay exactly orthogonal as long as
/// `2k < D`, which caps `n_max`.
pub struct Trigonometric {
    space: Arc<CylinderSpace>,
    n_max: usize,
    // cos(pi q / D) for q in 0..2D; node j at frequency k uses q = k(2j+1) mod 2D
    cos_table: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Trigonometric {
    pub fn new(space: &Arc<CylinderSpace>, n_max: usize) -> Result<Self> {
        if !space.base().is_trivial() {
            return Err(invalid("the trigonometric system needs a trivial base"));
        }
        if !space.is_uniform_midpoint() {
            return Err(invalid("the trigonometric system needs a uniform midpoint grid"));
        }
        let d = space.resolution();
        if n_max == 0 || n_max > Self::max_len(d) {
            return Err(invalid(format!(
                "n_max = {n_max} outside 1..={} for resolution {d}",
                Self::max_len(d)
            )));
        }
        let cos_table = (0..2 * d).map(|q| (PI * q as f64 / d as f64).cos()).collect();
        let fft = FftPlanner::new().plan_fft_forward(d);
        Ok(Self {
            space: space.clone(),
            n_max,
            cos_table,
            fft,
        })
    }

    /// Largest `n_max` that stays orthonormal on `d` nodes.
    pub fn max_len(d: usize) -> usize {
        if d % 2 == 0 {
            d - 1
        } else {
            d
        }
    }

    /// `(frequency, is_sine)` of index `n`.
    pub fn frequency(n: usize) -> (usize, bool) {
        (n / 2, n > 1 && n % 2 == 1)
    }
}

impl OrthonormalSystem for Trigonometric {
    fn space(&self) -> &Arc<CylinderSpace> {
        &self.space
    }

    fn n_max(&self) -> usize {
        self.n_max
    }

    fn fill(&self, n: usize, out: &mut [f64]) {
        let d = self.space.resolution();
        if n == 1 {
            out.fill(1.0);
            return;
        }
        let (k, sine) = Self::frequency(n);
        let two_d = 2 * d;
        // sin x = cos(x - pi/2), i.e. a shift of D/2 in table units when D is even;
        // fall back to direct evaluation otherwise
        if sine && d % 2 == 1 {
            for (j, o) in out.iter_mut().enumerate() {
                *o = SQRT_2 * (PI * (k * (2 * j + 1)) as f64 / d as f64).sin();
            }
            return;
        }
        let shift = if sine { two_d - d / 2 } else { 0 };
        let step = (2 * k) % two_d;
        let mut q = (k + shift) % two_d;
        for o in out.iter_mut() {
            *o = SQRT_2 * self.cos_table[q];
            q += step;
            if q >= two_d {
                q -= two_d;
            }
        }
    }

    fn sup_bound(&self, n: usize) -> f64 {
        if n == 1 {
            1.0
        } else {
            SQRT_2
        }
    }

    fn descriptor(&self) -> SystemDescriptor {
        SystemDescriptor {
            kind: "trig".into(),
            n_max: self.n_max,
            resolution: self.space.resolution(),
            ordering: "1, then cos(2 pi k t), sin(2 pi k t) for k = 1, 2, ...".into(),
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
        let d = self.space.resolution();
        let mut buf = f.values().to_vec();
        self.fft.process(&mut buf);
        let scale = 1.0 / d as f64;
        // a(k) = sum_j w f_j e^{-2 pi i k t_j},  b(k) = sum_j w f_j e^{+2 pi i k t_j}
        let a = |k: usize| buf[k % d] * Complex64::from_polar(scale, -PI * k as f64 / d as f64);
        let b = |k: usize| buf[(d - k % d) % d] * Complex64::from_polar(scale, PI * k as f64 / d as f64);
        let i = Complex64::new(0.0, 1.0);
        Ok((1..=m)
            .map(|n| {
                if n == 1 {
                    return buf[0] * scale;
                }
                let (k, sine) = Self::frequency(n);
                if sine {
                    (b(k) - a(k)) / (2.0 * i) * SQRT_2
                } else {
                    (a(k) + b(k)) * (SQRT_2 / 2.0)
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::inner_product;
    use crate::systems::{basis_values, direct_coefficients, evaluate, gram_matrix};

    #[test]
    fn table_matches_direct_evaluation() {
        for d in [16usize, 15, 64] {
            let space = CylinderSpace::interval(d).unwrap();
            let t = Trigonometric::new(&space, Trigonometric::max_len(d)).unwrap();
            for n in 1..=t.n_max() {
                let v = basis_values(&t, n).unwrap();
                let (k, sine) = Trigonometric::frequency(n);
                for (j, x) in v.iter().enumerate() {
                    let tj = (j as f64 + 0.5) / d as f64;
                    let want = match (n, sine) {
                        (1, _) => 1.0,
                        (_, true) => SQRT_2 * (2.0 * PI * k as f64 * tj).sin(),
                        (_, false) => SQRT_2 * (2.0 * PI * k as f64 * tj).cos(),
                    };
                    assert!((x - want).abs() < 1e-12, "d={d} n={n} j={j}");
                }
            }
        }
    }

    #[test]
    fn phi2_phi3_orthogonal() {
        let space = CylinderSpace::interval(1 << 14).unwrap();
        let t = Trigonometric::new(&space, 8).unwrap();
        let ip = inner_product(&evaluate(&t, 2).unwrap(), &evaluate(&t, 3).unwrap()).unwrap();
        assert!(ip.norm() < 1e-10);
    }

    #[test]
    fn gram_64() {
        let space = CylinderSpace::interval(1 << 14).unwrap();
        let t = Trigonometric::new(&space, 64).unwrap();
        let (_, dev) = gram_matrix(&t, 64).unwrap();
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn fft_agrees_with_direct() {
        for d in [64usize, 63] {
            let space = CylinderSpace::interval(d).unwrap();
            let t = Trigonometric::new(&space, Trigonometric::max_len(d)).unwrap();
            let f = GridFunction::from_fn(&space, |x, _| Complex64::new((3.0 * x).exp(), x * x - 0.2));
            let fast = t.coefficients(&f, t.n_max()).unwrap();
            let slow = direct_coefficients(&t, &f, t.n_max()).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_nontrivial_base_and_nyquist() {
        let space = CylinderSpace::uniform(16, crate::measure::BaseSpace::uniform(2).unwrap()).unwrap();
        assert!(Trigonometric::new(&space, 3).is_err());
        let space = CylinderSpace::interval(16).unwrap();
        assert!(Trigonometric::new(&space, 16).is_err());
        assert!(Trigonometric::new(&space, 15).is_ok());
    }
}
