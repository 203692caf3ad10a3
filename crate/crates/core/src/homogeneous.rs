//! Spheres as homogeneous spaces. `S^2` gets a full real spherical-harmonic
//! system; higher `S^d` only the harmonic dimensions.
//!
//! Separating the longitude `phi` turns the sphere minus its poles into the
//! cylinder `[0,1] x (colatitude bands)` with `t = phi / 2pi`. The poles are
//! never Gauss–Legendre nodes, so the excluded null set is invisible on the grid.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{CoefficientVector, Envelope, PartialSumScan};
use crate::measure::{gauss_legendre, BaseSpace, CylinderSpace, GridFunction};
use crate::par;
use crate::systems::{OrthonormalSystem, SystemDescriptor};

fn binom(n: i64, k: i64) -> u128 {
    if k < 0 || n < k {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Dimension of the degree-`rho` harmonics on `S^d`: `C(d+rho, d) - C(d+rho-2, d)`.
pub fn sphere_dimension(d: u32, rho: u32) -> Result<u128> {
    if d < 2 {
        return Err(invalid("sphere dimension d must be at least 2"));
    }
    let (d, rho) = (d as i64, rho as i64);
    Ok(binom(d + rho, d) - binom(d + rho - 2, d))
}

/// Gauss–Legendre in `cos theta` times a uniform longitude grid, normalized to mass 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    /// `cos theta_i`, increasing.
    pub cos_theta: Vec<f64>,
    /// Band masses `w_i / 2`, summing to 1.
    pub band_weights: Vec<f64>,
    /// Longitudes in `[0, 2pi)`.
    pub phi: Vec<f64>,
}

impl SphereGrid {
    /// Longitudes `2pi (j + 1/2) / n_phi`.
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(invalid("sphere grid needs at least one band and one longitude"));
        }
        let phi = (0..n_phi)
            .map(|j| 2.0 * PI * (j as f64 + 0.5) / n_phi as f64)
            .collect();
        Self::with_longitudes(n_theta, phi)
    }

    pub fn with_longitudes(n_theta: usize, phi: Vec<f64>) -> Result<Self> {
        if phi.is_empty() || phi.iter().any(|p| !(0.0..2.0 * PI).contains(p)) {
            return Err(invalid("longitudes must lie in [0, 2pi)"));
        }
        let (x, w) = gauss_legendre(n_theta);
        Ok(Self {
            cos_theta: x,
            band_weights: w.into_iter().map(|w| 0.5 * w).collect(),
            phi,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.cos_theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sphere nodes are stored longitude-major: `(i, j)` at `j * n_theta + i`.
    #[inline]
    pub fn index(&self, i_theta: usize, j_phi: usize) -> usize {
        j_phi * self.n_theta() + i_theta
    }

    pub fn weight(&self, i_theta: usize) -> f64 {
        self.band_weights[i_theta] / self.n_phi() as f64
    }

    fn is_uniform(&self) -> bool {
        let n = self.n_phi() as f64;
        let h = 2.0 * PI / n;
        self.phi
            .iter()
            .enumerate()
            .all(|(j, p)| (p - h * (j as f64 + 0.5)).abs() < 1e-12)
    }
}

#[derive(Debug, Clone)]
pub struct SphereFunction {
    pub grid: Arc<SphereGrid>,
    pub values: Vec<Complex64>,
}

impl SphereFunction {
    pub fn from_fn(grid: &Arc<SphereGrid>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        for j in 0..grid.n_phi() {
            for i in 0..grid.n_theta() {
                values[grid.index(i, j)] = f(grid.cos_theta[i].acos(), grid.phi[j]);
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn norm(&self, p: f64) -> f64 {
        let mut acc = crate::measure::KahanSum::new();
        for j in 0..self.grid.n_phi() {
            for i in 0..self.grid.n_theta() {
                acc.add(self.grid.weight(i) * self.values[self.grid.index(i, j)].norm().powf(p));
            }
        }
        acc.value().powf(1.0 / p)
    }

    /// Rotation by `k` longitude steps: `(R f)(theta, phi) = f(theta, phi - k h)`.
    pub fn rotated(&self, k: usize) -> Self {
        let n = self.grid.n_phi();
        let mut values = self.values.clone();
        for j in 0..n {
            for i in 0..self.grid.n_theta() {
                values[self.grid.index(i, (j + k) % n)] = self.values[self.grid.index(i, j)];
            }
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Node bijection between a sphere grid and `[0,1] x bands`.
#[derive(Debug, Clone)]
pub struct CylinderChart {
    pub grid: Arc<SphereGrid>,
    pub space: Arc<CylinderSpace>,
}

impl CylinderChart {
    pub fn to_cylinder(&self, f: &SphereFunction) -> Result<GridFunction> {
        if *f.grid != *self.grid {
            return Err(Error::SpaceMismatch);
        }
        let mut out = GridFunction::zeros(&self.space);
        let v = out.values_mut();
        for j in 0..self.grid.n_phi() {
            for i in 0..self.grid.n_theta() {
                v[self.space.index(j, i)] = f.values[self.grid.index(i, j)];
            }
        }
        Ok(out)
    }

    pub fn to_sphere(&self, g: &GridFunction) -> Result<SphereFunction> {
        if !g.space().same_as(&self.space) {
            return Err(Error::SpaceMismatch);
        }
        let mut values = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for j in 0..self.grid.n_phi() {
            for i in 0..self.grid.n_theta() {
                values[self.grid.index(i, j)] = g.values()[self.space.index(j, i)];
            }
        }
        Ok(SphereFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Translation `t -> t + k / n_phi (mod 1)` on the cylinder side.
    pub fn translate(&self, g: &GridFunction, k: usize) -> GridFunction {
        let nt = self.space.resolution();
        let mut out = g.clone();
        let v = out.values_mut();
        for b in 0..self.space.n_base() {
            for i in 0..nt {
                v[self.space.index((i + k) % nt, b)] = g.values()[self.space.index(i, b)];
            }
        }
        out
    }
}

pub fn cylinder_chart(grid: &Arc<SphereGrid>) -> Result<CylinderChart> {
    if !grid.is_uniform() {
        return Err(invalid("the cylinder chart needs uniformly spaced longitudes"));
    }
    let space = CylinderSpace::uniform(grid.n_phi(), BaseSpace::new(grid.band_weights.clone())?)?;
    Ok(CylinderChart {
        grid: grid.clone(),
        space,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIndex {
    pub rho: usize,
    /// 1-based position inside the degree block.
    pub i: usize,
}

impl BlockIndex {
    pub fn flat(self) -> usize {
        self.rho * self.rho + self.i
    }

    pub fn from_flat(n: usize) -> Self {
        let mut rho = ((n - 1) as f64).sqrt() as usize;
        while (rho + 1) * (rho + 1) < n {
            rho += 1;
        }
        while rho * rho >= n {
            rho -= 1;
        }
        Self { rho, i: n - rho * rho }
    }

    /// `(m, is_sine)`; inner index 1 is the zonal function, then cos/sin pairs.
    pub fn order(self) -> (usize, bool) {
        if self.i == 1 {
            (0, false)
        } else {
            (self.i / 2, self.i % 2 == 1)
        }
    }
}

/// `Pbar_l^m(x)` for `0 <= m <= l <= l_max`, normalized by `int_{-1}^{1} Pbar^2 dx / 2 = 1`.
fn normalized_legendre(l_max: usize, x: f64) -> Vec<Vec<f64>> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut p = vec![vec![0.0; l_max + 1]; l_max + 1];
    p[0][0] = 1.0;
    for m in 1..=l_max {
        p[m][m] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..l_max {
        p[m + 1][m] = ((2 * m + 3) as f64).sqrt() * x * p[m][m];
    }
    for m in 0..=l_max {
        for l in m + 2..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// Real spherical harmonics up to degree `l_max` on the chart's cylinder space,
/// orthonormal for the probability measure, ordered degree-major with the
/// zonal function first in each block.
pub struct SphericalHarmonics {
    chart: CylinderChart,
    l_max: usize,
    values: Vec<Vec<f64>>,
}

impl SphericalHarmonics {
    pub fn new(grid: &Arc<SphereGrid>, l_max: usize) -> Result<Self> {
        if grid.n_theta() < l_max + 1 || grid.n_phi() < 2 * l_max + 1 {
            return Err(invalid(format!(
                "degree {l_max} needs at least {} bands and {} longitudes",
                l_max + 1,
                2 * l_max + 1
            )));
        }
        let chart = cylinder_chart(grid)?;
        let legendre: Vec<Vec<Vec<f64>>> = grid
            .cos_theta
            .iter()
            .map(|&x| normalized_legendre(l_max, x))
            .collect();
        let n_max = (l_max + 1) * (l_max + 1);
        let space = chart.space.clone();
        let values = par::map_range(n_max, |k| {
            let bi = BlockIndex::from_flat(k + 1);
            let (m, sine) = bi.order();
            let mut v = vec![0.0; space.len()];
            for (i, leg) in legendre.iter().enumerate() {
                let p = leg[bi.rho][m];
                for (j, &ph) in grid.phi.iter().enumerate() {
                    let ang = if m == 0 {
                        1.0
                    } else if sine {
                        SQRT_2 * (m as f64 * ph).sin()
                    } else {
                        SQRT_2 * (m as f64 * ph).cos()
                    };
                    v[space.index(j, i)] = p * ang;
                }
            }
            v
        });
        Ok(Self {
            chart,
            l_max,
            values,
        })
    }

    pub fn chart(&self) -> &CylinderChart {
        &self.chart
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Flat index range `[rho^2 + 1, (rho+1)^2]` of degree `rho`.
    pub fn block(rho: usize) -> (usize, usize) {
        (rho * rho + 1, (rho + 1) * (rho + 1))
    }
}

impl OrthonormalSystem for SphericalHarmonics {
    fn space(&self) -> &Arc<CylinderSpace> {
        &self.chart.space
    }

    fn n_max(&self) -> usize {
        self.values.len()
    }

    fn fill(&self, n: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.values[n - 1]);
    }

    fn sup_bound(&self, n: usize) -> f64 {
        ((2 * BlockIndex::from_flat(n).rho + 1) as f64).sqrt()
    }

    fn descriptor(&self) -> SystemDescriptor {
        SystemDescriptor {
            kind: "sphere".into(),
            n_max: self.n_max(),
            resolution: self.chart.space.resolution(),
            ordering: "degree-major; zonal, then cos/sin pairs by order".into(),
            l_max: Some(self.l_max),
            dimension: Some(2),
        }
    }
}

fn check_blocks(c: &CoefficientVector, sys: &SphericalHarmonics, rho_max: usize) -> Result<usize> {
    let (_, hi) = SphericalHarmonics::block(rho_max);
    if rho_max > sys.l_max || hi > c.len() {
        return Err(invalid(format!("degree {rho_max} beyond the available blocks")));
    }
    Ok(hi)
}

/// Partial sum over complete degree blocks `0..=rho_max`.
pub fn block_partial_sum(c: &CoefficientVector, sys: &SphericalHarmonics, rho_max: usize) -> Result<GridFunction> {
    let hi = check_blocks(c, sys, rho_max)?;
    let mut scan = PartialSumScan::new(sys, 1);
    for n in 1..=hi {
        scan.push(c.get(n));
    }
    Ok(scan.into_function())
}

/// `max_{rho <= rho_max} || sum_{deg <= rho} ... ||_1`, sampled at block ends; `argmax` is a degree.
pub fn block_envelope(c: &CoefficientVector, sys: &SphericalHarmonics, rho_max: usize) -> Result<Envelope> {
    check_blocks(c, sys, rho_max)?;
    let mut scan = PartialSumScan::new(sys, 1);
    let mut best = Envelope { max: 0.0, argmax: 0 };
    for rho in 0..=rho_max {
        let (lo, hi) = SphericalHarmonics::block(rho);
        for n in lo..=hi {
            scan.push(c.get(n));
        }
        let v = scan.norm1();
        if v > best.max {
            best = Envelope { max: v, argmax: rho };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{basis_values, gram_matrix};

    #[test]
    fn dimensions() {
        assert_eq!(sphere_dimension(2, 0).unwrap(), 1);
        assert_eq!(sphere_dimension(2, 1).unwrap(), 3);
        assert_eq!(sphere_dimension(3, 2).unwrap(), 9);
        assert_eq!(sphere_dimension(3, 1).unwrap(), 4);
        for rho in 0..=32 {
            assert_eq!(sphere_dimension(2, rho).unwrap(), 2 * rho as u128 + 1);
        }
    }

    #[test]
    fn block_index_round_trip() {
        for n in 1..=200 {
            let b = BlockIndex::from_flat(n);
            assert!(b.i >= 1 && b.i <= 2 * b.rho + 1, "{n} {b:?}");
            assert_eq!(b.flat(), n);
        }
    }

    #[test]
    fn gram_identity_to_degree_eight() {
        let grid = Arc::new(SphereGrid::new(12, 24).unwrap());
        let y = SphericalHarmonics::new(&grid, 8).unwrap();
        let (_, dev) = gram_matrix(&y, y.n_max()).unwrap();
        assert!(dev < 1e-8, "{dev}");
        assert!(basis_values(&y, 1).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-14));
        for n in 1..=y.n_max() {
            let v = basis_values(&y, n).unwrap();
            assert!(v.iter().all(|x| x.abs() <= y.sup_bound(n) + 1e-12));
        }
    }

    #[test]
    fn too_coarse_grid_rejected() {
        let grid = Arc::new(SphereGrid::new(4, 24).unwrap());
        assert!(SphericalHarmonics::new(&grid, 8).is_err());
    }

    #[test]
    fn nonuniform_longitudes_rejected() {
        let grid = Arc::new(SphereGrid::with_longitudes(4, vec![0.1, 0.2, 3.0]).unwrap());
        assert!(cylinder_chart(&grid).is_err());
    }
}
