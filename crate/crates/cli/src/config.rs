use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use unicorr::corrector::{clamp_param, Budgets, CoeffGrid, FixedList, PolynomialSource, RationalEnumeration, StepOptions};
use unicorr::fourier::FourierPolynomial;
use unicorr::homogeneous::{SphereFunction, SphereGrid, SphericalHarmonics};
use unicorr::measure::{CylinderSpace, GridFunction};
use unicorr::systems::{OrthonormalSystem, Trigonometric, Walsh};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub target: TargetSpec,
    #[serde(default = "default_param")]
    pub eps: f64,
    #[serde(default = "default_param")]
    pub delta: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_s_max")]
    pub s_max: usize,
    /// Defaults to the whole system.
    #[serde(default)]
    pub m_cap: Option<usize>,
    #[serde(default = "default_s0_max")]
    pub s0_max: usize,
    #[serde(default)]
    pub enumeration: EnumerationConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_param() -> f64 {
    0.1
}
fn default_depth() -> usize {
    8
}
fn default_s_max() -> usize {
    3
}
fn default_s0_max() -> usize {
    1 << 20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    Trig {
        resolution: usize,
        #[serde(default)]
        n_max: Option<usize>,
    },
    Walsh {
        resolution: usize,
        #[serde(default)]
        n_max: Option<usize>,
    },
    Sphere {
        l_max: usize,
        n_theta: usize,
        n_phi: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    Ramp,
    Indicator {
        a: f64,
        b: f64,
    },
    Basis {
        n: usize,
        #[serde(default = "one")]
        coeff: f64,
    },
    /// `f = R_index` from the configured enumeration.
    IdentityBandlimited {
        index: u64,
    },
    /// Random dyadic polynomial drawn from the seed.
    RandomDyadic {
        terms: usize,
        degree: usize,
    },
    /// `1 + cos(theta)` on the sphere.
    SphereZonal,
    /// Indicator of the polar cap `cos(theta) > c`.
    SphereCap {
        c: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnumerationConfig {
    Dyadic {
        budget: u64,
        degree_cap: usize,
        bound: u32,
        max_exp: u32,
    },
    /// Explicit list of polynomials as `[index, coefficient]` pairs.
    List { polys: Vec<Vec<(usize, f64)>> },
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig::Dyadic {
            budget: 1 << 24,
            degree_cap: 16,
            bound: 4,
            max_exp: 16,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Runs `eps = delta = 1/m` for `m = 1..=m_max`.
    #[serde(default)]
    pub m_max: Option<usize>,
    /// Otherwise the product grid of these values.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub norm: f64,
    pub gram: f64,
    pub spectrum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-6,
            gram: 1e-8,
            spectrum: 1e-12,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if cfg.depth == 0 || cfg.s_max == 0 {
            bail!("depth and s_max must be positive");
        }
        Ok(cfg)
    }

    /// Clamped `(eps, delta)` and a warning per moved value.
    pub fn params(&self) -> (f64, f64, Vec<String>) {
        let mut warnings = Vec::new();
        let (eps, ce) = clamp_param(self.eps);
        let (delta, cd) = clamp_param(self.delta);
        if ce {
            warnings.push(format!("eps = {} clamped to {eps}", self.eps));
        }
        if cd {
            warnings.push(format!("delta = {} clamped to {delta}", self.delta));
        }
        (eps, delta, warnings)
    }
}

pub struct Setup {
    pub space: Arc<CylinderSpace>,
    pub sys: Box<dyn OrthonormalSystem>,
    pub sphere: Option<Arc<SphereGrid>>,
    pub source: Box<dyn PolynomialSource>,
    pub opts: StepOptions,
}

impl Setup {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let (space, sys, sphere): (Arc<CylinderSpace>, Box<dyn OrthonormalSystem>, _) = match cfg.system {
            SystemConfig::Trig { resolution, n_max } => {
                let space = CylinderSpace::interval(resolution)?;
                let n = n_max.unwrap_or(Trigonometric::max_len(resolution));
                (space.clone(), Box::new(Trigonometric::new(&space, n)?), None)
            }
            SystemConfig::Walsh { resolution, n_max } => {
                let space = CylinderSpace::interval(resolution)?;
                (space.clone(), Box::new(Walsh::new(&space, n_max.unwrap_or(resolution))?), None)
            }
            SystemConfig::Sphere { l_max, n_theta, n_phi } => {
                let grid = Arc::new(SphereGrid::new(n_theta, n_phi)?);
                let sh = SphericalHarmonics::new(&grid, l_max)?;
                (sh.chart().space.clone(), Box::new(sh), Some(grid))
            }
        };
        let source: Box<dyn PolynomialSource> = match &cfg.enumeration {
            EnumerationConfig::Dyadic {
                budget,
                degree_cap,
                bound,
                max_exp,
            } => Box::new(RationalEnumeration::new(
                *budget,
                *degree_cap,
                CoeffGrid {
                    bound: *bound,
                    max_exp: *max_exp,
                },
            )?),
            EnumerationConfig::List { polys } => {
                let list = polys
                    .iter()
                    .map(|p| FourierPolynomial::from_pairs(p.iter().map(|&(n, c)| (n, Complex64::new(c, 0.0)))))
                    .collect::<unicorr::Result<Vec<_>>>()?;
                if list.iter().any(|p| p.is_zero()) {
                    bail!("enumeration list contains a zero polynomial");
                }
                Box::new(FixedList(list))
            }
        };
        let opts = StepOptions {
            m_cap: cfg.m_cap.unwrap_or(sys.n_max()),
            s0_max: cfg.s0_max,
            budgets: cfg.budgets,
        };
        Ok(Self {
            space,
            sys,
            sphere,
            source,
            opts,
        })
    }

    pub fn target(&self, spec: &TargetSpec, seed: u64) -> Result<GridFunction> {
        let space = &self.space;
        let sys = self.sys.as_ref();
        Ok(match spec {
            TargetSpec::Constant { value } => GridFunction::constant(space, Complex64::new(*value, 0.0)),
            TargetSpec::Ramp => GridFunction::from_real_fn(space, |t, _| t),
            TargetSpec::Indicator { a, b } => {
                GridFunction::from_real_fn(space, |t, _| if t >= *a && t < *b { 1.0 } else { 0.0 })
            }
            TargetSpec::Basis { n, coeff } => {
                FourierPolynomial::from_pairs([(*n, Complex64::new(*coeff, 0.0))])?.evaluate(sys)?
            }
            TargetSpec::IdentityBandlimited { index } => self
                .source
                .get(*index)
                .with_context(|| format!("enumeration has no entry {index}"))?
                .evaluate(sys)?,
            TargetSpec::RandomDyadic { terms, degree } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let degree = (*degree).clamp(1, sys.n_max());
                let pairs: Vec<(usize, Complex64)> = (0..*terms)
                    .map(|_| {
                        let n = rng.gen_range(1..=degree);
                        let num = rng.gen_range(1..=8) as f64 * if rng.gen() { 1.0 } else { -1.0 };
                        (n, Complex64::new(num / 8.0, 0.0))
                    })
                    .collect();
                let p = FourierPolynomial::from_pairs(pairs)?;
                if p.is_zero() {
                    bail!("random dyadic draw cancelled to zero; pick another seed");
                }
                p.evaluate(sys)?
            }
            TargetSpec::SphereZonal | TargetSpec::SphereCap { .. } => {
                let Some(grid) = &self.sphere else {
                    bail!("sphere presets need a sphere system");
                };
                let chart = unicorr::homogeneous::cylinder_chart(grid)?;
                let f = match spec {
                    TargetSpec::SphereCap { c } => {
                        SphereFunction::from_fn(grid, |th, _| Complex64::new(if th.cos() > *c { 1.0 } else { 0.0 }, 0.0))
                    }
                    _ => SphereFunction::from_fn(grid, |th, _| Complex64::new(1.0 + th.cos(), 0.0)),
                };
                chart.to_cylinder(&f)?
            }
        })
    }
}
