use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use unicorr::bump::{build_bump, BumpOptions, BumpParams};
use unicorr::corrector::{greedy_series, pair, unpair, CoeffGrid, PolynomialSource, RationalEnumeration};
use unicorr::fourier::{coefficients, partial_sum, CoefficientVector, FourierPolynomial};
use unicorr::homogeneous::{cylinder_chart, SphereFunction, SphereGrid, SphericalHarmonics};
use unicorr::measure::{
    build_product_partition, lp_norm, refine_for_correction, BaseSpace, CylinderSpace, GridFunction, ProductCell,
};
use unicorr::systems::{basis_values, OrthonormalSystem, Trigonometric, Walsh};
use unicorr::Error;

fn sorted_breaks(cuts: Vec<usize>, n: usize) -> Vec<f64> {
    let mut c: Vec<usize> = cuts.into_iter().map(|x| 1 + x % (n - 1)).collect();
    c.sort_unstable();
    c.dedup();
    let mut b = vec![0.0];
    b.extend(c.iter().map(|&x| x as f64 / n as f64));
    b.push(1.0);
    b
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_measures_sum_to_one(cuts in prop::collection::vec(0usize..1000, 0..6), nb in 1usize..5, split in 1usize..4) {
        let space = CylinderSpace::uniform(64, BaseSpace::uniform(nb).unwrap()).unwrap();
        let breaks = sorted_breaks(cuts, 64);
        let split = split.min(nb);
        let groups: Vec<Vec<usize>> = (0..split)
            .map(|g| (g * nb / split..(g + 1) * nb / split).collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect();
        let p = build_product_partition(&space, &breaks, &groups).unwrap();
        p.validate(&space).unwrap();
        let total: f64 = p.measures(&space).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for cell in &p.cells {
            let brute: f64 = cell.nodes(&space).map(|i| space.weights()[i]).sum();
            let product = space.t_measure(cell.t.0, cell.t.1) * cell.base_measure(&space);
            prop_assert!((brute - product).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_below_l2(v in values(128)) {
        let space = CylinderSpace::uniform(32, BaseSpace::uniform(4).unwrap()).unwrap();
        let f = GridFunction::from_real(&space, v).unwrap();
        prop_assert!(f.norm1() <= f.norm2() + 1e-15);
        prop_assert!((lp_norm(&f, 2.0).unwrap() - f.norm2()).abs() < 1e-12);
    }

    #[test]
    fn refined_cells_meet_the_cell_condition(g in prop::collection::vec(0.1f64..2.0, 2..5), delta in 0.2f64..0.9) {
        let space = CylinderSpace::interval(1 << 16).unwrap();
        let breaks: Vec<f64> = (0..=g.len()).map(|k| k as f64 / g.len() as f64).collect();
        let p = build_product_partition(&space, &breaks, &[vec![0]]).unwrap();
        let f1: f64 = g.iter().map(|x| x / g.len() as f64).sum();
        match refine_for_correction(&space, &p, &g, f1, delta, 144.0) {
            Ok((fine, gammas)) => {
                fine.validate(&space).unwrap();
                for (cell, gm) in fine.cells.iter().zip(&gammas) {
                    prop_assert!(144.0 * gm * gm * cell.measure(&space) * (1.0 + delta) < delta * f1 * f1);
                }
            }
            Err(e) => {
                let exhausted = matches!(e, Error::ResolutionExhausted { .. });
                prop_assert!(exhausted, "{}", e);
            }
        }
    }

    #[test]
    fn walsh_products_follow_xor(m in 1usize..=64, n in 1usize..=64) {
        let space = CylinderSpace::interval(64).unwrap();
        let w = Walsh::new(&space, 64).unwrap();
        let k = ((m - 1) ^ (n - 1)) + 1;
        for j in 0..64 {
            prop_assert_eq!(w.value(m, j) * w.value(n, j), w.value(k, j));
        }
    }

    #[test]
    fn bessel_and_orthogonal_additivity(v in values(256), lo in 1usize..40, len in 0usize..40) {
        let space = CylinderSpace::interval(256).unwrap();
        let sys = Trigonometric::new(&space, 255).unwrap();
        let f = GridFunction::from_real(&space, v).unwrap();
        let c = coefficients(&f, &sys, 255).unwrap();
        let energy: f64 = c.as_slice().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!(energy <= f.norm2().powi(2) + 1e-8);
        let hi = lo + len;
        let block = FourierPolynomial::block(&c, lo, hi).evaluate(&sys).unwrap();
        let want: f64 = (lo..=hi).map(|n| c.get(n).norm_sqr()).sum();
        prop_assert!((block.norm2().powi(2) - want).abs() < 1e-8);
    }

    #[test]
    fn coefficients_invert_partial_sums(c in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40)) {
        let space = CylinderSpace::interval(128).unwrap();
        let sys = Trigonometric::new(&space, 127).unwrap();
        let cv = CoefficientVector::new(c.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
        let s = partial_sum(&cv, &sys, cv.len()).unwrap();
        let back = coefficients(&s, &sys, cv.len()).unwrap();
        for n in 1..=cv.len() {
            prop_assert!((back.get(n) - cv.get(n)).norm() < 1e-8);
        }
    }

    #[test]
    fn chart_is_rotation_equivariant(k in 0usize..24, a in -2.0f64..2.0) {
        let grid = Arc::new(SphereGrid::new(8, 24).unwrap());
        let chart = cylinder_chart(&grid).unwrap();
        let f = SphereFunction::from_fn(&grid, |th, ph| Complex64::new(a * th.cos() + (2.0 * ph).sin(), ph.cos()));
        let lhs = chart.translate(&chart.to_cylinder(&f).unwrap(), k);
        let rhs = chart.to_cylinder(&f.rotated(k)).unwrap();
        prop_assert_eq!(lhs.values(), rhs.values());
    }

    #[test]
    fn pairing_round_trips(p in 1u64..1_000_000, r in 0u32..20) {
        let k = pair(p, r).unwrap();
        prop_assert_eq!(unpair(k), (p, r));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kept_set_is_where_the_bump_sits_at_gamma(
        start in 0usize..200, width in 100usize..400, gamma in -1.0f64..1.0,
        eps in 0.3f64..0.9, delta in 0.3f64..0.9, n in 1usize..6,
    ) {
        prop_assume!(gamma.abs() > 0.05);
        let res = 1usize << 12;
        let space = CylinderSpace::interval(res).unwrap();
        let sys = Trigonometric::new(&space, 2047).unwrap();
        let params = BumpParams {
            cell: ProductCell::new(start as f64 / 1024.0, (start + width) as f64 / 1024.0, vec![0]),
            gamma,
            eps,
            delta,
            n_start: n,
        };
        let r = build_bump(&params, &sys, BumpOptions::new(2047)).unwrap();
        prop_assert!(r.statements.all(), "{:?}", r.statements);
        let cell = params.cell.mask(&space);
        for i in 0..res {
            let from_g = cell.get(i) && r.g.values()[i].re == gamma;
            let t = space.t_nodes()[i];
            let from_t = cell.get(i) && (r.s0 as f64 * t).rem_euclid(1.0) >= r.scale.duty;
            prop_assert_eq!(r.kept.get(i), from_g);
            prop_assert_eq!(r.kept.get(i), from_t);
        }
    }

    #[test]
    fn greedy_residuals_meet_their_targets(a in -4i32..=4, b in -4i32..=4, j in 0u32..4) {
        prop_assume!(a != 0 || b != 0);
        let space = CylinderSpace::interval(256).unwrap();
        let sys = Trigonometric::new(&space, 16).unwrap();
        let en = RationalEnumeration::new(1 << 22, 4, CoeffGrid { bound: 4, max_exp: 8 }).unwrap();
        let den = (1u32 << j) as f64;
        let f = FourierPolynomial::from_pairs([(1, Complex64::new(a as f64 / den, 0.0)), (4, Complex64::new(b as f64 / den, 0.0))])
            .unwrap()
            .evaluate(&sys)
            .unwrap();
        let g = greedy_series(&f, |s| 0.5f64.powi(s as i32), &sys, &en, 3).unwrap();
        prop_assert!(g.residuals_ok() && g.norms_ok());
        for k in g.indices() {
            prop_assert!(!en.get(k).unwrap().is_zero());
        }
    }
}

#[test]
fn basis_functions_are_normalized_and_bounded() {
    let space = CylinderSpace::interval(1 << 10).unwrap();
    let trig = Trigonometric::new(&space, 1023).unwrap();
    let walsh = Walsh::new(&space, 1 << 10).unwrap();
    let grid = Arc::new(SphereGrid::new(12, 24).unwrap());
    let sh = SphericalHarmonics::new(&grid, 8).unwrap();
    let systems: [&dyn OrthonormalSystem; 3] = [&trig, &walsh, &sh];
    for sys in systems {
        let w = sys.space().weights().to_vec();
        for n in 1..=sys.n_max() {
            let v = basis_values(sys, n).unwrap();
            let norm2: f64 = v.iter().zip(&w).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
            assert!((norm2 - 1.0).abs() < 1e-6, "{} n = {n}: {norm2}", sys.descriptor().kind);
            let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(sup <= sys.sup_bound(n) + 1e-12, "{} n = {n}", sys.descriptor().kind);
        }
    }
}
