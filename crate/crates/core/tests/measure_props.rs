use std::sync::Arc;

use proptest::prelude::*;
use thermoscope::measure::*;

fn measure_and_values() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05f64..3.0, n),
            prop::collection::vec(0.0f64..5.0, n),
        )
    })
}

fn density(weights: &[f64], raw: &[f64]) -> Option<Density> {
    let nodes = (0..weights.len()).map(|i| vec![i as f64]).collect();
    let m = Arc::new(QuadratureMeasure::new(1, nodes, weights.to_vec()).ok()?);
    normalize(raw, &m).ok()
}

proptest! {
    #[test]
    fn gibbs_inequality((w, raw) in measure_and_values()) {
        if let Some(rho) = density(&w, &raw) {
            let bound = rho.measure().total_mass().ln();
            prop_assert!(relative_entropy(&rho) <= bound + 1e-12);
        }
    }

    #[test]
    fn entropy_is_permutation_invariant((w, raw) in measure_and_values(), seed in any::<u64>()) {
        if let Some(rho) = density(&w, &raw) {
            let n = w.len();
            let mut order: Vec<usize> = (0..n).collect();
            // deterministic shuffle from the seed
            let mut s = seed | 1;
            for i in (1..n).rev() {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                order.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let w2: Vec<f64> = order.iter().map(|&i| w[i]).collect();
            let v2: Vec<f64> = order.iter().map(|&i| rho.values()[i]).collect();
            let nodes = (0..n).map(|i| vec![i as f64]).collect();
            let m2 = Arc::new(QuadratureMeasure::new(1, nodes, w2).unwrap());
            let rho2 = Density::new(m2, v2).unwrap();
            let (a, b) = (relative_entropy(&rho), relative_entropy(&rho2));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn integration_is_linear(
        (w, x) in measure_and_values(),
        c1 in -3.0f64..3.0,
        c2 in -3.0f64..3.0,
    ) {
        let m = QuadratureMeasure::new(1, (0..w.len()).map(|i| vec![i as f64]).collect(), w).unwrap();
        let g1 = Observable::new("g1", x.clone()).unwrap();
        let g2 = m.observable("g2", |p| (0.3 * p[0]).sin()).unwrap();
        let combined = g1.combine(c1, &g2, c2).unwrap();
        let lhs = integrate(&m, &combined).unwrap();
        let rhs = c1 * integrate(&m, &g1).unwrap() + c2 * integrate(&m, &g2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }
}

#[test]
fn uniform_density_on_unit_mass_has_zero_entropy() {
    let m = Arc::new(QuadratureMeasure::midpoint(0.0, 1.0, 64).unwrap());
    assert_eq!(relative_entropy(&Density::uniform(m)), 0.0);
}

#[test]
fn shear_drift_shrinks_with_refinement() {
    let drift = |n: usize| {
        let grid = Grid2::new(Axis::new(-8.0, 8.0, n).unwrap(), Axis::new(-8.0, 8.0, n).unwrap());
        let (ax, ay) = (Axis::new(-8.0, 8.0, n).unwrap(), Axis::new(-8.0, 8.0, n).unwrap());
        let mut raw = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = (ax.center(ix), ay.center(iy));
                raw.push((-(x * x + y * y) / 2.0).exp());
            }
        }
        let rho = normalize(&raw, &Arc::new(grid.measure())).unwrap();
        let (before, after) = shear_invariance_check(&grid, &rho, &AffineMap2::shear(0.7)).unwrap();
        (before - after).abs()
    };
    let (coarse, fine) = (drift(128), drift(256));
    assert!(coarse <= 1e-3, "{coarse}");
    assert!(fine <= coarse, "{coarse} -> {fine}");
}
