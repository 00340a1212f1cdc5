use proptest::prelude::*;

use biko::config::parse_grid;
use biko::discrete::{build_discrete_l, evolve_discrete_a, GridKind};
use biko::hermite::{MultiIndex, SpectralFunction};
use biko::jet::Jet;
use biko::kernels::mehler_kernel;
use biko::measures::Measure;
use biko::operator::{apply_a_pointwise, apply_a_spectral, apply_l_pointwise, apply_l_spectral, TrialFunction};
use biko::quad::composite_legendre;

fn arb_function(n: usize) -> impl Strategy<Value = SpectralFunction> {
    let d = 4;
    let count = MultiIndex::enumerate(n, d).len();
    prop::collection::vec(-1.0f64..1.0, count).prop_map(move |cs| {
        SpectralFunction::from_entries(n, d, MultiIndex::enumerate(n, d).into_iter().zip(cs)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mehler_mass_and_mean(t in 0.05f64..4.0, x in -3.0f64..3.0) {
        let (ys, ws) = composite_legendre(-20.0, 20.0, 80, 16);
        let mass: f64 = ys.iter().zip(&ws).map(|(&y, &w)| w * mehler_kernel(t, &[x], &[y]).unwrap()).sum();
        let mean: f64 = ys.iter().zip(&ws).map(|(&y, &w)| w * y * mehler_kernel(t, &[x], &[y]).unwrap()).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        prop_assert!((mean - (-t).exp() * x).abs() < 1e-12);
    }

    #[test]
    fn pointwise_matches_spectral(f in arb_function(2), x in prop::collection::vec(-2.5f64..2.5, 2)) {
        let m = Measure::gaussian(2).unwrap();
        let l = apply_l_pointwise(&m, &f, &x).unwrap();
        let a = apply_a_pointwise(&m, &f, &x).unwrap();
        let l_ref = apply_l_spectral(&f).value(&x).unwrap();
        let a_ref = apply_a_spectral(&f).value(&x).unwrap();
        prop_assert!((l - l_ref).abs() <= 1e-9 * l_ref.abs().max(1.0));
        prop_assert!((a - a_ref).abs() <= 1e-9 * a_ref.abs().max(1.0));
    }

    #[test]
    fn jet_identities(x in 0.1f64..5.0) {
        let v = Jet::var(x);
        let back = v.ln().exp();
        let one = v.sin() * v.sin() + v.cos() * v.cos();
        let unit = v * v.recip();
        let c = Jet::constant(1.0);
        for i in 0..5 {
            prop_assert!((back.d[i] - v.d[i]).abs() < 1e-12 * x.max(1.0));
            prop_assert!((one.d[i] - c.d[i]).abs() < 1e-12);
            prop_assert!((unit.d[i] - c.d[i]).abs() < 1e-12);
        }
        let p = v.powf(2.5);
        let q = v.powi(2) * v.powf(0.5);
        for i in 0..5 {
            prop_assert!((p.d[i] - q.d[i]).abs() < 1e-10 * p.d[0].abs().max(1.0));
        }
    }

    #[test]
    fn grid_endpoints(a in -10.0f64..10.0, w in 0.1f64..10.0, n in 2usize..50) {
        let g = parse_grid(&format!("{a}:{}:{n}", a + w)).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g[0], a);
        prop_assert!((g[n - 1] - (a + w)).abs() < 1e-12);
        prop_assert!(g.windows(2).all(|p| p[1] > p[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn discrete_symmetry_and_invariance(
        seed in prop::collection::vec(-1.0f64..1.0, 6),
        t in prop::sample::select(vec![0.01, 0.3, 2.0]),
        which in 0usize..3,
    ) {
        let (m, r) = match which {
            0 => (Measure::gaussian(1).unwrap(), 8.0),
            1 => (Measure::power(1, 4.0).unwrap(), 4.0),
            _ => (Measure::squared_power(1, 1.0, 1.0, 1.5).unwrap(), 5.0),
        };
        let op = build_discrete_l(&m, GridKind::Line, r, 0.02).unwrap();
        let u: Vec<f64> = op.nodes().iter().map(|x| seed[0] + seed[1] * x + seed[2] * (seed[3] * x).sin()).collect();
        let v: Vec<f64> = op.nodes().iter().map(|x| seed[4] * x * x + (seed[5] * x).cos()).collect();
        let a = op.inner(&op.apply(&u).unwrap(), &v);
        let b = op.inner(&u, &op.apply(&v).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        prop_assert!(op.inner(&op.apply(&u).unwrap(), &u) <= 1e-9);
        let e = evolve_discrete_a(&op, &u, t).unwrap();
        prop_assert!((op.mean(&e) - op.mean(&u)).abs() < 1e-10);
        prop_assert!(op.norm(&e) <= op.norm(&u) * (1.0 + 1e-10));
    }
}
