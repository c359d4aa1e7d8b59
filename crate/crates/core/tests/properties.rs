mod common;

use common::*;
use proptest::prelude::*;
use vintk::archspace::{
    builtin_space, count_cost, crossover, mutate, resolve_genotype, sample_genotype, BUILTIN_SPACES,
};
use vintk::harness::kendall_tau;
use vintk::linalg::sym_eigendecompose;
use vintk::metrics::{
    arc_cosine, fnorm_score, fourier_gram, mean_score, ncn_score, vintk_score, FourierConfig, GramKind, GramMatrix,
    ProbeBatch,
};
use vintk::spectral::simulate_residual_dynamics;
use vintk::tensor::Tensor;

fn gram_of(features: &[Vec<f64>]) -> GramMatrix {
    GramMatrix::from_fn(features.len(), GramKind::Custom, |i, j| dot(&features[i], &features[j])).unwrap()
}

fn features(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=max_n, 1usize..6).prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), n))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_ignore_probe_order(f in features(9), seed in any::<u64>()) {
        let g = gram_of(&f);
        let n = g.dim();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut r = rng(seed);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let p = g.permuted(&perm).unwrap();
        for score in [fnorm_score, mean_score, vintk_score] {
            prop_assert!(close(score(&g).unwrap().value, score(&p).unwrap().value, 1e-12));
        }
        let (a, b) = (ncn_score(&g).unwrap(), ncn_score(&p).unwrap());
        prop_assert_eq!(a.diagnostics.degenerate, b.diagnostics.degenerate);
        prop_assert!(close(a.value, b.value, 1e-8));
    }

    #[test]
    fn hadamard_of_psd_is_psd(a in features(8), seed in any::<u64>()) {
        let g = gram_of(&a);
        let mut r = rng(seed);
        let other: Vec<Vec<f64>> = (0..g.dim()).map(|_| gaussian_vec(3, &mut r)).collect();
        let h = g.hadamard(&gram_of(&other)).unwrap();
        let min = h.eigen().unwrap().values[0];
        prop_assert!(min >= -1e-8 * h.trace().max(1e-300), "eigenvalue {}", min);
        let ones = GramMatrix::from_fn(g.dim(), GramKind::Custom, |_, _| 1.0).unwrap();
        let same = g.hadamard(&ones).unwrap();
        prop_assert_eq!(same.data(), g.data());
    }

    #[test]
    fn eigendecomposition_reconstructs(f in features(10)) {
        let g = gram_of(&f);
        let n = g.dim();
        let e = sym_eigendecompose(g.data(), n).unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let scale = g.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in e.reconstruct().iter().zip(g.data()) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
        let sum: f64 = e.values.iter().sum();
        prop_assert!(close(sum, g.trace(), 1e-10));
    }

    #[test]
    fn tau_is_bounded_and_antisymmetric(xs in prop::collection::vec(-5i32..5, 3..25), seed in any::<u64>()) {
        let x: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
        let mut r = rng(seed);
        let y: Vec<f64> = (0..x.len()).map(|_| rand::Rng::random_range(&mut r, -3i32..3) as f64).collect();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        match (kendall_tau(&x, &y), kendall_tau(&x, &neg), kendall_tau(&y, &x)) {
            (Ok(a), Ok(b), Ok(c)) => {
                prop_assert!((-1.0..=1.0).contains(&a.tau));
                prop_assert!((0.0..=1.0).contains(&a.p_value));
                prop_assert!(close(a.tau, -b.tau, 1e-14));
                prop_assert!(close(a.tau, c.tau, 1e-14));
                prop_assert!(close(a.tau, tau_b_by_pairs(&x, &y), 1e-14));
            }
            (a, _, _) => {
                // undefined only when one ranking is constant
                prop_assert!(a.is_err());
                let constant = |v: &[f64]| v.iter().all(|e| *e == v[0]);
                prop_assert!(constant(&x) || constant(&y));
            }
        }
    }

    #[test]
    fn arc_cosine_is_symmetric_and_homogeneous(
        x in prop::collection::vec(-3.0f64..3.0, 4),
        y in prop::collection::vec(-3.0f64..3.0, 4),
        a in 0.1f64..4.0,
        b in 0.1f64..4.0,
    ) {
        let (nx, ny, xy) = (dot(&x, &x), dot(&y, &y), dot(&x, &y));
        let k = arc_cosine(nx, ny, xy);
        prop_assert!(close(k, arc_cosine(ny, nx, xy), 1e-14));
        prop_assert!(close(arc_cosine(a * a * nx, b * b * ny, a * b * xy), a * b * k, 1e-12));
        prop_assert!(close(arc_cosine(nx, nx, nx), nx, 1e-12));
        prop_assert!(k >= -1e-15 && k <= (nx * ny).sqrt() + 1e-12);
    }

    #[test]
    fn fourier_gram_is_stationary(
        pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 2..6),
        shift in 0.0f64..1.0,
    ) {
        let batch = |p: &[Vec<f64>]| ProbeBatch::new(p.iter().map(|v| Tensor::vector(v.clone())).collect(), None);
        let Ok(b) = batch(&pts) else { return Ok(()) };
        let cfg = FourierConfig::default();
        let g = fourier_gram(&b, &cfg).unwrap();
        let moved: Vec<Vec<f64>> = pts.iter().map(|v| v.iter().map(|a| (a + shift).fract()).collect()).collect();
        let gm = fourier_gram(&batch(&moved).unwrap(), &cfg).unwrap();
        for (a, c) in g.data().iter().zip(gm.data()) {
            prop_assert!((a - c).abs() <= 1e-12);
        }
        for i in 0..g.dim() {
            prop_assert!((g.get(i, i) - cfg.lag_zero()).abs() <= 1e-12);
            for j in 0..g.dim() {
                prop_assert!(g.get(i, j).abs() <= g.get(i, i) + 1e-12);
            }
        }
    }

    #[test]
    fn residuals_decay_monotonically(f in features(8), eta in 0.01f64..1.0) {
        let g = gram_of(&f);
        let y: Vec<f64> = (0..g.dim()).map(|i| (i as f64).sin() + 0.5).collect();
        let t: Vec<f64> = (0..6).map(|k| k as f64 * 2.0).collect();
        let tr = simulate_residual_dynamics(&g, &y, eta, &t).unwrap();
        for m in 0..g.dim() {
            for w in tr.residuals.windows(2) {
                prop_assert!(w[1][m].abs() <= w[0][m].abs() + 1e-15);
            }
        }
        prop_assert_eq!(&tr.residuals[0], &tr.initial);
    }

    #[test]
    fn genotype_operations_stay_in_space(space_ix in 0usize..4, seed in any::<u64>()) {
        let space = builtin_space(BUILTIN_SPACES[space_ix]).unwrap();
        let a = sample_genotype(&space, seed);
        let b = sample_genotype(&space, seed.wrapping_add(1));
        let (reparsed_space, reparsed) = resolve_genotype(&a.to_string()).unwrap();
        prop_assert_eq!(&reparsed, &a);
        prop_assert_eq!(reparsed_space.id, space.id.clone());
        let m = mutate(&space, &a, seed);
        space.validate(&m).unwrap();
        let changed = a.choices.iter().zip(&m.choices).filter(|(x, y)| x != y).count();
        prop_assert_eq!(changed, 1);
        let c = crossover(&a, &b, seed);
        space.validate(&c).unwrap();
        for ((ci, ai), bi) in c.choices.iter().zip(&a.choices).zip(&b.choices) {
            prop_assert!(ci == ai || ci == bi);
        }
        let cost = count_cost(&a).unwrap();
        prop_assert!(cost.param_count > 0 && cost.mac_count > cost.param_count / 2);
    }
}
