use mirror_fki::kato::KatoQuery;
use mirror_fki::potentials::{constant_field_2d, constant_potential, constant_vector_potential, smooth_bump};
use mirror_fki::semigroup::{
    coupling_lhs, coupling_rhs, eigen_residual, evaluate, evaluate_pair_difference,
    hamiltonian_fd, phase_difference_trace, PairMode, Psi, SemigroupQuery,
};
use mirror_fki::stochastic::{MirrorGeometry, RngStream, TimeGrid};
use mirror_fki::FieldSpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `(1+t)^{-d/2} exp(-|x|²/(2(1+t)))`: the heat semigroup on `e^{-|x|²/2}`.
fn heat_on_gaussian(t: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 + t).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * (1.0 + t))).exp()
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

#[test]
fn free_semigroup_on_constants_is_exact() {
    let q = SemigroupQuery::new(
        FieldSpec::zero(3).unwrap(),
        Psi::constant(1.0),
        vec![vec![0.0; 3], vec![1.0, 2.0, 3.0]],
        64,
        TimeGrid::new(1.0, 10).unwrap(),
        1,
    )
    .unwrap();
    for e in evaluate(&q).unwrap() {
        assert_eq!(e.mean, real(1.0));
        assert_eq!(e.std_error, 0.0);
    }
}

#[test]
fn heat_semigroup_on_a_gaussian() {
    let q = SemigroupQuery::new(
        FieldSpec::zero(1).unwrap(),
        Psi::gaussian(),
        vec![vec![0.0], vec![1.0], vec![2.0]],
        100_000,
        TimeGrid::new(1.0, 4).unwrap(),
        2,
    )
    .unwrap();
    for (e, x) in evaluate(&q).unwrap().iter().zip(&q.points) {
        let exact = heat_on_gaussian(1.0, x);
        assert!(e.z_score(real(exact)) < 3.0, "x={x:?}: {} ± {} vs {exact}", e.value(), e.std_error);
    }
}

#[test]
fn heat_semigroup_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let points: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let t = 0.7;
    let q = SemigroupQuery::new(
        FieldSpec::zero(2).unwrap(),
        Psi::gaussian(),
        points,
        20_000,
        TimeGrid::new(t, 2).unwrap(),
        3,
    )
    .unwrap();
    let ests = evaluate(&q).unwrap();
    let misses = ests
        .iter()
        .zip(&q.points)
        .filter(|(e, x)| e.z_score(real(heat_on_gaussian(t, x))) >= 3.0)
        .count();
    // 20 independent 3σ checks: one miss has probability ~5%, two ~0.03%
    assert!(misses <= 1, "{misses} points outside 3σ");
}

#[test]
fn constant_potential_damps_deterministically() {
    let c = 0.8;
    let t = 1.5;
    let q = SemigroupQuery::new(
        constant_potential(2, c).unwrap(),
        Psi::constant(1.0),
        vec![vec![0.3, 0.3]],
        1000,
        TimeGrid::new(t, 150).unwrap(),
        4,
    )
    .unwrap();
    let e = &evaluate(&q).unwrap()[0];
    assert!((e.value() - (-c * t).exp()).abs() < 1e-12);
    assert!(e.std_error < 1e-12);
}

#[test]
fn real_fast_path_agrees_with_the_complex_path() {
    // an explicit A ≡ 0 forces the phase to be formed
    let zero_a = FieldSpec::zero(2).unwrap().with_solenoidal_potential(|_, o| o.fill(0.0));
    let v = |x: &[f64]| 0.5 * x[0] * x[0];
    let fast = SemigroupQuery::new(
        FieldSpec::zero(2).unwrap().with_scalar_potential(v),
        Psi::gaussian(),
        vec![vec![0.5, -0.5]],
        2000,
        TimeGrid::new(1.0, 50).unwrap(),
        5,
    )
    .unwrap();
    let mut slow = fast.clone();
    slow.field = zero_a.with_scalar_potential(v);
    let (a, b) = (&evaluate(&fast).unwrap()[0], &evaluate(&slow).unwrap()[0]);
    assert_eq!(b.mean.im, 0.0);
    assert!((a.value() - b.value()).abs() < 1e-14);
    assert!((a.std_error - b.std_error).abs() < 1e-14);
}

#[test]
fn magnetic_weights_are_contractive() {
    let field = smooth_bump(2.0, 1.0, 2).unwrap().superpose(&constant_potential(2, 0.3).unwrap()).unwrap();
    let q = SemigroupQuery::new(
        field,
        Psi::half_space(0),
        vec![vec![0.0, 0.0], vec![0.5, 0.2]],
        5000,
        TimeGrid::new(1.0, 100).unwrap(),
        6,
    )
    .unwrap();
    for e in evaluate(&q).unwrap() {
        assert!(e.mean.norm() <= 1.0 + 3.0 * e.std_error);
        assert!(e.warning.is_none());
    }
}

#[test]
fn evaluation_is_reproducible() {
    let q = SemigroupQuery::new(
        smooth_bump(1.0, 1.0, 2).unwrap(),
        Psi::gaussian(),
        vec![vec![0.1, 0.0]],
        500,
        TimeGrid::new(0.5, 50).unwrap(),
        77,
    )
    .unwrap();
    assert_eq!(evaluate(&q).unwrap(), evaluate(&q).unwrap());
}

#[test]
fn pair_difference_basics() {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let zero = FieldSpec::zero(1).unwrap();
    assert!(evaluate_pair_difference(&zero, grid, &[0.5], &[0.5], &Psi::constant(1.0), 100, 1, PairMode::Coupled).is_err());
    let p = evaluate_pair_difference(&zero, grid, &[0.5], &[-0.2], &Psi::constant(1.0), 1000, 1, PairMode::Coupled).unwrap();
    assert_eq!(p.difference.mean, real(0.0));
    assert_eq!(p.difference.std_error, 0.0);
    assert_eq!(p.phase_term.value(), 0.0);
}

#[test]
fn pair_difference_on_an_indicator_matches_the_normal_cdf() {
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let zero = FieldSpec::zero(1).unwrap();
    let (x, y) = (0.3, -0.1);
    let exact = normal_cdf(x) - normal_cdf(y);
    for mode in [PairMode::Coupled, PairMode::Independent] {
        let p = evaluate_pair_difference(&zero, grid, &[x], &[y], &Psi::half_space(0), 20_000, 3, mode).unwrap();
        assert!(p.difference.z_score(real(exact)) < 3.0, "{mode:?}: {} ± {} vs {exact}", p.difference.value(), p.difference.std_error);
        // the two terms of the coupling bound dominate the difference
        assert!(p.difference.value().abs() <= p.phase_term.value() + p.rough_term.value() + 3.0 * p.difference.std_error);
    }
}

#[test]
fn coupling_reduces_variance() {
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let field = smooth_bump(1.0, 1.0, 2).unwrap();
    for &delta in &[0.05, 0.1, 0.2] {
        let (x, y) = ([0.5 * delta, 0.0], [-0.5 * delta, 0.0]);
        let run = |mode| {
            evaluate_pair_difference(&field, grid, &x, &y, &Psi::half_space(0), 4000, 9, mode).unwrap()
        };
        let (c, i) = (run(PairMode::Coupled), run(PairMode::Independent));
        let var = |p: &mirror_fki::semigroup::PairDifference| p.difference.std_error.powi(2) * p.difference.n as f64;
        assert!(var(&c) <= 0.5 * var(&i), "δ={delta}: {} vs {}", var(&c), var(&i));
    }
}

#[test]
fn phase_difference_is_frozen_after_coupling() {
    let grid = TimeGrid::new(1.0, 400).unwrap();
    let field = smooth_bump(1.5, 1.0, 2)
        .unwrap()
        .superpose(&FieldSpec::zero(2).unwrap().with_vector_potential(
            |x, o| {
                o[0] = 0.3 * x[1].sin();
                o[1] = 0.0;
            },
            |_| 0.0,
        ))
        .unwrap();
    let geom = MirrorGeometry::new(&[0.2, 0.0], &[-0.2, 0.1]).unwrap();
    let mut coupled = 0;
    for j in 0..200 {
        let tr = phase_difference_trace(&field, &geom, grid, RngStream::new(12, j)).unwrap();
        if let Some(k) = tr.tau_step {
            coupled += 1;
            let frozen = tr.difference[k];
            for d in &tr.difference[k..] {
                assert!((d - frozen).abs() < 1e-12 * frozen.abs().max(1.0));
            }
        }
    }
    assert!(coupled > 100);
}

#[test]
fn coupling_lhs_bounds() {
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let zero = FieldSpec::zero(2).unwrap();
    let e = coupling_lhs(&zero, grid, &[0.1, 0.0], &[-0.1, 0.0], 100, 1).unwrap();
    assert_eq!((e.value(), e.std_error), (0.0, 0.0));
    let strong = smooth_bump(20.0, 1.0, 2).unwrap();
    let e = coupling_lhs(&strong, grid, &[0.4, 0.0], &[-0.4, 0.0], 2000, 1).unwrap();
    assert!(e.value() > 0.0 && e.value() <= 2.0);
    // constant A: before τ the phases differ by <c - Lc, X_s - x> and the
    // difference is frozen at τ, so the LHS is a deterministic functional of τ
    let c = constant_vector_potential(vec![0.0, 0.7]).unwrap();
    let e = coupling_lhs(&c, grid, &[0.4, 0.0], &[-0.4, 0.0], 500, 1).unwrap();
    assert!(e.value() < 1e-12, "c ⟂ u gives Lc = c");
}

#[test]
fn rhs_scaling() {
    let q = KatoQuery::new(0.0, 1.0, vec![vec![0.0, 0.0]]).unwrap();
    assert_eq!(coupling_rhs(&FieldSpec::zero(2).unwrap(), 1.0, 2.0, 1.0, &q).unwrap(), 0.0);
    // A ≡ c: C = |c|² t^{1/q}, and q = 2 gives the time factor t^{-1/4}
    let c = constant_vector_potential(vec![0.6, 0.8]).unwrap();
    for &t in &[0.25, 1.0, 4.0] {
        let r = coupling_rhs(&c, t, 2.0, 3.0, &q).unwrap();
        let exact = 3.0 * t.sqrt() * t.powf(-0.25);
        assert!((r - exact).abs() < 1e-7 * exact, "t={t}: {r} vs {exact}");
    }
    assert!(coupling_rhs(&c, 1.0, 2.0, 0.0, &q).is_err());
}

#[test]
fn eigen_residual_trivial_and_landau() {
    let q = SemigroupQuery::new(
        FieldSpec::zero(2).unwrap(),
        Psi::constant(1.0),
        vec![vec![0.0, 0.0]],
        10,
        TimeGrid::new(1.0, 10).unwrap(),
        0,
    )
    .unwrap();
    assert_eq!(eigen_residual(&q, 0.0).unwrap()[0].residual, 0.0);

    let b = 1.0;
    let field = constant_field_2d(b).unwrap();
    let psi = Psi::landau(b);
    for x in [[0.0, 0.0], [1.0, 0.0], [0.3, -1.2]] {
        let h = hamiltonian_fd(&field, &psi, &x, 1e-4).unwrap();
        let expect = 0.5 * b * psi.eval(&x);
        assert!((h - expect).norm() < 1e-6, "{h} vs {expect}");
    }
    let q = SemigroupQuery::new(
        field,
        psi,
        vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        100_000,
        TimeGrid::new(0.5, 250).unwrap(),
        10,
    )
    .unwrap();
    for r in eigen_residual(&q, 0.5 * b).unwrap() {
        assert!(r.z_score() < 3.0, "{:?}: {} ± {}", r.point, r.residual, r.std_error);
        assert!(r.relative < 0.02);
    }
}

#[test]
fn hamiltonian_detects_a_wrong_eigenpair() {
    let field = constant_field_2d(1.0).unwrap();
    // e^{-|x|²/2} is the ground state for B = 2, not for B = 1
    let psi = Psi::landau(2.0);
    let x = [0.7, 0.2];
    let h = hamiltonian_fd(&field, &psi, &x, 1e-4).unwrap();
    assert!((h - 0.5 * psi.eval(&x)).norm() > 1e-2);
}

#[test]
fn eigenfunction_factor_follows_the_semigroup_law() {
    let field = constant_field_2d(1.0).unwrap();
    let run = |t: f64| {
        let q = SemigroupQuery::new(field.clone(), Psi::landau(1.0), vec![vec![0.0, 0.0]], 40_000, TimeGrid::new(t, (t * 500.0) as usize).unwrap(), 20).unwrap();
        evaluate(&q).unwrap().remove(0)
    };
    let (e1, e2) = (run(0.25), run(0.5));
    // Ψ(0) = 1, so the estimates are e^{-t/2} and e^{-t}
    let ratio = e2.value() / (e1.value() * e1.value());
    let se = ((e2.std_error / e2.value()).powi(2) + 4.0 * (e1.std_error / e1.value()).powi(2)).sqrt();
    assert!((ratio - 1.0).abs() < 3.0 * se + 1e-3, "{ratio} ± {se}");
}
