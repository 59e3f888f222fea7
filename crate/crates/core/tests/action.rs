use mirror_fki::action::{
    action_phase, decompose_coupled_action, divergence_integral, ito_integral,
};
use mirror_fki::potentials::{constant_vector_potential, smooth_bump};
use mirror_fki::stochastic::{mirror_couple, sample_path, MirrorGeometry, RngStream, TimeGrid};
use mirror_fki::{FieldSpec, McEstimate};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn linear_1d() -> FieldSpec {
    FieldSpec::zero(1)
        .unwrap()
        .with_vector_potential(|x, o| o[0] = x[0], |_| 1.0)
}

fn wavy_2d() -> FieldSpec {
    // bounded, Lipschitz, with a non-zero divergence
    FieldSpec::zero(2).unwrap().with_vector_potential(
        |x, o| {
            o[0] = x[1].sin();
            o[1] = (0.5 * x[0]).cos() + x[1].cos();
        },
        |x| -x[1].sin(),
    )
}

#[test]
fn zero_and_constant_fields() {
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let path = sample_path(&[0.2, -0.4], grid, RngStream::new(3, 0));
    let zero = FieldSpec::zero(2).unwrap();
    assert_eq!(ito_integral(&zero, &path).unwrap(), 0.0);
    assert_eq!(divergence_integral(&zero, &path).unwrap(), 0.0);
    let s = action_phase(&zero, &path).unwrap();
    assert_eq!(s.phase, 0.0);
    assert_eq!(s.weight().re, 1.0);
    assert_eq!(s.weight().im, 0.0);

    let c = [0.7, -1.3];
    let field = constant_vector_potential(c.to_vec()).unwrap();
    let disp: Vec<f64> = path.end().iter().zip(path.start()).map(|(a, b)| a - b).collect();
    let theta = action_phase(&field, &path).unwrap().phase;
    assert!((theta - dot(&c, &disp)).abs() < 1e-13);
    assert!((ito_integral(&field, &path).unwrap() - dot(&c, &disp)).abs() < 1e-13);
}

#[test]
fn constant_divergence_integrates_exactly() {
    let grid = TimeGrid::new(0.75, 300).unwrap();
    let path = sample_path(&[0.0, 0.0], grid, RngStream::new(4, 1));
    let field = FieldSpec::zero(2)
        .unwrap()
        .with_vector_potential(|_, o| o.fill(0.0), |_| 2.5);
    assert!((divergence_integral(&field, &path).unwrap() - 2.5 * 0.75).abs() < 1e-13);
    // θ = ito + ½·divergence
    assert!((action_phase(&field, &path).unwrap().phase - 0.5 * 2.5 * 0.75).abs() < 1e-13);
}

#[test]
fn discrete_ito_sum_matches_the_algebraic_identity() {
    // Σ Z_k ΔZ_k = (Z_n² - Z_0² - Σ (ΔZ_k)²)/2 holds exactly for every path
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let field = linear_1d();
    for i in 0..20 {
        let p = sample_path(&[0.3], grid, RngStream::new(11, i));
        let qv: f64 = (0..1000).map(|k| (p.point(k + 1)[0] - p.point(k)[0]).powi(2)).sum();
        let exact = 0.5 * (p.end()[0].powi(2) - 0.09 - qv);
        assert!((ito_integral(&field, &p).unwrap() - exact).abs() < 1e-11);
    }
}

#[test]
fn ito_integral_of_b_db_has_mean_zero() {
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let field = linear_1d();
    let n = 100_000u64;
    let samples: Vec<f64> = (0..n)
        .map(|i| ito_integral(&field, &sample_path(&[0.0], grid, RngStream::new(21, i))).unwrap())
        .collect();
    let est = McEstimate::from_real(&samples, 21);
    assert!(est.value().abs() < 3.0 * est.std_error, "{} ± {}", est.value(), est.std_error);
    // the variance of ∫B dB is t²/2
    assert!((est.std_error * (n as f64).sqrt() - 0.5f64.sqrt()).abs() < 0.01);
}

#[test]
fn divergence_of_first_coordinate_has_mean_zero() {
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let field = FieldSpec::zero(2)
        .unwrap()
        .with_vector_potential(|x, o| {
            o[0] = 0.5 * x[0] * x[0];
            o[1] = 0.0;
        }, |x| x[0]);
    let samples: Vec<f64> = (0..20_000)
        .map(|i| {
            divergence_integral(&field, &sample_path(&[0.0, 0.0], grid, RngStream::new(5, i))).unwrap()
        })
        .collect();
    let est = McEstimate::from_real(&samples, 5);
    assert!(est.value().abs() < 3.0 * est.std_error);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_have_unit_modulus(seed in any::<u64>(), x0 in -2.0..2.0f64) {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let p = sample_path(&[x0, -x0], grid, RngStream::new(seed, 0));
        let w = action_phase(&wavy_2d(), &p).unwrap().weight();
        prop_assert!((w.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phase_is_additive_in_a(seed in any::<u64>(), amp in -3.0..3.0f64) {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let p = sample_path(&[0.1, 0.2], grid, RngStream::new(seed, 7));
        let a1 = wavy_2d();
        let a2 = smooth_bump(amp, 1.5, 2).unwrap();
        let sum = a1.superpose(&a2).unwrap();
        let lhs = action_phase(&sum, &p).unwrap().phase;
        let rhs = action_phase(&a1, &p).unwrap().phase + action_phase(&a2, &p).unwrap().phase;
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn constant_shift_moves_phase_by_displacement(seed in any::<u64>(), c0 in -2.0..2.0f64, c1 in -2.0..2.0f64) {
        let grid = TimeGrid::new(0.5, 64).unwrap();
        let p = sample_path(&[0.0, 1.0], grid, RngStream::new(seed, 2));
        let base = wavy_2d();
        let shifted = base.superpose(&constant_vector_potential(vec![c0, c1]).unwrap()).unwrap();
        let disp: Vec<f64> = p.end().iter().zip(p.start()).map(|(a, b)| a - b).collect();
        let d = action_phase(&shifted, &p).unwrap().phase - action_phase(&base, &p).unwrap().phase;
        prop_assert!((d - dot(&[c0, c1], &disp)).abs() < 1e-10);
    }

    #[test]
    fn coupled_residual_is_the_crossing_boundary_term(seed in any::<u64>(), delta in 0.2..2.0f64) {
        // before τ the Itô and divergence sums of Y are those of R X term by term;
        // the only mismatch is the jump of Y onto X at the end of the crossing step
        let grid = TimeGrid::new(1.0, 250).unwrap();
        let geom = MirrorGeometry::centered(&[0.1, -0.1], &[1.0, 1.0], delta).unwrap();
        let field = wavy_2d();
        let pair = mirror_couple(&geom, grid, RngStream::new(seed, 0));
        let dec = decompose_coupled_action(&field, &pair).unwrap();
        let expected = match pair.tau_step() {
            None => 0.0,
            Some(k) => {
                let mut a = [0.0; 2];
                field.eval_a(pair.y().point(k - 1), &mut a).unwrap();
                let s = geom.signed_distance(pair.x().point(k));
                -2.0 * s * dot(&a, geom.unit_normal())
            }
        };
        prop_assert!((dec.residual - expected).abs() < 1e-11, "{} vs {}", dec.residual, expected);
        prop_assert!((dec.phase_x - dec.phase_y - dec.m - dec.i - dec.residual).abs() < 1e-12);
    }
}

#[test]
fn decomposition_of_trivial_fields() {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let geom = MirrorGeometry::new(&[0.5, 0.0], &[-0.5, 0.0]).unwrap();
    let pair = mirror_couple(&geom, grid, RngStream::new(1, 1));
    let d = decompose_coupled_action(&FieldSpec::zero(2).unwrap(), &pair).unwrap();
    assert_eq!((d.phase_x, d.phase_y, d.m, d.i, d.residual), (0.0, 0.0, 0.0, 0.0, 0.0));

    // far apart and a short horizon: no crossing, so M = <c - Lc, X_t - X_0>
    let grid = TimeGrid::new(0.01, 50).unwrap();
    let geom = MirrorGeometry::new(&[5.0, 1.0], &[-5.0, -1.0]).unwrap();
    let c = [0.4, 0.9];
    let field = constant_vector_potential(c.to_vec()).unwrap();
    let lc = geom.linear_part(&c);
    let tilde = [c[0] - lc[0], c[1] - lc[1]];
    for i in 0..10 {
        let pair = mirror_couple(&geom, grid, RngStream::new(2, i));
        assert!(pair.tau_step().is_none());
        let x = pair.x();
        let disp = [x.end()[0] - x.start()[0], x.end()[1] - x.start()[1]];
        let d = decompose_coupled_action(&field, &pair).unwrap();
        assert!((d.m - dot(&tilde, &disp)).abs() < 1e-13);
        assert_eq!(d.i, 0.0);
        assert!(d.residual.abs() < 1e-13);
    }
}

#[test]
fn residual_shrinks_under_refinement() {
    let geom = MirrorGeometry::new(&[0.5, 0.0], &[-0.5, 0.0]).unwrap();
    let field = smooth_bump(1.0, 1.0, 2).unwrap();
    let mut ms = Vec::new();
    for &n in &[100usize, 1000] {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let sq: Vec<f64> = (0..2000)
            .map(|i| {
                let pair = mirror_couple(&geom, grid, RngStream::new(9, i));
                decompose_coupled_action(&field, &pair).unwrap().residual.powi(2)
            })
            .collect();
        ms.push(sq.iter().sum::<f64>() / sq.len() as f64);
    }
    assert!(ms[1] < ms[0], "{ms:?}");
    // the boundary term is O(√dt), so its mean square is O(dt)
    assert!(ms[1] < 0.3 * ms[0], "{ms:?}");
}
