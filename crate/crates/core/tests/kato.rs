use std::f64::consts::PI;

use mirror_fki::kato::{
    dv_profile, exp_moment, gaussian_expectation, kato_functional, kato_membership_probe,
    magnetic_constant, Integrand, KatoQuery, QuadSpec, EXP_CEILING,
};
use mirror_fki::potentials::{
    constant_potential, constant_vector_potential, coulomb_potential, smooth_bump, ParticleConfig,
};
use mirror_fki::stochastic::TimeGrid;
use mirror_fki::{Error, FieldSpec};
use proptest::prelude::*;

fn coulomb3() -> Integrand {
    Integrand::radial(3, vec![0.0; 3], |r| 1.0 / r, vec![]).unwrap()
}

fn origin3() -> Vec<Vec<f64>> {
    vec![vec![0.0; 3]]
}

/// `E_z |B_s|^{-1}` in three dimensions by brute-force midpoint quadrature in spherical coordinates.
fn coulomb_brute(a: f64, s: f64) -> f64 {
    // ∫ r² (1/r) ∫_{-1}^{1} 2π ρ(r² + a² - 2ra c) dc dr with ρ the heat kernel
    let n = 20_000;
    let hi = a + 14.0 * s.sqrt();
    let h = hi / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let r = (i as f64 + 0.5) * h;
        let angular = if a == 0.0 {
            2.0 * (-r * r / (2.0 * s)).exp()
        } else {
            // ∫_{-1}^1 exp(-(r²+a²-2rac)/2s) dc
            ((-(r - a).powi(2) / (2.0 * s)).exp() - (-(r + a).powi(2) / (2.0 * s)).exp()) * s / (r * a)
        };
        acc += r * angular * h;
    }
    2.0 * PI * acc * (2.0 * PI * s).powf(-1.5)
}

#[test]
fn coulomb_smoothing_matches_erf_and_brute_force() {
    let q = QuadSpec::default();
    let f = coulomb3();
    for &(a, s) in &[(0.0f64, 1.0f64), (0.0, 0.01), (0.5, 1.0), (2.0, 0.3), (1e-3, 2.0), (5.0, 0.01)] {
        let got = gaussian_expectation(&f, &[a, 0.0, 0.0], s, &q).unwrap();
        let exact = if a == 0.0 {
            (2.0 / (PI * s)).sqrt()
        } else {
            libm::erf(a / (2.0 * s).sqrt()) / a
        };
        assert!((got - exact).abs() < 1e-8 * exact, "a={a} s={s}: {got} vs {exact}");
        let brute = coulomb_brute(a, s);
        assert!((brute - exact).abs() < 1e-5 * exact, "brute a={a} s={s}: {brute} vs {exact}");
    }
}

#[test]
fn smoothing_of_constants_and_zero() {
    let q = QuadSpec::default();
    for d in 1..=4 {
        let one = Integrand::constant(d, 1.0);
        let zero = Integrand::constant(d, 0.0);
        for &s in &[1e-4, 0.1, 1.0, 10.0] {
            let z: Vec<f64> = (0..d).map(|i| 0.3 * i as f64 - 0.2).collect();
            let v = gaussian_expectation(&one, &z, s, &q).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "d={d} s={s}: {v}");
            assert_eq!(gaussian_expectation(&zero, &z, s, &q).unwrap(), 0.0);
        }
    }
    let general = Integrand::general(2, |_| 1.0);
    let v = gaussian_expectation(&general, &[0.4, -1.0], 0.7, &q).unwrap();
    assert!((v - 1.0).abs() < 1e-8);
    assert!(gaussian_expectation(&general, &[0.4, -1.0], 0.0, &q).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn normalisation_holds_everywhere(z in proptest::collection::vec(-3.0..3.0f64, 3), s in 1e-3..5.0f64) {
        let q = QuadSpec::default();
        let radial_one = Integrand::radial(3, vec![0.5, 0.0, -0.5], |_| 1.0, vec![]).unwrap();
        let v = gaussian_expectation(&radial_one, &z, s, &q).unwrap();
        prop_assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kato_scales_with_the_integrand(c in 0.1..5.0f64) {
        let q = KatoQuery::new(0.0, 0.5, vec![vec![0.2, 0.0, 0.0]]).unwrap();
        let f = coulomb3();
        let base = kato_functional(&f, &q).unwrap().value;
        let scaled = kato_functional(&f.scaled(-c), &q).unwrap().value;
        prop_assert!((scaled - c * base).abs() < 1e-6 * c * base);
    }
}

#[test]
fn gaussian_smoothing_of_a_gaussian_radial_vs_hermite() {
    // E_z exp(-|B_s|²/2) in d=2 has the closed form (1+s)^{-1} exp(-|z|²/(2(1+s)))
    let q = QuadSpec::default();
    let radial = Integrand::radial(2, vec![0.0, 0.0], |r| (-r * r / 2.0).exp(), vec![]).unwrap();
    let general = Integrand::general(2, |y| (-(y[0] * y[0] + y[1] * y[1]) / 2.0).exp());
    for &(z, s) in &[(0.0f64, 0.5f64), (1.0, 1.0), (2.5, 0.1)] {
        let exact = (-(z * z) / (2.0 * (1.0 + s))).exp() / (1.0 + s);
        let r = gaussian_expectation(&radial, &[z, 0.0], s, &q).unwrap();
        let g = gaussian_expectation(&general, &[z, 0.0], s, &q).unwrap();
        assert!((r - exact).abs() < 1e-8 * exact, "{r} vs {exact}");
        assert!((g - exact).abs() < 1e-8 * exact, "{g} vs {exact}");
    }
}

#[test]
fn kato_constant_closed_form() {
    for &alpha in &[0.0, 0.5, 1.0] {
        for &t in &[0.1, 1.0, 3.0] {
            let q = KatoQuery::new(alpha, t, vec![vec![0.0, 1.0]]).unwrap();
            let v = kato_functional(&Integrand::constant(2, -2.5), &q).unwrap();
            let exact = 2.5 * t.powf(1.0 - alpha / 2.0) / (1.0 - alpha / 2.0);
            assert!((v.value - exact).abs() < 1e-7 * exact, "α={alpha} t={t}: {} vs {exact}", v.value);
        }
    }
}

#[test]
fn kato_coulomb_oracle() {
    let candidates = vec![vec![0.0; 3], vec![0.3, 0.0, 0.0], vec![1.0, 1.0, 0.0]];
    let q = KatoQuery::new(0.0, 1.0, candidates.clone()).unwrap();
    let v = kato_functional(&coulomb3(), &q).unwrap();
    let exact = 2.0 * (2.0 / PI).sqrt();
    assert!((v.value - exact).abs() < 1e-6 * exact, "{} vs {exact}", v.value);
    assert_eq!(v.maximizer, vec![0.0; 3]);
    assert!(v.per_point.iter().all(|p| *p <= v.value));

    let q = KatoQuery::new(0.5, 1.0, candidates).unwrap();
    let v = kato_functional(&coulomb3(), &q).unwrap();
    let exact = 4.0 * (2.0 / PI).sqrt();
    assert!((v.value - exact).abs() < 1e-6 * exact, "{} vs {exact}", v.value);
    assert_eq!(v.maximizer, vec![0.0; 3]);
}

#[test]
fn kato_is_monotone_in_alpha() {
    let q0 = KatoQuery::new(0.0, 0.7, vec![vec![0.0; 3], vec![0.4, 0.1, 0.0]]).unwrap();
    let f = coulomb3();
    let mut last: Option<Vec<f64>> = None;
    for &alpha in &[0.0, 0.25, 0.5, 0.75] {
        let v = kato_functional(&f, &q0.at(alpha, 0.7).unwrap()).unwrap();
        if let Some(prev) = &last {
            // t < 1, so s^{-α/2} grows with α on (0, t)
            for (a, b) in prev.iter().zip(&v.per_point) {
                assert!(b >= a);
            }
        }
        last = Some(v.per_point);
    }
}

#[test]
fn probe_separates_kato_from_non_kato() {
    let q = KatoQuery::new(0.0, 1.0, origin3()).unwrap();
    let ladder = [1.0, 0.25, 0.0625, 0.015625];
    let coulomb = kato_membership_probe(&coulomb3(), 0.0, &ladder, &q).unwrap();
    assert!(coulomb.passes);
    for (t, v) in ladder.iter().zip(&coulomb.values) {
        let exact = 2.0 * (2.0 * t / PI).sqrt();
        assert!((v - exact).abs() < 1e-6 * exact);
    }
    assert!((coulomb.decay_exponent.unwrap() - 0.5).abs() < 1e-6);

    let bounded = Integrand::radial(3, vec![0.0; 3], |r| 1.0 / (1.0 + r * r), vec![]).unwrap();
    let b = kato_membership_probe(&bounded, 0.5, &ladder, &q).unwrap();
    assert!(b.passes);
    // t^{1-α/2} is only the small-t behaviour; fit it where the profile is flat
    let small = [1e-2, 2.5e-3, 6.25e-4, 1.5625e-4];
    let b = kato_membership_probe(&bounded, 0.5, &small, &q).unwrap();
    assert!((b.decay_exponent.unwrap() - 0.75).abs() < 0.02, "{:?}", b.decay_exponent);

    let inverse_square = Integrand::radial(3, vec![0.0; 3], |r| 1.0 / (r * r), vec![]).unwrap();
    let p = kato_membership_probe(&inverse_square, 0.0, &ladder, &q).unwrap();
    assert!(!p.passes);
    assert!(p.values.iter().all(|v| v.is_infinite()));

    // Coulomb with α = 1 sits on the borderline and diverges as well
    let p = kato_membership_probe(&coulomb3(), 1.0, &ladder, &q).unwrap();
    assert!(!p.passes);
    assert!(kato_membership_probe(&coulomb3(), 0.0, &[0.1, 0.2], &q).is_err());
}

#[test]
fn lifting_marginalises_exactly() {
    // E|z + B_s|² = |z|² + 3s, so the α = 0 functional at t = 1 is 1 + |z|² + 3/2
    let z = [0.3, -0.2, 0.1];
    let exact = 1.0 + z.iter().map(|v| v * v).sum::<f64>() + 1.5;
    let f = Integrand::radial(3, vec![0.0; 3], |r| 1.0 + r * r, vec![]).unwrap();
    let q3 = KatoQuery::new(0.0, 1.0, vec![z.to_vec()]).unwrap();
    let v3 = kato_functional(&f, &q3).unwrap().value;
    assert!((v3 - exact).abs() < 1e-8 * exact, "{v3} vs {exact}");
    let lifted = f.lift(0, 2).unwrap();
    let quad = QuadSpec {
        hermite_start: 2,
        ..QuadSpec::default()
    };
    let q6 = KatoQuery::new(0.0, 1.0, vec![vec![0.3, -0.2, 0.1, 5.0, -4.0, 2.0]])
        .unwrap()
        .with_quad(quad);
    let v6 = kato_functional(&lifted, &q6).unwrap().value;
    assert!((v6 - v3).abs() < 1e-8 * v3, "{v6} vs {v3}");
}

#[test]
fn magnetic_constant_closed_forms() {
    let q = KatoQuery::new(0.0, 1.0, vec![vec![0.0, 0.0]]).unwrap();
    let zero = FieldSpec::zero(2).unwrap();
    assert_eq!(magnetic_constant(&zero, 1.0, 2.0, &q).unwrap().value, 0.0);
    let c = constant_vector_potential(vec![0.6, -0.8]).unwrap();
    for &(t, qq) in &[(1.0f64, 2.0f64), (0.5, 3.0), (2.0, 1.5)] {
        let m = magnetic_constant(&c, t, qq, &q).unwrap();
        let exact = t.powf(1.0 / qq);
        assert!((m.value - exact).abs() < 1e-7, "t={t} q={qq}: {} vs {exact}", m.value);
        assert_eq!(m.div_term, 0.0);
    }
    assert!(magnetic_constant(&c, 1.0, 1.0, &q).is_err());
}

#[test]
fn magnetic_constant_scaling_is_termwise() {
    // a field with a non-zero divergence: A = (x₁ e^{-|x|²}, 0)
    let field = FieldSpec::zero(2).unwrap().with_vector_potential(
        |x, o| {
            let g = (-(x[0] * x[0] + x[1] * x[1])).exp();
            o[0] = x[0] * g;
            o[1] = 0.0;
        },
        |x| {
            let g = (-(x[0] * x[0] + x[1] * x[1])).exp();
            g * (1.0 - 2.0 * x[0] * x[0])
        },
    );
    let q = KatoQuery::new(0.0, 1.0, vec![vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap();
    let m1 = magnetic_constant(&field, 1.0, 2.0, &q).unwrap();
    let m2 = magnetic_constant(&field.scale_a(2.0), 1.0, 2.0, &q).unwrap();
    assert!(m1.a_term > 0.0 && m1.div_term > 0.0);
    assert!((m2.a_term - 4.0 * m1.a_term).abs() < 1e-6 * m2.a_term);
    assert!((m2.div_term - 2.0 * m1.div_term).abs() < 1e-6 * m2.div_term);
    assert!((m2.value - (4.0 * m1.a_term + 2.0 * m1.div_term)).abs() < 1e-6 * m2.value);
}

#[test]
fn smooth_bump_constant_is_finite_for_all_q() {
    let f = smooth_bump(1.0, 1.0, 2).unwrap();
    let q = KatoQuery::new(0.0, 1.0, f.meta().candidates.clone()).unwrap();
    for &qq in &[1.1, 2.0, 4.0, 10.0] {
        let m = magnetic_constant(&f, 1.0, qq, &q).unwrap();
        assert!(m.value.is_finite() && m.value > 0.0 && m.value <= 1.0, "q={qq}: {}", m.value);
    }
}

#[test]
fn dv_profile_examples() {
    let quad = QuadSpec::default();
    let c = constant_potential(3, -1.7).unwrap();
    let v = dv_profile(&c, 0.3, &[vec![0.0; 3]], &quad).unwrap();
    assert!((v.value - 1.7).abs() < 1e-8);
    let zero = FieldSpec::zero(3).unwrap();
    assert_eq!(dv_profile(&zero, 0.3, &[vec![0.0; 3]], &quad).unwrap().value, 0.0);
    let h = coulomb_potential(&ParticleConfig::new(1, vec![[0.0; 3]], vec![1.0]).unwrap()).unwrap();
    for &s in &[0.01, 0.5, 2.0] {
        let v = dv_profile(&h, s, &[vec![0.0; 3], vec![1.0, 0.0, 0.0]], &quad).unwrap();
        assert!((v.value - (2.0 / (PI * s)).sqrt()).abs() < 1e-8);
        assert_eq!(v.maximizer, vec![0.0; 3]);
    }
}

#[test]
fn exp_moment_examples() {
    let grid = TimeGrid::new(0.5, 50).unwrap();
    let e = exp_moment(|_| 0.0, &[0.0], 100, grid, 1, EXP_CEILING).unwrap();
    assert_eq!(e.value(), 1.0);
    assert_eq!(e.std_error, 0.0);
    let e = exp_moment(|_| 1.3, &[0.0, 2.0], 100, grid, 1, EXP_CEILING).unwrap();
    assert!((e.value() - (1.3f64 * 0.5).exp()).abs() < 1e-12);
    let capped = exp_moment(|_| 1000.0, &[0.0], 10, grid, 1, 10.0).unwrap();
    assert_eq!(capped.clamps, 10);
    assert!(capped.warning.is_some());
}

/// `det(I + 2 dt C)^{-1/2}` with `C_jk = min(t_j, t_k)`: the exact discrete-time value of
/// `E exp(-dt Σ_{k<n} B_{t_k}²)`.
#[allow(clippy::needless_range_loop)]
fn discrete_oracle(t: f64, n: usize) -> f64 {
    let dt = t / n as f64;
    // left-point sum uses t_0 = 0 (contributes nothing) .. t_{n-1}
    let m = n - 1;
    let mut a = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in 0..m {
            let tj = (j + 1) as f64 * dt;
            let tk = (k + 1) as f64 * dt;
            a[j][k] = 2.0 * dt * tj.min(tk) + if j == k { 1.0 } else { 0.0 };
        }
    }
    // LU without pivoting; the matrix is symmetric positive definite
    let mut logdet = 0.0;
    for p in 0..m {
        let piv = a[p][p];
        logdet += piv.ln();
        for r in p + 1..m {
            let f = a[r][p] / piv;
            for c in p..m {
                a[r][c] -= f * a[p][c];
            }
        }
    }
    (-0.5 * logdet).exp()
}

#[test]
fn exp_moment_matches_mehler_formula() {
    let t = 0.5;
    let mehler = 1.0 / (2f64.sqrt() * t).cosh().sqrt();
    assert!((mehler - 0.890_66).abs() < 1e-4);
    let n = 500;
    let discrete = discrete_oracle(t, n);
    assert!((discrete - mehler).abs() < 1e-3, "{discrete} vs {mehler}");
    let grid = TimeGrid::new(t, n).unwrap();
    let e = exp_moment(|y| -y[0] * y[0], &[0.0], 100_000, grid, 11, EXP_CEILING).unwrap();
    assert!((e.value() - discrete).abs() < 3.0 * e.std_error, "{} ± {} vs {discrete}", e.value(), e.std_error);
    assert!((e.value() - mehler).abs() < 3.0 * e.std_error + 1e-3);
}

#[test]
fn divergence_is_reported_not_hidden() {
    let q = KatoQuery::new(0.0, 1.0, origin3()).unwrap();
    let f = Integrand::radial(3, vec![0.0; 3], |r| 1.0 / (r * r), vec![]).unwrap();
    assert!(matches!(kato_functional(&f, &q), Err(Error::Divergent { .. })));
}
