use proptest::prelude::*;

use pnlv::backlund::{biv_forward, biv_inverse, trivial_symmetries, ParameterState, Symmetry};
use pnlv::eqcore::{first_integral, rhs, scaled_residual};
use pnlv::localseries::{seed_big_w, seed_jet, PoleSeed, Residue};
use pnlv::polefield::{counting_function, string_recursion_sim};
use pnlv::{EquationSpec, Frac, GammaBranch, Jet, C};

fn cplx(r: f64) -> impl Strategy<Value = C> {
    (-r..r, -r..r).prop_map(|(a, b)| C::new(a, b))
}

fn residue() -> impl Strategy<Value = Residue> {
    prop_oneof![Just(Residue::Plus), Just(Residue::Minus)]
}

fn equation() -> impl Strategy<Value = EquationSpec> {
    (0..3usize, cplx(2.0), cplx(2.0)).prop_map(|(k, a, b)| match k {
        0 => EquationSpec::first(),
        1 => EquationSpec::second(a),
        _ => EquationSpec::fourth(a, b, GammaBranch::Plus),
    })
}

/// Jet with `w''` filled in from the equation.
fn full(eq: &EquationSpec, j: Jet) -> Jet {
    match j.w2 {
        Some(_) => j,
        None => Jet::with_w2(j.z, j.w, j.w1, rhs(eq, &j).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seeded_jets_solve_the_equation(eq in equation(), p in cplx(3.0), h in cplx(1.0), eps in residue(), t in 0.0..6.28f64) {
        let seed = PoleSeed::new(eq, p, eps, h);
        let off = C::from_polar(0.5 * seed.disc_radius(), t);
        let jet = full(&eq, seed_jet(&seed, off).unwrap());
        prop_assert!(scaled_residual(&eq, &jet).unwrap() < 1e-9);
    }

    #[test]
    fn series_first_integral_matches_the_algebraic_one(eq in equation(), p in cplx(3.0), h in cplx(1.0), eps in residue(), t in 0.0..6.28f64) {
        let seed = PoleSeed::new(eq, p, eps, h);
        let off = C::from_polar(0.5 * seed.disc_radius(), t);
        let jet = seed_jet(&seed, off).unwrap();
        let alg = first_integral(&eq, &jet).unwrap().value;
        let ser = seed_big_w(&seed, off);
        prop_assert!((alg - ser).norm() < 1e-8 * (1.0 + ser.norm()));
    }

    #[test]
    fn backlund_steps_invert(a in cplx(2.0), g in cplx(2.0), z in cplx(3.0), r in 0.5..2.0f64, t in 0.0..6.28f64, w1 in cplx(2.0)) {
        let ps = ParameterState::new(a, g);
        let jet = Jet::new(z, C::from_polar(r, t), w1);
        let (up, next) = biv_forward(&jet, &ps).unwrap();
        prop_assume!(up.w.norm() > 1e-3);
        let (back, prev) = biv_inverse(&up, &next).unwrap();
        prop_assert!((back.w - jet.w).norm() < 1e-9 * (1.0 + jet.w.norm()));
        prop_assert!((prev.alpha - a).norm() < 1e-14 && (prev.gamma - g).norm() < 1e-14);
    }

    #[test]
    fn parameter_law_on_half_integers(a in -20i32..20, b in -20i32..20) {
        let (a, g) = (C::new(a as f64 / 2.0, 0.0), C::new(b as f64 / 2.0, 0.0));
        let ps = ParameterState::new(a, g);
        let one = ps.forward();
        prop_assert_eq!(one.alpha - one.gamma, -(a - g));
        let two = one.forward();
        prop_assert_eq!((two.alpha, two.gamma), (a + 1.0, g + 1.0));
    }

    #[test]
    fn symmetries_map_solutions_to_solutions(eq in equation(), p in cplx(3.0), h in cplx(1.0), eps in residue(), conj in any::<bool>()) {
        let seed = PoleSeed::new(eq, p, eps, h);
        let jet = full(&eq, seed_jet(&seed, C::new(0.4 * seed.disc_radius(), 0.0)).unwrap());
        let which = if conj { Symmetry::Conjugate } else { Symmetry::Rotate };
        let (img, eq2) = trivial_symmetries(&jet, &eq, which);
        let img = full(&eq2, img);
        prop_assert!(scaled_residual(&eq2, &img).unwrap() < 1e-9);
    }

    #[test]
    fn synthetic_strings_obey_the_law(arg in 0.0..6.28f64, m in 1.0..4.0f64) {
        let omega = C::from_polar(m, arg);
        let p0 = 4.0 * (2.0 * omega).sqrt();
        let rep = string_recursion_sim(omega, Frac::int(1), p0, 20_000);
        prop_assert!((rep.value_ratio - 1.0).norm() < 2e-2);
        prop_assert!((rep.count_ratio - 1.0).abs() < 3e-2);
    }

    #[test]
    fn counting_function_is_monotone(pts in proptest::collection::vec(cplx(10.0), 1..200)) {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let t = counting_function(&pts, &grid);
        prop_assert!(t.rows.windows(2).all(|w| w[0].1 <= w[1].1));
        prop_assert!(t.rows.last().unwrap().1 <= pts.len());
    }
}
