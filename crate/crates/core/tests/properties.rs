use std::f64::consts::PI;

use freeflow::cauchy::{cauchy_transform, stieltjes_invert, CauchySampler};
use freeflow::conformal::{slit_image, ConformalPair, PsiForm};
use freeflow::io::{measure_to_json, parse_measure, parse_number};
use freeflow::levyflow::FlowField;
use freeflow::{Measure, NevanlinnaSpec, RationalNevanlinna};
use num_complex::Complex64;
use proptest::prelude::*;

fn upper() -> impl Strategy<Value = Complex64> {
    (-5.0..5.0f64, -3.0..1.0f64).prop_map(|(x, e)| Complex64::new(x, 10f64.powf(e)))
}

/// `a ≤ 0`, distinct sorted poles separated by at least 0.2, positive residues.
fn rational(min_poles: usize) -> impl Strategy<Value = RationalNevanlinna> {
    (
        -2.0..0.0f64,
        -2.0..2.0f64,
        prop::collection::vec((0.2..1.5f64, 0.1..2.0f64), min_poles..4),
        -3.0..0.0f64,
    )
        .prop_map(|(a, b, gaps, start)| {
            let mut x = start;
            let (mut poles, mut residues) = (Vec::new(), Vec::new());
            for (g, r) in gaps {
                poles.push(x);
                residues.push(r);
                x += g;
            }
            RationalNevanlinna::new(a, b, poles, residues).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rational_maps_into_lower_half_plane(r in rational(0), z in upper()) {
        prop_assert!(r.eval(z).im <= 1e-12);
    }

    #[test]
    fn canonical_form_agrees_with_rational(r in rational(0), z in upper()) {
        let spec = r.to_canonical().unwrap();
        let (a, b) = (spec.eval(z).unwrap(), r.eval(z));
        prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()), "{} vs {}", a, b);
    }

    #[test]
    fn value_at_i_encodes_alpha_minus_mass(alpha in -2.0..0.0f64, beta in -3.0..3.0f64, w in 0.1..2.0f64, t in 0.25..4.0f64) {
        let nu = Measure::semicircle(t).unwrap().scaled(w).unwrap();
        let spec = NevanlinnaSpec::new(alpha, beta, nu).unwrap();
        let v = spec.eval(Complex64::i()).unwrap();
        prop_assert!((v.re - beta).abs() < 1e-9);
        prop_assert!((v.im - (alpha - w)).abs() < 1e-9);
    }

    #[test]
    fn cauchy_transform_bounds(t in 0.1..4.0f64, z in upper()) {
        let g = cauchy_transform(&Measure::semicircle(t).unwrap(), z).unwrap();
        prop_assert!(g.im <= 0.0);
        prop_assert!(g.norm() <= 1.0 / z.im * (1.0 + 1e-9));
    }

    #[test]
    fn stieltjes_density_is_nonnegative(t in 0.25..3.0f64, x in -4.0..4.0f64) {
        let g = CauchySampler::from_measure(&Measure::semicircle(t).unwrap()).unwrap();
        let d = stieltjes_invert(&g, &[x], 1e-3).unwrap();
        prop_assert!(d.density[0] >= 0.0);
    }

    #[test]
    fn primitive_difference_quotient_has_nonnegative_imaginary_part(r in rational(0), z1 in upper(), z2 in upper()) {
        prop_assume!((z1 - z2).norm() > 1e-9);
        let pair = ConformalPair::new(PsiForm::Rational(r)).unwrap();
        prop_assert!(pair.univalence_defect(&[(z1, z2)]).unwrap() <= 1e-9);
    }

    #[test]
    fn slit_heights_are_partial_residue_sums(r in rational(1)) {
        let img = slit_image(&r).unwrap();
        let mut expected: Vec<f64> = (0..=r.residues.len())
            .map(|j| -PI * r.residues[j..].iter().sum::<f64>())
            .collect();
        expected.sort_by(|a, b| a.total_cmp(b));
        let mut got: Vec<f64> = img.slits.iter().map(|s| s.height).collect();
        got.sort_by(|a, b| a.total_cmp(b));
        prop_assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            prop_assert!((g - e).abs() <= 1e-10);
        }
    }

    #[test]
    fn constant_flow_is_a_semigroup(s in 0.0..2.0f64, t in 0.0..2.0f64, z in upper()) {
        let ff = FlowField::constant(Complex64::new(0.3, -1.0)).unwrap();
        let a = ff.flow(ff.flow(z, s).unwrap(), t).unwrap();
        let b = ff.flow(z, s + t).unwrap();
        prop_assert!((a - b).norm() <= 1e-12);
    }

    #[test]
    fn measure_json_roundtrip(u in -5.0..5.0f64, m in 0.1..3.0f64, t in 0.25..4.0f64) {
        let nu = Measure::new(
            vec![freeflow::Atom { position: u, mass: m }],
            Measure::semicircle(t).unwrap().pieces().to_vec(),
        ).unwrap();
        let back = parse_measure(&measure_to_json(&nu).unwrap().to_string()).unwrap();
        prop_assert!((back.total_mass().unwrap() - nu.total_mass().unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn numbers_roundtrip_through_text(v in -1e6..1e6f64) {
        prop_assert_eq!(parse_number(&format!("{v:e}")).unwrap(), v);
        prop_assert_eq!(parse_number(&v.to_string()).unwrap(), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn negpow_flow_raises_imaginary_part(z in upper(), s in 0.05..1.0f64, t in 0.05..1.0f64) {
        let ff = FlowField::neg_pow(1.0 / 3.0).unwrap();
        let a = ff.flow(z, s).unwrap();
        let b = ff.flow(z, s + t).unwrap();
        prop_assert!(a.im >= z.im && b.im >= a.im);
        let composed = ff.flow(a, t).unwrap();
        prop_assert!((composed - b).norm() <= 1e-8 * (1.0 + b.norm()));
    }
}
