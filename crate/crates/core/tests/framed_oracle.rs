//! The framed f-structure and `D_F` against the conformal frame oracle,
//! plus axiom invariants over random Randers metrics.

mod common;

use common::frame::{bracket, Conformal};
use finsler_cr::framed::{
    df_checks, dropped_index, f_structure_axioms, framed_axioms, FrameContext, FrameField, Stencil,
};
use finsler_cr::geometry::Conformal as Sigma;
use finsler_cr::suite::sample_points;
use finsler_cr::{FinslerSpec, PhasePoint};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn basis(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

#[test]
fn structure_matches_oracle_on_space_forms() {
    let cases = [
        (FinslerSpec::euclidean(3), Conformal::euclidean()),
        (FinslerSpec::sphere(3), Conformal::sphere()),
        (FinslerSpec::poincare(3), Conformal::poincare()),
    ];
    for (spec, o) in cases {
        for p in sample_points(&spec, 3, 2).unwrap() {
            let z = p.coords();
            let ctx = FrameContext::new(&spec, &p).unwrap();
            let s = &ctx.structure;
            for c in 0..6 {
                let e = basis(6, c);
                assert!((&s.psi * &e - o.psi(&z, &e)).amax() < 1e-11);
                assert!((&s.phi * &e - o.phi(&z, &e)).amax() < 1e-11);
                for a in 1..=2 {
                    assert!((s.eta(a)[c] - o.eta(&z, a, &e)).abs() < 1e-11);
                }
            }
            for a in 1..=2 {
                assert!((s.xi(a) - o.xi(&z, a)).amax() < 1e-11);
            }
            // F²G is the Sasaki lift of g
            let g = o.weight(p.x());
            let gf = &s.g * o.f2(&z);
            for i in 0..3 {
                let d = o.delta(i)(&z);
                let v = basis(6, 3 + i);
                assert!((d.dot(&(&gf * &d)) - g).abs() < 1e-10);
                assert!((v.dot(&(&gf * &v)) - g).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn euclidean_structure_by_hand() {
    let spec = FinslerSpec::euclidean(2);
    let p = PhasePoint::new(vec![0.1, -0.2], vec![1.0, 0.0]).unwrap();
    let ctx = FrameContext::new(&spec, &p).unwrap();
    let s = &ctx.structure;
    assert_eq!(s.eta1.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    assert_eq!(s.eta2.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
    assert_eq!(s.xi1.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    assert_eq!(s.xi2.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
    // Ψ∂_x = −∂_y, Ψ∂_y = ∂_x
    let psi = DMatrix::from_row_slice(4, 4, &[
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    ]);
    assert_eq!(s.psi, psi);
    // φ kills ξ and swaps the transverse pair up to sign
    let phi = &s.phi;
    assert_eq!((phi * basis(4, 0)).amax(), 0.0);
    assert_eq!((phi * basis(4, 2)).amax(), 0.0);
    assert_eq!(phi * basis(4, 1), -basis(4, 3));
    assert_eq!(phi * basis(4, 3), basis(4, 1));
    assert_eq!(ctx.frame.i0, 0);
    assert_eq!(ctx.frame.kept(), vec![1]);
}

#[test]
fn liouville_and_spray_bracket() {
    for (spec, o) in [(FinslerSpec::sphere(3), Conformal::sphere()), (FinslerSpec::poincare(2), Conformal::poincare())] {
        let p = sample_points(&spec, 1, 9).unwrap().remove(0);
        let z = p.coords();
        // [C, S] = S for a 2-homogeneous spray
        let c = o.liouville();
        let s: common::frame::Field = Box::new(|w: &[f64]| o.xi(w, 1));
        let want = o.xi(&z, 1);
        assert!((bracket(&c, &s, &z) - &want).amax() < 1e-8);
        let st = Stencil::new(&spec, &p).unwrap();
        let got = st.bracket(&FrameField::Liouville, &FrameField::Spray).unwrap();
        assert!((got - want).amax() < 1e-6);
    }
}

#[test]
fn dropped_index_prefers_the_largest_component() {
    assert_eq!(dropped_index(&[0.1, -2.0, 1.0]), 1);
    assert_eq!(dropped_index(&[1.0, -1.0, 0.5]), 0);
    assert_eq!(dropped_index(&[0.0, 0.0, 3.0]), 2);
}

#[test]
fn perturbed_phi_is_rejected() {
    let spec = FinslerSpec::randers(3);
    let p = sample_points(&spec, 1, 4).unwrap().remove(0);
    let ctx = FrameContext::new(&spec, &p).unwrap();
    let s = &ctx.structure;
    let xi = [&s.xi1, &s.xi2];
    let eta = [&s.eta1, &s.eta2];
    assert!(f_structure_axioms("t", &s.phi, xi, eta, 1e-9).all_passed());
    let mut bad = s.phi.clone();
    bad[(0, 4)] += 1e-4;
    let r = f_structure_axioms("t", &bad, xi, eta, 1e-9);
    assert!(!r.all_passed());
    // ψ in place of φ breaks φξ = 0 and the rank
    let r = f_structure_axioms("t", &s.psi, xi, eta, 1e-9);
    assert!(r.get("t.phi_xi").unwrap().failed());
    assert!(r.get("t.phi_rank").unwrap().failed());
}

fn randers_spec(m: usize) -> impl Strategy<Value = FinslerSpec> {
    (prop::collection::vec(-0.3f64..0.3, m), prop::collection::vec(-0.2f64..0.2, m), 0.0f64..0.2)
        .prop_map(move |(b, lin, q)| FinslerSpec::randers_with(m, b, Sigma { linear: lin, quadratic: q }))
}

fn phase_point(m: usize) -> impl Strategy<Value = PhasePoint> {
    (prop::collection::vec(-0.5f64..0.5, m), prop::collection::vec(-1.5f64..1.5, m))
        .prop_filter("slit", |(_, y)| y.iter().map(|v| v * v).sum::<f64>() > 0.1)
        .prop_map(|(x, y)| PhasePoint::new(x, y).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn axioms_hold_for_random_randers((spec, p) in (2..=4usize).prop_flat_map(|m| (randers_spec(m), phase_point(m)))) {
        let ctx = FrameContext::connection_only(&spec, &p).unwrap();
        let r = framed_axioms(&ctx, 1e-9);
        prop_assert!(r.all_passed(), "{}", r.summary_text());
        let r = df_checks(&ctx, 1e-9);
        prop_assert!(r.all_passed(), "{}", r.summary_text());
    }

    #[test]
    fn frame_conjugates_under_y_scaling(spec in randers_spec(3), p in phase_point(3), t in 0.2f64..5.0) {
        let a = FrameContext::connection_only(&spec, &p).unwrap();
        let b = FrameContext::connection_only(&spec, &p.scale_y(t).unwrap()).unwrap();
        // N is 1-homogeneous, so E(x, ty) = S E(x, y) S⁻¹ with S = diag(1, t)
        let m = 3;
        let s = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
            if i != j { 0.0 } else if i < m { 1.0 } else { t }
        });
        let inv = s.clone().try_inverse().unwrap();
        let moved = &s * &a.frame.adapted * &inv;
        prop_assert!((moved - &b.frame.adapted).amax() < 1e-10 * (1.0 + b.frame.adapted.amax()));
        prop_assert_eq!(a.frame.i0, b.frame.i0);
    }
}
