//! The β-deformation against an independently assembled `Ψ̄`, the framed
//! axioms, and the integrability route of the deformed structure.

mod common;

use common::frame::{bracket, Conformal, Field};
use finsler_cr::deformed::{
    alpha_spread, beta_one_gap, build_deformed, deformed_axioms, diagnostics, diagnostics_4_14_17,
    framed_functions, theorem41_check, DeformedStructure,
};
use finsler_cr::framed::FrameContext;
use finsler_cr::geometry::Conformal as Sigma;
use finsler_cr::suite::sample_points;
use finsler_cr::{Error, FinslerSpec, PhasePoint};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const BETAS: [f64; 3] = [0.6, 2.0, 5.0];

/// `Ψ̄(a^j δ_j + b^j ∂_j) = (H b)^v δ_v − (G a)^v ∂_v` with `α = 1` and
/// `β + τw = 1`.
fn psi_bar(o: &Conformal, beta: f64, z: &[f64], x: &DVector<f64>) -> DVector<f64> {
    let m = z.len() / 2;
    let (pos, vel) = common::split(z);
    let tau = o.f2(z);
    let y = DVector::from_column_slice(vel);
    let y_low = &y * o.weight(pos);
    let yy = &y * y_low.transpose();
    let ident = DMatrix::<f64>::identity(m, m);
    let g = &ident / beta + &yy * ((beta - 1.0) / (beta * tau));
    let h = &ident * beta + &yy * ((1.0 - beta) / tau);
    let (a, b) = o.adapted(z, x);
    o.compose(z, &(h * b), &(-(g * a)))
}

fn nijenhuis_bar(o: &Conformal, beta: f64, x: &Field, y: &Field, z: &[f64]) -> DVector<f64> {
    let px: Field = Box::new(|w: &[f64]| psi_bar(o, beta, w, &x(w)));
    let py: Field = Box::new(|w: &[f64]| psi_bar(o, beta, w, &y(w)));
    let a = bracket(x, &py, z) + bracket(&px, y, z);
    bracket(&px, &py, z) - bracket(x, y, z) - psi_bar(o, beta, z, &a)
}

fn a_bar(o: &Conformal, beta: f64, x: &Field, y: &Field, z: &[f64]) -> DVector<f64> {
    let px: Field = Box::new(|w: &[f64]| psi_bar(o, beta, w, &x(w)));
    let py: Field = Box::new(|w: &[f64]| psi_bar(o, beta, w, &y(w)));
    bracket(x, &py, z) + bracket(&px, y, z)
}

fn space_forms(m: usize) -> Vec<(FinslerSpec, Conformal)> {
    vec![
        (FinslerSpec::euclidean(m), Conformal::euclidean()),
        (FinslerSpec::sphere(m), Conformal::sphere()),
        (FinslerSpec::poincare(m), Conformal::poincare()),
    ]
}

#[test]
fn psi_bar_matches_oracle() {
    for (spec, o) in space_forms(3) {
        for p in sample_points(&spec, 2, 3).unwrap() {
            let z = p.coords();
            let ctx = FrameContext::new(&spec, &p).unwrap();
            for beta in BETAS {
                let d = build_deformed(&ctx, beta).unwrap();
                for c in 0..6 {
                    let mut e = DVector::zeros(6);
                    e[c] = 1.0;
                    let want = psi_bar(&o, beta, &z, &e);
                    assert!((&d.psi_bar * &e - &want).amax() < 1e-11 * (1.0 + want.amax()));
                    // Ψ̄² = −1
                    let twice = psi_bar(&o, beta, &z, &want);
                    assert!((twice + &e).amax() < 1e-11);
                }
            }
        }
    }
}

#[test]
fn beta_one_reproduces_the_undeformed_structure() {
    for m in [2, 3] {
        for spec in common::catalog_with_poincare(m) {
            for p in sample_points(&spec, 3, 8).unwrap() {
                let ctx = FrameContext::connection_only(&spec, &p).unwrap();
                let gap = beta_one_gap(&ctx).unwrap();
                assert!(gap < 1e-12, "{}: {gap:e}", spec.label());
            }
        }
    }
}

#[test]
fn deformed_axioms_hold_across_beta() {
    for m in [2, 3] {
        for spec in common::catalog_with_poincare(m) {
            for p in sample_points(&spec, 3, 6).unwrap() {
                let ctx = FrameContext::connection_only(&spec, &p).unwrap();
                for beta in BETAS {
                    let d = build_deformed(&ctx, beta).unwrap();
                    let r = deformed_axioms(&ctx, &d, 1e-9);
                    assert!(r.all_passed(), "{} β={beta}\n{}", spec.label(), r.summary_text());
                    let gh = (&d.g_up * &d.h_up - DMatrix::identity(m, m)).amax();
                    assert!(gh < 1e-12);
                }
            }
        }
    }
}

#[test]
fn perturbed_w_breaks_the_framed_structure() {
    for spec in [FinslerSpec::sphere(3), FinslerSpec::randers(3)] {
        for p in sample_points(&spec, 5, 12).unwrap() {
            let ctx = FrameContext::connection_only(&spec, &p).unwrap();
            for beta in BETAS {
                let tau = ctx.frame.f2;
                let (v, w) = framed_functions(1.0, beta, tau);
                let d = DeformedStructure::with_functions(&ctx, 1.0, beta, v, w + 0.1 / tau).unwrap();
                let r = deformed_axioms(&ctx, &d, 1e-3);
                let worst = r
                    .records()
                    .iter()
                    .filter(|c| c.check_id.starts_with("deformed.phi") || c.check_id.starts_with("deformed.eta"))
                    .map(|c| c.residual)
                    .fold(0.0, f64::max);
                assert!(worst > 1e-3, "{} β={beta}: {worst:e}", spec.label());
            }
        }
    }
}

#[test]
fn infeasible_beta_is_rejected() {
    let spec = FinslerSpec::sphere(2);
    let p = sample_points(&spec, 1, 1).unwrap().remove(0);
    let ctx = FrameContext::connection_only(&spec, &p).unwrap();
    for beta in [0.5, 0.2, -1.0, f64::NAN] {
        assert!(matches!(build_deformed(&ctx, beta), Err(Error::Feasibility(_))));
    }
}

#[test]
fn deformation_does_not_depend_on_alpha() {
    for spec in common::catalog_with_poincare(3) {
        let p = sample_points(&spec, 1, 15).unwrap().remove(0);
        let ctx = FrameContext::connection_only(&spec, &p).unwrap();
        for beta in BETAS {
            let s = alpha_spread(&ctx, beta, &[1.0, 0.3, 2.0, 7.5]).unwrap();
            assert!(s < 1e-12, "{}: {s:e}", spec.label());
        }
    }
}

#[test]
fn bracket_route_is_cr_on_space_forms() {
    for (spec, o) in space_forms(3) {
        for p in sample_points(&spec, 2, 21).unwrap() {
            let z = p.coords();
            let ctx = FrameContext::new(&spec, &p).unwrap();
            let kept = ctx.frame.kept();
            let mut df: Vec<Field> = kept.iter().map(|&j| o.h(j)).collect();
            df.extend(kept.iter().map(|&j| o.v(j)));
            for beta in [2.0, 5.0] {
                for (s, x) in df.iter().enumerate() {
                    for y in &df[s + 1..] {
                        let n = nijenhuis_bar(&o, beta, x, y, &z);
                        assert!(n.amax() < 1e-7, "{} β={beta}: {:e}", spec.label(), n.amax());
                        let a = a_bar(&o, beta, x, y, &z);
                        for k in 1..=2 {
                            assert!(o.eta(&z, k, &a).abs() < 1e-7);
                        }
                    }
                }
                let r = theorem41_check(&ctx, beta, 1e-8).unwrap();
                for id in ["theorem41.membership_bracket", "theorem41.nijenhuis", "theorem41.cr_stability"] {
                    assert!(r.get(id).unwrap().passed(), "{} {id}\n{}", spec.label(), r.summary_text());
                }
            }
        }
    }
}

#[test]
fn printed_route_shows_the_euclidean_obstruction() {
    let spec = FinslerSpec::euclidean(3);
    let points = sample_points(&spec, 20, 44).unwrap();
    for p in &points {
        let nonzero = p.y().iter().filter(|v| v.abs() > 1e-3).count();
        assert!(nonzero >= 2);
        let ctx = FrameContext::new(&spec, p).unwrap();
        let r = theorem41_check(&ctx, 2.0, 1e-8).unwrap();
        let printed = r.get("theorem41.membership").unwrap();
        assert!(printed.residual > 1e-3, "{:e}", printed.residual);
        assert!(r.get("theorem41.membership_bracket").unwrap().residual < 1e-12);
    }
    // β = 1 removes it
    let ctx = FrameContext::new(&spec, &points[0]).unwrap();
    assert!(theorem41_check(&ctx, 1.0, 1e-8).unwrap().all_passed());
}

#[test]
fn identity_and_obstruction_form_on_the_sphere() {
    let spec = FinslerSpec::sphere(3);
    for p in sample_points(&spec, 100, 71).unwrap() {
        let ctx = FrameContext::new(&spec, &p).unwrap();
        let r = diagnostics_4_14_17(&ctx, 2.0, 1e-5).unwrap();
        assert!(r.get("diagnostics.identity").unwrap().passed(), "{}", r.summary_text());
        assert!(r.get("diagnostics.obstruction_form").unwrap().passed(), "{}", r.summary_text());
    }
}

#[test]
fn eigen_hypotheses_hold_only_when_flat() {
    let flat = FinslerSpec::euclidean(3);
    let curved = FinslerSpec::sphere(3);
    for p in sample_points(&curved, 5, 2).unwrap() {
        let d = diagnostics(&FrameContext::new(&flat, &p).unwrap(), 2.0).unwrap();
        assert!(d.eigen_residual < 1e-12 && d.spray_residual < 1e-12);
        let d = diagnostics(&FrameContext::new(&curved, &p).unwrap(), 2.0).unwrap();
        assert!(d.eigen_residual > 1e-3, "{:e}", d.eigen_residual);
    }
}

fn randers_spec() -> impl Strategy<Value = FinslerSpec> {
    (prop::collection::vec(-0.3f64..0.3, 3), prop::collection::vec(-0.2f64..0.2, 3), 0.0f64..0.2)
        .prop_map(|(b, lin, q)| FinslerSpec::randers_with(3, b, Sigma { linear: lin, quadratic: q }))
}

fn phase_point() -> impl Strategy<Value = PhasePoint> {
    (prop::collection::vec(-0.5f64..0.5, 3), prop::collection::vec(-1.5f64..1.5, 3))
        .prop_filter("slit", |(_, y)| y.iter().map(|v| v * v).sum::<f64>() > 0.1)
        .prop_map(|(x, y)| PhasePoint::new(x, y).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn axioms_hold_for_random_beta(spec in randers_spec(), p in phase_point(), beta in 0.55f64..8.0, alpha in 0.2f64..5.0) {
        let ctx = FrameContext::connection_only(&spec, &p).unwrap();
        let d = DeformedStructure::new(&ctx, alpha, beta).unwrap();
        let r = deformed_axioms(&ctx, &d, 1e-9);
        prop_assert!(r.all_passed(), "{}", r.summary_text());
    }

    #[test]
    fn deformed_metric_is_positive(spec in randers_spec(), p in phase_point(), beta in 0.55f64..8.0) {
        let ctx = FrameContext::connection_only(&spec, &p).unwrap();
        let d = build_deformed(&ctx, beta).unwrap();
        let ev = d.g_bar.clone().symmetric_eigen().eigenvalues;
        prop_assert!(ev.iter().all(|&e| e > 0.0));
    }
}
