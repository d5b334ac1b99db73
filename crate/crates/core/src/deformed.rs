//! The β-deformed metric and almost complex structure, the tensor
//! `Ā(X, Y) = [X, Ψ̄Y] + [Ψ̄X, Y]`, and the hypotheses of the β-generalized
//! CR theorem.
//!
//! Three routes to `Ā` on frame pairs:
//! * `printed`: the simplified closed forms in terms of `y_j y^v`;
//! * `structural`: the frame-bracket expansion with `G^a_j`, `H^a_j`;
//! * jet or finite-difference brackets from the definition.
//!
//! The printed horizontal-horizontal form and the vertical part of the
//! printed vertical-vertical form drop `±c (y_j N^v_k − y_k N^v_j)` terms,
//! so they agree with the other routes only where `N` is negligible or the
//! terms cancel. The printed mixed form is exact.

use nalgebra::{DMatrix, DVector};

use crate::adapted::{a_of, b_of, nijenhuis_of, JetField, JetFrame, PsiBar};
use crate::error::{Error, Result};
use crate::framed::{f_structure_axioms, metric_axioms, FrameContext};
use crate::geometry::min_eigenvalue;
use crate::report::CheckReport;
use crate::tensor::outer;

/// Deformed data at a point, for arbitrary `(α, β, v, w)`.
#[derive(Clone, Debug)]
pub struct DeformedStructure {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub v: f64,
    pub w: f64,
    /// `G_ij`
    pub g_low: DMatrix<f64>,
    /// `H_ij`
    pub h_low: DMatrix<f64>,
    /// `G^a_j`, row a
    pub g_up: DMatrix<f64>,
    /// `H^a_j`, row a
    pub h_up: DMatrix<f64>,
    pub g_bar: DMatrix<f64>,
    pub psi_bar: DMatrix<f64>,
    pub phi_bar: DMatrix<f64>,
    pub xi: [DVector<f64>; 2],
    pub eta: [DVector<f64>; 2],
}

pub type DeformedFrame = DeformedStructure;

/// `v(τ)` and `w(τ)` making the deformed data a framed f-structure.
pub fn framed_functions(alpha: f64, beta: f64, tau: f64) -> (f64, f64) {
    (alpha * (beta - 1.0) / tau, (1.0 - beta) / tau)
}

impl DeformedStructure {
    /// `v`, `w` chosen so that `β + τw = 1`.
    pub fn new(ctx: &FrameContext, alpha: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.5) {
            return Err(Error::Feasibility(beta));
        }
        let (v, w) = framed_functions(alpha, beta, ctx.frame.f2);
        Self::with_functions(ctx, alpha, beta, v, w)
    }

    pub fn with_functions(ctx: &FrameContext, alpha: f64, beta: f64, v: f64, w: f64) -> Result<Self> {
        let f = &ctx.frame;
        let tau = f.f2;
        if !(alpha > 0.0 && beta > 0.0) || !(alpha + 2.0 * tau * v > 0.0) {
            return Err(Error::Feasibility(alpha + 2.0 * tau * v));
        }
        let m = f.dim;
        let g = &ctx.geometry.metric.g;
        let yy_low = outer(&f.y_low, &f.y_low);
        let yy_mixed = outer(&f.y, &f.y_low);
        let ident = DMatrix::<f64>::identity(m, m);
        let g_low = g / beta + &yy_low * (v / (alpha * beta));
        let h_low = g * beta + &yy_low * w;
        let g_up = &ident / beta + &yy_mixed * (v / (alpha * beta));
        let h_up = &ident * beta + &yy_mixed * w;

        let g_bar = f.block_metric(&g_low, &h_low);
        let min_eigenvalue = min_eigenvalue(&g_bar);
        if min_eigenvalue <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        let psi_bar = f.block_antidiagonal(&h_up, &(-&g_up));
        let s = &ctx.structure;
        let xi = [&s.xi1 * (beta + w * tau), s.xi2.clone()];
        let eta = [s.eta1.clone(), &s.eta2 * (beta + w * tau)];
        let phi_bar = &psi_bar + outer(&xi[1], &eta[0]) - outer(&xi[0], &eta[1]);
        Ok(DeformedStructure {
            alpha,
            beta,
            tau,
            v,
            w,
            g_low,
            h_low,
            g_up,
            h_up,
            g_bar,
            psi_bar,
            phi_bar,
            xi,
            eta,
        })
    }

    /// The metric of the framed structure, `Ḡ/τ`.
    pub fn normalized_metric(&self) -> DMatrix<f64> {
        &self.g_bar / self.tau
    }
}

/// Main-path constructor (`α = 1`).
pub fn build_deformed(ctx: &FrameContext, beta: f64) -> Result<DeformedStructure> {
    DeformedStructure::new(ctx, 1.0, beta)
}

/// Framed-structure axioms of `(φ̄, ξ̄_a, η̄^a, Ḡ/τ)` plus the algebraic
/// invariants of the deformation.
pub fn deformed_axioms(ctx: &FrameContext, d: &DeformedStructure, tol: f64) -> CheckReport {
    let xi = [&d.xi[0], &d.xi[1]];
    let eta = [&d.eta[0], &d.eta[1]];
    let mut r = f_structure_axioms("deformed", &d.phi_bar, xi, eta, tol);
    r.merge(metric_axioms("deformed", &d.normalized_metric(), &d.phi_bar, xi, eta, tol));
    let m = d.g_up.nrows();
    let ident = DMatrix::<f64>::identity(m, m);
    r.check("deformed.gh_inverse", (&d.g_up * &d.h_up - &ident).amax(), tol);
    r.check("deformed.framed_condition", (d.beta + d.tau * d.w - 1.0).abs(), tol);
    r.check(
        "deformed.w_relation",
        (d.w + d.beta * d.v / (d.alpha + d.tau * d.v)).abs() * d.tau,
        tol,
    );
    let mut hv: f64 = 0.0;
    for i in 0..m {
        let h = ctx.frame.h_field(i);
        let v = ctx.frame.v_field(i);
        hv = hv.max((&d.psi_bar * &h + &v / d.beta).norm() / (1.0 + h.norm()));
        hv = hv.max((&d.psi_bar * &v - &h * d.beta).norm() / (1.0 + v.norm()));
    }
    r.check("deformed.psi_bar_hv", hv, tol);
    r
}

/// Largest entrywise gap between the deformed objects at β = 1 and the
/// undeformed ones.
pub fn beta_one_gap(ctx: &FrameContext) -> Result<f64> {
    let d = build_deformed(ctx, 1.0)?;
    let s = &ctx.structure;
    Ok([
        (&d.g_bar - &s.g_f).amax(),
        (&d.psi_bar - &s.psi).amax(),
        (&d.phi_bar - &s.phi).amax(),
        (&d.normalized_metric() - &s.g).amax(),
        (&d.xi[0] - &s.xi1).amax(),
        (&d.eta[1] - &s.eta2).amax(),
        d.v.abs(),
        d.w.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

/// Spread of `Ḡ`, `Ψ̄` over several α with `v`, `w` from the framed choice.
pub fn alpha_spread(ctx: &FrameContext, beta: f64, alphas: &[f64]) -> Result<f64> {
    let base = DeformedStructure::new(ctx, alphas[0], beta)?;
    let mut spread: f64 = 0.0;
    for &a in &alphas[1..] {
        let d = DeformedStructure::new(ctx, a, beta)?;
        spread = spread
            .max((&d.g_bar - &base.g_bar).amax())
            .max((&d.psi_bar - &base.psi_bar).amax());
    }
    Ok(spread)
}

/// Values of a bilinear form on all adapted frame pairs, adapted components.
#[derive(Clone, Debug)]
pub struct PairTable {
    n: usize,
    values: Vec<DVector<f64>>,
}

impl PairTable {
    fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Result<DVector<f64>>) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                values.push(f(a, b)?);
            }
        }
        Ok(PairTable { n, values })
    }

    pub fn get(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.values[a * self.n + b]
    }

    /// Bilinear extension to adapted components `x`, `y`.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for a in 0..self.n {
            for b in 0..self.n {
                let w = x[a] * y[b];
                if w != 0.0 {
                    out += self.get(a, b) * w;
                }
            }
        }
        out
    }
}

/// Printed closed forms on frame pairs. Index layout: `0..m` horizontal,
/// `m..2m` vertical.
pub fn a_bar_printed(jf: &JetFrame, beta: f64) -> Result<PairTable> {
    let m = jf.dim();
    let tau = jf.tau.value();
    // y_j y^v and y_j y^v / τ as jets
    let yy = |j: usize, v: usize| &jf.y_low[j] * &jf.y[v];
    let yyt = |j: usize, v: usize| jf.yy_tau(v, j);
    PairTable::from_fn(2 * m, |a, b| {
        let mut out = DVector::zeros(2 * m);
        match (a < m, b < m) {
            (true, true) => {
                let (j, k) = (a, b);
                for v in 0..m {
                    out[m + v] = (beta - 1.0) / (beta * tau)
                        * (jf.derive(&yy(j, v), k)? - jf.derive(&yy(k, v), j)?);
                }
            }
            (false, false) => {
                let (j, k) = (a - m, b - m);
                for v in 0..m {
                    out[v] = (1.0 - beta) * (jf.derive(&yyt(k, v), m + j)? - jf.derive(&yyt(j, v), m + k)?);
                }
            }
            (true, false) => {
                let (j, k) = (a, b - m);
                for v in 0..m {
                    out[v] = (1.0 - beta) / tau * jf.derive(&yy(k, v), j)?;
                    let mut vert = beta * jf.r.get(v, j, k) + (beta - 1.0) / beta * jf.derive(&yyt(j, v), m + k)?;
                    for u in 0..m {
                        vert += (1.0 - beta) / tau * jf.y_low[k].value() * jf.y[u].value() * jf.r.get(v, j, u);
                    }
                    out[m + v] = vert;
                }
            }
            (false, true) => {
                let (k, j) = (a - m, b);
                for v in 0..m {
                    out[v] = -(1.0 - beta) / tau * jf.derive(&yy(k, v), j)?;
                    let mut vert = beta * jf.r.get(v, j, k) + (beta - 1.0) / beta * jf.derive(&yyt(j, v), m + k)?;
                    for u in 0..m {
                        vert += (1.0 - beta) / tau * jf.y_low[k].value() * jf.y[u].value() * jf.r.get(v, j, u);
                    }
                    out[m + v] = -vert;
                }
            }
        }
        Ok(out)
    })
}

/// Frame-bracket expansion in terms of `G^a_j`, `H^a_j`, `R`, `∂N/∂y`.
pub fn a_bar_structural(jf: &JetFrame, beta: f64) -> Result<PairTable> {
    let m = jf.dim();
    let gu = |a: usize, j: usize| jf.g_up(beta, a, j);
    let hu = |a: usize, j: usize| jf.h_up(beta, a, j);
    let dn = |v: usize, k: usize, u: usize| jf.dn_dy.get(v, k, u);
    let mixed = |j: usize, k: usize| -> Result<DVector<f64>> {
        let mut out = DVector::zeros(2 * m);
        for v in 0..m {
            out[v] = jf.derive(&hu(v, k), j)?;
            let mut vert = jf.derive(&gu(v, j), m + k)?;
            for u in 0..m {
                vert += hu(u, k).value() * jf.r.get(v, j, u);
            }
            out[m + v] = vert;
        }
        Ok(out)
    };
    PairTable::from_fn(2 * m, |a, b| {
        let mut out = DVector::zeros(2 * m);
        match (a < m, b < m) {
            (true, true) => {
                let (j, k) = (a, b);
                for v in 0..m {
                    let mut c = jf.derive(&gu(v, j), k)? - jf.derive(&gu(v, k), j)?;
                    for u in 0..m {
                        c += gu(u, j).value() * dn(v, k, u) - gu(u, k).value() * dn(v, j, u);
                    }
                    out[m + v] = c;
                }
            }
            (false, false) => {
                let (j, k) = (a - m, b - m);
                for v in 0..m {
                    out[v] = jf.derive(&hu(v, k), m + j)? - jf.derive(&hu(v, j), m + k)?;
                    let mut c = 0.0;
                    for u in 0..m {
                        c += hu(u, j).value() * dn(v, u, k) - hu(u, k).value() * dn(v, u, j);
                    }
                    out[m + v] = c;
                }
            }
            (true, false) => out = mixed(a, b - m)?,
            (false, true) => out = -mixed(b, a - m)?,
        }
        Ok(out)
    })
}

/// `Ā(X, Y)` from its definition with exact brackets.
pub fn a_bar_bracket(jf: &JetFrame, beta: f64, x: &JetField, y: &JetField) -> Result<DVector<f64>> {
    a_of(jf, &PsiBar(beta), x, y)
}

/// Residuals of the two hypotheses and the consequent CR conditions over
/// `D_F` basis pairs. Nothing is assumed to pass.
pub fn theorem41_check(ctx: &FrameContext, beta: f64, tol: f64) -> Result<CheckReport> {
    let jf = JetFrame::new(&ctx.geometry)?;
    build_deformed(ctx, beta)?;
    let printed = a_bar_printed(&jf, beta)?;
    let basis = jf.df_fields(ctx.frame.i0);
    let j = PsiBar(beta);
    let mut membership: f64 = 0.0;
    let mut membership_bracket: f64 = 0.0;
    let mut nijenhuis: f64 = 0.0;
    let mut stability: f64 = 0.0;
    let mut torsion: f64 = 0.0;
    for (s, x) in basis.iter().enumerate() {
        for y in &basis[s + 1..] {
            let bil = printed.apply(&x.value(), &y.value());
            let exact = a_of(&jf, &j, x, y)?;
            let n = nijenhuis_of(&jf, &j, x, y)?;
            let b = b_of(&jf, &j, x, y)?;
            let n_coord = jf.to_coords(&n);
            for a in 1..=2 {
                membership = membership.max(jf.eta_value(a, &bil).abs());
                membership_bracket = membership_bracket.max(jf.eta_value(a, &exact).abs());
                stability = stability.max(jf.eta_value(a, &b).abs());
            }
            nijenhuis = nijenhuis.max(n_coord.amax());
            // S = N − η¹(Ā) ξ₂ + η²(Ā) ξ₁
            let s_vec = &n_coord - &ctx.structure.xi2 * jf.eta_value(1, &exact)
                + &ctx.structure.xi1 * jf.eta_value(2, &exact);
            torsion = torsion.max(s_vec.amax());
        }
    }
    let mut r = CheckReport::new();
    r.check("theorem41.membership", membership, tol);
    r.check("theorem41.membership_bracket", membership_bracket, tol);
    r.check("theorem41.nijenhuis", nijenhuis, tol);
    r.check("theorem41.cr_stability", stability, tol);
    r.check("theorem41.torsion", torsion, tol);
    Ok(r)
}

/// Quantities behind the Euclidean obstruction discussion.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    /// `δy_k/δx^j` (row j)
    pub delta_y_low: DMatrix<f64>,
    /// Least-squares `c_j` in `δy_k/δx^j ≈ c_j y_k`.
    pub c: DVector<f64>,
    /// `N^a_j y_a / F²`, the value `c_j` must take.
    pub c_expected: DVector<f64>,
    pub eigen_residual: f64,
    pub spray_residual: f64,
    /// `y_v ∂/∂y^k (y_j y^v / F²)` (row j)
    pub obstruction: DMatrix<f64>,
    /// Largest gap in `βη²∘Ā(δ_j, δ_k) = η¹∘Ā(δ_j, ∂_k) − η¹∘Ā(δ_k, ∂_j)`.
    pub identity_residual: f64,
}

impl Diagnostics {
    pub fn obstruction_norm(&self) -> f64 {
        self.obstruction.norm()
    }
}

pub fn diagnostics(ctx: &FrameContext, beta: f64) -> Result<Diagnostics> {
    build_deformed(ctx, beta)?;
    let jf = JetFrame::new(&ctx.geometry)?;
    let m = jf.dim();
    let printed = a_bar_printed(&jf, beta)?;
    let mut identity_residual: f64 = 0.0;
    for j in 0..m {
        for k in 0..m {
            let lhs = beta * jf.eta_value(2, printed.get(j, k));
            let rhs = jf.eta_value(1, printed.get(j, m + k)) - jf.eta_value(1, printed.get(k, m + j));
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            identity_residual = identity_residual.max((lhs - rhs).abs() / scale);
        }
    }

    let y_low = DVector::from_iterator(m, jf.y_low.iter().map(|j| j.value()));
    let y = DVector::from_iterator(m, jf.y.iter().map(|j| j.value()));
    let tau = jf.tau.value();
    let mut d = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            d[(j, k)] = jf.derive(&jf.y_low[k], j)?;
        }
    }
    let yy = y_low.dot(&y_low);
    let c = &d * &y_low / yy;
    let eigen_residual = (&d - outer(&c, &y_low)).norm() / (1.0 + d.norm());
    let s = d.transpose() * &y;
    let e = s.dot(&y_low) / yy;
    let spray_residual = (&s - &y_low * e).norm() / (1.0 + s.norm());
    let c_expected = jf.n.transpose() * &y_low / tau;

    let mut obstruction = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            let mut acc = 0.0;
            for v in 0..m {
                acc += y_low[v] * jf.derive(&jf.yy_tau(v, j), m + k)?;
            }
            obstruction[(j, k)] = acc;
        }
    }
    Ok(Diagnostics {
        delta_y_low: d,
        c,
        c_expected,
        eigen_residual,
        spray_residual,
        obstruction,
        identity_residual,
    })
}

/// Report form of [`diagnostics`]. The obstruction matrix is compared with
/// its closed form `g_jk − y_j y_k/F²`; its norm is not a pass/fail quantity.
pub fn diagnostics_4_14_17(ctx: &FrameContext, beta: f64, tol: f64) -> Result<CheckReport> {
    let d = diagnostics(ctx, beta)?;
    let f = &ctx.frame;
    let closed = &ctx.geometry.metric.g - outer(&f.y_low, &f.y_low) / f.f2;
    let mut r = CheckReport::new();
    r.check("diagnostics.identity", d.identity_residual, tol);
    r.check("diagnostics.eigen", d.eigen_residual, tol);
    r.check("diagnostics.spray_eigen", d.spray_residual, tol);
    r.check(
        "diagnostics.obstruction_form",
        (&d.obstruction - closed).norm() / (1.0 + d.obstruction.norm()),
        tol,
    );
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerSpec;
    use crate::point::PhasePoint;

    fn ctx(spec: &FinslerSpec, x: &[f64], y: &[f64]) -> FrameContext {
        FrameContext::new(spec, &PhasePoint::new(x.to_vec(), y.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn beta_two_euclidean_values() {
        let c = ctx(&FinslerSpec::euclidean(2), &[0.0, 0.0], &[1.0, 0.0]);
        let d = build_deformed(&c, 2.0).unwrap();
        assert_eq!(d.tau, 1.0);
        assert_eq!(d.v, 1.0);
        assert_eq!(d.w, -1.0);
        assert!((d.g_low[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((d.h_low[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_is_infeasible() {
        let c = ctx(&FinslerSpec::euclidean(2), &[0.0, 0.0], &[1.0, 0.0]);
        assert!(matches!(build_deformed(&c, 0.5), Err(Error::Feasibility(_))));
        assert!(matches!(build_deformed(&c, 0.3), Err(Error::Feasibility(_))));
    }

    #[test]
    fn beta_one_is_undeformed() {
        let c = ctx(&FinslerSpec::randers(3), &[0.1, -0.2, 0.3], &[1.0, 0.4, -0.6]);
        assert!(beta_one_gap(&c).unwrap() < 1e-12);
    }

    #[test]
    fn euclidean_obstruction_matrix() {
        let c = ctx(&FinslerSpec::euclidean(2), &[0.0, 0.0], &[1.0, 0.0]);
        let d = diagnostics(&c, 2.0).unwrap();
        assert!((d.obstruction[(0, 0)]).abs() < 1e-15);
        assert!((d.obstruction[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((d.obstruction_norm() - 1.0).abs() < 1e-15);
        assert_eq!(d.c.amax(), 0.0);
    }
}
