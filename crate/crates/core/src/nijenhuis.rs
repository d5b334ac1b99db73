//! `A`, `N_Ψ`, the torsion `S`, the CR conditions on `D_F`, and scalar
//! flag curvature.
//!
//! Wedge products are unnormalized: `(α∧β)(X, Y) = α(X)β(Y) − α(Y)β(X)`.
//! With `N_J` defined by brackets, the tensor on vertical pairs is
//! `R^i_jk δy^j⊗δy^k ⊗ ∂_i`; the printed forms that carry a leading 2
//! (the `δy∧δy` form, the `(v_a, v_b)` form, and the `λF²` forms) are twice
//! that, which [`PRINTED_SCALE`] absorbs. The `η²∧Φ` form is at scale 1.
//! On horizontal and mixed pairs `N_Ψ` is not zero:
//! `N(δ_j, δ_k) = −R^i_jk ∂_i` and `N(δ_j, ∂_k) = −R^i_jk δ_i`.

use nalgebra::{DMatrix, DVector};

use crate::adapted::{a_of, b_of, nijenhuis_of, JetFrame, Psi};
use crate::connection::LocalGeometry;
use crate::error::Result;
use crate::framed::{df_fields, FrameContext, FrameField, Stencil};
use crate::report::{CheckRecord, CheckReport};
use crate::tensor::Tensor3;

/// Factor between `N_Ψ` taken without a leading 2 and the printed forms,
/// which follow the `N = 2([ΨX, ΨY] − ...)` convention. Confirmed against
/// the finite-difference oracle.
pub const PRINTED_SCALE: f64 = 0.5;

/// Adapted components `(dx(X), δy(X))` split into halves.
fn halves(ctx: &FrameContext, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let m = ctx.frame.dim;
    let a = ctx.frame.to_adapted(x);
    (a.rows(0, m).into_owned(), a.rows(m, m).into_owned())
}

fn curvature(ctx: &FrameContext) -> &Tensor3 {
    &ctx.geometry.curvature().r
}

/// `A = R^i_jk dx^j∧δy^k ⊗ ∂_i`, coordinate components.
pub fn a_tensor_closed(ctx: &FrameContext, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let m = ctx.frame.dim;
    let r = curvature(ctx);
    let (xh, xv) = halves(ctx, x);
    let (yh, yv) = halves(ctx, y);
    let mut out = DVector::zeros(2 * m);
    let a = r.contract(&xh, &yv) - r.contract(&yh, &xv);
    out.rows_mut(m, m).copy_from(&a);
    out
}

/// `A(X, Y) = [X, ΨY] + [ΨX, Y]` by the bracket oracle.
pub fn a_tensor_generic(st: &Stencil, x: &FrameField, y: &FrameField) -> Result<DVector<f64>> {
    Ok(st.bracket(x, &y.clone().psi())? + st.bracket(&x.clone().psi(), y)?)
}

/// Bracket-defined `N_Ψ` from the structure equations, coordinate
/// components, valid for arbitrary arguments.
pub fn nijenhuis_closed(ctx: &FrameContext, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let m = ctx.frame.dim;
    let r = curvature(ctx);
    let (xh, xv) = halves(ctx, x);
    let (yh, yv) = halves(ctx, y);
    let mut adapted = DVector::zeros(2 * m);
    let horiz = -(r.contract(&xh, &yv) + r.contract(&xv, &yh));
    let vert = r.contract(&xv, &yv) - r.contract(&xh, &yh);
    adapted.rows_mut(0, m).copy_from(&horiz);
    adapted.rows_mut(m, m).copy_from(&vert);
    ctx.frame.from_adapted(&adapted)
}

/// The printed `(v_a, v_b)` value `2[R^i_ab + (R^i_a y_b − R^i_b y_a)/F²] ∂_i`.
pub fn nijenhuis_vv_printed(ctx: &FrameContext, a: usize, b: usize) -> DVector<f64> {
    let m = ctx.frame.dim;
    let c = ctx.geometry.curvature();
    let f = &ctx.frame;
    let mut out = DVector::zeros(2 * m);
    for i in 0..m {
        out[m + i] = 2.0 * (c.r.get(i, a, b) + (c.phi[(i, a)] * f.y_low[b] - c.phi[(i, b)] * f.y_low[a]) / f.f2);
    }
    out
}

/// `N_Ψ(X, Y)` by the bracket oracle.
pub fn nijenhuis_generic(st: &Stencil, x: &FrameField, y: &FrameField) -> Result<DVector<f64>> {
    let px = x.clone().psi();
    let py = y.clone().psi();
    let b = st.bracket(&px, &py)? - st.bracket(x, y)?;
    let a = st.bracket(x, &py)? + st.bracket(&px, y)?;
    Ok(b - &st.center.structure.psi * a)
}

/// `dη^a(X, Y)` from `2dη(X, Y) = X(η(Y)) − Y(η(X)) − η([X, Y])`.
pub fn d_eta(st: &Stencil, a: usize, x: &FrameField, y: &FrameField) -> Result<f64> {
    let xy = st.apply(x, |ctx| Ok(ctx.structure.eta(a).dot(&y.eval(ctx)?)))?;
    let yx = st.apply(y, |ctx| Ok(ctx.structure.eta(a).dot(&x.eval(ctx)?)))?;
    let br = st.center.structure.eta(a).dot(&st.bracket(x, y)?);
    Ok(0.5 * (xy - yx - br))
}

/// Same quantity from differences of the covector components:
/// `dη(X, Y) = ½ (∂_c η_d − ∂_d η_c) X^c Y^d`.
pub fn d_eta_components(st: &Stencil, a: usize, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let (_, jac) = st.jacobian(|ctx| Ok(ctx.structure.eta(a).clone()))?;
    // jac[(d, c)] = ∂_c η_d
    let curl = jac.transpose() - &jac;
    Ok(0.5 * x.dot(&(curl * y)))
}

/// `S = N_φ + 2 Σ dη^a ⊗ ξ_a` by the bracket oracle.
pub fn torsion_s(st: &Stencil, x: &FrameField, y: &FrameField) -> Result<DVector<f64>> {
    let phi = &st.center.structure.phi;
    let fx = x.clone().phi();
    let fy = y.clone().phi();
    let xy = st.bracket(x, y)?;
    let n_phi = st.bracket(&fx, &fy)? + phi * (phi * &xy) - phi * (st.bracket(&fx, y)? + st.bracket(x, &fy)?);
    let mut s = n_phi;
    for a in 1..=2 {
        s += st.center.structure.xi(a) * (2.0 * d_eta(st, a, x, y)?);
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NijenhuisPath {
    Closed,
    Generic,
    Both,
}

#[derive(Clone, Debug, Default)]
pub struct NijenhuisReport {
    /// Structure-equation values per pair (empty if not requested).
    pub closed_form: Vec<DVector<f64>>,
    /// Bracket-oracle values per pair (empty if not requested).
    pub generic: Vec<DVector<f64>>,
    /// Largest `‖N_Ψ‖` over `D_F` basis pairs (closed form).
    pub on_df: f64,
    /// `N_Ψ(Γ, v_a)` for every `a` (closed form).
    pub gamma_direction: Vec<DVector<f64>>,
}

impl NijenhuisReport {
    /// Largest gap between the two paths.
    pub fn path_gap(&self) -> f64 {
        self.closed_form
            .iter()
            .zip(&self.generic)
            .map(|(c, g)| (c - g).amax())
            .fold(0.0, f64::max)
    }
}

pub fn nijenhuis_psi(st: &Stencil, pairs: &[(FrameField, FrameField)], path: NijenhuisPath) -> Result<NijenhuisReport> {
    let ctx = &st.center;
    let mut report = NijenhuisReport::default();
    for (x, y) in pairs {
        if path != NijenhuisPath::Generic {
            report
                .closed_form
                .push(nijenhuis_closed(ctx, &x.eval(ctx)?, &y.eval(ctx)?));
        }
        if path != NijenhuisPath::Closed {
            report.generic.push(nijenhuis_generic(st, x, y)?);
        }
    }
    let basis = ctx.frame.df_vectors();
    for (s, x) in basis.iter().enumerate() {
        for y in &basis[s + 1..] {
            report.on_df = report.on_df.max(nijenhuis_closed(ctx, x, y).amax());
        }
    }
    for a in 0..ctx.frame.dim {
        report
            .gamma_direction
            .push(nijenhuis_closed(ctx, &ctx.structure.xi2, &ctx.frame.v_field(a)));
    }
    Ok(report)
}

/// Both conditions of the CR definition over `D_F` basis pairs with
/// `J = Ψ_F`. The closed path uses exact frame brackets; the generic path
/// the finite-difference oracle.
pub fn check_cr(st: &Stencil, tol_jet: f64, tol_bracket: f64) -> Result<CheckReport> {
    let ctx = &st.center;
    let mut r = CheckReport::new();

    let jf = JetFrame::new(&ctx.geometry)?;
    let basis = jf.df_fields(ctx.frame.i0);
    let (mut stab, mut nij, mut a_in_d): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (s, x) in basis.iter().enumerate() {
        for y in &basis[s + 1..] {
            let b = b_of(&jf, &Psi, x, y)?;
            let a = a_of(&jf, &Psi, x, y)?;
            let n = jf.to_coords(&nijenhuis_of(&jf, &Psi, x, y)?);
            let scale = 1.0 + b.amax() + a.amax();
            for k in 1..=2 {
                stab = stab.max(jf.eta_value(k, &b).abs() / scale);
                a_in_d = a_in_d.max(jf.eta_value(k, &a).abs() / scale);
            }
            nij = nij.max(n.amax() / scale);
        }
    }
    r.check("cr.a_in_d", a_in_d, tol_jet);
    r.check("cr.stability", stab, tol_jet);
    r.check("cr.nijenhuis", nij, tol_jet);

    let fields = df_fields(&ctx.frame);
    let cache: Vec<_> = fields
        .iter()
        .map(|f| Ok((st.field(f)?, st.field(&f.clone().psi())?)))
        .collect::<Result<_>>()?;
    let br = |p: &(DVector<f64>, DMatrix<f64>), q: &(DVector<f64>, DMatrix<f64>)| &q.1 * &p.0 - &p.1 * &q.0;
    let psi = &ctx.structure.psi;
    let (mut stab_g, mut nij_g): (f64, f64) = (0.0, 0.0);
    for s in 0..cache.len() {
        for t in s + 1..cache.len() {
            let (x, jx) = &cache[s];
            let (y, jy) = &cache[t];
            let b = br(jx, jy) - br(x, y);
            let a = br(x, jy) + br(jx, y);
            let n = &b - psi * &a;
            let scale = 1.0 + b.amax() + a.amax();
            for k in 1..=2 {
                stab_g = stab_g.max(ctx.structure.eta(k).dot(&b).abs() / scale);
            }
            nij_g = nij_g.max(n.amax() / scale);
        }
    }
    r.check("cr.stability_generic", stab_g, tol_bracket);
    r.check("cr.nijenhuis_generic", nij_g, tol_bracket);
    Ok(r)
}

/// `T^i_jk = δ^i_k y_j − δ^i_j y_k`
pub fn flag_template(y_low: &DVector<f64>) -> Tensor3 {
    let m = y_low.len();
    Tensor3::from_fn(m, |i, j, k| {
        let mut v = 0.0;
        if i == k {
            v += y_low[j];
        }
        if i == j {
            v -= y_low[k];
        }
        v
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlagFit {
    pub lambda: f64,
    /// `‖R − λT‖ / ‖R‖`
    pub residual: f64,
    /// Jacobi endomorphism against `λ(δ^i_k F² − y^i y_k)`, when the fit holds.
    pub phi_residual: Option<f64>,
    pub mu: Option<f64>,
    pub x: Option<DMatrix<f64>>,
    /// Curvature against `λ(X^i_k y_j − X^i_j y_k)` for the fitted family.
    pub family_residual: Option<f64>,
    /// `‖y_i X^i_j − y_j‖`
    pub compatibility_residual: Option<f64>,
}

/// Curvature norms below this multiple of `F²` count as flat.
const FLAT_THRESHOLD: f64 = 1e-13;

/// Least-squares scalar flag curvature. With `X = δ` the family
/// `λ(X^i_k y_j − X^i_j y_k)` only determines `λμ`, so μ is fixed to 1.
pub fn flag_fit(geom: &LocalGeometry, tol: f64) -> FlagFit {
    flag_fit_with_mu(geom, 1.0, tol)
}

/// Fit with `X^i_j = μδ^i_j + (1 − μ) y^i y_j / F²` for a chosen μ ≠ 0.
pub fn flag_fit_with_mu(geom: &LocalGeometry, mu: f64, tol: f64) -> FlagFit {
    let c = geom.curvature();
    let y_low = &geom.metric.y_low;
    let y = geom.y();
    let f2 = geom.metric.f2;
    let m = geom.dim();
    let t = flag_template(y_low);
    let rn = c.r.norm();
    let (lambda, residual) = if rn <= FLAT_THRESHOLD * (1.0 + f2) {
        (0.0, 0.0)
    } else {
        let lambda = dot(&c.r, &t) / dot(&t, &t);
        let misfit = Tensor3::from_fn(m, |i, j, k| c.r.get(i, j, k) - lambda * t.get(i, j, k));
        (lambda, misfit.norm() / rn)
    };
    let phi_residual = (residual < tol).then(|| {
        let target = DMatrix::from_fn(m, m, |i, k| {
            lambda * (if i == k { f2 } else { 0.0 } - y[i] * y_low[k])
        });
        (&c.phi - target).norm() / (1.0 + c.phi.norm())
    });
    let x = DMatrix::from_fn(m, m, |i, j| {
        mu * if i == j { 1.0 } else { 0.0 } + (1.0 - mu) * y[i] * y_low[j] / f2
    });
    let lam = lambda / mu;
    let fam = Tensor3::from_fn(m, |i, j, k| lam * (x[(i, k)] * y_low[j] - x[(i, j)] * y_low[k]));
    let family_residual = c.r.sub(&fam).norm() / (1.0 + rn);
    let compatibility_residual = (x.transpose() * y_low - y_low).norm() / (1.0 + y_low.norm());
    FlagFit {
        lambda,
        residual,
        phi_residual,
        mu: Some(mu),
        x: Some(x),
        family_residual: Some(family_residual),
        compatibility_residual: Some(compatibility_residual),
    }
}

fn dot(a: &Tensor3, b: &Tensor3) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// `F²R^i_ab − (R^i_b y_a − R^i_a y_b)`, normalized by `1 + F²‖R‖`.
pub fn normality_residual(geom: &LocalGeometry) -> f64 {
    let c = geom.curvature();
    let y_low = &geom.metric.y_low;
    let f2 = geom.metric.f2;
    let m = geom.dim();
    let res = Tensor3::from_fn(m, |i, a, b| {
        f2 * c.r.get(i, a, b) - (c.phi[(i, b)] * y_low[a] - c.phi[(i, a)] * y_low[b])
    });
    res.norm() / (1.0 + f2 * c.r.norm())
}

/// Largest `‖N_Ψ(v_a, v_b)‖` (closed form), normalized by `1 + ‖R‖`.
pub fn vv_nijenhuis_norm(ctx: &FrameContext) -> f64 {
    let m = ctx.frame.dim;
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let n = nijenhuis_closed(ctx, &ctx.frame.v_field(a), &ctx.frame.v_field(b));
            worst = worst.max(n.norm());
        }
    }
    worst / (1.0 + curvature(ctx).norm())
}

/// Largest `‖N_Ψ‖` over all adapted frame pairs.
pub fn max_frame_nijenhuis(ctx: &FrameContext) -> f64 {
    let n = 2 * ctx.frame.dim;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let ea = ctx.frame.adapted.column(a).into_owned();
            let eb = ctx.frame.adapted.column(b).into_owned();
            worst = worst.max(nijenhuis_closed(ctx, &ea, &eb).norm());
        }
    }
    worst
}

/// Deviations of each structural form from the closed-form `N_Ψ` on the
/// vertical block, where those forms are supported.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureForms {
    /// `η²∧(R^i_k δy^k ⊗ ∂_i)`
    pub eta_phi: f64,
    /// `2λF² η²∧π_V`, rescaled
    pub projector: f64,
    /// `2λF² η²∧(X δy ⊗ ∂)` with the μ = 2 family, rescaled
    pub family: f64,
    /// `2λμF² η²∧π_V`, rescaled
    pub mu_single: f64,
    /// `2λμ²F² η²∧π_V`, rescaled
    pub mu_double: f64,
}

impl StructureForms {
    pub fn matching_reading(&self, tol: f64) -> &'static str {
        match (self.mu_single < tol, self.mu_double < tol) {
            (true, true) => "both",
            (true, false) => "single",
            (false, true) => "double",
            (false, false) => "neither",
        }
    }
}

/// μ used to tell the two readings of the general-μ form apart.
pub const PROBE_MU: f64 = 2.0;

pub fn structure_forms(ctx: &FrameContext, fit: &FlagFit) -> StructureForms {
    let m = ctx.frame.dim;
    let f = &ctx.frame;
    let c = ctx.geometry.curvature();
    let s = &ctx.structure;
    let f2 = f.f2;
    let scale = 1.0 + c.r.norm();
    let lam_mu = fit.lambda / PROBE_MU;
    let x_mu = DMatrix::from_fn(m, m, |i, j| {
        PROBE_MU * if i == j { 1.0 } else { 0.0 } + (1.0 - PROBE_MU) * f.y[i] * f.y_low[j] / f2
    });
    // vertical part of an adapted-components endomorphism applied to Y
    let wedge = |k: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>| -> DVector<f64> {
        let (_, xv) = halves(ctx, x);
        let (_, yv) = halves(ctx, y);
        let mut out = DVector::zeros(2 * m);
        let v = k * yv * s.eta2.dot(x) - k * xv * s.eta2.dot(y);
        out.rows_mut(m, m).copy_from(&v);
        out
    };
    let ident = DMatrix::<f64>::identity(m, m);
    let mut dev = [0.0f64; 5];
    for j in 0..m {
        for k in 0..m {
            let x = f.del(j);
            let y = f.del(k);
            let truth = nijenhuis_closed(ctx, &x, &y);
            let forms = [
                wedge(&c.phi, &x, &y),
                wedge(&ident, &x, &y) * (PRINTED_SCALE * 2.0 * fit.lambda * f2),
                wedge(&x_mu, &x, &y) * (PRINTED_SCALE * 2.0 * lam_mu * f2),
                wedge(&ident, &x, &y) * (PRINTED_SCALE * 2.0 * lam_mu * PROBE_MU * f2),
                wedge(&ident, &x, &y) * (PRINTED_SCALE * 2.0 * lam_mu * PROBE_MU * PROBE_MU * f2),
            ];
            for (d, form) in dev.iter_mut().zip(forms.iter()) {
                *d = d.max((form - &truth).norm() / scale);
            }
        }
    }
    StructureForms {
        eta_phi: dev[0],
        projector: dev[1],
        family: dev[2],
        mu_single: dev[3],
        mu_double: dev[4],
    }
}

/// Report form of [`structure_forms`]; skipped unless the point is of
/// scalar flag curvature within `tol`.
pub fn nijenhuis_structure_forms(ctx: &FrameContext, tol: f64) -> CheckReport {
    let fit = flag_fit(&ctx.geometry, tol);
    let mut r = CheckReport::new();
    let ids = ["forms.eta_phi", "forms.projector", "forms.family", "forms.mu_single"];
    if fit.residual >= tol {
        for id in ids {
            r.push(CheckRecord::skipped(
                id,
                tol,
                format!("not of scalar flag curvature (misfit {:.3e})", fit.residual),
            ));
        }
        return r;
    }
    let s = structure_forms(ctx, &fit);
    for (id, v) in ids.iter().zip([s.eta_phi, s.projector, s.family, s.mu_single]) {
        r.check(*id, v, tol);
    }
    r
}

/// Witness of non-integrability: `N_Ψ(Γ, v_a)` against the printed
/// `2λF² v_a` (rescaled). Returns the largest deviation and the raw ratio
/// of the bracket-oracle value to the printed one.
pub fn gamma_witness(st: &Stencil, lambda: f64) -> Result<(f64, f64)> {
    let ctx = &st.center;
    let f2 = ctx.frame.f2;
    let mut dev: f64 = 0.0;
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..ctx.frame.dim {
        let n = nijenhuis_generic(st, &FrameField::Liouville, &FrameField::V(a))?;
        let printed = ctx.frame.v_field(a) * (2.0 * lambda * f2);
        dev = dev.max((&n - &printed * PRINTED_SCALE).amax() / (1.0 + printed.amax()));
        num += n.dot(&printed);
        den += printed.dot(&printed);
    }
    let ratio = if den > 0.0 { num / den } else { f64::NAN };
    Ok((dev, ratio))
}
