//! Sasaki metric, the almost complex structure `Ψ_F`, the framed
//! f-structure `(φ, ξ_a, η^a)` and the structural distribution `D_F`.
//!
//! Vectors are coordinate columns over `(∂/∂x^1..m, ∂/∂y^1..m)`; covectors
//! are stored as plain vectors of components so `η(X) = η·X`.

use nalgebra::{DMatrix, DVector};

use crate::connection::{LocalGeometry, BRACKET_STEP};
use crate::deformed::DeformedFrame;
use crate::error::{Error, Result};
use crate::geometry::FinslerSpec;
use crate::point::PhasePoint;
use crate::report::CheckReport;
use crate::tensor::outer;

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_THRESHOLD: f64 = 1e-8;

pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s / top > RANK_THRESHOLD).count()
}

/// Adapted bases and coframes at a point. Field families are stored one
/// field per row.
#[derive(Clone, Debug)]
pub struct FrameData {
    pub dim: usize,
    pub f2: f64,
    pub y: DVector<f64>,
    pub y_low: DVector<f64>,
    pub delta_x: DMatrix<f64>,
    pub del_y: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Columns `δ_1..δ_m, ∂_1..∂_m`.
    pub adapted: DMatrix<f64>,
    /// Rows `dx^1..dx^m, δy^1..δy^m`; the inverse of `adapted`.
    pub coframe: DMatrix<f64>,
    /// Index dropped from both families when selecting the `D_F` basis.
    pub i0: usize,
    /// `{h_i : i ≠ i0}` followed by `{v_i : i ≠ i0}`.
    pub df_basis: DMatrix<f64>,
}

/// `argmax |y^i|`, ties to the smallest index.
pub fn dropped_index(y: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in y.iter().enumerate() {
        if v.abs() > y[best].abs() {
            best = i;
        }
    }
    best
}

impl FrameData {
    pub fn new(geom: &LocalGeometry) -> Result<Self> {
        let m = geom.dim();
        let n = &geom.connection.n;
        let y = geom.y();
        let y_low = geom.metric.y_low.clone();
        let f2 = geom.metric.f2;

        let mut adapted = DMatrix::identity(2 * m, 2 * m);
        let mut coframe = DMatrix::identity(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                adapted[(m + i, j)] = -n[(i, j)];
                coframe[(m + i, j)] = n[(i, j)];
            }
        }
        let delta_x = adapted.columns(0, m).transpose();
        let del_y = adapted.columns(m, m).transpose();
        let spray = geom.connection.spray.clone();
        let mut liouville = DVector::zeros(2 * m);
        liouville.rows_mut(m, m).copy_from(&y);
        let mut h = delta_x.clone();
        let mut v = del_y.clone();
        for i in 0..m {
            let c = y_low[i] / f2;
            for a in 0..2 * m {
                h[(i, a)] -= c * spray[a];
                v[(i, a)] -= c * liouville[a];
            }
        }

        let i0 = dropped_index(geom.point.y());
        let keep: Vec<usize> = (0..m).filter(|&i| i != i0).collect();
        let mut df_basis = DMatrix::zeros(2 * m - 2, 2 * m);
        for (r, &i) in keep.iter().enumerate() {
            df_basis.set_row(r, &h.row(i));
            df_basis.set_row(m - 1 + r, &v.row(i));
        }
        let found = numerical_rank(&df_basis);
        if found != 2 * m - 2 {
            return Err(Error::Rank {
                expected: 2 * m - 2,
                found,
            });
        }

        Ok(FrameData {
            dim: m,
            f2,
            y,
            y_low,
            delta_x,
            del_y,
            h,
            v,
            adapted,
            coframe,
            i0,
            df_basis,
        })
    }

    pub fn delta(&self, i: usize) -> DVector<f64> {
        self.adapted.column(i).into_owned()
    }

    pub fn del(&self, i: usize) -> DVector<f64> {
        self.adapted.column(self.dim + i).into_owned()
    }

    pub fn h_field(&self, i: usize) -> DVector<f64> {
        self.h.row(i).transpose()
    }

    pub fn v_field(&self, i: usize) -> DVector<f64> {
        self.v.row(i).transpose()
    }

    /// Indices kept in the `D_F` basis, in basis order.
    pub fn kept(&self) -> Vec<usize> {
        (0..self.dim).filter(|&i| i != self.i0).collect()
    }

    pub fn df_vectors(&self) -> Vec<DVector<f64>> {
        self.df_basis.row_iter().map(|r| r.transpose()).collect()
    }

    /// Components `(dx^j(X), δy^j(X))`.
    pub fn to_adapted(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.coframe * x
    }

    pub fn from_adapted(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.adapted * a
    }

    /// Embeds the block-diagonal adapted matrix `diag(top, bottom)` pulled
    /// back through the coframe: `Cᵀ diag(top, bottom) C`.
    pub fn block_metric(&self, top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.dim;
        let mut d = DMatrix::zeros(2 * m, 2 * m);
        d.view_mut((0, 0), (m, m)).copy_from(top);
        d.view_mut((m, m), (m, m)).copy_from(bottom);
        self.coframe.transpose() * d * &self.coframe
    }

    /// `E · [[0, top], [bottom, 0]] · C`, the general shape of `Ψ_F` and
    /// its deformation.
    pub fn block_antidiagonal(&self, top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.dim;
        let mut d = DMatrix::zeros(2 * m, 2 * m);
        d.view_mut((0, m), (m, m)).copy_from(top);
        d.view_mut((m, 0), (m, m)).copy_from(bottom);
        &self.adapted * d * &self.coframe
    }
}

#[derive(Clone, Debug)]
pub struct FramedStructure {
    pub f2: f64,
    pub g_f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    /// `S_F`
    pub xi1: DVector<f64>,
    /// `Γ`
    pub xi2: DVector<f64>,
    pub eta1: DVector<f64>,
    pub eta2: DVector<f64>,
    /// `ω(X, Y) = Xᵀ ω Y = G(X, φY)`
    pub omega: DMatrix<f64>,
}

impl FramedStructure {
    pub fn new(geom: &LocalGeometry, frame: &FrameData) -> Self {
        let m = frame.dim;
        let f2 = frame.f2;
        let g = &geom.metric.g;
        let g_f = frame.block_metric(g, g);
        let ident = DMatrix::identity(m, m);
        let psi = frame.block_antidiagonal(&ident, &(-&ident));
        let xi1 = geom.connection.spray.clone();
        let mut xi2 = DVector::zeros(2 * m);
        xi2.rows_mut(m, m).copy_from(&frame.y);
        let mut eta1_adapted = DVector::zeros(2 * m);
        eta1_adapted.rows_mut(0, m).copy_from(&(&frame.y_low / f2));
        let mut eta2_adapted = DVector::zeros(2 * m);
        eta2_adapted.rows_mut(m, m).copy_from(&(&frame.y_low / f2));
        let eta1 = frame.coframe.transpose() * eta1_adapted;
        let eta2 = frame.coframe.transpose() * eta2_adapted;
        let phi = &psi + outer(&xi2, &eta1) - outer(&xi1, &eta2);
        let g_norm = &g_f / f2;
        let omega = &g_norm * &phi;
        FramedStructure {
            f2,
            g_f,
            g: g_norm,
            psi,
            phi,
            xi1,
            xi2,
            eta1,
            eta2,
            omega,
        }
    }

    pub fn xi(&self, a: usize) -> &DVector<f64> {
        if a == 1 {
            &self.xi1
        } else {
            &self.xi2
        }
    }

    pub fn eta(&self, a: usize) -> &DVector<f64> {
        if a == 1 {
            &self.eta1
        } else {
            &self.eta2
        }
    }
}

/// Connection-level data at one point: enough to evaluate every frame field.
#[derive(Clone, Debug)]
pub struct FrameContext {
    pub geometry: LocalGeometry,
    pub frame: FrameData,
    pub structure: FramedStructure,
}

impl FrameContext {
    pub fn from_geometry(geometry: LocalGeometry) -> Result<Self> {
        let frame = FrameData::new(&geometry)?;
        let structure = FramedStructure::new(&geometry, &frame);
        Ok(FrameContext {
            geometry,
            frame,
            structure,
        })
    }

    pub fn new(spec: &FinslerSpec, p: &PhasePoint) -> Result<Self> {
        Self::from_geometry(LocalGeometry::at(spec, p)?)
    }

    pub fn connection_only(spec: &FinslerSpec, p: &PhasePoint) -> Result<Self> {
        Self::from_geometry(LocalGeometry::connection_only(spec, p)?)
    }

    pub fn deformed(&self, beta: f64) -> Result<DeformedFrame> {
        DeformedFrame::new(self, 1.0, beta)
    }
}

pub fn build_framed_structure(spec: &FinslerSpec, p: &PhasePoint) -> Result<FramedStructure> {
    Ok(FrameContext::connection_only(spec, p)?.structure)
}

pub fn df_basis(spec: &FinslerSpec, p: &PhasePoint) -> Result<FrameData> {
    Ok(FrameContext::connection_only(spec, p)?.frame)
}

/// Vector fields built from the frame, evaluated at any point.
#[derive(Clone, Debug, PartialEq)]
pub enum FrameField {
    /// `∂/∂x^i` for `i < m`, `∂/∂y^(i−m)` otherwise.
    Coordinate(usize),
    Delta(usize),
    Del(usize),
    H(usize),
    V(usize),
    Spray,
    Liouville,
    Psi(Box<FrameField>),
    Phi(Box<FrameField>),
    PsiBar(f64, Box<FrameField>),
    Scaled(f64, Box<FrameField>),
    Sum(Box<FrameField>, Box<FrameField>),
}

impl FrameField {
    pub fn psi(self) -> Self {
        FrameField::Psi(Box::new(self))
    }

    pub fn phi(self) -> Self {
        FrameField::Phi(Box::new(self))
    }

    pub fn psi_bar(self, beta: f64) -> Self {
        FrameField::PsiBar(beta, Box::new(self))
    }

    pub fn eval(&self, ctx: &FrameContext) -> Result<DVector<f64>> {
        let m = ctx.frame.dim;
        Ok(match self {
            FrameField::Coordinate(i) => {
                let mut v = DVector::zeros(2 * m);
                v[*i] = 1.0;
                v
            }
            FrameField::Delta(i) => ctx.frame.delta(*i),
            FrameField::Del(i) => ctx.frame.del(*i),
            FrameField::H(i) => ctx.frame.h_field(*i),
            FrameField::V(i) => ctx.frame.v_field(*i),
            FrameField::Spray => ctx.structure.xi1.clone(),
            FrameField::Liouville => ctx.structure.xi2.clone(),
            FrameField::Psi(x) => &ctx.structure.psi * x.eval(ctx)?,
            FrameField::Phi(x) => &ctx.structure.phi * x.eval(ctx)?,
            FrameField::PsiBar(beta, x) => &ctx.deformed(*beta)?.psi_bar * x.eval(ctx)?,
            FrameField::Scaled(c, x) => x.eval(ctx)? * *c,
            FrameField::Sum(a, b) => a.eval(ctx)? + b.eval(ctx)?,
        })
    }
}

/// `{h_i : i ≠ i0} ∪ {v_i : i ≠ i0}` as fields, with `i0` frozen so the basis
/// is smooth near the point.
pub fn df_fields(frame: &FrameData) -> Vec<FrameField> {
    let kept = frame.kept();
    kept.iter()
        .map(|&i| FrameField::H(i))
        .chain(kept.iter().map(|&i| FrameField::V(i)))
        .collect()
}

/// Central-difference stencil around a point: frame contexts at `p ± h e_c`
/// for every chart coordinate. All bracket-oracle quantities at the point
/// are assembled from these `4m + 1` evaluations.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub center: FrameContext,
    plus: Vec<FrameContext>,
    minus: Vec<FrameContext>,
    steps: Vec<f64>,
}

impl Stencil {
    pub fn new(spec: &FinslerSpec, p: &PhasePoint) -> Result<Self> {
        let center = FrameContext::new(spec, p)?;
        let n = p.coords().len();
        let scale = p.coords().iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let h = BRACKET_STEP * scale;
        let mut plus = Vec::with_capacity(n);
        let mut minus = Vec::with_capacity(n);
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            plus.push(FrameContext::connection_only(spec, &p.displaced(&e, h)?)?);
            minus.push(FrameContext::connection_only(spec, &p.displaced(&e, -h)?)?);
        }
        Ok(Stencil {
            center,
            plus,
            minus,
            steps: vec![h; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.center.frame.dim
    }

    /// Value at the center and Jacobian (rows: components, columns: chart
    /// coordinates) of a vector-valued function of the frame.
    pub fn jacobian<F>(&self, f: F) -> Result<(DVector<f64>, DMatrix<f64>)>
    where
        F: Fn(&FrameContext) -> Result<DVector<f64>>,
    {
        let value = f(&self.center)?;
        let mut jac = DMatrix::zeros(value.len(), self.steps.len());
        for (c, h) in self.steps.iter().enumerate() {
            let d = (f(&self.plus[c])? - f(&self.minus[c])?) / (2.0 * h);
            jac.set_column(c, &d);
        }
        Ok((value, jac))
    }

    /// `D_dir f` at the center.
    pub fn derivative<F>(&self, f: F, dir: &DVector<f64>) -> Result<DVector<f64>>
    where
        F: Fn(&FrameContext) -> Result<DVector<f64>>,
    {
        let (_, jac) = self.jacobian(f)?;
        Ok(jac * dir)
    }

    pub fn field(&self, x: &FrameField) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.jacobian(|ctx| x.eval(ctx))
    }

    /// `[X, Y] = DY·X − DX·Y`.
    pub fn bracket(&self, x: &FrameField, y: &FrameField) -> Result<DVector<f64>> {
        let (xv, dx) = self.field(x)?;
        let (yv, dy) = self.field(y)?;
        Ok(dy * xv - dx * yv)
    }

    /// `X(f)` for a scalar function of the frame.
    pub fn apply<F>(&self, x: &FrameField, f: F) -> Result<f64>
    where
        F: Fn(&FrameContext) -> Result<f64>,
    {
        let xv = x.eval(&self.center)?;
        let d = self.derivative(|ctx| Ok(DVector::from_element(1, f(ctx)?)), &xv)?;
        Ok(d[0])
    }
}

/// Frobenius residual normalized by `1 + ‖scale‖`.
fn rel(res: &DMatrix<f64>, scale: f64) -> f64 {
    res.norm() / (1.0 + scale)
}

/// Definition of a framed f-structure (rank, `φ³ + φ = 0`, the `φ²`
/// identity, `φξ = 0`, `η(ξ) = δ`, `η∘φ = 0`) for arbitrary data.
pub fn f_structure_axioms(
    prefix: &str,
    phi: &DMatrix<f64>,
    xi: [&DVector<f64>; 2],
    eta: [&DVector<f64>; 2],
    tol: f64,
) -> CheckReport {
    let n = phi.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let scale = phi.norm();
    let mut r = CheckReport::new();
    let phi2 = phi * phi;
    r.check(format!("{prefix}.phi_cubed"), rel(&(&phi2 * phi + phi), scale.powi(3)), tol);
    let rank = numerical_rank(phi) as f64;
    r.check(format!("{prefix}.phi_rank"), (rank - (n as f64 - 2.0)).abs(), tol);
    let mut sq = &phi2 + &ident;
    for a in 0..2 {
        sq -= outer(xi[a], eta[a]);
    }
    r.check(format!("{prefix}.phi_squared"), rel(&sq, scale * scale), tol);
    let mut phi_xi: f64 = 0.0;
    let mut eta_xi: f64 = 0.0;
    let mut eta_phi: f64 = 0.0;
    for a in 0..2 {
        phi_xi = phi_xi.max((phi * xi[a]).norm() / (1.0 + scale * xi[a].norm()));
        eta_phi = eta_phi.max((phi.transpose() * eta[a]).norm() / (1.0 + scale * eta[a].norm()));
        for b in 0..2 {
            let target = if a == b { 1.0 } else { 0.0 };
            eta_xi = eta_xi.max((eta[a].dot(xi[b]) - target).abs());
        }
    }
    r.check(format!("{prefix}.phi_xi"), phi_xi, tol);
    r.check(format!("{prefix}.eta_xi"), eta_xi, tol);
    r.check(format!("{prefix}.eta_phi"), eta_phi, tol);
    r
}

/// `G(φ·, φ·) = G − η¹⊗η¹ − η²⊗η²`, `G(ξ_a, ξ_a) = 1`, and `η^a = G(ξ_a, ·)`.
pub fn metric_axioms(
    prefix: &str,
    g: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    xi: [&DVector<f64>; 2],
    eta: [&DVector<f64>; 2],
    tol: f64,
) -> CheckReport {
    let mut r = CheckReport::new();
    let mut res = phi.transpose() * g * phi - g;
    for a in 0..2 {
        res += outer(eta[a], eta[a]);
    }
    r.check(format!("{prefix}.metric_compat"), rel(&res, g.norm()), tol);
    let mut unit: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for a in 0..2 {
        unit = unit.max((xi[a].dot(&(g * xi[a])) - 1.0).abs());
        dual = dual.max((eta[a] - g * xi[a]).norm() / (1.0 + eta[a].norm()));
    }
    r.check(format!("{prefix}.xi_unit"), unit, tol);
    r.check(format!("{prefix}.eta_dual"), dual, tol);
    r
}

/// Every invariant of the Anastasiei structure at one point.
pub fn framed_axioms(ctx: &FrameContext, tol: f64) -> CheckReport {
    let s = &ctx.structure;
    let n = s.psi.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let mut r = CheckReport::new();
    r.check("framed.psi_squared", rel(&(&s.psi * &s.psi + &ident), s.psi.norm().powi(2)), tol);
    let kahler = s.psi.transpose() * &s.g_f * &s.psi - &s.g_f;
    r.check("framed.almost_kahler", rel(&kahler, s.g_f.norm() * s.psi.norm().powi(2)), tol);
    let xi = [&s.xi1, &s.xi2];
    let eta = [&s.eta1, &s.eta2];
    r.merge(f_structure_axioms("framed", &s.phi, xi, eta, tol));
    r.merge(metric_axioms("framed", &s.g, &s.phi, xi, eta, tol));
    r
}

/// Orthogonal projector onto the column space of `a`.
fn column_projector(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut p = DMatrix::zeros(a.nrows(), a.nrows());
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s / top > RANK_THRESHOLD {
            let col = u.column(k);
            p += col * col.transpose();
        }
    }
    p
}

/// Properties of the selected `D_F` basis and of `Ψ_F` on it.
pub fn df_checks(ctx: &FrameContext, tol: f64) -> CheckReport {
    let f = &ctx.frame;
    let s = &ctx.structure;
    let m = f.dim;
    let mut r = CheckReport::new();
    let basis = f.df_vectors();

    r.check(
        "df.rank",
        (numerical_rank(&f.df_basis) as f64 - (2 * m - 2) as f64).abs(),
        tol,
    );
    let mut annihilate: f64 = 0.0;
    let mut orthogonal: f64 = 0.0;
    for b in &basis {
        for a in 1..=2 {
            annihilate = annihilate.max(s.eta(a).dot(b).abs() / (1.0 + s.eta(a).norm() * b.norm()));
            let gx = &s.g_f * s.xi(a);
            orthogonal = orthogonal.max(gx.dot(b).abs() / (1.0 + gx.norm() * b.norm()));
        }
    }
    r.check("df.eta_annihilates", annihilate, tol);
    r.check("df.g_orthogonal", orthogonal, tol);

    let dep_h = f.h.transpose() * &f.y;
    let dep_v = f.v.transpose() * &f.y;
    r.check(
        "df.dependency",
        dep_h.norm().max(dep_v.norm()) / (1.0 + f.h.norm() * f.y.norm()),
        tol,
    );

    let mut psi_hv: f64 = 0.0;
    for i in 0..m {
        let h = f.h_field(i);
        let v = f.v_field(i);
        psi_hv = psi_hv.max((&s.psi * &h + &v).norm() / (1.0 + h.norm()));
        psi_hv = psi_hv.max((&s.psi * &v - &h).norm() / (1.0 + v.norm()));
    }
    r.check("df.psi_hv", psi_hv, tol);

    let mut kernel: f64 = 0.0;
    for a in 1..=2 {
        let row = s.omega.transpose() * s.xi(a);
        kernel = kernel.max(row.norm() / (1.0 + s.omega.norm() * s.xi(a).norm()));
    }
    r.check("df.omega_kernel", kernel, tol);
    let restricted = &f.df_basis * &s.omega * f.df_basis.transpose();
    r.check(
        "df.omega_rank",
        (numerical_rank(&restricted) as f64 - (2 * m - 2) as f64).abs(),
        tol,
    );

    let mut xis = DMatrix::zeros(2, 2 * m);
    xis.set_row(0, &(&s.g_f * &s.xi1).transpose());
    xis.set_row(1, &(&s.g_f * &s.xi2).transpose());
    let complement = DMatrix::identity(2 * m, 2 * m) - column_projector(&xis.transpose());
    let span = column_projector(&f.df_basis.transpose());
    r.check("df.projector", (span - complement).norm(), tol);
    r
}
