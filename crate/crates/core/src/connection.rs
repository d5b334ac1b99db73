//! Cartan nonlinear connection, its curvature, and Lie brackets.
//!
//! The main path expands `F²` to order 5 at a point and differentiates jets:
//! `g` (order 3), Christoffel symbols (order 2), `N^i_j` (order 1), and the
//! curvature `R^i_jk` (order 0) through exact horizontal derivatives. The
//! bracket oracle in [`lie_bracket`] is an independent finite-difference
//! route used to cross-check the structure equations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{metric_value, FinslerSpec, MetricValue};
use crate::jets::{coordinate_jets, Jet};
use crate::point::PhasePoint;
use crate::tensor::Tensor3;

/// Jet order needed for the curvature.
pub const CURVATURE_ORDER: usize = 5;
/// Jet order needed for point values of `N^i_j`.
pub const CONNECTION_ORDER: usize = 4;

/// Base step of the central differences in the bracket oracle.
pub const BRACKET_STEP: f64 = 1e-5;

pub type VectorFieldValue = DVector<f64>;

/// Jets of the connection objects at one point. Matrices are row-major
/// `m × m` vectors; `gamma` is indexed `(i, j, k)`.
#[derive(Clone, Debug)]
pub struct ConnectionJets {
    pub dim: usize,
    pub order: usize,
    pub coords: Vec<Jet>,
    pub f2: Jet,
    /// `y_i = ½ ∂F²/∂y^i`
    pub y_low: Vec<Jet>,
    pub g: Vec<Jet>,
    pub g_inv: Vec<Jet>,
    pub gamma: Vec<Jet>,
    pub gamma00: Vec<Jet>,
    /// `N^i_j` at `i * m + j`
    pub n: Vec<Jet>,
}

impl ConnectionJets {
    pub fn x_var(&self, i: usize) -> usize {
        i
    }

    pub fn y_var(&self, i: usize) -> usize {
        self.dim + i
    }

    /// `δQ/δx^k = ∂Q/∂x^k − N^a_k ∂Q/∂y^a`, one order lower than `q`
    /// (and never above the order of `N`).
    pub fn delta_x(&self, q: &Jet, k: usize) -> Result<Jet> {
        let m = self.dim;
        let mut out = q.derivative(self.x_var(k))?;
        for a in 0..m {
            out -= &(&self.n[a * m + k] * &q.derivative(self.y_var(a))?);
        }
        Ok(out)
    }

    pub fn partial_y(&self, q: &Jet, k: usize) -> Result<Jet> {
        Ok(q.derivative(self.y_var(k))?)
    }
}

/// Gauss-Jordan inverse of a jet matrix, pivoting on constant terms.
fn invert_jet_matrix(a: &[Jet], m: usize) -> Result<Vec<Jet>> {
    let table = a[0].table().clone();
    let order = a.iter().map(Jet::order).min().unwrap_or(0);
    let mut work: Vec<Jet> = a.iter().map(|j| j.truncate(order)).collect();
    let mut inv: Vec<Jet> = (0..m * m)
        .map(|idx| Jet::constant(&table, order, if idx / m == idx % m { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&r1, &r2| {
                work[r1 * m + col]
                    .value()
                    .abs()
                    .total_cmp(&work[r2 * m + col].value().abs())
            })
            .expect("non-empty range");
        if pivot != col {
            for c in 0..m {
                work.swap(pivot * m + c, col * m + c);
                inv.swap(pivot * m + c, col * m + c);
            }
        }
        let recip = work[col * m + col].recip()?;
        for c in 0..m {
            work[col * m + c] = &work[col * m + c] * &recip;
            inv[col * m + c] = &inv[col * m + c] * &recip;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let factor = work[r * m + col].clone();
            for c in 0..m {
                let w = &work[col * m + c] * &factor;
                work[r * m + c] -= &w;
                let v = &inv[col * m + c] * &factor;
                inv[r * m + c] -= &v;
            }
        }
    }
    Ok(inv)
}

/// Expands the connection objects at `p` from `F²` jets of the given order
/// (at least [`CONNECTION_ORDER`]).
pub fn connection_jets(spec: &FinslerSpec, p: &PhasePoint, order: usize) -> Result<ConnectionJets> {
    spec.check_point(p)?;
    let m = spec.dimension;
    let order = order.max(CONNECTION_ORDER);
    let coords = coordinate_jets(p, order)?;
    let f2 = spec.f2_jet(&coords)?;
    let y_var = |i: usize| m + i;

    let dy: Vec<Jet> = (0..m)
        .map(|i| f2.derivative(y_var(i)))
        .collect::<std::result::Result<_, _>>()?;
    let y_low: Vec<Jet> = dy.iter().map(|d| d * 0.5).collect();
    let mut g = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            g.push(dy[i].derivative(y_var(j))? * 0.5);
        }
    }
    let g_values = DMatrix::from_fn(m, m, |i, j| g[i * m + j].value());
    let min_eigenvalue = crate::geometry::min_eigenvalue(&g_values);
    if min_eigenvalue <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    let g_inv = invert_jet_matrix(&g, m)?;

    // ∂g_ab/∂x^c at index (a*m + b)*m + c
    let mut dg = Vec::with_capacity(m * m * m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                dg.push(g[a * m + b].derivative(c)?);
            }
        }
    }
    let dgx = |a: usize, b: usize, c: usize| &dg[(a * m + b) * m + c];

    let mut gamma = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let mut acc: Option<Jet> = None;
                for a in 0..m {
                    let bracket = dgx(a, k, j) + dgx(j, a, k) - dgx(j, k, a);
                    let term = &g_inv[i * m + a] * &bracket;
                    acc = Some(match acc {
                        Some(s) => s + term,
                        None => term,
                    });
                }
                gamma.push(acc.expect("m ≥ 1") * 0.5);
            }
        }
    }

    let y = &coords[m..];
    let mut gamma00 = Vec::with_capacity(m);
    for i in 0..m {
        let mut acc: Option<Jet> = None;
        for j in 0..m {
            for k in 0..m {
                let term = &(&gamma[(i * m + j) * m + k] * &y[j]) * &y[k];
                acc = Some(match acc {
                    Some(s) => s + term,
                    None => term,
                });
            }
        }
        gamma00.push(acc.expect("m ≥ 1"));
    }

    let mut n = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            n.push(gamma00[i].derivative(y_var(j))? * 0.5);
        }
    }

    Ok(ConnectionJets {
        dim: m,
        order,
        coords,
        f2,
        y_low,
        g,
        g_inv,
        gamma,
        gamma00,
        n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionValue {
    /// `γ^i_jk`
    pub gamma: Tensor3,
    /// `γ^i_00 = γ^i_jk y^j y^k`
    pub gamma00: DVector<f64>,
    /// `N^i_j` (row i, column j)
    pub n: DMatrix<f64>,
    /// Coordinate components of `S_F = y^i δ/δx^i`.
    pub spray: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureValue {
    /// `R^i_jk = δN^i_j/δx^k − δN^i_k/δx^j`
    pub r: Tensor3,
    /// Jacobi endomorphism `R^i_j = R^i_kj y^k` (row i, column j).
    pub phi: DMatrix<f64>,
}

impl CurvatureValue {
    pub fn from_tensor(r: Tensor3, y: &DVector<f64>) -> Self {
        let m = r.dim();
        let phi = DMatrix::from_fn(m, m, |i, j| (0..m).map(|k| r.get(i, k, j) * y[k]).sum());
        CurvatureValue { r, phi }
    }
}

/// Everything the tensor formulas need at one point: metric, connection,
/// and (at order 5) curvature and `∂N/∂y`.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub point: PhasePoint,
    pub jets: ConnectionJets,
    pub metric: MetricValue,
    pub connection: ConnectionValue,
    /// `∂N^i_j/∂y^k` at `(i, j, k)`; present with the curvature.
    pub dn_dy: Option<Tensor3>,
    pub curvature: Option<CurvatureValue>,
}

impl LocalGeometry {
    /// Full evaluation including curvature.
    pub fn at(spec: &FinslerSpec, p: &PhasePoint) -> Result<Self> {
        Self::with_order(spec, p, CURVATURE_ORDER)
    }

    /// Connection-level evaluation (no curvature); used at the perturbed
    /// points of the bracket oracle.
    pub fn connection_only(spec: &FinslerSpec, p: &PhasePoint) -> Result<Self> {
        Self::with_order(spec, p, CONNECTION_ORDER)
    }

    pub fn with_order(spec: &FinslerSpec, p: &PhasePoint, order: usize) -> Result<Self> {
        let jets = connection_jets(spec, p, order)?;
        let m = jets.dim;
        let g = DMatrix::from_fn(m, m, |i, j| jets.g[i * m + j].value());
        let metric = metric_value(g, p)?;
        let gamma = Tensor3::from_fn(m, |i, j, k| jets.gamma[(i * m + j) * m + k].value());
        let gamma00 = DVector::from_fn(m, |i, _| jets.gamma00[i].value());
        let n = DMatrix::from_fn(m, m, |i, j| jets.n[i * m + j].value());
        let y = DVector::from_column_slice(p.y());
        let mut spray = DVector::zeros(2 * m);
        spray.rows_mut(0, m).copy_from(&y);
        spray.rows_mut(m, m).copy_from(&(-(&n * &y)));

        let (dn_dy, curvature) = if jets.order >= CURVATURE_ORDER {
            let mut dn = Tensor3::zeros(m);
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        dn.set(i, j, k, jets.partial_y(&jets.n[i * m + j], k)?.value());
                    }
                }
            }
            let mut r = Tensor3::zeros(m);
            for i in 0..m {
                for j in 0..m {
                    for k in (j + 1)..m {
                        let v = jets.delta_x(&jets.n[i * m + j], k)?.value()
                            - jets.delta_x(&jets.n[i * m + k], j)?.value();
                        r.set(i, j, k, v);
                        r.set(i, k, j, -v);
                    }
                }
            }
            (Some(dn), Some(CurvatureValue::from_tensor(r, &y)))
        } else {
            (None, None)
        };

        Ok(LocalGeometry {
            point: p.clone(),
            jets,
            metric,
            connection: ConnectionValue {
                gamma,
                gamma00,
                n,
                spray,
            },
            dn_dy,
            curvature,
        })
    }

    pub fn dim(&self) -> usize {
        self.jets.dim
    }

    pub fn y(&self) -> DVector<f64> {
        DVector::from_column_slice(self.point.y())
    }

    pub fn dn_dy(&self) -> &Tensor3 {
        self.dn_dy
            .as_ref()
            .expect("∂N/∂y requested from a connection-only evaluation")
    }

    pub fn curvature(&self) -> &CurvatureValue {
        self.curvature
            .as_ref()
            .expect("curvature requested from a connection-only evaluation")
    }
}

/// Formal Christoffel symbols `γ^i_jk` of the fundamental tensor.
pub fn christoffel(spec: &FinslerSpec, p: &PhasePoint) -> Result<Tensor3> {
    Ok(LocalGeometry::connection_only(spec, p)?.connection.gamma)
}

pub fn nonlinear_connection(spec: &FinslerSpec, p: &PhasePoint) -> Result<ConnectionValue> {
    Ok(LocalGeometry::connection_only(spec, p)?.connection)
}

pub fn nl_curvature(spec: &FinslerSpec, p: &PhasePoint) -> Result<CurvatureValue> {
    Ok(LocalGeometry::at(spec, p)?.curvature().clone())
}

/// Classical Riemann tensor of a Riemannian family, computed from the
/// closed-form metric `g_ij(x)` and its Christoffel symbols.
#[derive(Clone, Debug)]
pub struct RiemannOracle {
    dim: usize,
    /// `Rm^ρ_σμν` at `((ρ*m + σ)*m + μ)*m + ν`, with `R(X,Y)Z = Rm^ρ_σμν Z^σ X^μ Y^ν`.
    riemann: Vec<f64>,
    pub metric: DMatrix<f64>,
    pub christoffel: Tensor3,
}

impl RiemannOracle {
    pub fn new(spec: &FinslerSpec, x: &[f64]) -> Result<Self> {
        if !spec.is_riemannian() {
            return Err(Error::UnsupportedFamily(spec.family.name().into()));
        }
        let m = spec.dimension;
        // any fiber value works; only x-derivatives are used
        let mut y = vec![0.0; m];
        y[0] = 1.0;
        let p = PhasePoint::new(x.to_vec(), y)?;
        spec.check_point(&p)?;
        let coords = coordinate_jets(&p, 2)?;
        let g = spec.riemannian_metric_jets(&coords[..m])?;
        let g_inv = invert_jet_matrix(&g, m)?;
        let mut dg = Vec::with_capacity(m * m * m);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    dg.push(g[a * m + b].derivative(c)?);
                }
            }
        }
        let dgx = |a: usize, b: usize, c: usize| &dg[(a * m + b) * m + c];
        // Γ^i_jk = ½ g^{ia}(∂_j g_ak + ∂_k g_aj − ∂_a g_jk), order 1
        let mut gamma = Vec::with_capacity(m * m * m);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let mut acc = Jet::constant(coords[0].table(), 1, 0.0);
                    for a in 0..m {
                        let s = dgx(a, k, j) + dgx(a, j, k) - dgx(j, k, a);
                        acc += &(&g_inv[i * m + a] * &s);
                    }
                    gamma.push(acc * 0.5);
                }
            }
        }
        let gam = |i: usize, j: usize, k: usize| gamma[(i * m + j) * m + k].value();
        let dgam = |i: usize, j: usize, k: usize, c: usize| -> Result<f64> {
            Ok(gamma[(i * m + j) * m + k].derivative(c)?.value())
        };
        let mut riemann = vec![0.0; m * m * m * m];
        for rho in 0..m {
            for sigma in 0..m {
                for mu in 0..m {
                    for nu in 0..m {
                        let mut v = dgam(rho, nu, sigma, mu)? - dgam(rho, mu, sigma, nu)?;
                        for l in 0..m {
                            v += gam(rho, mu, l) * gam(l, nu, sigma) - gam(rho, nu, l) * gam(l, mu, sigma);
                        }
                        riemann[((rho * m + sigma) * m + mu) * m + nu] = v;
                    }
                }
            }
        }
        let metric = DMatrix::from_fn(m, m, |i, j| g[i * m + j].value());
        let christoffel = Tensor3::from_fn(m, gam);
        Ok(RiemannOracle {
            dim: m,
            riemann,
            metric,
            christoffel,
        })
    }

    pub fn component(&self, rho: usize, sigma: usize, mu: usize, nu: usize) -> f64 {
        let m = self.dim;
        self.riemann[((rho * m + sigma) * m + mu) * m + nu]
    }

    /// `R^i_jk(x, y) = R^i_jka(x) y^a`, in the index convention of
    /// [`CurvatureValue::r`].
    pub fn contract(&self, y: &[f64]) -> Tensor3 {
        let m = self.dim;
        Tensor3::from_fn(m, |i, j, k| (0..m).map(|a| self.component(i, a, k, j) * y[a]).sum())
    }

    /// Sectional curvature of the plane spanned by `u`, `v`.
    pub fn sectional(&self, u: &[f64], v: &[f64]) -> f64 {
        let m = self.dim;
        let mut num = 0.0;
        for rho in 0..m {
            let u_low: f64 = (0..m).map(|t| self.metric[(rho, t)] * u[t]).sum();
            for sigma in 0..m {
                for mu in 0..m {
                    for nu in 0..m {
                        num += u_low * self.component(rho, sigma, mu, nu) * v[sigma] * u[mu] * v[nu];
                    }
                }
            }
        }
        let ip = |a: &[f64], b: &[f64]| -> f64 {
            (0..m).map(|i| (0..m).map(|j| self.metric[(i, j)] * a[i] * b[j]).sum::<f64>()).sum()
        };
        num / (ip(u, u) * ip(v, v) - ip(u, v).powi(2))
    }
}

/// Riemannian ground truth for the spray curvature at `p`.
pub fn riemann_oracle(spec: &FinslerSpec, p: &PhasePoint) -> Result<Tensor3> {
    Ok(RiemannOracle::new(spec, p.x())?.contract(p.y()))
}

/// A vector field on the chart, evaluated in the coordinate basis
/// `(∂/∂x^i, ∂/∂y^i)`.
pub trait VectorField: Sync {
    fn eval(&self, p: &PhasePoint) -> Result<VectorFieldValue>;
}

impl<F> VectorField for F
where
    F: Fn(&PhasePoint) -> Result<VectorFieldValue> + Sync,
{
    fn eval(&self, p: &PhasePoint) -> Result<VectorFieldValue> {
        self(p)
    }
}

fn step_along(p: &PhasePoint, dir: &DVector<f64>) -> f64 {
    let scale = p.coords().iter().fold(1.0f64, |a, c| a.max(c.abs()));
    BRACKET_STEP * scale / dir.amax()
}

/// Central difference of a vector-valued function along `dir` at `p`.
pub fn derivative_along<F>(f: F, p: &PhasePoint, dir: &DVector<f64>) -> Result<DVector<f64>>
where
    F: Fn(&PhasePoint) -> Result<DVector<f64>>,
{
    if dir.amax() == 0.0 {
        return Ok(f(p)? * 0.0);
    }
    let h = step_along(p, dir);
    let plus = f(&p.displaced(dir.as_slice(), h)?)?;
    let minus = f(&p.displaced(dir.as_slice(), -h)?)?;
    Ok((plus - minus) / (2.0 * h))
}

/// `[X, Y]^k = X^a ∂_a Y^k − Y^a ∂_a X^k` by central differences.
pub fn lie_bracket(x: &dyn VectorField, y: &dyn VectorField, p: &PhasePoint) -> Result<VectorFieldValue> {
    let xv = x.eval(p)?;
    let yv = y.eval(p)?;
    let dy = derivative_along(|q| y.eval(q), p, &xv)?;
    let dx = derivative_along(|q| x.eval(q), p, &yv)?;
    Ok(dy - dx)
}

/// Adapted frame fields with closed-form brackets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdaptedField {
    /// `δ/δx^i`
    Horizontal(usize),
    /// `∂/∂y^i`
    Vertical(usize),
}

/// Structure equations: `[δ_j, δ_k] = R^i_jk ∂_i`, `[δ_j, ∂_k] = ∂N^i_j/∂y^k ∂_i`,
/// `[∂_j, ∂_k] = 0`.
pub fn frame_bracket(geom: &LocalGeometry, a: AdaptedField, b: AdaptedField) -> VectorFieldValue {
    use AdaptedField::*;
    let m = geom.dim();
    let mut out = DVector::zeros(2 * m);
    match (a, b) {
        (Horizontal(j), Horizontal(k)) => {
            let r = &geom.curvature().r;
            for i in 0..m {
                out[m + i] = r.get(i, j, k);
            }
        }
        (Horizontal(j), Vertical(k)) => {
            for i in 0..m {
                out[m + i] = geom.dn_dy().get(i, j, k);
            }
        }
        (Vertical(j), Horizontal(k)) => {
            for i in 0..m {
                out[m + i] = -geom.dn_dy().get(i, k, j);
            }
        }
        (Vertical(_), Vertical(_)) => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], y: &[f64]) -> PhasePoint {
        PhasePoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_connection_vanishes() {
        let s = FinslerSpec::euclidean(3);
        let p = pt(&[0.1, 0.2, -0.3], &[1.0, 0.5, -0.2]);
        let geom = LocalGeometry::at(&s, &p).unwrap();
        assert_eq!(geom.connection.gamma.amax(), 0.0);
        assert_eq!(geom.connection.n.amax(), 0.0);
        assert_eq!(geom.curvature().r.amax(), 0.0);
    }

    #[test]
    fn locally_minkowski_christoffels_vanish() {
        let s = FinslerSpec::locally_minkowski(2);
        let gamma = christoffel(&s, &pt(&[0.3, -0.1], &[0.7, 1.1])).unwrap();
        assert_eq!(gamma.amax(), 0.0);
    }

    #[test]
    fn constant_b_randers_has_zero_connection() {
        let s = FinslerSpec::locally_minkowski_with(2, vec![0.1, 0.0]);
        let c = nonlinear_connection(&s, &pt(&[0.5, 0.2], &[1.0, 0.3])).unwrap();
        assert_eq!(c.n.amax(), 0.0);
    }

    #[test]
    fn sphere_origin_has_zero_connection() {
        let s = FinslerSpec::sphere(2);
        let c = nonlinear_connection(&s, &pt(&[0.0, 0.0], &[1.0, 0.4])).unwrap();
        assert!(c.n.amax() < 1e-15);
    }

    #[test]
    fn sphere_curvature_at_origin() {
        // R^i_jk = δ^i_k y_j − δ^i_j y_k with y_j = 4 y^j at x = 0
        let s = FinslerSpec::sphere(2);
        let curv = nl_curvature(&s, &pt(&[0.0, 0.0], &[1.0, 0.0])).unwrap();
        assert!((curv.r.get(1, 0, 1) - 4.0).abs() < 1e-12);
        assert!((curv.r.get(1, 1, 0) + 4.0).abs() < 1e-12);
        assert!(curv.r.get(0, 0, 1).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_finsler_families() {
        let s = FinslerSpec::randers(2);
        assert!(matches!(
            riemann_oracle(&s, &pt(&[0.0, 0.0], &[1.0, 0.0])),
            Err(Error::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn coordinate_fields_commute() {
        let p = pt(&[0.1, 0.2], &[1.0, -0.5]);
        let e = |k: usize| move |_: &PhasePoint| -> Result<DVector<f64>> {
            let mut v = DVector::zeros(4);
            v[k] = 1.0;
            Ok(v)
        };
        let b = lie_bracket(&e(2), &e(3), &p).unwrap();
        assert_eq!(b.amax(), 0.0);
    }

    #[test]
    fn bracket_of_linear_fields() {
        // X = x1 ∂/∂x2, Y = ∂/∂x1 → [X, Y] = −∂/∂x2
        let p = pt(&[0.3, 0.2], &[1.0, 0.0]);
        let xf = |q: &PhasePoint| -> Result<DVector<f64>> { Ok(DVector::from_vec(vec![0.0, q.x()[0], 0.0, 0.0])) };
        let yf = |_: &PhasePoint| -> Result<DVector<f64>> { Ok(DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])) };
        let b = lie_bracket(&xf, &yf, &p).unwrap();
        assert!((b - DVector::from_vec(vec![0.0, -1.0, 0.0, 0.0])).amax() < 1e-10);
    }
}
