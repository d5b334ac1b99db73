//! Catalog of Finsler fundamental functions and the fundamental tensor.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, JetError, Result};
use crate::jets::{self, jet_lift, Jet, MultiIndex};
use crate::point::PhasePoint;
use crate::report::CheckReport;

/// Conformal exponent `σ(x) = linear·x + quadratic·|x|²`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conformal {
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub quadratic: f64,
}

impl Conformal {
    fn is_trivial(&self) -> bool {
        self.quadratic == 0.0 && self.linear.iter().all(|&c| c == 0.0)
    }

    fn sigma_jet(&self, x: &[Jet]) -> Jet {
        let mut s = Jet::constant(x[0].table(), x[0].order(), 0.0);
        for (xi, &a) in x.iter().zip(&self.linear) {
            s += &(xi * a);
        }
        if self.quadratic != 0.0 {
            s += &(square_norm(x) * self.quadratic);
        }
        s
    }

    /// Lower bound of σ over the ball of the given radius.
    fn min_on_ball(&self, radius: f64) -> f64 {
        let lin = self.linear.iter().map(|c| c * c).sum::<f64>().sqrt();
        -lin * radius + self.quadratic.min(0.0) * radius * radius
    }
}

/// Fundamental function families. Parameters are in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `F² = |y|²`
    Euclidean,
    /// `g = 4δ/(1 + c|x|²)²`: stereographic sphere for `c > 0`, Poincaré ball for `c < 0`.
    RiemannianSpaceForm { curvature: f64 },
    /// `g = e^{2σ(x)}(δ + shear·x⊗x)`, of non-constant curvature in general.
    RiemannianGeneral {
        #[serde(default)]
        conformal: Conformal,
        #[serde(default)]
        shear: f64,
    },
    /// `F = e^{σ(x)}|y| + b·y`.
    Randers {
        b: Vec<f64>,
        #[serde(default)]
        conformal: Conformal,
    },
    /// `F = |y| + b·y`, x-independent.
    LocallyMinkowskiRanders { b: Vec<f64> },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Euclidean => "euclidean",
            Family::RiemannianSpaceForm { .. } => "riemannian-space-form",
            Family::RiemannianGeneral { .. } => "riemannian-general",
            Family::Randers { .. } => "randers",
            Family::LocallyMinkowskiRanders { .. } => "locally-minkowski-randers",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinslerSpec {
    pub dimension: usize,
    #[serde(flatten)]
    pub family: Family,
    /// Radius of the ball chart; a family default is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_radius: Option<f64>,
}

impl FinslerSpec {
    pub fn euclidean(dimension: usize) -> Self {
        FinslerSpec {
            dimension,
            family: Family::Euclidean,
            chart_radius: None,
        }
    }

    pub fn space_form(dimension: usize, curvature: f64) -> Self {
        FinslerSpec {
            dimension,
            family: Family::RiemannianSpaceForm { curvature },
            chart_radius: None,
        }
    }

    pub fn sphere(dimension: usize) -> Self {
        Self::space_form(dimension, 1.0)
    }

    pub fn poincare(dimension: usize) -> Self {
        Self::space_form(dimension, -1.0)
    }

    /// Default non-constant-curvature Riemannian entry.
    pub fn riemannian_general(dimension: usize) -> Self {
        FinslerSpec {
            dimension,
            family: Family::RiemannianGeneral {
                conformal: Conformal {
                    linear: take([0.3, -0.2, 0.1, 0.05], dimension),
                    quadratic: 0.25,
                },
                shear: 0.5,
            },
            chart_radius: None,
        }
    }

    /// Default Randers entry over a conformally flat α.
    pub fn randers(dimension: usize) -> Self {
        FinslerSpec {
            dimension,
            family: Family::Randers {
                b: take([0.2, 0.1, -0.1, 0.05], dimension),
                conformal: Conformal {
                    linear: take([0.2, 0.1, -0.15, 0.05], dimension),
                    quadratic: 0.1,
                },
            },
            chart_radius: None,
        }
    }

    pub fn randers_with(dimension: usize, b: Vec<f64>, conformal: Conformal) -> Self {
        FinslerSpec {
            dimension,
            family: Family::Randers { b, conformal },
            chart_radius: None,
        }
    }

    pub fn locally_minkowski(dimension: usize) -> Self {
        Self::locally_minkowski_with(dimension, take([0.3, -0.2, 0.1, 0.05], dimension))
    }

    pub fn locally_minkowski_with(dimension: usize, b: Vec<f64>) -> Self {
        FinslerSpec {
            dimension,
            family: Family::LocallyMinkowskiRanders { b },
            chart_radius: None,
        }
    }

    /// One entry per family, sphere standing in for the space forms.
    pub fn catalog(dimension: usize) -> Vec<FinslerSpec> {
        vec![
            Self::euclidean(dimension),
            Self::sphere(dimension),
            Self::riemannian_general(dimension),
            Self::randers(dimension),
            Self::locally_minkowski(dimension),
        ]
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match &self.family {
            Family::RiemannianSpaceForm { curvature } if *curvature > 0.0 => {
                format!("sphere(c={curvature}) m={}", self.dimension)
            }
            Family::RiemannianSpaceForm { curvature } if *curvature < 0.0 => {
                format!("poincare(c={curvature}) m={}", self.dimension)
            }
            f => format!("{} m={}", f.name(), self.dimension),
        }
    }

    pub fn is_riemannian(&self) -> bool {
        matches!(
            self.family,
            Family::Euclidean | Family::RiemannianSpaceForm { .. } | Family::RiemannianGeneral { .. }
        )
    }

    /// Whether the metric has no x-dependence at all.
    pub fn is_x_independent(&self) -> bool {
        match &self.family {
            Family::Euclidean | Family::LocallyMinkowskiRanders { .. } => true,
            Family::RiemannianSpaceForm { curvature } => *curvature == 0.0,
            Family::RiemannianGeneral { conformal, shear } => conformal.is_trivial() && *shear == 0.0,
            Family::Randers { conformal, .. } => conformal.is_trivial(),
        }
    }

    pub fn chart_radius(&self) -> f64 {
        if let Some(r) = self.chart_radius {
            return r;
        }
        match &self.family {
            Family::RiemannianSpaceForm { curvature } if *curvature > 0.0 => 1.0 / curvature.sqrt(),
            Family::RiemannianSpaceForm { curvature } if *curvature < 0.0 => 0.9 / (-curvature).sqrt(),
            _ => 1.0,
        }
    }

    /// Structural validation, including the Randers bound `‖b‖_α < 1` on the chart.
    pub fn validate(&self) -> Result<()> {
        let m = self.dimension;
        if m < 2 {
            return Err(Error::InvalidSpec(format!("dimension {m} < 2")));
        }
        let r = self.chart_radius();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidSpec(format!("chart radius {r} must be positive")));
        }
        let check_len = |name: &str, v: &[f64], allow_empty: bool| {
            if (allow_empty && v.is_empty()) || v.len() == m {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "{name} has {} components, dimension is {m}",
                    v.len()
                )))
            }
        };
        match &self.family {
            Family::Euclidean => {}
            Family::RiemannianSpaceForm { curvature } => {
                if *curvature < 0.0 && r * (-curvature).sqrt() >= 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "chart radius {r} reaches the ideal boundary of the Poincaré ball"
                    )));
                }
            }
            Family::RiemannianGeneral { conformal, shear } => {
                check_len("conformal.linear", &conformal.linear, true)?;
                if 1.0 + shear.min(0.0) * r * r <= 0.0 {
                    return Err(Error::InvalidSpec(format!("shear {shear} degenerates on the chart")));
                }
            }
            Family::Randers { b, conformal } => {
                check_len("b", b, false)?;
                check_len("conformal.linear", &conformal.linear, true)?;
                let bound = norm(b) * (-conformal.min_on_ball(r)).exp();
                if bound >= 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "Randers one-form norm reaches {bound:.3} ≥ 1 on the chart"
                    )));
                }
            }
            Family::LocallyMinkowskiRanders { b } => {
                check_len("b", b, false)?;
                if norm(b) >= 1.0 {
                    return Err(Error::InvalidSpec(format!("Randers one-form norm {} ≥ 1", norm(b))));
                }
            }
        }
        Ok(())
    }

    /// Rejects points of the wrong dimension or outside the chart ball.
    pub fn check_point(&self, p: &PhasePoint) -> Result<()> {
        if p.dim() != self.dimension {
            return Err(Error::InvalidPoint(format!(
                "point has dimension {}, spec has {}",
                p.dim(),
                self.dimension
            )));
        }
        let norm = p.x_norm();
        let radius = self.chart_radius();
        if norm > radius {
            return Err(Error::ChartDomain { norm, radius });
        }
        Ok(())
    }

    /// `F` in jet arithmetic over the coordinate jets `(x, y)`.
    pub fn f_jet(&self, vars: &[Jet]) -> Result<Jet, JetError> {
        let m = vars.len() / 2;
        let (x, y) = vars.split_at(m);
        match &self.family {
            Family::Randers { b, conformal } => {
                let alpha = conformal.sigma_jet(x).exp() * square_norm(y).sqrt()?;
                Ok(alpha + linear_form(b, y))
            }
            Family::LocallyMinkowskiRanders { b } => Ok(square_norm(y).sqrt()? + linear_form(b, y)),
            _ => self.f2_jet(vars)?.sqrt(),
        }
    }

    /// `F²` in jet arithmetic over the coordinate jets `(x, y)`.
    pub fn f2_jet(&self, vars: &[Jet]) -> Result<Jet, JetError> {
        let m = vars.len() / 2;
        let (x, y) = vars.split_at(m);
        match &self.family {
            Family::Euclidean => Ok(square_norm(y)),
            Family::RiemannianSpaceForm { curvature } => {
                let denom = square_norm(x) * *curvature + 1.0;
                Ok(denom.powi(-2)? * square_norm(y) * 4.0)
            }
            Family::RiemannianGeneral { conformal, shear } => {
                let xy = dot(x, y);
                let quad = square_norm(y) + &xy * &xy * *shear;
                Ok((conformal.sigma_jet(x) * 2.0).exp() * quad)
            }
            Family::Randers { .. } | Family::LocallyMinkowskiRanders { .. } => {
                let f = self.f_jet(vars)?;
                Ok(&f * &f)
            }
        }
    }

    /// Closed-form Riemannian metric `g_ij(x)` as jets (row-major), read off
    /// the family formula rather than from the y-Hessian of `F²`.
    pub fn riemannian_metric_jets(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        let m = x.len();
        let table = x[0].table();
        let order = x[0].order();
        let delta = |i: usize, j: usize| Jet::constant(table, order, if i == j { 1.0 } else { 0.0 });
        let mut g = Vec::with_capacity(m * m);
        match &self.family {
            Family::Euclidean => {
                for i in 0..m {
                    for j in 0..m {
                        g.push(delta(i, j));
                    }
                }
            }
            Family::RiemannianSpaceForm { curvature } => {
                let factor = (square_norm(x) * *curvature + 1.0).powi(-2)? * 4.0;
                for i in 0..m {
                    for j in 0..m {
                        g.push(if i == j { factor.clone() } else { delta(i, j) });
                    }
                }
            }
            Family::RiemannianGeneral { conformal, shear } => {
                let factor = (conformal.sigma_jet(x) * 2.0).exp();
                for i in 0..m {
                    for j in 0..m {
                        let entry = delta(i, j) + &x[i] * &x[j] * *shear;
                        g.push(&factor * &entry);
                    }
                }
            }
            f => return Err(Error::UnsupportedFamily(f.name().into())),
        }
        Ok(g)
    }
}

fn take<const N: usize>(src: [f64; N], m: usize) -> Vec<f64> {
    (0..m).map(|i| src.get(i).copied().unwrap_or(0.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn square_norm(v: &[Jet]) -> Jet {
    jets::sum(v.iter().map(|c| c * c).collect::<Vec<_>>().iter()).expect("non-empty")
}

fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    jets::sum(a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>().iter()).expect("non-empty")
}

fn linear_form(b: &[f64], y: &[Jet]) -> Jet {
    let mut acc = Jet::constant(y[0].table(), y[0].order(), 0.0);
    for (yi, &bi) in y.iter().zip(b) {
        acc += &(yi * bi);
    }
    acc
}

/// Values of the fundamental tensor and its companions at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricValue {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `y_i = g_ij y^j`
    pub y_low: DVector<f64>,
    pub f2: f64,
}

pub fn evaluate_f2(spec: &FinslerSpec, p: &PhasePoint) -> Result<f64> {
    spec.check_point(p)?;
    let f2 = jet_lift(|v| spec.f2_jet(v), p, 0)?.value();
    Ok(f2)
}

/// `F(x, y)` itself (signed for corrupted Randers data).
pub fn evaluate_f(spec: &FinslerSpec, p: &PhasePoint) -> Result<f64> {
    spec.check_point(p)?;
    Ok(jet_lift(|v| spec.f_jet(v), p, 0)?.value())
}

/// `g_ij = ½ ∂²F²/∂y^i∂y^j` without the positive-definiteness gate.
pub fn fundamental_matrix(spec: &FinslerSpec, p: &PhasePoint) -> Result<DMatrix<f64>> {
    spec.check_point(p)?;
    let m = spec.dimension;
    let f2 = jet_lift(|v| spec.f2_jet(v), p, 2)?;
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = 0.5 * f2.jet.partial(&MultiIndex::from_vars(2 * m, &[m + i, m + j]))?;
        }
    }
    Ok(g)
}

pub fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(g.clone()).eigenvalues.min()
}

pub fn fundamental_tensor(spec: &FinslerSpec, p: &PhasePoint) -> Result<MetricValue> {
    let g = fundamental_matrix(spec, p)?;
    metric_value(g, p)
}

pub(crate) fn metric_value(g: DMatrix<f64>, p: &PhasePoint) -> Result<MetricValue> {
    let min_eigenvalue = min_eigenvalue(&g);
    if min_eigenvalue <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite { min_eigenvalue })?;
    let y = DVector::from_column_slice(p.y());
    let y_low = &g * &y;
    let f2 = y_low.dot(&y);
    Ok(MetricValue { g, g_inv, y_low, f2 })
}

/// Homogeneity, Euler identity and positive-definiteness residuals.
pub fn validate_finsler_axioms(
    spec: &FinslerSpec,
    p: &PhasePoint,
    lambda: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new();
    let f = evaluate_f(spec, p)?;
    let f_scaled = evaluate_f(spec, &p.scale_y(lambda)?)?;
    report.check(
        "finsler.homogeneity",
        (f_scaled - lambda * f).abs() / (1.0 + (lambda * f).abs()),
        tolerance,
    );
    let g = fundamental_matrix(spec, p)?;
    let y = DVector::from_column_slice(p.y());
    let f2 = evaluate_f2(spec, p)?;
    report.check(
        "finsler.euler",
        ((&g * &y).dot(&y) - f2).abs() / (1.0 + f2.abs()),
        tolerance,
    );
    // passes iff the normalized smallest eigenvalue is strictly positive
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let ratio = eig.min() / eig.amax().max(f64::MIN_POSITIVE);
    report.check("finsler.positive_definite", (tolerance - ratio).max(0.0), tolerance);
    Ok(report)
}
