//! Exact brackets in the adapted frame.
//!
//! A field is written `X = X^A e_A` over `(δ_1..δ_m, ∂_1..∂_m)` with
//! first-order jet coefficients. Then
//! `[X, Y] = (X(Y^A) − Y(X^A)) e_A + X^B Y^C [e_B, e_C]`, where the frame
//! brackets come from the curvature and `∂N/∂y`. A vector field only ever
//! differentiates once, so order-1 jets of the coefficients are enough and
//! nothing is differenced.

use nalgebra::{DMatrix, DVector};

use crate::connection::LocalGeometry;
use crate::error::Result;
use crate::jets::Jet;
use crate::tensor::Tensor3;

/// Field in the adapted frame with jet coefficients.
#[derive(Clone, Debug)]
pub struct JetField {
    pub coeffs: Vec<Jet>,
}

impl JetField {
    pub fn value(&self) -> DVector<f64> {
        DVector::from_iterator(self.coeffs.len(), self.coeffs.iter().map(Jet::value))
    }

    pub fn add(&self, other: &JetField) -> JetField {
        JetField {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &JetField) -> JetField {
        JetField {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, f: &Jet) -> JetField {
        JetField {
            coeffs: self.coeffs.iter().map(|c| c * f).collect(),
        }
    }

    pub fn scale_by(&self, s: f64) -> JetField {
        JetField {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
}

/// First-order data of the frame at a point.
#[derive(Clone, Debug)]
pub struct JetFrame {
    dim: usize,
    pub n: DMatrix<f64>,
    pub r: Tensor3,
    pub dn_dy: Tensor3,
    /// Columns `δ_i`, `∂_i` in coordinates.
    pub adapted: DMatrix<f64>,
    pub x: Vec<Jet>,
    pub y: Vec<Jet>,
    pub y_low: Vec<Jet>,
    pub tau: Jet,
    pub inv_tau: Jet,
    zero: Jet,
}

impl JetFrame {
    /// Needs a full (curvature-level) evaluation.
    pub fn new(geom: &LocalGeometry) -> Result<Self> {
        let m = geom.dim();
        let jets = &geom.jets;
        let x: Vec<Jet> = jets.coords[..m].iter().map(|j| j.truncate(1)).collect();
        let y: Vec<Jet> = jets.coords[m..].iter().map(|j| j.truncate(1)).collect();
        let y_low: Vec<Jet> = jets.y_low.iter().map(|j| j.truncate(1)).collect();
        let tau = jets.f2.truncate(1);
        let inv_tau = tau.recip()?;
        let zero = Jet::constant(tau.table(), 1, 0.0);
        let n = geom.connection.n.clone();
        let mut adapted = DMatrix::identity(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                adapted[(m + i, j)] = -n[(i, j)];
            }
        }
        Ok(JetFrame {
            dim: m,
            n,
            r: geom.curvature().r.clone(),
            dn_dy: geom.dn_dy().clone(),
            adapted,
            x,
            y,
            y_low,
            tau,
            inv_tau,
            zero,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self, v: f64) -> Jet {
        &self.zero + v
    }

    fn first_partial(f: &Jet, var: usize) -> Result<f64> {
        Ok(f.derivative(var)?.value())
    }

    /// `e_A(f)`: `δf/δx^a` for `A = a < m`, `∂f/∂y^a` for `A = m + a`.
    pub fn derive(&self, f: &Jet, a: usize) -> Result<f64> {
        let m = self.dim;
        if a < m {
            let mut v = Self::first_partial(f, a)?;
            for b in 0..m {
                v -= self.n[(b, a)] * Self::first_partial(f, m + b)?;
            }
            Ok(v)
        } else {
            Self::first_partial(f, a)
        }
    }

    /// `X(f)` at the point.
    pub fn apply(&self, x: &JetField, f: &Jet) -> Result<f64> {
        let mut s = 0.0;
        for (a, c) in x.coeffs.iter().enumerate() {
            let xa = c.value();
            if xa != 0.0 {
                s += xa * self.derive(f, a)?;
            }
        }
        Ok(s)
    }

    /// `[e_B, e_C]` in adapted components.
    pub fn frame_bracket(&self, b: usize, c: usize) -> DVector<f64> {
        let m = self.dim;
        let mut out = DVector::zeros(2 * m);
        match (b < m, c < m) {
            (true, true) => {
                for i in 0..m {
                    out[m + i] = self.r.get(i, b, c);
                }
            }
            (true, false) => {
                for i in 0..m {
                    out[m + i] = self.dn_dy.get(i, b, c - m);
                }
            }
            (false, true) => {
                for i in 0..m {
                    out[m + i] = -self.dn_dy.get(i, c, b - m);
                }
            }
            (false, false) => {}
        }
        out
    }

    /// `[X, Y]` at the point, adapted components.
    pub fn bracket(&self, x: &JetField, y: &JetField) -> Result<DVector<f64>> {
        let n = 2 * self.dim;
        let mut out = DVector::zeros(n);
        for a in 0..n {
            out[a] = self.apply(x, &y.coeffs[a])? - self.apply(y, &x.coeffs[a])?;
        }
        let xv = x.value();
        let yv = y.value();
        for b in 0..n {
            for c in 0..n {
                let w = xv[b] * yv[c];
                if w != 0.0 {
                    out += self.frame_bracket(b, c) * w;
                }
            }
        }
        Ok(out)
    }

    pub fn to_coords(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.adapted * a
    }

    fn unit(&self, k: usize) -> JetField {
        JetField {
            coeffs: (0..2 * self.dim)
                .map(|a| self.constant(if a == k { 1.0 } else { 0.0 }))
                .collect(),
        }
    }

    pub fn delta(&self, i: usize) -> JetField {
        self.unit(i)
    }

    pub fn del(&self, i: usize) -> JetField {
        self.unit(self.dim + i)
    }

    pub fn spray(&self) -> JetField {
        JetField {
            coeffs: self.y.iter().cloned().chain((0..self.dim).map(|_| self.zero.clone())).collect(),
        }
    }

    pub fn liouville(&self) -> JetField {
        JetField {
            coeffs: (0..self.dim).map(|_| self.zero.clone()).chain(self.y.iter().cloned()).collect(),
        }
    }

    pub fn h(&self, i: usize) -> JetField {
        let c = &self.y_low[i] * &self.inv_tau;
        self.delta(i).sub(&self.spray().scale(&c))
    }

    pub fn v(&self, i: usize) -> JetField {
        let c = &self.y_low[i] * &self.inv_tau;
        self.del(i).sub(&self.liouville().scale(&c))
    }

    /// `h_i`, `v_i` for `i ≠ i0`, the order of the `D_F` basis.
    pub fn df_fields(&self, i0: usize) -> Vec<JetField> {
        let kept: Vec<usize> = (0..self.dim).filter(|&i| i != i0).collect();
        kept.iter()
            .map(|&i| self.h(i))
            .chain(kept.iter().map(|&i| self.v(i)))
            .collect()
    }

    pub fn psi(&self, x: &JetField) -> JetField {
        let m = self.dim;
        JetField {
            coeffs: (0..2 * m)
                .map(|a| if a < m { x.coeffs[m + a].clone() } else { -&x.coeffs[a - m] })
                .collect(),
        }
    }

    pub fn eta(&self, a: usize, x: &JetField) -> Jet {
        let m = self.dim;
        let off = if a == 1 { 0 } else { m };
        let mut s = self.zero.clone();
        for j in 0..m {
            s += &(&self.y_low[j] * &x.coeffs[off + j]);
        }
        s * &self.inv_tau
    }

    pub fn phi(&self, x: &JetField) -> JetField {
        let e1 = self.eta(1, x);
        let e2 = self.eta(2, x);
        self.psi(x)
            .add(&self.liouville().scale(&e1))
            .sub(&self.spray().scale(&e2))
    }

    /// `y^a y_j / τ`
    pub fn yy_tau(&self, a: usize, j: usize) -> Jet {
        &(&self.y[a] * &self.y_low[j]) * &self.inv_tau
    }

    /// `G^a_j = δ^a_j/β + (β−1)/(βτ) y^a y_j`
    pub fn g_up(&self, beta: f64, a: usize, j: usize) -> Jet {
        let d = if a == j { 1.0 / beta } else { 0.0 };
        self.yy_tau(a, j) * ((beta - 1.0) / beta) + d
    }

    /// `H^a_j = β δ^a_j + (1−β)/τ y^a y_j`
    pub fn h_up(&self, beta: f64, a: usize, j: usize) -> Jet {
        let d = if a == j { beta } else { 0.0 };
        self.yy_tau(a, j) * (1.0 - beta) + d
    }

    /// `Ψ̄(δ_i) = −G^a_i ∂_a`, `Ψ̄(∂_i) = H^a_i δ_a`.
    pub fn psi_bar(&self, beta: f64, x: &JetField) -> JetField {
        let m = self.dim;
        let mut coeffs = Vec::with_capacity(2 * m);
        for a in 0..m {
            let mut s = self.zero.clone();
            for i in 0..m {
                s += &(&self.h_up(beta, a, i) * &x.coeffs[m + i]);
            }
            coeffs.push(s);
        }
        for a in 0..m {
            let mut s = self.zero.clone();
            for i in 0..m {
                s -= &(&self.g_up(beta, a, i) * &x.coeffs[i]);
            }
            coeffs.push(s);
        }
        JetField { coeffs }
    }

    /// `η^a` applied to adapted components given as values.
    pub fn eta_value(&self, a: usize, comps: &DVector<f64>) -> f64 {
        let m = self.dim;
        let off = if a == 1 { 0 } else { m };
        (0..m).map(|j| self.y_low[j].value() * comps[off + j]).sum::<f64>() / self.tau.value()
    }
}

/// Operator acting on jet fields, for the generic constructions below.
pub trait JetOperator {
    fn apply_op(&self, frame: &JetFrame, x: &JetField) -> JetField;
    /// Same operator on plain adapted components.
    fn apply_value(&self, frame: &JetFrame, v: &DVector<f64>) -> DVector<f64>;
}

/// `Ψ_F`
pub struct Psi;

/// `Ψ̄_F` at the given β
pub struct PsiBar(pub f64);

/// `φ`
pub struct Phi;

fn constant_field(frame: &JetFrame, v: &DVector<f64>) -> JetField {
    JetField {
        coeffs: v.iter().map(|&c| frame.constant(c)).collect(),
    }
}

impl JetOperator for Psi {
    fn apply_op(&self, frame: &JetFrame, x: &JetField) -> JetField {
        frame.psi(x)
    }
    fn apply_value(&self, frame: &JetFrame, v: &DVector<f64>) -> DVector<f64> {
        frame.psi(&constant_field(frame, v)).value()
    }
}

impl JetOperator for PsiBar {
    fn apply_op(&self, frame: &JetFrame, x: &JetField) -> JetField {
        frame.psi_bar(self.0, x)
    }
    fn apply_value(&self, frame: &JetFrame, v: &DVector<f64>) -> DVector<f64> {
        frame.psi_bar(self.0, &constant_field(frame, v)).value()
    }
}

impl JetOperator for Phi {
    fn apply_op(&self, frame: &JetFrame, x: &JetField) -> JetField {
        frame.phi(x)
    }
    fn apply_value(&self, frame: &JetFrame, v: &DVector<f64>) -> DVector<f64> {
        frame.phi(&constant_field(frame, v)).value()
    }
}

/// `[X, JY] + [JX, Y]`, adapted components.
pub fn a_of<J: JetOperator>(frame: &JetFrame, j: &J, x: &JetField, y: &JetField) -> Result<DVector<f64>> {
    Ok(frame.bracket(x, &j.apply_op(frame, y))? + frame.bracket(&j.apply_op(frame, x), y)?)
}

/// `[JX, JY] − [X, Y]`, adapted components.
pub fn b_of<J: JetOperator>(frame: &JetFrame, j: &J, x: &JetField, y: &JetField) -> Result<DVector<f64>> {
    Ok(frame.bracket(&j.apply_op(frame, x), &j.apply_op(frame, y))? - frame.bracket(x, y)?)
}

/// `N_J(X, Y) = [JX, JY] − [X, Y] − J([X, JY] + [JX, Y])`.
pub fn nijenhuis_of<J: JetOperator>(frame: &JetFrame, j: &J, x: &JetField, y: &JetField) -> Result<DVector<f64>> {
    let a = a_of(frame, j, x, y)?;
    Ok(b_of(frame, j, x, y)? - j.apply_value(frame, &a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerSpec;
    use crate::point::PhasePoint;

    fn frame(spec: &FinslerSpec, x: &[f64], y: &[f64]) -> JetFrame {
        let p = PhasePoint::new(x.to_vec(), y.to_vec()).unwrap();
        JetFrame::new(&LocalGeometry::at(spec, &p).unwrap()).unwrap()
    }

    #[test]
    fn liouville_and_spray_bracket() {
        let f = frame(&FinslerSpec::sphere(3), &[0.1, 0.2, -0.3], &[0.5, -1.0, 0.7]);
        let b = f.bracket(&f.liouville(), &f.spray()).unwrap();
        assert!((b - f.spray().value()).amax() < 1e-12);
    }

    #[test]
    fn coordinate_vertical_fields_commute() {
        let f = frame(&FinslerSpec::randers(2), &[0.1, 0.2], &[0.5, -1.0]);
        assert_eq!(f.bracket(&f.del(0), &f.del(1)).unwrap().amax(), 0.0);
    }

    #[test]
    fn psi_is_almost_complex() {
        let f = frame(&FinslerSpec::euclidean(2), &[0.0, 0.0], &[1.0, 2.0]);
        let x = f.h(1);
        let back = f.psi(&f.psi(&x)).add(&x);
        assert!(back.value().amax() < 1e-15);
    }
}
