//! Frame fields of conformally flat metrics `F² = e^{2σ}|y|²`, with
//! `e^{2σ} = k/(1 + c|x|²)²`, built from the closed-form Christoffel
//! symbols `Γ^i_jk = δ^i_j σ_k + δ^i_k σ_j − δ_jk σ_i`. Brackets are central
//! differences with Richardson extrapolation.

use nalgebra::{DMatrix, DVector};

use super::split;

#[derive(Clone, Copy, Debug)]
pub struct Conformal {
    pub k: f64,
    pub c: f64,
}

pub type Field<'a> = Box<dyn Fn(&[f64]) -> DVector<f64> + 'a>;

impl Conformal {
    pub fn sphere() -> Self {
        Conformal { k: 4.0, c: 1.0 }
    }

    pub fn poincare() -> Self {
        Conformal { k: 4.0, c: -1.0 }
    }

    pub fn euclidean() -> Self {
        Conformal { k: 1.0, c: 0.0 }
    }

    /// Sectional curvature.
    pub fn lambda(&self) -> f64 {
        4.0 * self.c / self.k
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        let d = 1.0 + self.c * super::dot(x, x);
        self.k / (d * d)
    }

    pub fn f2(&self, z: &[f64]) -> f64 {
        let (x, y) = split(z);
        self.weight(x) * super::dot(y, y)
    }

    fn grad_sigma(&self, x: &[f64]) -> Vec<f64> {
        let d = 1.0 + self.c * super::dot(x, x);
        x.iter().map(|xi| -2.0 * self.c * xi / d).collect()
    }

    /// `N^i_j = Γ^i_jk y^k`
    pub fn n(&self, z: &[f64]) -> DMatrix<f64> {
        let (x, y) = split(z);
        let m = x.len();
        let s = self.grad_sigma(x);
        let sy = super::dot(&s, y);
        DMatrix::from_fn(m, m, |i, j| {
            (if i == j { sy } else { 0.0 }) + y[i] * s[j] - y[j] * s[i]
        })
    }

    /// Adapted components `(dx(X), δy(X))`.
    pub fn adapted(&self, z: &[f64], v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let m = z.len() / 2;
        let a = v.rows(0, m).into_owned();
        let b = v.rows(m, m) + self.n(z) * &a;
        (a, b)
    }

    /// `Σ a^j δ_j + b^j ∂_j` in coordinates.
    pub fn compose(&self, z: &[f64], a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let m = z.len() / 2;
        let mut out = DVector::zeros(2 * m);
        out.rows_mut(0, m).copy_from(a);
        let bottom = b - self.n(z) * a;
        out.rows_mut(m, m).copy_from(&bottom);
        out
    }

    /// `Ψδ_j = −∂_j`, `Ψ∂_j = δ_j`.
    pub fn psi(&self, z: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let (a, b) = self.adapted(z, v);
        self.compose(z, &b, &(-a))
    }

    /// `η¹ = y_i dx^i/F²`, `η² = y_i δy^i/F²`.
    pub fn eta(&self, z: &[f64], which: usize, v: &DVector<f64>) -> f64 {
        let (x, y) = split(z);
        let (a, b) = self.adapted(z, v);
        let yv = DVector::from_column_slice(y) * self.weight(x);
        let comp = if which == 1 { a } else { b };
        yv.dot(&comp) / self.f2(z)
    }

    /// `ξ₁ = y^i δ_i` (the spray), `ξ₂ = y^i ∂_i` (Liouville).
    pub fn xi(&self, z: &[f64], which: usize) -> DVector<f64> {
        let (_, y) = split(z);
        let m = y.len();
        let yv = DVector::from_column_slice(y);
        if which == 1 {
            self.compose(z, &yv, &DVector::zeros(m))
        } else {
            self.compose(z, &DVector::zeros(m), &yv)
        }
    }

    /// `φ = Ψ + ξ₂ ⊗ η¹ − ξ₁ ⊗ η²`
    pub fn phi(&self, z: &[f64], v: &DVector<f64>) -> DVector<f64> {
        self.psi(z, v) + self.xi(z, 2) * self.eta(z, 1, v) - self.xi(z, 1) * self.eta(z, 2, v)
    }

    pub fn delta<'a>(&'a self, j: usize) -> Field<'a> {
        Box::new(move |z| {
            let m = z.len() / 2;
            let mut a = DVector::zeros(m);
            a[j] = 1.0;
            self.compose(z, &a, &DVector::zeros(m))
        })
    }

    pub fn del<'a>(&'a self, j: usize) -> Field<'a> {
        Box::new(move |z| {
            let mut e = DVector::zeros(z.len());
            e[z.len() / 2 + j] = 1.0;
            e
        })
    }

    /// `h_j = δ_j − (y_j/F²) ξ₁`
    pub fn h<'a>(&'a self, j: usize) -> Field<'a> {
        Box::new(move |z| {
            let (x, y) = split(z);
            let c = self.weight(x) * y[j] / self.f2(z);
            self.delta(j)(z) - self.xi(z, 1) * c
        })
    }

    /// `v_j = ∂_j − (y_j/F²) ξ₂`
    pub fn v<'a>(&'a self, j: usize) -> Field<'a> {
        Box::new(move |z| {
            let (x, y) = split(z);
            let c = self.weight(x) * y[j] / self.f2(z);
            self.del(j)(z) - self.xi(z, 2) * c
        })
    }

    pub fn liouville<'a>(&'a self) -> Field<'a> {
        Box::new(move |z| self.xi(z, 2))
    }

    pub fn psi_of<'a>(&'a self, f: &'a Field<'a>) -> Field<'a> {
        Box::new(move |z| self.psi(z, &f(z)))
    }

    pub fn phi_of<'a>(&'a self, f: &'a Field<'a>) -> Field<'a> {
        Box::new(move |z| self.phi(z, &f(z)))
    }

    /// `N_Ψ(X, Y) = [ΨX, ΨY] − [X, Y] − Ψ[ΨX, Y] − Ψ[X, ΨY]`
    pub fn nijenhuis(&self, x: &Field, y: &Field, z: &[f64]) -> DVector<f64> {
        let px = self.psi_of(x);
        let py = self.psi_of(y);
        let a = bracket(x, &py, z) + bracket(&px, y, z);
        bracket(&px, &py, z) - bracket(x, y, z) - self.psi(z, &a)
    }

    /// `A(X, Y) = [X, ΨY] + [ΨX, Y]`
    pub fn a_tensor(&self, x: &Field, y: &Field, z: &[f64]) -> DVector<f64> {
        let px = self.psi_of(x);
        let py = self.psi_of(y);
        bracket(x, &py, z) + bracket(&px, y, z)
    }

    /// `dη^a(X, Y) = ½ (X(η(Y)) − Y(η(X)) − η([X, Y]))`
    pub fn d_eta(&self, which: usize, x: &Field, y: &Field, z: &[f64]) -> f64 {
        let ey = |w: &[f64]| DVector::from_element(1, self.eta(w, which, &y(w)));
        let ex = |w: &[f64]| DVector::from_element(1, self.eta(w, which, &x(w)));
        let xy = directional(&ey, z, &x(z))[0];
        let yx = directional(&ex, z, &y(z))[0];
        0.5 * (xy - yx - self.eta(z, which, &bracket(x, y, z)))
    }

    /// `S = N_φ + 2 Σ dη^a ⊗ ξ_a`
    pub fn torsion(&self, x: &Field, y: &Field, z: &[f64]) -> DVector<f64> {
        let fx = self.phi_of(x);
        let fy = self.phi_of(y);
        let xy = bracket(x, y, z);
        let inner = bracket(&fx, y, z) + bracket(x, &fy, z);
        let mut s = bracket(&fx, &fy, z) + self.phi(z, &self.phi(z, &xy)) - self.phi(z, &inner);
        for a in 1..=2 {
            s += self.xi(z, a) * (2.0 * self.d_eta(a, x, y, z));
        }
        s
    }
}

/// `D_dir f(z)` by central differences with two Richardson steps.
pub fn directional(f: &dyn Fn(&[f64]) -> DVector<f64>, z: &[f64], dir: &DVector<f64>) -> DVector<f64> {
    let h = super::fd_step(1) / (1.0 + dir.amax());
    let central = |h: f64| {
        let plus: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + h * d).collect();
        let minus: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a - h * d).collect();
        (f(&plus) - f(&minus)) / (2.0 * h)
    };
    let d = [central(h), central(h / 2.0), central(h / 4.0)];
    let r1 = (&d[1] * 4.0 - &d[0]) / 3.0;
    let r2 = (&d[2] * 4.0 - &d[1]) / 3.0;
    (r2 * 16.0 - r1) / 15.0
}

/// `[X, Y] = D_X Y − D_Y X`
pub fn bracket(x: &Field, y: &Field, z: &[f64]) -> DVector<f64> {
    directional(&**y, z, &x(z)) - directional(&**x, z, &y(z))
}
