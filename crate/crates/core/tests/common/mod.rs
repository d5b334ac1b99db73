//! Independent oracles for the integration tests.
//!
//! Metrics are re-stated here in plain `f64` arithmetic, and derivatives
//! come from Chebyshev least-squares fits of one-variable restrictions, so
//! nothing below touches the jet engine.
#![allow(dead_code)]

pub mod frame;

use finsler_cr::geometry::Family;
use finsler_cr::FinslerSpec;
use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn sigma(linear: &[f64], quadratic: f64, x: &[f64]) -> f64 {
    dot(linear, x) + quadratic * dot(x, x)
}

/// `F²(x, y)` straight from the family formula.
pub fn plain_f2(spec: &FinslerSpec, x: &[f64], y: &[f64]) -> f64 {
    let yy = dot(y, y);
    match &spec.family {
        Family::Euclidean => yy,
        Family::RiemannianSpaceForm { curvature } => {
            let d = 1.0 + curvature * dot(x, x);
            4.0 * yy / (d * d)
        }
        Family::RiemannianGeneral { conformal, shear } => {
            let s = sigma(&conformal.linear, conformal.quadratic, x);
            let xy = dot(x, y);
            (2.0 * s).exp() * (yy + shear * xy * xy)
        }
        Family::Randers { b, conformal } => {
            let s = sigma(&conformal.linear, conformal.quadratic, x);
            let f = s.exp() * yy.sqrt() + dot(b, y);
            f * f
        }
        Family::LocallyMinkowskiRanders { b } => {
            let f = yy.sqrt() + dot(b, y);
            f * f
        }
    }
}

/// Fit resolution for direct use and for the nested oracles.
const FINE: (usize, usize) = (24, 14);
const NESTED: (usize, usize) = (16, 10);

/// Taylor coefficients `f^(k)(0)/k!`, `k ≤ order`, from a least-squares
/// polynomial fit on Chebyshev nodes in `[−r, r]`.
pub fn taylor_1d(f: impl Fn(f64) -> f64, r: f64, order: usize) -> Vec<f64> {
    let c = fit(|t| DVector::from_element(1, f(t)), r, order, FINE);
    c.row(0).iter().copied().collect()
}

fn nested_1d(f: impl Fn(f64) -> f64, r: f64, order: usize) -> Vec<f64> {
    let c = fit(|t| DVector::from_element(1, f(t)), r, order, NESTED);
    c.row(0).iter().copied().collect()
}

/// Component-wise [`taylor_1d`] of a vector-valued function; column `k`
/// holds the order-`k` coefficients.
pub fn taylor_vec(f: impl Fn(f64) -> DVector<f64>, r: f64, order: usize) -> DMatrix<f64> {
    fit(f, r, order, NESTED)
}

fn fit(f: impl Fn(f64) -> DVector<f64>, r: f64, order: usize, (nodes, degree): (usize, usize)) -> DMatrix<f64> {
    let ts: Vec<f64> = (0..nodes)
        .map(|i| r * (std::f64::consts::PI * (i as f64 + 0.5) / nodes as f64).cos())
        .collect();
    let samples: Vec<DVector<f64>> = ts.iter().map(|&t| f(t)).collect();
    let dim = samples[0].len();
    // fit in the scaled variable s = t/r for conditioning
    let a = DMatrix::from_fn(nodes, degree + 1, |i, k| (ts[i] / r).powi(k as i32));
    let b = DMatrix::from_fn(nodes, dim, |i, c| samples[i][c]);
    let c = a.svd(true, true).solve(&b, 1e-14).expect("svd solve");
    DMatrix::from_fn(dim, order + 1, |d, k| c[(k, d)] / r.powi(k as i32))
}

/// Point in phase space as `(x, y)` slices of one coordinate vector.
pub fn split(z: &[f64]) -> (&[f64], &[f64]) {
    z.split_at(z.len() / 2)
}

pub fn f2_at(spec: &FinslerSpec, z: &[f64]) -> f64 {
    let (x, y) = split(z);
    plain_f2(spec, x, y)
}

fn shifted(z: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    z.iter().zip(dir).map(|(a, d)| a + t * d).collect()
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

const R: f64 = 0.02;

/// First derivative of `f` at `z` along `dir`.
pub fn d1(f: &dyn Fn(&[f64]) -> f64, z: &[f64], dir: &[f64]) -> f64 {
    nested_1d(|t| f(&shifted(z, dir, t)), R, 1)[1]
}

/// `g_ij = ½ ∂²F²/∂y^i∂y^j` by polarization of second Taylor coefficients.
pub fn metric(spec: &FinslerSpec, z: &[f64]) -> DMatrix<f64> {
    let n = z.len();
    let m = n / 2;
    let c2 = |dir: &[f64]| nested_1d(|t| f2_at(spec, &shifted(z, dir, t)), R, 2)[2];
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        g[(i, i)] = c2(&unit(n, m + i));
    }
    for i in 0..m {
        for j in i + 1..m {
            let mut e = unit(n, m + i);
            e[m + j] = 1.0;
            let v = 0.5 * (c2(&e) - g[(i, i)] - g[(j, j)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Spray coefficients `G^i = ¼ g^{il}(y^k ∂²F²/∂x^k∂y^l − ∂F²/∂x^l)`.
pub fn spray(spec: &FinslerSpec, z: &[f64]) -> DVector<f64> {
    let n = z.len();
    let m = n / 2;
    let (_, y) = split(z);
    let ginv = metric(spec, z).try_inverse().expect("metric invertible");
    let f = |w: &[f64]| f2_at(spec, w);
    let mut flow = vec![0.0; n];
    flow[..m].copy_from_slice(y);
    let rhs = DVector::from_fn(m, |l, _| {
        let dy = |w: &[f64]| d1(&f, w, &unit(n, m + l));
        d1(&dy, z, &flow) - d1(&f, z, &unit(n, l))
    });
    ginv * rhs * 0.25
}

/// `N^i_j = ∂G^i/∂y^j`.
pub fn connection(spec: &FinslerSpec, z: &[f64]) -> DMatrix<f64> {
    let n = z.len();
    let m = n / 2;
    let mut out = DMatrix::zeros(m, m);
    for j in 0..m {
        let e = unit(n, m + j);
        let c = taylor_vec(|t| spray(spec, &shifted(z, &e, t)), R, 1);
        out.set_column(j, &c.column(1));
    }
    out
}

/// `R^i_jk = δ_k N^i_j − δ_j N^i_k` as `r[i][j][k]`.
pub fn curvature(spec: &FinslerSpec, z: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let n = z.len();
    let m = n / 2;
    let nz = connection(spec, z);
    // δ_k = ∂_{x^k} − N^a_k ∂_{y^a}
    let delta_dir = |k: usize| {
        let mut d = unit(n, k);
        for a in 0..m {
            d[m + a] = -nz[(a, k)];
        }
        d
    };
    let mut dn = vec![DMatrix::zeros(m, m); m];
    for (k, slot) in dn.iter_mut().enumerate() {
        let dir = delta_dir(k);
        // column-major flattening of N
        let c = taylor_vec(|t| DVector::from_column_slice(connection(spec, &shifted(z, &dir, t)).as_slice()), R, 1);
        *slot = DMatrix::from_column_slice(m, m, c.column(1).as_slice());
    }
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (0..m).map(|k| dn[k][(i, j)] - dn[j][(i, k)]).collect())
                .collect()
        })
        .collect()
}

/// Lowered `y_i = g_ij y^j`.
pub fn lower(spec: &FinslerSpec, z: &[f64]) -> Vec<f64> {
    let (_, y) = split(z);
    let g = metric(spec, z);
    (g * DVector::from_column_slice(y)).as_slice().to_vec()
}

/// `λ(δ^i_k y_j − δ^i_j y_k)`
pub fn flag_form(lambda: f64, y_low: &[f64], i: usize, j: usize, k: usize) -> f64 {
    let mut v = 0.0;
    if i == k {
        v += y_low[j];
    }
    if i == j {
        v -= y_low[k];
    }
    lambda * v
}

/// All multisets of size `k` over `n` variables, as sorted index lists.
pub fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in multisets(n, k - 1) {
        let start = rest.last().copied().unwrap_or(0);
        for v in start..n {
            let mut next = rest.clone();
            next.push(v);
            out.push(next);
        }
    }
    out
}

pub fn catalog_with_poincare(m: usize) -> Vec<FinslerSpec> {
    let mut s = FinslerSpec::catalog(m);
    s.push(FinslerSpec::poincare(m));
    s
}

/// Step for a central-difference derivative of the given degree; large
/// enough that rounding stays below the Richardson-corrected truncation.
pub fn fd_step(degree: usize) -> f64 {
    [1e-3, 1e-3, 2e-3, 5e-3, 1.2e-2, 2.5e-2][degree.min(5)]
}

/// `∂^α f(z)` by nested central differences (`vars` lists one variable per
/// derivative), with two Richardson steps (error `O(h⁶)`).
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, z: &[f64], vars: &[usize]) -> f64 {
    let h = fd_step(vars.len());
    let d: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|s| central(f, z, vars, h * s)).collect();
    let r1 = [(4.0 * d[1] - d[0]) / 3.0, (4.0 * d[2] - d[1]) / 3.0];
    (16.0 * r1[1] - r1[0]) / 15.0
}

fn central(f: &dyn Fn(&[f64]) -> f64, z: &[f64], vars: &[usize], h: f64) -> f64 {
    match vars.split_first() {
        None => f(z),
        Some((&v, rest)) => {
            let mut plus = z.to_vec();
            let mut minus = z.to_vec();
            plus[v] += h;
            minus[v] -= h;
            (central(f, &plus, rest, h) - central(f, &minus, rest, h)) / (2.0 * h)
        }
    }
}
