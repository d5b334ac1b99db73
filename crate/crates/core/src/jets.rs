//! Truncated multivariate Taylor arithmetic over the 2m chart coordinates.
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f / α!` of a scalar
//! function at a base point, for every multi-index of total degree at most
//! its order. Coefficients live in a dense vector laid out by a graded
//! multi-index table, so truncating a jet to a lower order is a prefix slice
//! and multiplication is a convolution over a precomputed pair list.
//!
//! Every tensor quantity in this crate (fundamental tensor, Christoffel
//! symbols, nonlinear connection, curvature) is obtained by differentiating
//! jets, never by finite differences.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Arc, LazyLock, Mutex};


use crate::error::JetError;
use crate::point::PhasePoint;

/// Largest supported jet order.
pub const MAX_ORDER: usize = 6;

/// Exponent vector over the chart coordinates: the first `m` entries refer to
/// `x^i`, the last `m` to `y^i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn new(exponents: Vec<u8>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(nvars: usize) -> Self {
        MultiIndex(vec![0; nvars])
    }

    /// Unit multi-index selecting one derivative in variable `var`.
    pub fn unit(nvars: usize, var: usize) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        MultiIndex(e)
    }

    /// Multi-index from a list of variables, one derivative per entry
    /// (repetitions allowed).
    pub fn from_vars(nvars: usize, vars: &[usize]) -> Self {
        let mut e = vec![0u8; nvars];
        for &v in vars {
            e[v] += 1;
        }
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u8] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `α! = Π α_v!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e as usize)).product()
    }

    pub fn checked_add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Graded multi-index layout shared by every jet with the same number of
/// variables and maximal order.
pub struct JetTable {
    nvars: usize,
    max_order: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `count[d]` = number of multi-indices with degree ≤ d.
    count: Vec<usize>,
    /// Convolution triples `(i, j, k)` with `index[i] + index[j] = index[k]`,
    /// sorted by the degree of `k`.
    pairs: Vec<(u32, u32, u32)>,
    /// `pair_end[d]` = number of triples whose output degree is ≤ d.
    pair_end: Vec<usize>,
    /// `raise[v][i]` = position of `index[i] + e_v`, if within `max_order`.
    raise: Vec<Vec<Option<u32>>>,
}

type TableCache = Mutex<HashMap<(usize, usize), Arc<JetTable>>>;

static TABLES: LazyLock<TableCache> = LazyLock::new(|| Mutex::new(HashMap::new()));

impl JetTable {
    /// Shared table for `nvars` variables up to `max_order`.
    pub fn shared(nvars: usize, max_order: usize) -> Result<Arc<JetTable>, JetError> {
        if max_order > MAX_ORDER {
            return Err(JetError::OrderExceeded {
                requested: max_order,
                available: MAX_ORDER,
            });
        }
        let mut tables = TABLES.lock().expect("jet table cache poisoned");
        Ok(tables
            .entry((nvars, max_order))
            .or_insert_with(|| Arc::new(JetTable::build(nvars, max_order)))
            .clone())
    }

    fn build(nvars: usize, max_order: usize) -> JetTable {
        let mut indices = Vec::new();
        let mut count = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            let mut block = Vec::new();
            compositions(nvars, d, &mut vec![0u8; nvars], 0, &mut block);
            // lexicographically descending inside a degree block: x^1 first
            block.sort_by(|a: &Vec<u8>, b: &Vec<u8>| b.cmp(a));
            indices.extend(block.into_iter().map(MultiIndex));
            count.push(indices.len());
        }
        let lookup: HashMap<MultiIndex, usize> = indices
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();

        let mut pairs = Vec::new();
        for (k, target) in indices.iter().enumerate() {
            // enumerate all sub-multi-indices of target
            let mut sub = vec![0u8; nvars];
            loop {
                let a = MultiIndex(sub.clone());
                let b = MultiIndex(target.0.iter().zip(&sub).map(|(t, s)| t - s).collect());
                pairs.push((lookup[&a] as u32, lookup[&b] as u32, k as u32));
                // odometer increment bounded by target
                let mut v = 0;
                loop {
                    if v == nvars {
                        break;
                    }
                    if sub[v] < target.0[v] {
                        sub[v] += 1;
                        break;
                    }
                    sub[v] = 0;
                    v += 1;
                }
                if v == nvars {
                    break;
                }
            }
        }
        pairs.sort_by_key(|&(_, _, k)| indices[k as usize].degree());
        let mut pair_end = vec![0; max_order + 1];
        for d in 0..=max_order {
            pair_end[d] = pairs.partition_point(|&(_, _, k)| indices[k as usize].degree() <= d);
        }

        let raise = (0..nvars)
            .map(|v| {
                indices
                    .iter()
                    .map(|a| {
                        let mut e = a.0.clone();
                        e[v] += 1;
                        lookup.get(&MultiIndex(e)).map(|&i| i as u32)
                    })
                    .collect()
            })
            .collect();

        JetTable {
            nvars,
            max_order,
            indices,
            lookup,
            count,
            pairs,
            pair_end,
            raise,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of coefficients stored by a jet of the given order.
    pub fn len(&self, order: usize) -> usize {
        self.count[order]
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

fn compositions(nvars: usize, remaining: usize, cur: &mut Vec<u8>, var: usize, out: &mut Vec<Vec<u8>>) {
    if var + 1 == nvars {
        cur[var] = remaining as u8;
        out.push(cur.clone());
        cur[var] = 0;
        return;
    }
    for e in 0..=remaining {
        cur[var] = e as u8;
        compositions(nvars, remaining - e, cur, var + 1, out);
    }
    cur[var] = 0;
}

/// Truncated Taylor expansion of a scalar function.
#[derive(Clone)]
pub struct Jet {
    table: Arc<JetTable>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("value", &self.value())
            .field("len", &self.coeffs.len())
            .finish()
    }
}

impl Jet {
    pub fn constant(table: &Arc<JetTable>, order: usize, value: f64) -> Jet {
        let mut coeffs = vec![0.0; table.len(order)];
        coeffs[0] = value;
        Jet {
            table: table.clone(),
            order,
            coeffs,
        }
    }

    /// The coordinate function `z_var` expanded around `value`.
    pub fn variable(table: &Arc<JetTable>, order: usize, var: usize, value: f64) -> Jet {
        let mut j = Jet::constant(table, order, value);
        if order >= 1 {
            let pos = table.position(&MultiIndex::unit(table.nvars, var)).expect("unit index");
            j.coeffs[pos] = 1.0;
        }
        j
    }

    pub fn table(&self) -> &Arc<JetTable> {
        &self.table
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient `∂^α f / α!`; zero above the jet order is reported
    /// as an error rather than silently returned.
    pub fn coeff(&self, alpha: &MultiIndex) -> Result<f64, JetError> {
        let d = alpha.degree();
        if d > self.order {
            return Err(JetError::OrderExceeded {
                requested: d,
                available: self.order,
            });
        }
        let pos = self.table.position(alpha).ok_or(JetError::DimensionMismatch {
            expected: self.table.nvars,
            found: alpha.nvars(),
        })?;
        Ok(self.coeffs[pos])
    }

    /// Mixed partial derivative `∂^α f` at the base point.
    pub fn partial(&self, alpha: &MultiIndex) -> Result<f64, JetError> {
        Ok(alpha.factorial() * self.coeff(alpha)?)
    }

    /// Same jet with the order lowered to `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            table: self.table.clone(),
            order,
            coeffs: self.coeffs[..self.table.len(order)].to_vec(),
        }
    }

    /// Jet of `∂f/∂z_var`, one order lower.
    pub fn derivative(&self, var: usize) -> Result<Jet, JetError> {
        if self.order == 0 {
            return Err(JetError::OrderExceeded {
                requested: 1,
                available: 0,
            });
        }
        let order = self.order - 1;
        let n = self.table.len(order);
        let raise = &self.table.raise[var];
        let mut coeffs = vec![0.0; n];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let up = raise[i].expect("raised index inside table") as usize;
            let mult = self.table.indices[i].0[var] as f64 + 1.0;
            *c = mult * self.coeffs[up];
        }
        Ok(Jet {
            table: self.table.clone(),
            order,
            coeffs,
        })
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            table: self.table.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.table, &other.table), "jets from different tables");
        let order = self.order.min(other.order);
        let n = self.table.len(order);
        Jet {
            table: self.table.clone(),
            order,
            coeffs: (0..n).map(|i| f(self.coeffs[i], other.coeffs[i])).collect(),
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.table, &other.table), "jets from different tables");
        let order = self.order.min(other.order);
        let mut coeffs = vec![0.0; self.table.len(order)];
        for &(i, j, k) in &self.table.pairs[..self.table.pair_end[order]] {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            table: self.table.clone(),
            order,
            coeffs,
        }
    }

    /// `f(c + h) = Σ_k f^(k)(c)/k! · h^k` where `derivs[k] = f^(k)(c)` and
    /// `c` is the constant term of `self`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.order;
        debug_assert!(derivs.len() > order);
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = Jet::constant(&self.table, order, derivs[order] / factorial(order));
        for k in (0..order).rev() {
            acc = acc.product(&h);
            acc.coeffs[0] += derivs[k] / factorial(k);
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let c = self.value();
        if c == 0.0 || !c.is_finite() {
            return Err(JetError::Singular { value: c });
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut dk = 1.0 / c;
        for k in 0..=self.order {
            d.push(dk);
            dk *= -((k + 1) as f64) / c;
        }
        Ok(self.compose(&d))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self * &other.recip()?)
    }

    /// Real power `f^r` for a positive constant term.
    pub fn powf(&self, r: f64) -> Result<Jet, JetError> {
        let c = self.value();
        if c <= 0.0 {
            return Err(JetError::Domain {
                operation: "powf",
                value: c,
            });
        }
        let mut d = Vec::with_capacity(self.order + 1);
        let mut coef = 1.0;
        for k in 0..=self.order {
            d.push(coef * c.powf(r - k as f64));
            coef *= r - k as f64;
        }
        Ok(self.compose(&d))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let c = self.value();
        if c <= 0.0 {
            return Err(JetError::Domain {
                operation: "sqrt",
                value: c,
            });
        }
        self.powf(0.5)
    }

    /// Integer power by repeated multiplication; negative exponents go
    /// through the reciprocal.
    pub fn powi(&self, n: i32) -> Result<Jet, JetError> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Jet::constant(&self.table, self.order, 1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.product(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.product(&sq);
            }
        }
        Ok(acc)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.order + 1])
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let c = self.value();
        if c <= 0.0 {
            return Err(JetError::Domain {
                operation: "ln",
                value: c,
            });
        }
        let mut d = vec![c.ln()];
        let mut dk = 1.0 / c;
        for k in 1..=self.order {
            d.push(dk);
            dk *= -(k as f64) / c;
        }
        Ok(self.compose(&d))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &'a Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &'a Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        self.product(rhs)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &'a Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Jet> for &'a Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += rhs;
        j
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        *self = &*self - rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
    }
}

/// Sum of jets; `None` for an empty iterator.
pub fn sum<'a>(jets: impl IntoIterator<Item = &'a Jet>) -> Option<Jet> {
    let mut it = jets.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, j| acc + j))
}

/// A jet tied to the phase-space point it was expanded at.
#[derive(Clone, Debug)]
pub struct TaylorJet {
    pub basepoint: PhasePoint,
    pub jet: Jet,
}

impl TaylorJet {
    pub fn order(&self) -> usize {
        self.jet.order()
    }

    pub fn value(&self) -> f64 {
        self.jet.value()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Result<f64, JetError> {
        self.jet.coeff(alpha)
    }
}

/// The 2m coordinate jets `(x^1..x^m, y^1..y^m)` at `p`.
pub fn coordinate_jets(p: &PhasePoint, order: usize) -> Result<Vec<Jet>, JetError> {
    if order > MAX_ORDER {
        return Err(JetError::OrderExceeded {
            requested: order,
            available: MAX_ORDER,
        });
    }
    let coords = p.coords();
    let table = JetTable::shared(coords.len(), MAX_ORDER)?;
    Ok(coords
        .iter()
        .enumerate()
        .map(|(v, &c)| Jet::variable(&table, order, v, c))
        .collect())
}

/// Expands `f` at `p` to the given order. `f` receives the coordinate jets
/// and must be written with jet arithmetic.
pub fn jet_lift<F>(f: F, p: &PhasePoint, order: usize) -> Result<TaylorJet, JetError>
where
    F: Fn(&[Jet]) -> Result<Jet, JetError>,
{
    let vars = coordinate_jets(p, order)?;
    let jet = f(&vars)?;
    Ok(TaylorJet {
        basepoint: p.clone(),
        jet,
    })
}

/// Mixed partial `∂^α f(basepoint)` from a lifted jet.
pub fn partial(j: &TaylorJet, alpha: &MultiIndex) -> Result<f64, JetError> {
    j.jet.partial(alpha)
}
