//! Truncated multivariate power series over exact rationals.
//!
//! A [`Series`] in `m` variables carries a truncation order `N`: it stores
//! coefficients of monomials of total degree at most `N` and every binary
//! operation works at the smaller of the two orders. Differentiation lowers
//! the order by one, so a series never exposes coefficients that were not
//! determined by its inputs.
//!
//! Monomials are numbered once per `(m, N)` in graded order (then by the
//! exponent of the last variable, then lexicographically descending), so the
//! monomials of degree `≤ N'` form a prefix of those of degree `≤ N` and
//! indices agree between spaces with the same variable count.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{frac, int, QMatrix, Scalar};

/// Packed exponent vector: eight bits per variable.
type Key = u128;

const MAX_VARS: usize = 16;

/// Numbering of all monomials in `nvars` variables up to `max_degree`.
pub struct MonomialSpace {
    nvars: usize,
    max_degree: usize,
    exps: Vec<Vec<u8>>,
    keys: Vec<Key>,
    degs: Vec<u8>,
    /// `degree_start[d]` is the index of the first monomial of degree `d`.
    degree_start: Vec<usize>,
    index: HashMap<Key, u32>,
}

impl MonomialSpace {
    fn build(nvars: usize, max_degree: usize) -> Self {
        assert!(nvars <= MAX_VARS, "at most {MAX_VARS} variables supported");
        let mut all = Vec::new();
        let mut cur = vec![0u8; nvars];
        enumerate(&mut cur, 0, max_degree, &mut all);
        all.sort_by(|a: &Vec<u8>, b: &Vec<u8>| {
            let da: usize = a.iter().map(|&e| e as usize).sum();
            let db: usize = b.iter().map(|&e| e as usize).sum();
            da.cmp(&db).then_with(|| a.last().cmp(&b.last())).then_with(|| b.cmp(a))
        });
        let keys: Vec<Key> = all.iter().map(|e| pack(e)).collect();
        let degs: Vec<u8> = all.iter().map(|e| e.iter().sum()).collect();
        let mut degree_start = vec![0; max_degree + 2];
        for d in 0..=max_degree + 1 {
            degree_start[d] = degs.iter().position(|&x| x as usize >= d).unwrap_or(all.len());
        }
        let index = keys.iter().enumerate().map(|(i, &k)| (k, i as u32)).collect();
        MonomialSpace { nvars, max_degree, exps: all, keys, degs, degree_start, index }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of monomials of degree `≤ order`.
    pub fn count(&self, order: usize) -> usize {
        self.degree_start[order.min(self.max_degree) + 1]
    }

    pub fn exponents(&self, idx: u32) -> &[u8] {
        &self.exps[idx as usize]
    }

    pub fn degree(&self, idx: u32) -> usize {
        self.degs[idx as usize] as usize
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<u32> {
        self.index.get(&pack(exps)).copied()
    }

    /// Monomials of exactly degree `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        if d > self.max_degree {
            return self.exps.len()..self.exps.len();
        }
        self.degree_start[d]..self.degree_start[d + 1]
    }
}

fn enumerate(cur: &mut Vec<u8>, var: usize, budget: usize, out: &mut Vec<Vec<u8>>) {
    if var == cur.len() {
        out.push(cur.clone());
        return;
    }
    for e in 0..=budget {
        cur[var] = e as u8;
        enumerate(cur, var + 1, budget - e, out);
    }
    cur[var] = 0;
}

fn pack(exps: &[u8]) -> Key {
    exps.iter().enumerate().fold(0, |acc, (i, &e)| acc | ((e as Key) << (8 * i)))
}

/// Shared monomial numbering for `(nvars, max_degree)`.
pub fn space(nvars: usize, max_degree: usize) -> Arc<MonomialSpace> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialSpace>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("monomial cache poisoned");
    guard.entry((nvars, max_degree)).or_insert_with(|| Arc::new(MonomialSpace::build(nvars, max_degree))).clone()
}

/// Truncated power series in `nvars` variables, reliable through `order`.
#[derive(Clone)]
pub struct Series {
    space: Arc<MonomialSpace>,
    order: usize,
    /// Sorted by monomial index; no zero coefficients.
    terms: Vec<(u32, Scalar)>,
}

impl Series {
    pub fn zero(nvars: usize, order: usize) -> Self {
        Series { space: space(nvars, order), order, terms: Vec::new() }
    }

    pub fn constant(nvars: usize, order: usize, c: Scalar) -> Self {
        let mut s = Self::zero(nvars, order);
        if !c.is_zero() {
            s.terms.push((0, c));
        }
        s
    }

    pub fn one(nvars: usize, order: usize) -> Self {
        Self::constant(nvars, order, Scalar::one())
    }

    /// The coordinate function `x_i` (0-based).
    pub fn var(nvars: usize, order: usize, i: usize) -> Self {
        let mut e = vec![0u8; nvars];
        e[i] = 1;
        Self::monomial(nvars, order, &e, Scalar::one())
    }

    pub fn monomial(nvars: usize, order: usize, exps: &[u8], c: Scalar) -> Self {
        Self::from_terms(nvars, order, [(exps.to_vec(), c)])
    }

    /// Builds a series from `(exponents, coefficient)` pairs, summing
    /// duplicates and dropping anything above `order`.
    pub fn from_terms(nvars: usize, order: usize, terms: impl IntoIterator<Item = (Vec<u8>, Scalar)>) -> Self {
        let sp = space(nvars, order);
        let mut acc: Vec<Scalar> = vec![Scalar::zero(); sp.count(order)];
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent vector length");
            if e.iter().map(|&x| x as usize).sum::<usize>() > order {
                continue;
            }
            let idx = sp.index_of(&e).expect("monomial within order");
            acc[idx as usize] += c;
        }
        Series { space: sp, order, terms: collect_dense(acc) }
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn space(&self) -> &Arc<MonomialSpace> {
        &self.space
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Nonzero terms as `(exponents, coefficient)` in monomial order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u8], &Scalar)> + '_ {
        self.terms.iter().map(|(i, c)| (self.space.exponents(*i), c))
    }

    pub fn coeff(&self, exps: &[u8]) -> Scalar {
        match self.space.index_of(exps) {
            Some(idx) => self.coeff_at(idx),
            None => Scalar::zero(),
        }
    }

    pub(crate) fn coeff_at(&self, idx: u32) -> Scalar {
        match self.terms.binary_search_by_key(&idx, |(i, _)| *i) {
            Ok(p) => self.terms[p].1.clone(),
            Err(_) => Scalar::zero(),
        }
    }

    pub fn eval_at_origin(&self) -> Scalar {
        self.coeff_at(0)
    }

    /// Highest degree carrying a nonzero coefficient.
    pub fn max_nonzero_degree(&self) -> Option<usize> {
        self.terms.last().map(|(i, _)| self.space.degree(*i))
    }

    /// Lowest degree carrying a nonzero coefficient.
    pub fn min_nonzero_degree(&self) -> Option<usize> {
        self.terms.iter().map(|(i, _)| self.space.degree(*i)).min()
    }

    /// Homogeneous part of degree `d` (same order as `self`).
    pub fn jet_extract(&self, d: usize) -> Series {
        let terms = self.terms.iter().filter(|(i, _)| self.space.degree(*i) == d).cloned().collect();
        Series { space: self.space.clone(), order: self.order, terms }
    }

    /// Drops every coefficient above `order` (no-op when `order ≥ self.order`).
    pub fn truncate(&self, order: usize) -> Series {
        if order >= self.order {
            return self.clone();
        }
        let n = self.space.count(order) as u32;
        let terms = self.terms.iter().filter(|(i, _)| *i < n).cloned().collect();
        Series { space: self.space.clone(), order, terms }
    }

    /// Re-declares the reliable order, which must not exceed the current one
    /// unless the series is known exactly (e.g. a polynomial).
    pub fn with_order(&self, order: usize) -> Series {
        if order <= self.order {
            return self.truncate(order);
        }
        let sp = if order <= self.space.max_degree { self.space.clone() } else { space(self.nvars(), order) };
        Series { space: sp, order, terms: self.terms.clone() }
    }

    fn check_vars(&self, rhs: &Series) -> Result<()> {
        if self.nvars() != rhs.nvars() {
            return Err(Error::VariableMismatch(self.nvars(), rhs.nvars()));
        }
        Ok(())
    }

    fn pick_space(&self, rhs: &Series) -> Arc<MonomialSpace> {
        if self.space.max_degree >= rhs.space.max_degree {
            self.space.clone()
        } else {
            rhs.space.clone()
        }
    }

    pub fn try_add(&self, rhs: &Series) -> Result<Series> {
        self.check_vars(rhs)?;
        Ok(self.merge(rhs, false))
    }

    pub fn try_sub(&self, rhs: &Series) -> Result<Series> {
        self.check_vars(rhs)?;
        Ok(self.merge(rhs, true))
    }

    fn merge(&self, rhs: &Series, negate: bool) -> Series {
        let order = self.order.min(rhs.order);
        let sp = self.pick_space(rhs);
        let limit = sp.count(order) as u32;
        let mut out = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let (a, b) = (&self.terms, &rhs.terms);
        let (mut ia, mut ib) = (0, 0);
        let flip = |c: &Scalar| if negate { -c.clone() } else { c.clone() };
        while ia < a.len() || ib < b.len() {
            let next = if ib == b.len() || (ia < a.len() && a[ia].0 < b[ib].0) {
                ia += 1;
                (a[ia - 1].0, a[ia - 1].1.clone())
            } else if ia == a.len() || b[ib].0 < a[ia].0 {
                ib += 1;
                (b[ib - 1].0, flip(&b[ib - 1].1))
            } else {
                ia += 1;
                ib += 1;
                let (x, y) = (&a[ia - 1].1, &b[ib - 1].1);
                (a[ia - 1].0, if negate { x - y } else { x + y })
            };
            if next.0 >= limit {
                break;
            }
            if !next.1.is_zero() {
                out.push(next);
            }
        }
        Series { space: sp, order, terms: out }
    }

    pub fn try_mul(&self, rhs: &Series) -> Result<Series> {
        self.check_vars(rhs)?;
        let order = self.order.min(rhs.order);
        if self.is_constant() {
            return Ok(rhs.scale(&self.eval_at_origin()).truncate(order));
        }
        if rhs.is_constant() {
            return Ok(self.scale(&rhs.eval_at_origin()).truncate(order));
        }
        let sp = self.pick_space(rhs);
        let mut acc: Vec<Scalar> = vec![Scalar::zero(); sp.count(order)];
        for (ia, ca) in &self.terms {
            let ka = sp.keys[*ia as usize];
            let da = sp.degs[*ia as usize] as usize;
            if da > order {
                break;
            }
            for (ib, cb) in &rhs.terms {
                let db = sp.degs[*ib as usize] as usize;
                if da + db > order {
                    break;
                }
                let idx = sp.index[&(ka + sp.keys[*ib as usize])];
                acc[idx as usize] += ca * cb;
            }
        }
        Ok(Series { space: sp, order, terms: collect_dense(acc) })
    }

    fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0 == 0)
    }

    pub fn scale(&self, s: &Scalar) -> Series {
        if s.is_zero() {
            return Series { space: self.space.clone(), order: self.order, terms: Vec::new() };
        }
        let terms = self.terms.iter().map(|(i, c)| (*i, c * s)).collect();
        Series { space: self.space.clone(), order: self.order, terms }
    }

    /// Formal partial derivative in variable `i` (0-based); the result is
    /// reliable through `order − 1`.
    pub fn try_derive(&self, i: usize) -> Result<Series> {
        if i >= self.nvars() {
            return Err(Error::BadIndex { index: i, nvars: self.nvars() });
        }
        if self.order == 0 {
            return Err(Error::OrderTooSmall { found: 0, min: 1 });
        }
        let sp = &self.space;
        let shift: Key = 1 << (8 * i);
        let mut terms: Vec<(u32, Scalar)> = self
            .terms
            .iter()
            .filter_map(|(idx, c)| {
                let e = sp.exps[*idx as usize][i];
                if e == 0 {
                    return None;
                }
                let j = sp.index[&(sp.keys[*idx as usize] - shift)];
                Some((j, c * int(e as i64)))
            })
            .collect();
        terms.sort_unstable_by_key(|(j, _)| *j);
        Ok(Series { space: self.space.clone(), order: self.order - 1, terms })
    }

    pub fn derive(&self, i: usize) -> Series {
        self.try_derive(i).expect("derive")
    }

    /// Multiplicative inverse through the truncation order.
    pub fn invert(&self) -> Result<Series> {
        let a0 = self.eval_at_origin();
        if a0.is_zero() {
            return Err(Error::ZeroConstantTerm);
        }
        let inv0 = a0.recip();
        // 1/a = inv0 · Σ_k u^k with u = 1 − a·inv0 nilpotent
        let one = Series::one(self.nvars(), self.order);
        let u = one.try_sub(&self.scale(&inv0))?;
        let mut acc = one.clone();
        for _ in 0..self.order {
            acc = one.try_add(&u.try_mul(&acc)?)?;
        }
        Ok(acc.scale(&inv0))
    }

    /// `f(L·x)`: substitutes `x_i ↦ Σ_j L_ij x_j`.
    pub fn compose_linear(&self, l: &QMatrix) -> Series {
        let m = self.nvars();
        assert!(l.rows() == m && l.cols() == m);
        let order = self.order;
        let forms: Vec<Series> = (0..m)
            .map(|i| {
                Series::from_terms(
                    m,
                    order,
                    (0..m).map(|j| {
                        let mut e = vec![0u8; m];
                        e[j] = 1;
                        (e, l[(i, j)].clone())
                    }),
                )
            })
            .collect();
        let mut powers: Vec<Vec<Series>> = Vec::with_capacity(m);
        for f in &forms {
            let mut p = vec![Series::one(m, order)];
            for k in 1..=order {
                let next = &p[k - 1] * f;
                p.push(next);
            }
            powers.push(p);
        }
        let mut out = Series::zero(m, order);
        for (exps, c) in self.terms() {
            let mut t = Series::constant(m, order, c.clone());
            for (i, &e) in exps.iter().enumerate() {
                if e > 0 {
                    t = &t * &powers[i][e as usize];
                }
            }
            out = &out + &t;
        }
        out
    }
}

fn collect_dense(acc: Vec<Scalar>) -> Vec<(u32, Scalar)> {
    acc.into_iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (i as u32, c)).collect()
}

impl PartialEq for Series {
    fn eq(&self, other: &Self) -> bool {
        self.nvars() == other.nvars() && self.order == other.order && self.terms == other.terms
    }
}

impl Eq for Series {}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} + O({})", self.order + 1)
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (exps, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &e) in exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{e}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

macro_rules! series_binop {
    ($tr:ident, $method:ident, $imp:ident) => {
        impl std::ops::$tr<&Series> for &Series {
            type Output = Series;
            fn $method(self, rhs: &Series) -> Series {
                self.$imp(rhs).expect(concat!("series ", stringify!($method)))
            }
        }
        impl std::ops::$tr<Series> for Series {
            type Output = Series;
            fn $method(self, rhs: Series) -> Series {
                (&self).$imp(&rhs).expect(concat!("series ", stringify!($method)))
            }
        }
    };
}

series_binop!(Add, add, try_add);
series_binop!(Sub, sub, try_sub);
series_binop!(Mul, mul, try_mul);

impl std::ops::Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(&int(-1))
    }
}

/// Dense matrix of series sharing a variable count.
#[derive(Clone, PartialEq, Eq)]
pub struct SeriesMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Series>,
}

impl SeriesMatrix {
    pub fn zeros(nvars: usize, order: usize, rows: usize, cols: usize) -> Self {
        SeriesMatrix { rows, cols, data: vec![Series::zero(nvars, order); rows * cols] }
    }

    pub fn identity(nvars: usize, order: usize, n: usize) -> Self {
        Self::from_constant(nvars, order, &QMatrix::identity(n))
    }

    pub fn from_constant(nvars: usize, order: usize, c: &QMatrix) -> Self {
        Self::from_fn(c.rows(), c.cols(), |i, j| Series::constant(nvars, order, c[(i, j)].clone()))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Series) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        SeriesMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.data.first().map_or(0, Series::nvars)
    }

    /// Smallest reliable order among the entries.
    pub fn order(&self) -> usize {
        self.data.iter().map(Series::order).min().unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> &Series {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, s: Series) {
        self.data[i * self.cols + j] = s;
    }

    pub fn entries(&self) -> &[Series] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(&Series) -> Series) -> SeriesMatrix {
        SeriesMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn transpose(&self) -> SeriesMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn eval_at_origin(&self) -> QMatrix {
        QMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval_at_origin())
    }

    pub fn truncate(&self, order: usize) -> SeriesMatrix {
        self.map(|s| s.truncate(order))
    }

    pub fn jet_extract(&self, d: usize) -> SeriesMatrix {
        self.map(|s| s.jet_extract(d))
    }

    pub fn add(&self, rhs: &SeriesMatrix) -> SeriesMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + rhs.get(i, j))
    }

    pub fn sub(&self, rhs: &SeriesMatrix) -> SeriesMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - rhs.get(i, j))
    }

    pub fn scale(&self, s: &Scalar) -> SeriesMatrix {
        self.map(|x| x.scale(s))
    }

    pub fn scale_series(&self, s: &Series) -> SeriesMatrix {
        self.map(|x| x * s)
    }

    pub fn mul(&self, rhs: &SeriesMatrix) -> SeriesMatrix {
        assert_eq!(self.cols, rhs.rows, "series matrix product shape mismatch");
        let order = self.order().min(rhs.order());
        let nv = self.nvars();
        Self::from_fn(self.rows, rhs.cols, |i, j| {
            let mut acc = Series::zero(nv, order);
            for k in 0..self.cols {
                let a = self.get(i, k);
                let b = rhs.get(k, j);
                if !a.is_zero() && !b.is_zero() {
                    acc = &acc + &(a * b);
                }
            }
            acc
        })
    }

    /// Multiplies on the left by a constant matrix.
    pub fn left_mul_constant(&self, c: &QMatrix) -> SeriesMatrix {
        let order = self.order();
        let nv = self.nvars();
        Self::from_fn(c.rows(), self.cols, |i, j| {
            let mut acc = Series::zero(nv, order);
            for k in 0..c.cols() {
                if !c[(i, k)].is_zero() {
                    acc = &acc + &self.get(k, j).scale(&c[(i, k)]);
                }
            }
            acc
        })
    }

    pub fn right_mul_constant(&self, c: &QMatrix) -> SeriesMatrix {
        self.transpose().left_mul_constant(&c.transpose()).transpose()
    }

    /// Inverse through the truncation order; the constant term must be invertible.
    pub fn inverse(&self) -> Result<SeriesMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch { expected: self.rows, found: self.cols });
        }
        let n = self.rows;
        let order = self.order();
        let nv = self.nvars();
        let x0 = self.eval_at_origin().inverse()?;
        // M·X0 = I − E with E nilpotent, so M⁻¹ = X0 · Σ_k E^k
        let id = SeriesMatrix::identity(nv, order, n);
        let e = id.sub(&self.right_mul_constant(&x0));
        let mut acc = id.clone();
        for _ in 0..order {
            acc = id.add(&e.mul(&acc));
        }
        Ok(acc.left_mul_constant(&x0))
    }

    /// Square root with identity constant term, computed degree by degree
    /// from `2·S_d + Σ_{0<j<d} S_j S_{d−j} = M_d`.
    pub fn sqrt(&self) -> Result<SeriesMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch { expected: self.rows, found: self.cols });
        }
        if !self.eval_at_origin().is_identity() {
            return Err(Error::SqrtConstantTerm);
        }
        let n = self.rows;
        let order = self.order();
        let nv = self.nvars();
        let half = frac(1, 2);
        let mut parts: Vec<SeriesMatrix> = vec![SeriesMatrix::identity(nv, order, n)];
        for d in 1..=order {
            let mut rhs = self.jet_extract(d);
            for j in 1..d {
                rhs = rhs.sub(&parts[j].mul(&parts[d - j]).jet_extract(d));
            }
            parts.push(rhs.scale(&half));
        }
        let mut acc = parts[0].clone();
        for p in &parts[1..] {
            acc = acc.add(p);
        }
        Ok(acc)
    }

    /// `f(L·x)` applied entrywise.
    pub fn compose_linear(&self, l: &QMatrix) -> SeriesMatrix {
        self.map(|s| s.compose_linear(l))
    }
}

impl fmt::Debug for SeriesMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut l = f.debug_list();
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            l.entry(&row);
        }
        l.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize, n: usize) -> Series {
        Series::var(2, n, i)
    }

    fn c(v: Scalar, n: usize) -> Series {
        Series::constant(2, n, v)
    }

    #[test]
    fn products_and_truncation() {
        let one = c(int(1), 2);
        let p = &(&one + &x(0, 2)) * &(&one - &x(0, 2));
        let expect = &one - &(&x(0, 2) * &x(0, 2));
        assert_eq!(p, expect);
        assert!((&x(0, 1) * &x(1, 1)).is_zero());

        let n = 5;
        let mut geo = Series::zero(2, n);
        let mut pow = c(int(1), n);
        for _ in 0..=n {
            geo = &geo + &pow;
            pow = &pow * &x(0, n);
        }
        assert_eq!(&geo * &(&c(int(1), n) - &x(0, n)), c(int(1), n));
    }

    #[test]
    fn derivatives() {
        let x1sq = &x(0, 3) * &x(0, 3);
        assert_eq!(x1sq.derive(0), x(0, 2).scale(&int(2)));
        assert_eq!((&x(0, 3) * &x(1, 3)).derive(1), x(0, 2));
        assert_eq!(x(0, 3).try_derive(2), Err(Error::BadIndex { index: 2, nvars: 2 }));
        assert!(Series::zero(2, 0).try_derive(0).is_err());
    }

    #[test]
    fn inverses() {
        assert_eq!(c(int(1), 3).invert().unwrap(), c(int(1), 3));
        let a = &c(int(1), 3) - &x(0, 3);
        let expect = Series::from_terms(
            2,
            3,
            (0..=3u8).map(|k| (vec![k, 0], int(1))),
        );
        assert_eq!(a.invert().unwrap(), expect);
        let b = &c(int(2), 2) + &x(1, 2);
        let expect = Series::from_terms(
            2,
            2,
            [(vec![0, 0], frac(1, 2)), (vec![0, 1], frac(-1, 4)), (vec![0, 2], frac(1, 8))],
        );
        assert_eq!(b.invert().unwrap(), expect);
        assert_eq!(x(0, 2).invert(), Err(Error::ZeroConstantTerm));
    }

    #[test]
    fn monomial_order_is_graded_then_last_variable() {
        let sp = space(3, 2);
        let order: Vec<&[u8]> = (0..sp.count(2) as u32).map(|i| sp.exponents(i)).collect();
        assert_eq!(order[0], &[0, 0, 0]);
        assert_eq!(&order[1..4], &[&[1, 0, 0][..], &[0, 1, 0], &[0, 0, 1]]);
        assert_eq!(order[4], &[2, 0, 0]);
        assert_eq!(*order.last().unwrap(), &[0, 0, 2]);
        // prefix property
        let small = space(3, 1);
        for i in 0..small.count(1) as u32 {
            assert_eq!(small.exponents(i), sp.exponents(i));
        }
    }

    #[test]
    fn origin_and_jets() {
        let f = &(&c(int(3), 2) + &x(0, 2)) + &(&x(0, 2) * &x(1, 2));
        assert_eq!(f.eval_at_origin(), int(3));
        assert_eq!(f.jet_extract(2), &x(0, 2) * &x(1, 2));
    }

    #[test]
    fn matrix_inverse_and_sqrt_diagonal() {
        let n = 2;
        let one = c(int(1), n);
        let mut m = SeriesMatrix::identity(2, n, 2);
        m.set(0, 0, &one + &x(0, n).scale(&int(2)));
        let inv = m.inverse().unwrap();
        let expect = Series::from_terms(2, n, [(vec![0, 0], int(1)), (vec![1, 0], int(-2)), (vec![2, 0], int(4))]);
        assert_eq!(inv.get(0, 0), &expect);
        assert_eq!(inv.get(1, 1), &one);
        assert!(inv.get(0, 1).is_zero());

        let s = m.sqrt().unwrap();
        let expect = Series::from_terms(2, n, [(vec![0, 0], int(1)), (vec![1, 0], int(1)), (vec![2, 0], frac(-1, 2))]);
        assert_eq!(s.get(0, 0), &expect);
        assert_eq!(s.get(1, 1), &one);

        let id = SeriesMatrix::identity(2, 3, 3);
        assert_eq!(id.inverse().unwrap(), id);
        assert_eq!(id.sqrt().unwrap(), id);
        assert_eq!(SeriesMatrix::from_constant(2, 3, &QMatrix::identity(2).scale(&int(4))).sqrt(), Err(Error::SqrtConstantTerm));
    }

    #[test]
    fn compose_linear_swaps_variables() {
        let f = &x(0, 3) * &(&x(0, 3) + &x(1, 3));
        let swap = QMatrix::from_i64(&[&[0, 1], &[1, 0]]);
        let g = f.compose_linear(&swap);
        assert_eq!(g, &x(1, 3) * &(&x(1, 3) + &x(0, 3)));
        let back = g.compose_linear(&swap);
        assert_eq!(back, f);
    }
}
