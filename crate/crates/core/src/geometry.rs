//! Curvature of metric jets.
//!
//! Sign convention: `R(x,y,z,w) = g((∇_x∇_y − ∇_y∇_x − ∇_[x,y]) z, w)`. In a
//! coordinate frame this reads
//!
//! ```text
//! R_ijkl = ∂_i Γ_jkl − ∂_j Γ_ikl + Γ_ik^p Γ_jlp − Γ_jk^p Γ_ilp
//! ```
//!
//! with `Γ_ijk = ½(∂_i g_jk + ∂_j g_ik − ∂_k g_ij)` and `Γ_ij^p = g^pq Γ_ijq`.
//! A metric of order `N` yields Christoffel symbols of order `N − 1` and
//! curvature of order `N − 2`.

use crate::error::{Error, Result};
use crate::scalar::{frac, int, QMatrix, Scalar};
use crate::series::{Series, SeriesMatrix};
use crate::tensor::{
    symmetry_images, BilinearForm, CurvTensor, CurvatureModel, HermitianStructure, HyperKind, HyperStructure,
    Identity, Rho, Structure, Violation,
};

/// Symmetric matrix of series with invertible constant term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricJet {
    g: SeriesMatrix,
}

impl MetricJet {
    pub fn new(g: SeriesMatrix) -> Result<Self> {
        if g.rows() != g.cols() {
            return Err(Error::DimensionMismatch { expected: g.rows(), found: g.cols() });
        }
        if g.nvars() != g.rows() {
            return Err(Error::DimensionMismatch { expected: g.rows(), found: g.nvars() });
        }
        if !g.is_symmetric() {
            return Err(Error::InvalidStructure("metric jet is not symmetric".into()));
        }
        BilinearForm::new(g.eval_at_origin())?;
        Ok(MetricJet { g })
    }

    /// The constant metric `ε` as a jet of order `order`.
    pub fn constant(eps: &QMatrix, order: usize) -> Result<Self> {
        Self::new(SeriesMatrix::from_constant(eps.rows(), order, eps))
    }

    pub fn dim(&self) -> usize {
        self.g.rows()
    }

    pub fn order(&self) -> usize {
        self.g.order()
    }

    pub fn matrix(&self) -> &SeriesMatrix {
        &self.g
    }

    pub fn get(&self, i: usize, j: usize) -> &Series {
        self.g.get(i, j)
    }

    pub fn at_origin(&self) -> QMatrix {
        self.g.eval_at_origin()
    }

    pub fn inverse(&self) -> SeriesMatrix {
        self.g.inverse().expect("metric is invertible at the origin")
    }

    pub fn truncate(&self, order: usize) -> MetricJet {
        MetricJet { g: self.g.truncate(order) }
    }

    /// Coordinates `x = L·y`: the pulled-back jet `Lᵀ g(L y) L`.
    pub fn pullback_linear(&self, l: &QMatrix) -> Result<MetricJet> {
        let composed = self.g.compose_linear(l);
        MetricJet::new(composed.left_mul_constant(&l.transpose()).right_mul_constant(l))
    }
}

/// Christoffel symbols of the first kind `Γ_ijk` (symmetric in `i, j`).
#[derive(Clone, Debug)]
pub struct Christoffel {
    m: usize,
    data: Vec<Series>,
}

impl Christoffel {
    pub fn get(&self, i: usize, j: usize, k: usize) -> &Series {
        &self.data[(i * self.m + j) * self.m + k]
    }

    pub fn dim(&self) -> usize {
        self.m
    }
}

pub fn christoffel_first(g: &MetricJet) -> Christoffel {
    let m = g.dim();
    // dg[(k*m + i)*m + j] = ∂_k g_ij
    let mut dg = vec![Series::zero(m, 0); m * m * m];
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let d = g.get(i, j).derive(k);
                dg[(k * m + i) * m + j] = d.clone();
                dg[(k * m + j) * m + i] = d;
            }
        }
    }
    let d = |k: usize, i: usize, j: usize| &dg[(k * m + i) * m + j];
    let half = frac(1, 2);
    let mut data = vec![Series::zero(m, 0); m * m * m];
    for i in 0..m {
        for j in i..m {
            for k in 0..m {
                let s = (&(d(i, j, k) + d(j, i, k)) - d(k, i, j)).scale(&half);
                data[(i * m + j) * m + k] = s.clone();
                data[(j * m + i) * m + k] = s;
            }
        }
    }
    Christoffel { m, data }
}

/// Lowered curvature tensor field `R_ijkl(x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurvatureField {
    m: usize,
    data: Vec<Series>,
}

impl CurvatureField {
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> &Series {
        &self.data[((i * self.m + j) * self.m + k) * self.m + l]
    }

    pub fn order(&self) -> usize {
        self.data.iter().map(Series::order).min().unwrap_or(0)
    }

    pub fn eval_at_origin(&self) -> CurvTensor {
        CurvTensor::from_fn(self.m, |i, j, k, l| self.get(i, j, k, l).eval_at_origin())
    }

    /// Homogeneous degree-`d` part of every component, evaluated as a
    /// tensor-valued coefficient list (used for jet diagnostics).
    pub fn jet_extract(&self, d: usize) -> CurvatureField {
        CurvatureField { m: self.m, data: self.data.iter().map(|s| s.jet_extract(d)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Series::is_zero)
    }

    /// Checks antisymmetry, pair symmetry and first Bianchi as series identities.
    pub fn validate(&self) -> Vec<Violation> {
        let m = self.m;
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let a = self.get(i, j, k, l);
                        if !(a + self.get(j, i, k, l)).is_zero() {
                            out.push(Violation { identity: Identity::Antisymmetry, witness: [i, j, k, l] });
                        }
                        if a != self.get(k, l, i, j) && !(a - self.get(k, l, i, j)).is_zero() {
                            out.push(Violation { identity: Identity::PairSymmetry, witness: [i, j, k, l] });
                        }
                        if !(&(a + self.get(j, k, i, l)) + self.get(k, i, j, l)).is_zero() {
                            out.push(Violation { identity: Identity::Bianchi, witness: [i, j, k, l] });
                        }
                    }
                }
            }
        }
        out
    }

    fn from_canonical(m: usize, order: usize, mut f: impl FnMut(usize, usize, usize, usize) -> Series) -> Self {
        let mut data = vec![Series::zero(m, order); m.pow(4)];
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        for (a, &(i, j)) in pairs.iter().enumerate() {
            for &(k, l) in &pairs[a..] {
                let v = f(i, j, k, l);
                for ([w, x, y, z], sign) in symmetry_images([i, j, k, l]) {
                    data[((w * m + x) * m + y) * m + z] = if sign { v.clone() } else { -&v };
                }
            }
        }
        CurvatureField { m, data }
    }
}

/// Everything derived from one metric jet: inverse metric, Christoffel
/// symbols and curvature. Traces are computed on demand.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub metric: MetricJet,
    pub inverse: SeriesMatrix,
    pub riemann: CurvatureField,
}

impl Curvature {
    pub fn new(g: &MetricJet) -> Result<Self> {
        let n = g.order();
        if n < 2 {
            return Err(Error::OrderTooSmall { found: n, min: 2 });
        }
        let inverse = g.inverse();
        let riemann = riemann_with_inverse(g, &inverse);
        Ok(Curvature { metric: g.clone(), inverse, riemann })
    }

    pub fn order(&self) -> usize {
        self.riemann.order()
    }

    /// `ρ_il = g^jk R_ijkl` (symmetric).
    pub fn ricci(&self) -> SeriesMatrix {
        let m = self.metric.dim();
        let n = self.order();
        let ginv = self.inverse.truncate(n);
        let mut out = SeriesMatrix::zeros(m, n, m, m);
        for i in 0..m {
            for l in i..m {
                let mut acc = Series::zero(m, n);
                for j in 0..m {
                    for k in 0..m {
                        let r = self.riemann.get(i, j, k, l);
                        if !r.is_zero() {
                            acc = &acc + &(ginv.get(j, k) * r);
                        }
                    }
                }
                out.set(l, i, acc.clone());
                out.set(i, l, acc);
            }
        }
        out
    }

    /// `τ = g^il ρ_il`.
    pub fn scalar(&self) -> Series {
        trace_with(&self.inverse.truncate(self.order()), &self.ricci())
    }

    /// `τ` by contracting the full curvature twice, without forming Ricci.
    pub fn scalar_double_contraction(&self) -> Series {
        let m = self.metric.dim();
        let n = self.order();
        let ginv = self.inverse.truncate(n);
        let mut acc = Series::zero(m, n);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let r = self.riemann.get(i, j, k, l);
                        if !r.is_zero() {
                            acc = &acc + &(&(ginv.get(i, l) * ginv.get(j, k)) * r);
                        }
                    }
                }
            }
        }
        acc
    }

    /// `(−ϱ) g^il g^jk R(e_i, e_j, J e_k, J e_l)`.
    pub fn star_scalar(&self, s: &StructureField) -> Series {
        let m = self.metric.dim();
        let n = self.order();
        // b[a][j] = J^a_k g^kj
        let b = s.j.truncate(n).mul(&self.inverse.truncate(n));
        let mut acc = Series::zero(m, n);
        for i in 0..m {
            for jj in 0..m {
                for a in 0..m {
                    let bx = b.get(a, jj);
                    if bx.is_zero() {
                        continue;
                    }
                    let mut y = Series::zero(m, n);
                    for bb in 0..m {
                        let by = b.get(bb, i);
                        let r = self.riemann.get(i, jj, a, bb);
                        if !by.is_zero() && !r.is_zero() {
                            y = &y + &(by * r);
                        }
                    }
                    if !y.is_zero() {
                        acc = &acc + &(bx * &y);
                    }
                }
            }
        }
        acc.scale(&-s.rho.scalar())
    }

    /// `τ⋆_{J1} + τ⋆_{J2} + τ⋆_{J3}`.
    pub fn star_scalar_hyper(&self, triple: &StructureTriple) -> Series {
        let mut acc = Series::zero(self.metric.dim(), self.order());
        for s in &triple.fields {
            acc = &acc + &self.star_scalar(s);
        }
        acc
    }

    /// Weyl tensor field `W = R − P⊙g`, `P = (ρ − τ/(2(m−1)) g)/(m−2)`.
    pub fn weyl(&self) -> Result<CurvatureField> {
        let m = self.metric.dim();
        if m < 3 {
            return Err(Error::DimensionTooSmall { m, min: 3 });
        }
        let n = self.order();
        let rho = self.ricci();
        let tau = trace_with(&self.inverse.truncate(n), &rho);
        let g = self.metric.matrix().truncate(n);
        let c = tau.scale(&frac(1, 2 * (m as i64 - 1)));
        let p = rho.sub(&g.scale_series(&c)).scale(&frac(1, m as i64 - 2));
        let kn = kulkarni_nomizu_series(&p, &g);
        Ok(CurvatureField::from_canonical(m, n, |i, j, k, l| self.riemann.get(i, j, k, l) - kn.get(i, j, k, l)))
    }
}

fn trace_with(ginv: &SeriesMatrix, h: &SeriesMatrix) -> Series {
    let m = ginv.rows();
    let n = ginv.order().min(h.order());
    let mut acc = Series::zero(ginv.nvars(), n);
    for i in 0..m {
        for l in 0..m {
            if !h.get(i, l).is_zero() {
                acc = &acc + &(ginv.get(i, l) * h.get(i, l));
            }
        }
    }
    acc
}

/// `(h⊙k)_ijkl = h_il k_jk + h_jk k_il − h_ik k_jl − h_jl k_ik` for series.
pub fn kulkarni_nomizu_series(h: &SeriesMatrix, k: &SeriesMatrix) -> CurvatureField {
    let m = h.rows();
    let n = h.order().min(k.order());
    CurvatureField::from_canonical(m, n, |i, j, a, l| {
        let t1 = &(h.get(i, l) * k.get(j, a)) + &(h.get(j, a) * k.get(i, l));
        let t2 = &(h.get(i, a) * k.get(j, l)) + &(h.get(j, l) * k.get(i, a));
        &t1 - &t2
    })
}

fn riemann_with_inverse(g: &MetricJet, ginv: &SeriesMatrix) -> CurvatureField {
    let m = g.dim();
    let n = g.order();
    let gamma = christoffel_first(g);
    let low = n - 2;
    // truncated copies for the quadratic term
    let gamma_t: Vec<Series> = gamma.data.iter().map(|s| s.truncate(low)).collect();
    let ginv_t = ginv.truncate(low);
    let first = |i: usize, j: usize, k: usize| &gamma_t[(i * m + j) * m + k];
    // second[(i*m + j)*m + p] = Γ_ij^p
    let mut second = vec![Series::zero(m, low); m * m * m];
    for i in 0..m {
        for j in i..m {
            for p in 0..m {
                let mut acc = Series::zero(m, low);
                for q in 0..m {
                    let a = ginv_t.get(p, q);
                    let b = first(i, j, q);
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                second[(i * m + j) * m + p] = acc.clone();
                second[(j * m + i) * m + p] = acc;
            }
        }
    }
    let sec = |i: usize, j: usize, p: usize| &second[(i * m + j) * m + p];
    CurvatureField::from_canonical(m, low, |i, j, k, l| {
        let mut r = &gamma.get(j, k, l).derive(i) - &gamma.get(i, k, l).derive(j);
        for p in 0..m {
            let (a, b) = (sec(i, k, p), first(j, l, p));
            if !a.is_zero() && !b.is_zero() {
                r = &r + &(a * b);
            }
            let (c, d) = (sec(j, k, p), first(i, l, p));
            if !c.is_zero() && !d.is_zero() {
                r = &r - &(c * d);
            }
        }
        r
    })
}

/// Reference path: every component `R_ijkl` computed independently from the
/// coordinate formula, with no symmetry reduction. Slow; used to cross-check
/// [`riemann`].
pub fn riemann_all_components(g: &MetricJet) -> Result<CurvatureField> {
    let m = g.dim();
    let n = g.order();
    if n < 2 {
        return Err(Error::OrderTooSmall { found: n, min: 2 });
    }
    let ginv = g.inverse();
    let gamma = christoffel_first(g);
    let second = |i: usize, j: usize, p: usize| {
        let mut acc = Series::zero(m, n - 1);
        for q in 0..m {
            acc = &acc + &(ginv.get(p, q) * gamma.get(i, j, q));
        }
        acc
    };
    let mut data = Vec::with_capacity(m.pow(4));
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let mut r = &gamma.get(j, k, l).derive(i) - &gamma.get(i, k, l).derive(j);
                    for p in 0..m {
                        r = &r + &(&second(i, k, p) * gamma.get(j, l, p));
                        r = &r - &(&second(j, k, p) * gamma.get(i, l, p));
                    }
                    data.push(r);
                }
            }
        }
    }
    Ok(CurvatureField { m, data })
}

/// Full curvature series of the Levi-Civita connection, reliable through `N − 2`.
pub fn riemann(g: &MetricJet) -> Result<CurvatureField> {
    Ok(Curvature::new(g)?.riemann)
}

/// Scalar curvature series `g^il g^jk R_ijkl`.
pub fn scalar_series(g: &MetricJet) -> Result<Series> {
    Ok(Curvature::new(g)?.scalar())
}

pub fn star_scalar_series(g: &MetricJet, s: &StructureField) -> Result<Series> {
    Ok(Curvature::new(g)?.star_scalar(s))
}

/// A field of linear maps `J(x)` with `J² = ϱ·id`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureField {
    pub j: SeriesMatrix,
    pub rho: Rho,
}

impl StructureField {
    pub fn constant(j: &QMatrix, rho: Rho, order: usize) -> Self {
        StructureField { j: SeriesMatrix::from_constant(j.rows(), order, j), rho }
    }

    pub fn at_origin(&self) -> QMatrix {
        self.j.eval_at_origin()
    }

    pub fn negated(&self) -> Self {
        StructureField { j: self.j.scale(&int(-1)), rho: self.rho }
    }

    /// Series identities `J² = ϱ·id` and `Jᵀ g J = −ϱ g`, checked through
    /// the smaller of the two orders.
    pub fn violations(&self, g: &MetricJet) -> Vec<String> {
        let m = g.dim();
        let n = self.j.order().min(g.order());
        let j = self.j.truncate(n);
        let mut out = Vec::new();
        let id = SeriesMatrix::identity(m, n, m).scale(&self.rho.scalar());
        if j.mul(&j).sub(&id).entries().iter().any(|s| !s.is_zero()) {
            out.push(format!("J^2 != {}·id as series", self.rho.value()));
        }
        let gt = g.matrix().truncate(n);
        let lhs = j.transpose().mul(&gt).mul(&j);
        let rhs = gt.scale(&-self.rho.scalar());
        if lhs.sub(&rhs).entries().iter().any(|s| !s.is_zero()) {
            out.push(format!("J^T g J != {}·g as series", -self.rho.value()));
        }
        out
    }

    /// Transport to coordinates `x = L·y`: `L⁻¹ J(L y) L`.
    pub fn pullback_linear(&self, l: &QMatrix, l_inv: &QMatrix) -> StructureField {
        let composed = self.j.compose_linear(l);
        StructureField { j: composed.left_mul_constant(l_inv).right_mul_constant(l), rho: self.rho }
    }
}

/// Three structure fields forming a (para-)quaternionic triple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureTriple {
    pub fields: [StructureField; 3],
    pub kind: HyperKind,
}

impl StructureTriple {
    pub fn constant(q: &HyperStructure, order: usize) -> Self {
        let s = q.structures();
        StructureTriple {
            fields: [0, 1, 2].map(|a| StructureField::constant(s[a].j(), s[a].rho(), order)),
            kind: q.kind(),
        }
    }

    /// Series versions of `J_a² = ϱ_a id`, `J1 J2 = −J2 J1 = J3` and metric compatibility.
    pub fn violations(&self, g: &MetricJet) -> Vec<String> {
        let mut out = Vec::new();
        for (a, f) in self.fields.iter().enumerate() {
            out.extend(f.violations(g).into_iter().map(|v| format!("J{}: {v}", a + 1)));
        }
        let n = self.fields.iter().map(|f| f.j.order()).min().unwrap_or(0);
        let [j1, j2, j3] = [0, 1, 2].map(|a| self.fields[a].j.truncate(n));
        let j12 = j1.mul(&j2);
        let j21 = j2.mul(&j1);
        if j12.sub(&j3).entries().iter().any(|s| !s.is_zero()) {
            out.push("J1 J2 != J3 as series".into());
        }
        if j21.add(&j3).entries().iter().any(|s| !s.is_zero()) {
            out.push("J2 J1 != -J3 as series".into());
        }
        out
    }

    pub fn pullback_linear(&self, l: &QMatrix, l_inv: &QMatrix) -> StructureTriple {
        StructureTriple { fields: self.fields.clone().map(|f| f.pullback_linear(l, l_inv)), kind: self.kind }
    }
}

/// A metric jet optionally decorated with structure fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureFields {
    None,
    Hermitian(StructureField),
    Hyper(StructureTriple),
}

impl StructureFields {
    pub fn at_origin(&self, form: &BilinearForm) -> Result<Structure> {
        Ok(match self {
            StructureFields::None => Structure::None,
            StructureFields::Hermitian(s) => {
                Structure::Hermitian(HermitianStructure::new(form, s.at_origin(), s.rho)?)
            }
            StructureFields::Hyper(t) => Structure::Hyper(HyperStructure::new(
                form,
                [0, 1, 2].map(|a| t.fields[a].at_origin()),
                t.kind,
            )?),
        })
    }
}

/// `(T_P M, g_P, R_P)` with any structure evaluated at the origin.
pub fn point_model(g: &MetricJet, fields: &StructureFields) -> Result<(CurvatureModel, Structure)> {
    let form = BilinearForm::new(g.at_origin())?;
    let r = riemann(g)?.eval_at_origin();
    let structure = fields.at_origin(&form)?;
    Ok((CurvatureModel::new(form, r)?, structure))
}

/// Non-constant coefficients of `s` through its reliable order; empty when
/// `s` is constant there.
pub fn non_constant_terms(s: &Series) -> Vec<(Vec<u8>, Scalar)> {
    s.terms().filter(|(e, _)| e.iter().any(|&x| x > 0)).map(|(e, c)| (e.to_vec(), c.clone())).collect()
}

/// Largest `d` such that `s` has no non-constant coefficients of degree `≤ d`
/// (equals the reliable order when `s` is constant).
pub fn constancy_degree(s: &Series) -> usize {
    s.terms()
        .filter(|(e, _)| e.iter().any(|&x| x > 0))
        .map(|(e, _)| e.iter().map(|&x| x as usize).sum::<usize>() - 1)
        .min()
        .unwrap_or(s.order())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(m: usize) -> QMatrix {
        QMatrix::identity(m)
    }

    #[test]
    fn constant_metric_is_flat() {
        let g = MetricJet::constant(&QMatrix::diagonal(&[int(-1), int(1), int(1)]), 3).unwrap();
        let c = Curvature::new(&g).unwrap();
        assert!(c.riemann.is_zero());
        assert!(c.scalar().is_zero());
        let gamma = christoffel_first(&g);
        assert!(gamma.data.iter().all(Series::is_zero));
    }

    #[test]
    fn christoffel_of_bent_plane() {
        // g11 = 1 − x2²/3, g22 = 1
        let n = 3;
        let x2 = Series::var(2, n, 1);
        let mut g = SeriesMatrix::identity(2, n, 2);
        g.set(0, 0, &Series::one(2, n) - &(&x2 * &x2).scale(&frac(1, 3)));
        let gamma = christoffel_first(&MetricJet::new(g).unwrap());
        let x2 = Series::var(2, n - 1, 1);
        assert_eq!(gamma.get(0, 0, 1), &x2.scale(&frac(1, 3)));
        assert_eq!(gamma.get(0, 1, 0), &x2.scale(&frac(-1, 3)));
        assert_eq!(gamma.get(1, 0, 0), &x2.scale(&frac(-1, 3)));
        assert!(gamma.get(1, 1, 1).is_zero());
    }

    #[test]
    fn order_too_small() {
        let g = MetricJet::constant(&euclid(2), 1).unwrap();
        assert_eq!(riemann(&g).unwrap_err(), Error::OrderTooSmall { found: 1, min: 2 });
    }

    #[test]
    fn rejects_asymmetric_jets() {
        let mut g = SeriesMatrix::identity(2, 2, 2);
        g.set(0, 1, Series::var(2, 2, 0));
        assert!(MetricJet::new(g).is_err());
    }

    #[test]
    fn constancy_degree_counts_leading_zero_degrees() {
        let x = Series::var(2, 4, 0);
        let s = &Series::constant(2, 4, int(3)) + &(&(&x * &x) * &x);
        assert_eq!(constancy_degree(&s), 2);
        assert_eq!(constancy_degree(&Series::constant(2, 4, int(3))), 4);
    }
}
