//! Point-level curvature algebra over exact rationals.
//!
//! A [`CurvatureModel`] is a nondegenerate symmetric form together with an
//! algebraic curvature tensor. This module computes traces (Ricci, scalar,
//! star-scalar), the Weyl part, Kulkarni–Nomizu products, adapted
//! orthonormal frames, and seeded random models for every supported kind.

use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{frac, int, rational_sqrt, QMatrix, Scalar};

/// Symmetric rank-2 tensor (Ricci, Schouten, Kulkarni–Nomizu factors).
pub type SymTensor2 = QMatrix;

/// A nondegenerate symmetric bilinear form with its inverse and signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BilinearForm {
    eps: QMatrix,
    eps_inv: QMatrix,
    p: usize,
    q: usize,
}

impl BilinearForm {
    pub fn new(eps: QMatrix) -> Result<Self> {
        if !eps.is_square() {
            return Err(Error::DimensionMismatch { expected: eps.rows(), found: eps.cols() });
        }
        for i in 0..eps.rows() {
            for j in 0..i {
                if eps[(i, j)] != eps[(j, i)] {
                    return Err(Error::AsymmetricForm(i, j));
                }
            }
        }
        let eps_inv = eps.inverse().map_err(|_| Error::DegenerateForm)?;
        let (_, diag) = diagonalize_congruence(&eps);
        let p = diag.iter().filter(|d| d.is_negative()).count();
        let q = eps.rows() - p;
        Ok(BilinearForm { eps, eps_inv, p, q })
    }

    /// `diag(-1,…,-1,+1,…,+1)` with the `p` negative entries first.
    pub fn standard(p: usize, q: usize) -> Self {
        let d: Vec<Scalar> = (0..p + q).map(|i| if i < p { int(-1) } else { int(1) }).collect();
        BilinearForm::new(QMatrix::diagonal(&d)).expect("diagonal form is nondegenerate")
    }

    pub fn dim(&self) -> usize {
        self.eps.rows()
    }

    pub fn eps(&self) -> &QMatrix {
        &self.eps
    }

    pub fn eps_inv(&self) -> &QMatrix {
        &self.eps_inv
    }

    pub fn signature(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    /// True when `eps` is diagonal with entries `±1`.
    pub fn is_orthonormal(&self) -> bool {
        let m = self.dim();
        (0..m).all(|i| {
            (0..m).all(|j| {
                let v = &self.eps[(i, j)];
                if i == j {
                    v.abs().is_one()
                } else {
                    v.is_zero()
                }
            })
        })
    }

    pub fn apply(&self, x: &[Scalar], y: &[Scalar]) -> Scalar {
        let ey = self.eps.mul_vec(y);
        x.iter().zip(&ey).map(|(a, b)| a * b).sum()
    }
}

/// Symmetric Gaussian elimination: returns `P` (invertible) and `d` with
/// `Pᵀ·a·P = diag(d)`.
pub fn diagonalize_congruence(a: &QMatrix) -> (QMatrix, Vec<Scalar>) {
    let n = a.rows();
    let mut work = a.clone();
    let mut basis = QMatrix::identity(n);
    for k in 0..n {
        let pivot = (k..n).find(|&i| !work[(i, i)].is_zero());
        let pivot = match pivot {
            Some(i) => i,
            None => {
                // all remaining diagonal entries vanish; use e_i + e_j
                let Some((i, j)) =
                    (k..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).find(|&(i, j)| !work[(i, j)].is_zero())
                else {
                    break;
                };
                let mut t = QMatrix::identity(n);
                t[(j, i)] = int(1);
                work = t.congruence(&work);
                basis = basis.mul(&t);
                i
            }
        };
        if pivot != k {
            let mut t = QMatrix::identity(n);
            t[(k, k)] = int(0);
            t[(pivot, pivot)] = int(0);
            t[(k, pivot)] = int(1);
            t[(pivot, k)] = int(1);
            work = t.congruence(&work);
            basis = basis.mul(&t);
        }
        let mut t = QMatrix::identity(n);
        for j in k + 1..n {
            t[(k, j)] = -(&work[(k, j)] / &work[(k, k)]);
        }
        work = t.congruence(&work);
        basis = basis.mul(&t);
    }
    let d = (0..n).map(|i| work[(i, i)].clone()).collect();
    (basis, d)
}

/// Which of the defining curvature identities failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    Antisymmetry,
    PairSymmetry,
    Bianchi,
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Identity::Antisymmetry => "antisymmetry",
            Identity::PairSymmetry => "pair-symmetry",
            Identity::Bianchi => "first-bianchi",
        })
    }
}

/// A failed identity with its witness index tuple (0-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub identity: Identity,
    pub witness: [usize; 4],
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [i, j, k, l] = self.witness;
        write!(f, "{} at ({},{},{},{})", self.identity, i + 1, j + 1, k + 1, l + 1)
    }
}

/// Dense rank-4 tensor indexed `A[i][j][k][l]`.
#[derive(Clone, PartialEq, Eq)]
pub struct CurvTensor {
    dim: usize,
    data: Vec<Scalar>,
}

impl CurvTensor {
    pub fn zeros(dim: usize) -> Self {
        CurvTensor { dim, data: vec![Scalar::zero(); dim.pow(4)] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> Scalar) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        t.data[((i * dim + j) * dim + k) * dim + l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    /// Constant-curvature tensor `ε_il ε_jk − ε_ik ε_jl`.
    pub fn constant_curvature(form: &BilinearForm) -> Self {
        let e = form.eps();
        Self::from_fn(form.dim(), |i, j, k, l| &e[(i, l)] * &e[(j, k)] - &e[(i, k)] * &e[(j, l)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dim + j) * self.dim + k) * self.dim + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> &Scalar {
        &self.data[self.offset(i, j, k, l)]
    }

    /// Writes a single entry, no symmetry images.
    pub fn set_raw(&mut self, i: usize, j: usize, k: usize, l: usize, v: Scalar) {
        let o = self.offset(i, j, k, l);
        self.data[o] = v;
    }

    /// Writes `v` at `(i,j,k,l)` and all eight images under the
    /// antisymmetry and pair-symmetry group, with signs.
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: Scalar) {
        for ([a, b, c, d], sign) in symmetry_images([i, j, k, l]) {
            let o = self.offset(a, b, c, d);
            self.data[o] = if sign { v.clone() } else { -v.clone() };
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.data
    }

    pub fn add(&self, rhs: &CurvTensor) -> CurvTensor {
        CurvTensor { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, rhs: &CurvTensor) -> CurvTensor {
        CurvTensor { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: &Scalar) -> CurvTensor {
        CurvTensor { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    /// Pullback along a linear map whose columns are the new basis vectors:
    /// `A'_{ijkl} = φ^a_i φ^b_j φ^c_k φ^d_l A_{abcd}`.
    pub fn pullback(&self, phi: &QMatrix) -> CurvTensor {
        let m = self.dim;
        let mut cur = self.data.clone();
        // contract one slot at a time; after each pass the slot order rotates
        for _ in 0..4 {
            let mut next = vec![Scalar::zero(); m.pow(4)];
            for a in 0..m {
                for rest in 0..m * m * m {
                    let v = &cur[a * m * m * m + rest];
                    if v.is_zero() {
                        continue;
                    }
                    for i in 0..m {
                        let f = &phi[(a, i)];
                        if !f.is_zero() {
                            next[rest * m + i] += f * v;
                        }
                    }
                }
            }
            cur = next;
        }
        CurvTensor { dim: m, data: cur }
    }

    /// Checks the defining identities entrywise and reports every violation.
    pub fn validate(&self) -> Vec<Violation> {
        let m = self.dim;
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let a = self.get(i, j, k, l);
                        if *a != -self.get(j, i, k, l) {
                            out.push(Violation { identity: Identity::Antisymmetry, witness: [i, j, k, l] });
                        }
                        if a != self.get(k, l, i, j) {
                            out.push(Violation { identity: Identity::PairSymmetry, witness: [i, j, k, l] });
                        }
                        let b = a + self.get(j, k, i, l) + self.get(k, i, j, l);
                        if !b.is_zero() {
                            out.push(Violation { identity: Identity::Bianchi, witness: [i, j, k, l] });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

impl fmt::Debug for CurvTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.dim;
        let mut s = f.debug_map();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let v = self.get(i, j, k, l);
                        if !v.is_zero() {
                            s.entry(&(i, j, k, l), &v.to_string());
                        }
                    }
                }
            }
        }
        s.finish()
    }
}

/// The eight images of an index tuple under `A_ijkl = −A_jikl = −A_ijlk = A_klij`,
/// paired with `true` when the image carries the same sign.
pub fn symmetry_images([i, j, k, l]: [usize; 4]) -> [([usize; 4], bool); 8] {
    [
        ([i, j, k, l], true),
        ([j, i, k, l], false),
        ([i, j, l, k], false),
        ([j, i, l, k], true),
        ([k, l, i, j], true),
        ([l, k, i, j], false),
        ([k, l, j, i], false),
        ([l, k, j, i], true),
    ]
}

/// Validation verdict for a bare tensor.
pub fn validate_curvature_tensor(a: &CurvTensor) -> std::result::Result<(), Vec<Violation>> {
    let v = a.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// `(V, ε, A)` with `A` an algebraic curvature tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurvatureModel {
    form: BilinearForm,
    tensor: CurvTensor,
}

impl CurvatureModel {
    pub fn new(form: BilinearForm, tensor: CurvTensor) -> Result<Self> {
        if form.dim() != tensor.dim() {
            return Err(Error::DimensionMismatch { expected: form.dim(), found: tensor.dim() });
        }
        if let Some(v) = tensor.validate().first() {
            return Err(Error::InvalidCurvature(v.to_string()));
        }
        Ok(CurvatureModel { form, tensor })
    }

    pub fn flat(form: BilinearForm) -> Self {
        let m = form.dim();
        CurvatureModel { form, tensor: CurvTensor::zeros(m) }
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn form(&self) -> &BilinearForm {
        &self.form
    }

    pub fn tensor(&self) -> &CurvTensor {
        &self.tensor
    }

    /// Transports the model to the basis given by the columns of `phi`.
    pub fn pullback(&self, phi: &QMatrix) -> Result<Self> {
        let form = BilinearForm::new(phi.congruence(self.form.eps()))?;
        Ok(CurvatureModel { form, tensor: self.tensor.pullback(phi) })
    }
}

/// `ρ_il = ε^{jk} A_{ijkl}`.
pub fn ricci(model: &CurvatureModel) -> SymTensor2 {
    let m = model.dim();
    let inv = model.form().eps_inv();
    let a = model.tensor();
    QMatrix::from_fn(m, m, |i, l| {
        let mut acc = Scalar::zero();
        for j in 0..m {
            for k in 0..m {
                let e = &inv[(j, k)];
                if !e.is_zero() {
                    acc += e * a.get(i, j, k, l);
                }
            }
        }
        acc
    })
}

/// `ε^{il} ρ_il`.
pub fn trace_form(form: &BilinearForm, h: &SymTensor2) -> Scalar {
    let m = form.dim();
    let inv = form.eps_inv();
    let mut acc = Scalar::zero();
    for i in 0..m {
        for l in 0..m {
            if !inv[(i, l)].is_zero() {
                acc += &inv[(i, l)] * &h[(i, l)];
            }
        }
    }
    acc
}

/// `τ = ε^{il} ε^{jk} A_{ijkl}`.
pub fn scalar_curvature(model: &CurvatureModel) -> Scalar {
    trace_form(model.form(), &ricci(model))
}

/// `±1` sign distinguishing the two complex-type structures: `J² = ϱ·id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rho {
    /// `ϱ = −1`: `J² = −id`, `J` preserves the form.
    Pseudo,
    /// `ϱ = +1`: `J² = +id`, `J` negates the form.
    Para,
}

impl Rho {
    pub fn value(self) -> i64 {
        match self {
            Rho::Pseudo => -1,
            Rho::Para => 1,
        }
    }

    pub fn scalar(self) -> Scalar {
        int(self.value())
    }
}

/// A pseudo-Hermitian or para-Hermitian structure on a fixed form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HermitianStructure {
    j: QMatrix,
    rho: Rho,
}

impl HermitianStructure {
    pub fn new(form: &BilinearForm, j: QMatrix, rho: Rho) -> Result<Self> {
        let problems = hermitian_violations(form, &j, rho);
        if let Some(p) = problems.into_iter().next() {
            return Err(Error::InvalidStructure(p));
        }
        Ok(HermitianStructure { j, rho })
    }

    /// Standard block structure `J e_i = e_{i+r}`, `J e_{i+r} = ϱ e_i`.
    pub fn standard(m: usize, rho: Rho) -> QMatrix {
        let r = m / 2;
        let mut j = QMatrix::zeros(m, m);
        for i in 0..r {
            j[(i + r, i)] = int(1);
            j[(i, i + r)] = rho.scalar();
        }
        j
    }

    pub fn j(&self) -> &QMatrix {
        &self.j
    }

    pub fn rho(&self) -> Rho {
        self.rho
    }

    pub fn negated(&self) -> Self {
        HermitianStructure { j: self.j.scale(&int(-1)), rho: self.rho }
    }

    pub fn conjugate(&self, phi: &QMatrix, phi_inv: &QMatrix) -> Self {
        HermitianStructure { j: phi_inv.mul(&self.j).mul(phi), rho: self.rho }
    }
}

/// Human-readable list of failed structure identities.
pub fn hermitian_violations(form: &BilinearForm, j: &QMatrix, rho: Rho) -> Vec<String> {
    let m = form.dim();
    let mut out = Vec::new();
    if j.rows() != m || j.cols() != m {
        out.push(format!("J is {}x{}, expected {m}x{m}", j.rows(), j.cols()));
        return out;
    }
    let (p, q) = form.signature();
    match rho {
        Rho::Pseudo if p % 2 != 0 || q % 2 != 0 => {
            out.push(format!("pseudo-Hermitian structure needs even p and q, got ({p},{q})"))
        }
        Rho::Para if p != q => out.push(format!("para-Hermitian structure needs p = q, got ({p},{q})")),
        _ => {}
    }
    if j.mul(j) != QMatrix::identity(m).scale(&rho.scalar()) {
        out.push(format!("J^2 != {}·id", rho.value()));
    }
    let expect = form.eps().scale(&-rho.scalar());
    if j.congruence(form.eps()) != expect {
        out.push(format!("J^T eps J != {}·eps", -rho.value()));
    }
    out
}

/// Quaternionic (`−1,−1,−1`) or para-quaternionic (`−1,+1,+1`) triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HyperKind {
    Pseudo,
    Para,
}

impl HyperKind {
    pub fn rhos(self) -> [Rho; 3] {
        match self {
            HyperKind::Pseudo => [Rho::Pseudo, Rho::Pseudo, Rho::Pseudo],
            HyperKind::Para => [Rho::Pseudo, Rho::Para, Rho::Para],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HyperStructure {
    js: [HermitianStructure; 3],
    kind: HyperKind,
}

impl HyperStructure {
    pub fn new(form: &BilinearForm, js: [QMatrix; 3], kind: HyperKind) -> Result<Self> {
        if let Some(p) = hyper_violations(form, &js, kind).into_iter().next() {
            return Err(Error::InvalidStructure(p));
        }
        let rhos = kind.rhos();
        let [a, b, c] = js;
        Ok(HyperStructure {
            js: [
                HermitianStructure { j: a, rho: rhos[0] },
                HermitianStructure { j: b, rho: rhos[1] },
                HermitianStructure { j: c, rho: rhos[2] },
            ],
            kind,
        })
    }

    /// Standard triple for `m = 4ℓ` in the layout
    /// `[v_k | J2 v_k | J1 v_k | J3 v_k]`, so that `J1` is in standard block form.
    pub fn standard(m: usize, kind: HyperKind) -> [QMatrix; 3] {
        let l = m / 4;
        let [_, r2, r3] = kind.rhos().map(|r| r.value());
        let v = |k| k;
        let j2v = |k| l + k;
        let j1v = |k| 2 * l + k;
        let j3v = |k| 3 * l + k;
        let mut j1 = QMatrix::zeros(m, m);
        let mut j2 = QMatrix::zeros(m, m);
        let mut j3 = QMatrix::zeros(m, m);
        // column c of J is the image of basis vector c
        for k in 0..l {
            // J1: v→J1v, J1v→−v, J2v→J3v, J3v→−J2v
            j1[(j1v(k), v(k))] = int(1);
            j1[(v(k), j1v(k))] = int(-1);
            j1[(j3v(k), j2v(k))] = int(1);
            j1[(j2v(k), j3v(k))] = int(-1);
            // J2: v→J2v, J2v→ϱ2 v, J1v→−J3v, J3v→−ϱ2 J1v
            j2[(j2v(k), v(k))] = int(1);
            j2[(v(k), j2v(k))] = int(r2);
            j2[(j3v(k), j1v(k))] = int(-1);
            j2[(j1v(k), j3v(k))] = int(-r2);
            // J3: v→J3v, J3v→ϱ3 v, J1v→J2v, J2v→ϱ2 J1v
            j3[(j3v(k), v(k))] = int(1);
            j3[(v(k), j3v(k))] = int(r3);
            j3[(j2v(k), j1v(k))] = int(1);
            j3[(j1v(k), j2v(k))] = int(r2);
        }
        [j1, j2, j3]
    }

    pub fn kind(&self) -> HyperKind {
        self.kind
    }

    pub fn structures(&self) -> &[HermitianStructure; 3] {
        &self.js
    }

    pub fn matrices(&self) -> [&QMatrix; 3] {
        [&self.js[0].j, &self.js[1].j, &self.js[2].j]
    }

    pub fn conjugate(&self, phi: &QMatrix, phi_inv: &QMatrix) -> Self {
        HyperStructure { js: self.js.clone().map(|h| h.conjugate(phi, phi_inv)), kind: self.kind }
    }
}

pub fn hyper_violations(form: &BilinearForm, js: &[QMatrix; 3], kind: HyperKind) -> Vec<String> {
    let m = form.dim();
    let mut out = Vec::new();
    if !m.is_multiple_of(4) {
        out.push(format!("hyper structure needs m divisible by 4, got {m}"));
    }
    let (p, q) = form.signature();
    match kind {
        HyperKind::Pseudo if p % 4 != 0 || q % 4 != 0 => {
            out.push(format!("hyper-pseudo structure needs p, q divisible by 4, got ({p},{q})"))
        }
        HyperKind::Para if p != q => out.push(format!("hyper-para structure needs p = q, got ({p},{q})")),
        _ => {}
    }
    for (a, (j, rho)) in js.iter().zip(kind.rhos()).enumerate() {
        for v in hermitian_violations(form, j, rho) {
            if !v.contains("needs") {
                out.push(format!("J{}: {v}", a + 1));
            }
        }
    }
    if js.iter().any(|j| j.rows() != m || j.cols() != m) {
        return out;
    }
    let j12 = js[0].mul(&js[1]);
    let j21 = js[1].mul(&js[0]);
    if j12 != js[2] {
        out.push("J1 J2 != J3".into());
    }
    if j21 != js[2].scale(&int(-1)) {
        out.push("J2 J1 != -J3".into());
    }
    out
}

/// Optional complex-type decoration of a curvature model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Structure {
    None,
    Hermitian(HermitianStructure),
    Hyper(HyperStructure),
}

impl Structure {
    pub fn conjugate(&self, phi: &QMatrix, phi_inv: &QMatrix) -> Structure {
        match self {
            Structure::None => Structure::None,
            Structure::Hermitian(h) => Structure::Hermitian(h.conjugate(phi, phi_inv)),
            Structure::Hyper(h) => Structure::Hyper(h.conjugate(phi, phi_inv)),
        }
    }
}

/// `(−ϱ) ε^{il} ε^{jk} A(e_i, e_j, J e_k, J e_l)`.
pub fn star_scalar(model: &CurvatureModel, h: &HermitianStructure) -> Scalar {
    star_contraction(model.tensor(), model.form().eps_inv(), h.j(), h.rho())
}

pub(crate) fn star_contraction(a: &CurvTensor, eps_inv: &QMatrix, j: &QMatrix, rho: Rho) -> Scalar {
    let m = a.dim();
    // b[a][j] = J^a_k ε^{kj}
    let b = j.mul(eps_inv);
    let mut acc = Scalar::zero();
    for i in 0..m {
        for jj in 0..m {
            for x in 0..m {
                let bx = &b[(x, jj)];
                if bx.is_zero() {
                    continue;
                }
                for y in 0..m {
                    let by = &b[(y, i)];
                    if by.is_zero() {
                        continue;
                    }
                    let v = a.get(i, jj, x, y);
                    if !v.is_zero() {
                        acc += bx * by * v;
                    }
                }
            }
        }
    }
    -rho.scalar() * acc
}

/// `τ⋆_{J1} + τ⋆_{J2} + τ⋆_{J3}`.
pub fn star_scalar_hyper(model: &CurvatureModel, q: &HyperStructure) -> Scalar {
    q.structures().iter().map(|h| star_scalar(model, h)).sum()
}

/// `(h⊙k)_{ijkl} = h_il k_jk + h_jk k_il − h_ik k_jl − h_jl k_ik`.
pub fn kulkarni_nomizu(h: &SymTensor2, k: &SymTensor2) -> Result<CurvTensor> {
    if h.rows() != k.rows() || !h.is_square() || !k.is_square() {
        return Err(Error::DimensionMismatch { expected: h.rows(), found: k.rows() });
    }
    Ok(CurvTensor::from_fn(h.rows(), |i, j, a, l| {
        &h[(i, l)] * &k[(j, a)] + &h[(j, a)] * &k[(i, l)] - &h[(i, a)] * &k[(j, l)] - &h[(j, l)] * &k[(i, a)]
    }))
}

/// Schouten tensor `(ρ − τ/(2(m−1)) ε)/(m−2)`.
pub fn schouten(model: &CurvatureModel) -> Result<SymTensor2> {
    let m = model.dim();
    if m < 3 {
        return Err(Error::DimensionTooSmall { m, min: 3 });
    }
    let rho = ricci(model);
    let tau = trace_form(model.form(), &rho);
    let c = tau / int(2 * (m as i64 - 1));
    Ok(rho.sub(&model.form().eps().scale(&c)).scale(&frac(1, m as i64 - 2)))
}

/// Totally trace-free part `W = A − P⊙ε` with `P` the Schouten tensor.
pub fn weyl(model: &CurvatureModel) -> Result<CurvTensor> {
    let p = schouten(model)?;
    Ok(model.tensor().sub(&kulkarni_nomizu(&p, model.form().eps())?))
}

pub fn is_conformally_flat(model: &CurvatureModel) -> Result<bool> {
    Ok(weyl(model)?.is_zero())
}

/// Result of moving a model into an adapted orthonormal frame.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    pub model: CurvatureModel,
    pub structure: Structure,
    /// Columns are the new basis vectors expressed in the old basis.
    pub basis: QMatrix,
}

/// Finds a basis in which the form is `diag(±1)` and any structure is in
/// standard form, then transports model and structure to it.
pub fn orthonormalize_model(model: &CurvatureModel, structure: &Structure) -> Result<AdaptedFrame> {
    let form = model.form();
    let basis = match structure {
        Structure::None => orthonormal_basis(form)?,
        Structure::Hermitian(h) => hermitian_basis(form, h)?,
        Structure::Hyper(q) => hyper_basis(form, q)?,
    };
    let inv = basis.inverse()?;
    let model = model.pullback(&basis)?;
    let structure = structure.conjugate(&basis, &inv);
    Ok(AdaptedFrame { model, structure, basis })
}

/// Orthonormal basis (columns) with negative-norm vectors first.
pub fn orthonormal_basis(form: &BilinearForm) -> Result<QMatrix> {
    let blocks = unit_blocks(form, |u| vec![u.to_vec()])?;
    let mut vecs: Vec<(Scalar, Vec<Scalar>)> =
        blocks.into_iter().map(|b| (form.apply(&b[0], &b[0]), b[0].clone())).collect();
    vecs.sort_by_key(|(n, _)| !n.is_negative());
    Ok(columns(form.dim(), vecs.iter().map(|(_, v)| v)))
}

fn hermitian_basis(form: &BilinearForm, h: &HermitianStructure) -> Result<QMatrix> {
    let j = h.j();
    let rho = h.rho();
    let mut blocks = unit_blocks(form, |u| vec![u.to_vec(), j.mul_vec(u)])?;
    for b in &mut blocks {
        // para: the leading vector of each pair must have norm +1
        if rho == Rho::Para && form.apply(&b[0], &b[0]).is_negative() {
            let ju = b[1].clone();
            let jju = j.mul_vec(&ju);
            *b = vec![ju, jju];
        }
    }
    blocks.sort_by_key(|b| !form.apply(&b[0], &b[0]).is_negative());
    let m = form.dim();
    let firsts = blocks.iter().map(|b| &b[0]);
    let seconds = blocks.iter().map(|b| &b[1]);
    Ok(columns(m, firsts.chain(seconds)))
}

fn hyper_basis(form: &BilinearForm, q: &HyperStructure) -> Result<QMatrix> {
    let [j1, j2, j3] = q.matrices();
    let block = |u: &[Scalar]| vec![u.to_vec(), j2.mul_vec(u), j1.mul_vec(u), j3.mul_vec(u)];
    let mut blocks = unit_blocks(form, block)?;
    for b in &mut blocks {
        if q.kind() == HyperKind::Para && form.apply(&b[0], &b[0]).is_negative() {
            let v = b[1].clone();
            *b = block(&v);
        }
    }
    blocks.sort_by_key(|b| !form.apply(&b[0], &b[0]).is_negative());
    let m = form.dim();
    let cols = (0..4).flat_map(|slot| blocks.iter().map(move |b| &b[slot]));
    Ok(columns(m, cols))
}

fn columns<'a>(m: usize, vecs: impl Iterator<Item = &'a Vec<Scalar>>) -> QMatrix {
    let vs: Vec<&Vec<Scalar>> = vecs.collect();
    QMatrix::from_fn(m, vs.len(), |i, c| vs[c][i].clone())
}

/// Repeatedly picks a unit vector `u` in the orthogonal complement of what
/// has been chosen so far and expands it to an orthonormal block with
/// `expand` (`[u]`, `[u, Ju]` or a quaternionic quadruple).
fn unit_blocks(
    form: &BilinearForm,
    expand: impl Fn(&[Scalar]) -> Vec<Vec<Scalar>>,
) -> Result<Vec<Vec<Vec<Scalar>>>> {
    let m = form.dim();
    let mut span: Vec<Vec<Scalar>> = QMatrix::identity(m).transpose_rows();
    let mut blocks = Vec::new();
    while !span.is_empty() {
        let u = find_unit_vector(form, &span)?;
        let block = expand(&u);
        for v in &block {
            let n = form.apply(v, v);
            for w in span.iter_mut() {
                let c = form.apply(w, v) / &n;
                if !c.is_zero() {
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= &c * vi;
                    }
                }
            }
        }
        span = independent_subset(span);
        if span.len() + blocks.len() * block.len() + block.len() != m {
            return Err(Error::InvalidStructure("structure does not preserve orthogonal complements".into()));
        }
        blocks.push(block);
    }
    Ok(blocks)
}

fn find_unit_vector(form: &BilinearForm, span: &[Vec<Scalar>]) -> Result<Vec<Scalar>> {
    let mut first_norm = None;
    let mut candidates: Vec<Vec<Scalar>> = span.to_vec();
    for a in 0..span.len() {
        for b in 0..span.len() {
            if a == b {
                continue;
            }
            for t in [1i64, -1, 2, -2, 3, -3] {
                candidates.push(span[a].iter().zip(&span[b]).map(|(x, y)| x + y * int(t)).collect());
            }
        }
    }
    for c in candidates {
        let n = form.apply(&c, &c);
        if n.is_zero() {
            continue;
        }
        if let Some(s) = rational_sqrt(&n.abs()) {
            return Ok(c.into_iter().map(|x| x / &s).collect());
        }
        first_norm.get_or_insert(n);
    }
    match first_norm {
        Some(n) => Err(Error::IrrationalNorm(n.to_string())),
        None => Err(Error::DegenerateForm),
    }
}

fn independent_subset(vs: Vec<Vec<Scalar>>) -> Vec<Vec<Scalar>> {
    let mut kept: Vec<Vec<Scalar>> = Vec::new();
    let mut reduced: Vec<(usize, Vec<Scalar>)> = Vec::new();
    for v in vs {
        let mut r = v.clone();
        for (pc, row) in &reduced {
            if !r[*pc].is_zero() {
                let f = &r[*pc] / &row[*pc];
                for (x, y) in r.iter_mut().zip(row) {
                    *x -= &f * y;
                }
            }
        }
        if let Some(pc) = r.iter().position(|x| !x.is_zero()) {
            reduced.push((pc, r));
            kept.push(v);
        }
    }
    kept
}

impl QMatrix {
    fn transpose_rows(&self) -> Vec<Vec<Scalar>> {
        (0..self.cols()).map(|j| self.column(j)).collect()
    }
}

/// Model families accepted by [`random_model`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Plain,
    Hermitian,
    Para,
    HyperPseudo,
    HyperPara,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Plain, ModelKind::Hermitian, ModelKind::Para, ModelKind::HyperPseudo, ModelKind::HyperPara];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Plain => "plain",
            ModelKind::Hermitian => "hermitian",
            ModelKind::Para => "para",
            ModelKind::HyperPseudo => "hyper-pseudo",
            ModelKind::HyperPara => "hyper-para",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn check_signature(self, p: usize, q: usize) -> Result<()> {
        let m = p + q;
        let ok = m >= 1
            && match self {
                ModelKind::Plain => true,
                ModelKind::Hermitian => p.is_multiple_of(2) && q.is_multiple_of(2),
                ModelKind::Para => p == q,
                ModelKind::HyperPseudo => p.is_multiple_of(4) && q.is_multiple_of(4),
                ModelKind::HyperPara => p == q && m.is_multiple_of(4),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::IncompatibleSignature { p, q, kind: self.name().into() })
        }
    }

    /// Standard form and structure for this kind with signature `(p, q)`.
    pub fn standard(self, p: usize, q: usize) -> Result<(BilinearForm, Structure)> {
        self.check_signature(p, q)?;
        let m = p + q;
        let signs: Vec<i64> = match self {
            ModelKind::Plain => (0..m).map(|i| if i < p { -1 } else { 1 }).collect(),
            ModelKind::Hermitian => {
                let half: Vec<i64> = (0..m / 2).map(|i| if i < p / 2 { -1 } else { 1 }).collect();
                half.iter().chain(&half).copied().collect()
            }
            ModelKind::Para => (0..m).map(|i| if i < m / 2 { 1 } else { -1 }).collect(),
            ModelKind::HyperPseudo => {
                let quarter: Vec<i64> = (0..m / 4).map(|i| if i < p / 4 { -1 } else { 1 }).collect();
                quarter.iter().cycle().take(m).copied().collect()
            }
            ModelKind::HyperPara => {
                let l = m / 4;
                // [v | J2 v | J1 v | J3 v] with J2, J3 para
                [1, -1, 1, -1].iter().flat_map(|&s| std::iter::repeat_n(s, l)).collect()
            }
        };
        let form = BilinearForm::new(QMatrix::diagonal(&signs.iter().map(|&s| int(s)).collect::<Vec<_>>()))?;
        let structure = match self {
            ModelKind::Plain => Structure::None,
            ModelKind::Hermitian => {
                Structure::Hermitian(HermitianStructure::new(&form, HermitianStructure::standard(m, Rho::Pseudo), Rho::Pseudo)?)
            }
            ModelKind::Para => {
                Structure::Hermitian(HermitianStructure::new(&form, HermitianStructure::standard(m, Rho::Para), Rho::Para)?)
            }
            ModelKind::HyperPseudo => Structure::Hyper(HyperStructure::new(
                &form,
                HyperStructure::standard(m, HyperKind::Pseudo),
                HyperKind::Pseudo,
            )?),
            ModelKind::HyperPara => Structure::Hyper(HyperStructure::new(
                &form,
                HyperStructure::standard(m, HyperKind::Para),
                HyperKind::Para,
            )?),
        };
        Ok((form, structure))
    }
}

fn random_symmetric(rng: &mut ChaCha8Rng, m: usize) -> SymTensor2 {
    let mut s = QMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = int(rng.gen_range(-3..=3));
            s[(i, j)] = v.clone();
            s[(j, i)] = v;
        }
    }
    s
}

/// Projects an arbitrary rank-4 array onto algebraic curvature tensors:
/// average over the eight-element symmetry group, then remove one third of
/// the (totally antisymmetric) Bianchi sum.
pub fn curvature_projection(raw: &CurvTensor) -> CurvTensor {
    let m = raw.dim();
    let eighth = frac(1, 8);
    let sym = CurvTensor::from_fn(m, |i, j, k, l| {
        let mut acc = Scalar::zero();
        for (idx, sign) in symmetry_images([i, j, k, l]) {
            let v = raw.get(idx[0], idx[1], idx[2], idx[3]);
            if sign {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc * &eighth
    });
    let third = frac(1, 3);
    CurvTensor::from_fn(m, |i, j, k, l| {
        let b = sym.get(i, j, k, l) + sym.get(j, k, i, l) + sym.get(k, i, j, l);
        sym.get(i, j, k, l) - b * &third
    })
}

/// Seeded random model of the given kind in its standard frame.
///
/// The tensor mixes Kulkarni–Nomizu products of random symmetric matrices
/// with the projection of a random integer array, so both the Ricci and
/// Weyl sectors are generically nonzero.
pub fn random_model(m: usize, p: usize, q: usize, seed: u64, kind: ModelKind) -> Result<(CurvatureModel, Structure)> {
    if p + q != m {
        return Err(Error::DimensionMismatch { expected: m, found: p + q });
    }
    let (form, structure) = kind.standard(p, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s1 = random_symmetric(&mut rng, m);
    let s2 = random_symmetric(&mut rng, m);
    let mut a = kulkarni_nomizu(&s1, &s2)?;
    let s3 = random_symmetric(&mut rng, m);
    a = a.add(&kulkarni_nomizu(&s3, form.eps())?);
    let raw = CurvTensor::from_fn(m, |_, _, _, _| int(rng.gen_range(-2..=2)));
    a = a.add(&curvature_projection(&raw));
    Ok((CurvatureModel::new(form, a)?, structure))
}

/// Random conformally flat model `ε ⊙ S`.
pub fn random_conformally_flat(m: usize, p: usize, seed: u64) -> Result<CurvatureModel> {
    let form = BilinearForm::standard(p, m - p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = random_symmetric(&mut rng, m);
    let a = kulkarni_nomizu(form.eps(), &s)?;
    CurvatureModel::new(form, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(m: usize) -> BilinearForm {
        BilinearForm::standard(0, m)
    }

    /// Brute-force `Σ ε^{il} ε^{jk} A_{ijkl}` with explicit loops over all indices.
    fn brute_tau(form: &BilinearForm, a: &CurvTensor) -> Scalar {
        let m = form.dim();
        let inv = form.eps_inv();
        let mut acc = Scalar::zero();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        acc += &inv[(i, l)] * &inv[(j, k)] * a.get(i, j, k, l);
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn zero_tensor_is_valid() {
        assert!(CurvTensor::zeros(3).is_valid());
    }

    #[test]
    fn antisymmetry_witness() {
        let mut a = CurvTensor::zeros(2);
        a.set_raw(0, 1, 0, 1, int(1));
        a.set_raw(1, 0, 0, 1, int(1));
        let v = validate_curvature_tensor(&a).unwrap_err();
        let first = v.iter().find(|v| v.identity == Identity::Antisymmetry).unwrap();
        assert_eq!(first.witness, [0, 1, 0, 1]);
        assert_eq!(first.to_string(), "antisymmetry at (1,2,1,2)");
    }

    #[test]
    fn constant_curvature_tensor_passes_all_81_checks() {
        let a = CurvTensor::constant_curvature(&euclid(3));
        assert_eq!(a.entries().len(), 81);
        assert!(a.is_valid());
    }

    #[test]
    fn ricci_of_constant_curvature() {
        for form in [euclid(3), BilinearForm::standard(1, 2)] {
            let model = CurvatureModel::new(form.clone(), CurvTensor::constant_curvature(&form)).unwrap();
            assert_eq!(ricci(&model), form.eps().scale(&int(2)));
        }
        let flat = CurvatureModel::flat(euclid(3));
        assert!(ricci(&flat).is_zero());
    }

    #[test]
    fn scalar_curvature_matches_brute_force() {
        for (m, expect) in [(3, 6), (4, 12)] {
            let form = euclid(m);
            let a = CurvTensor::constant_curvature(&form);
            assert_eq!(brute_tau(&form, &a), int(expect));
            let model = CurvatureModel::new(form, a).unwrap();
            assert_eq!(scalar_curvature(&model), int(expect));
        }
        for seed in 0..5 {
            let (model, _) = random_model(4, 1, 3, seed, ModelKind::Plain).unwrap();
            assert_eq!(scalar_curvature(&model), brute_tau(model.form(), model.tensor()));
        }
    }

    #[test]
    fn star_scalar_of_constant_curvature() {
        let form = euclid(4);
        let model = CurvatureModel::new(form.clone(), CurvTensor::constant_curvature(&form)).unwrap();
        let h = HermitianStructure::new(&form, HermitianStructure::standard(4, Rho::Pseudo), Rho::Pseudo).unwrap();
        assert_eq!(star_scalar(&model, &h), int(4));
        assert_eq!(star_scalar(&model, &h.negated()), int(4));

        let (form, s) = ModelKind::Para.standard(2, 2).unwrap();
        let Structure::Hermitian(h) = s else { unreachable!() };
        assert!(star_scalar(&CurvatureModel::flat(form), &h).is_zero());
    }

    #[test]
    fn star_scalar_hyper_constant_curvature_and_cyclic() {
        let (form, s) = ModelKind::HyperPseudo.standard(0, 8).unwrap();
        let Structure::Hyper(q) = s else { unreachable!() };
        let model = CurvatureModel::new(form.clone(), CurvTensor::constant_curvature(&form)).unwrap();
        let one = star_scalar(&model, &q.structures()[0]);
        assert_eq!(one, int(8));
        assert_eq!(star_scalar_hyper(&model, &q), one * int(3));

        let (model, s) = random_model(8, 4, 4, 3, ModelKind::HyperPara).unwrap();
        let Structure::Hyper(q) = s else { unreachable!() };
        let base = star_scalar_hyper(&model, &q);
        let [j1, j2, j3] = q.matrices().map(|j| j.clone());
        // cyclic permutation of a para-quaternionic triple is not itself
        // para-quaternionic, so sum the three terms directly
        let rhos = q.kind().rhos();
        let perm = [(j2.clone(), rhos[1]), (j3.clone(), rhos[2]), (j1.clone(), rhos[0])];
        let sum: Scalar =
            perm.iter().map(|(j, r)| star_contraction(model.tensor(), model.form().eps_inv(), j, *r)).sum();
        assert_eq!(sum, base);
        let flipped =
            HyperStructure::new(model.form(), [j1.scale(&int(-1)), j2.scale(&int(-1)), j3], q.kind()).unwrap();
        assert_eq!(star_scalar_hyper(&model, &flipped), base);
    }

    #[test]
    fn kulkarni_nomizu_identities() {
        let form = euclid(3);
        let kn = kulkarni_nomizu(form.eps(), form.eps()).unwrap();
        assert_eq!(kn, CurvTensor::constant_curvature(&form).scale(&int(2)));
        let z = QMatrix::zeros(3, 3);
        assert!(kulkarni_nomizu(&z, &z).unwrap().is_zero());
        assert!(kulkarni_nomizu(&z, &QMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn weyl_of_kn_and_m3() {
        let m4 = random_conformally_flat(4, 1, 11).unwrap();
        assert!(weyl(&m4).unwrap().is_zero());
        for seed in 0..4 {
            let (m3, _) = random_model(3, seed as usize % 4, 3 - seed as usize % 4, seed, ModelKind::Plain).unwrap();
            assert!(is_conformally_flat(&m3).unwrap());
        }
        assert!(weyl(&CurvatureModel::flat(euclid(2))).is_err());
    }

    #[test]
    fn ricci_flat_weyl_component_is_detected() {
        // A with A_1212 = A_3434 = 1, A_1313 = A_2424 = -1 is Ricci-flat for ε = δ
        let mut a = CurvTensor::zeros(4);
        a.set(0, 1, 0, 1, int(1));
        a.set(2, 3, 2, 3, int(1));
        a.set(0, 2, 0, 2, int(-1));
        a.set(1, 3, 1, 3, int(-1));
        let model = CurvatureModel::new(euclid(4), a.clone()).unwrap();
        assert!(ricci(&model).is_zero());
        assert!(!is_conformally_flat(&model).unwrap());
        assert_eq!(weyl(&model).unwrap(), a);
    }

    #[test]
    fn weyl_is_trace_free_and_idempotent() {
        for seed in 0..4 {
            let (model, _) = random_model(5, 2, 3, seed, ModelKind::Plain).unwrap();
            let w = weyl(&model).unwrap();
            assert!(w.is_valid());
            let wm = CurvatureModel::new(model.form().clone(), w.clone()).unwrap();
            assert!(ricci(&wm).is_zero());
            assert_eq!(weyl(&wm).unwrap(), w);
        }
    }

    #[test]
    fn signature_and_scaling_frame() {
        let form = BilinearForm::new(QMatrix::diagonal(&[int(4), int(9)])).unwrap();
        let frame = orthonormalize_model(&CurvatureModel::flat(form), &Structure::None).unwrap();
        assert_eq!(frame.basis, QMatrix::diagonal(&[frac(1, 2), frac(1, 3)]));
        assert!(frame.model.form().eps().is_identity());

        let hyperbolic = BilinearForm::new(QMatrix::from_i64(&[&[0, 1], &[1, 0]])).unwrap();
        assert_eq!(hyperbolic.signature(), (1, 1));
        assert!(BilinearForm::new(QMatrix::from_i64(&[&[1, 1], &[1, 1]])).is_err());
    }

    #[test]
    fn standard_pair_has_identity_frame() {
        let (model, s) = random_model(4, 2, 2, 5, ModelKind::Hermitian).unwrap();
        let frame = orthonormalize_model(&model, &s).unwrap();
        assert!(frame.basis.is_identity());
        assert_eq!(frame.structure, s);
    }

    #[test]
    fn random_model_kinds() {
        let a = random_model(4, 0, 4, 9, ModelKind::Hermitian).unwrap();
        let b = random_model(4, 0, 4, 9, ModelKind::Hermitian).unwrap();
        assert_eq!(a, b);
        assert!(a.0.tensor().is_valid());
        assert!(!is_conformally_flat(&a.0).unwrap());
        let (model, s) = random_model(8, 4, 4, 1, ModelKind::HyperPara).unwrap();
        let Structure::Hyper(q) = s else { unreachable!() };
        assert!(hyper_violations(model.form(), &q.matrices().map(|j| j.clone()), q.kind()).is_empty());
        assert!(random_model(3, 0, 3, 1, ModelKind::Hermitian).is_err());
        assert!(random_model(4, 1, 3, 1, ModelKind::Para).is_err());
        assert!(random_model(8, 2, 6, 1, ModelKind::HyperPseudo).is_err());
    }
}
