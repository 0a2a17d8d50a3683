//! Formal Cauchy–Kovalevskaya recursion for quasilinear second-order systems
//! with zero Cauchy data on `x_m = 0`, and the constant-curvature pipelines
//! built on it.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::geometry::{Curvature, MetricJet, StructureField, StructureFields, StructureTriple};
use crate::realization::{check_hermitian_frame, check_hyper_frame, hermitian_variation, hyper_variation};
use crate::scalar::{frac, int, QMatrix, Scalar};
use crate::series::{space, Series};
use crate::tensor::{
    orthonormal_basis, orthonormalize_model, BilinearForm, CurvatureModel, HermitianStructure, HyperStructure,
    Structure,
};

type ResidualFn<'a> = dyn Fn(&[Series]) -> Result<Vec<Series>> + Send + Sync + 'a;

/// A system `ψ^{ij}(x,u) ∂_i∂_j U + ψ(x,u) = 0` given only through its
/// residual map. The last variable is the distinguished (normal) one.
pub struct QuasilinearSystem<'a> {
    unknowns: usize,
    nvars: usize,
    residual: Box<ResidualFn<'a>>,
}

impl<'a> QuasilinearSystem<'a> {
    pub fn new(
        unknowns: usize,
        nvars: usize,
        residual: impl Fn(&[Series]) -> Result<Vec<Series>> + Send + Sync + 'a,
    ) -> Self {
        QuasilinearSystem { unknowns, nvars, residual: Box::new(residual) }
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn residual(&self, u: &[Series]) -> Result<Vec<Series>> {
        if u.len() != self.unknowns {
            return Err(Error::DimensionMismatch { expected: self.unknowns, found: u.len() });
        }
        let r = (self.residual)(u)?;
        if r.len() != self.unknowns {
            return Err(Error::DimensionMismatch { expected: self.unknowns, found: r.len() });
        }
        for s in &r {
            if s.nvars() != self.nvars {
                return Err(Error::VariableMismatch(self.nvars, s.nvars()));
            }
        }
        Ok(r)
    }
}

/// Leading linear block of one recursion step: column `k` is the change of
/// the `x_m^a` residual coefficients per unit of the `x_m^{a+2}` coefficient
/// of unknown `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepBlock {
    pub step: usize,
    pub block: QMatrix,
    pub determinant: Scalar,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CKSolution {
    pub unknowns: Vec<Series>,
    pub order: usize,
    /// Degree through which the residual vanishes.
    pub achieved: usize,
    pub steps: Vec<StepBlock>,
}

impl CKSolution {
    pub fn leading_block(&self) -> &QMatrix {
        &self.steps[0].block
    }
}

/// `(unknown exponents, observed exponents)` for y-degree `k` at step `a`.
fn step_monomials(m: usize, order: usize, a: usize, k: usize) -> Vec<(Vec<u8>, Vec<u8>)> {
    let sp = space(m, order);
    let t = m - 1;
    let mut out = Vec::new();
    for idx in sp.degree_range(a + 2 + k) {
        let e = sp.exponents(idx as u32);
        if e[t] as usize == a + 2 {
            let mut obs = e.to_vec();
            obs[t] = a as u8;
            out.push((e.to_vec(), obs));
        }
    }
    out
}

fn check_residual_order(r: &[Series], top: usize) -> Result<()> {
    for s in r {
        if s.order() < top {
            return Err(Error::OrderTooSmall { found: s.order(), min: top });
        }
    }
    Ok(())
}

fn first_nonzero(r: &[Series], through: usize) -> Option<Vec<u8>> {
    r.iter()
        .flat_map(|s| s.terms())
        .filter(|(e, _)| e.iter().map(|&x| x as usize).sum::<usize>() <= through)
        .map(|(e, _)| e.to_vec())
        .min_by_key(|e| (e[e.len() - 1], e.iter().map(|&x| x as usize).sum::<usize>()))
}

/// Solves `residual(U) ≡ 0` through degree `order − 2` with `U = ∂_m U = 0`
/// on `x_m = 0`, one `x_m`-exponent at a time.
pub fn ck_solve(system: &QuasilinearSystem, order: usize) -> Result<CKSolution> {
    if order < 2 {
        return Err(Error::OrderTooSmall { found: order, min: 2 });
    }
    let (d, m) = (system.unknowns, system.nvars);
    if m == 0 {
        return Err(Error::DimensionTooSmall { m, min: 1 });
    }
    let top = order - 2;
    let mut u = vec![Series::zero(m, order); d];
    let mut steps = Vec::new();
    for a in 0..=top {
        let base = system.residual(&u)?;
        check_residual_order(&base, top)?;
        let (lead, obs) = step_monomials(m, order, a, 0).remove(0);
        let mut block = QMatrix::zeros(d, d);
        for k in 0..d {
            let mut shifted = u.clone();
            shifted[k] = &u[k] + &Series::monomial(m, order, &lead, int(1));
            let once = system.residual(&shifted)?;
            shifted[k] = &u[k] + &Series::monomial(m, order, &lead, int(2));
            let twice = system.residual(&shifted)?;
            for i in 0..d {
                let b = base[i].coeff(&obs);
                let c1 = once[i].coeff(&obs) - &b;
                let c2 = twice[i].coeff(&obs) - &b;
                if c2 != &c1 * int(2) {
                    return Err(Error::NonAffine { step: a });
                }
                block[(i, k)] = c1;
            }
        }
        let determinant = block.determinant();
        if determinant.is_zero() {
            return Err(Error::SingularStep { step: a });
        }
        steps.push(StepBlock { step: a, block: block.clone(), determinant });

        let mut r = base;
        for k in 0..=top - a {
            if k > 0 {
                r = system.residual(&u)?;
                for (_, o) in step_monomials(m, order, a, k - 1) {
                    if r.iter().any(|s| !s.coeff(&o).is_zero()) {
                        return Err(Error::NonAffine { step: a });
                    }
                }
            }
            let monos = step_monomials(m, order, a, k);
            let rhs = QMatrix::from_fn(d, monos.len(), |i, j| -r[i].coeff(&monos[j].1));
            let sol = block.solve(&rhs)?;
            for (i, ui) in u.iter_mut().enumerate() {
                let add = Series::from_terms(m, order, monos.iter().enumerate().map(|(j, (e, _))| (e.clone(), sol[(i, j)].clone())));
                *ui = &*ui + &add;
            }
        }
    }
    let r = system.residual(&u)?;
    if let Some(e) = first_nonzero(&r, top) {
        return Err(Error::NonAffine { step: e[m - 1] as usize });
    }
    let achieved = r.iter().map(|s| s.min_nonzero_degree().map_or(s.order(), |g| g - 1)).min().unwrap_or(top);
    Ok(CKSolution { unknowns: u, order, achieved, steps })
}

/// Frame, normalized linearization and raw solver output of a pipeline.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    /// Columns are the adapted basis; the solve ran in coordinates `y` with `x = B y`.
    pub frame: QMatrix,
    /// Leading block rescaled to second normal derivatives of the unknowns.
    pub linearization: QMatrix,
    pub solution: CKSolution,
}

#[derive(Clone, Debug)]
pub struct ConformalSolution {
    pub phi: Series,
    pub metric: MetricJet,
    pub report: PipelineReport,
}

#[derive(Clone, Debug)]
pub struct VariationSolution {
    pub xi: Series,
    pub eta: Series,
    pub metric: MetricJet,
    pub fields: StructureFields,
    pub report: PipelineReport,
}

fn prepare(g: &MetricJet, order: usize) -> Result<MetricJet> {
    if order < 2 {
        return Err(Error::OrderTooSmall { found: order, min: 2 });
    }
    if g.order() < order {
        return Err(Error::OrderTooSmall { found: g.order(), min: order });
    }
    Ok(g.truncate(order))
}

fn normalized(block: &QMatrix) -> QMatrix {
    block.scale(&frac(1, 2))
}

fn constant_like(s: &Series, c: &Scalar) -> Series {
    Series::constant(s.nvars(), s.order(), c.clone())
}

fn conformal_metric(g: &MetricJet, phi: &Series) -> Result<MetricJet> {
    let factor = &Series::one(g.dim(), g.order()) + &phi.scale(&int(2));
    MetricJet::new(g.matrix().scale_series(&factor))
}

fn invert_frame(b: &QMatrix) -> Result<QMatrix> {
    b.inverse()
}

/// Finds `φ` with `(1+2φ) g` of constant scalar curvature `τ_g(0)` through
/// degree `order − 2`.
pub fn constant_scalar_conformal(g: &MetricJet, order: usize) -> Result<ConformalSolution> {
    let m = g.dim();
    if m < 2 {
        return Err(Error::DimensionTooSmall { m, min: 2 });
    }
    let g = prepare(g, order)?;
    let form = BilinearForm::new(g.at_origin())?;
    let frame = if form.is_orthonormal() { QMatrix::identity(m) } else { orthonormal_basis(&form)? };
    let frame_inv = invert_frame(&frame)?;
    let gf = g.pullback_linear(&frame)?;
    let tau0 = Curvature::new(&gf)?.scalar().eval_at_origin();
    let system = QuasilinearSystem::new(1, m, |u| {
        let tau = Curvature::new(&conformal_metric(&gf, &u[0])?)?.scalar();
        Ok(vec![&tau - &constant_like(&tau, &tau0)])
    });
    let solution = ck_solve(&system, order)?;
    let phi = solution.unknowns[0].compose_linear(&frame_inv);
    let metric = conformal_metric(&g, &phi)?;
    let linearization = normalized(solution.leading_block());
    Ok(ConformalSolution { phi, metric, report: PipelineReport { frame, linearization, solution } })
}

fn hermitian_frame(g: &MetricJet, s: &StructureField) -> Result<QMatrix> {
    if check_hermitian_frame(g, s).is_ok() {
        return Ok(QMatrix::identity(g.dim()));
    }
    let form = BilinearForm::new(g.at_origin())?;
    let h = HermitianStructure::new(&form, s.at_origin(), s.rho)?;
    Ok(orthonormalize_model(&CurvatureModel::flat(form), &Structure::Hermitian(h))?.basis)
}

fn hyper_frame(g: &MetricJet, t: &StructureTriple) -> Result<QMatrix> {
    if check_hyper_frame(g, t).is_ok() {
        return Ok(QMatrix::identity(g.dim()));
    }
    let form = BilinearForm::new(g.at_origin())?;
    let js = [0, 1, 2].map(|a| t.fields[a].at_origin());
    let q = HyperStructure::new(&form, js, t.kind)?;
    Ok(orthonormalize_model(&CurvatureModel::flat(form), &Structure::Hyper(q))?.basis)
}

fn truncate_field(s: &StructureField, order: usize) -> Result<StructureField> {
    if s.j.order() < order {
        return Err(Error::OrderTooSmall { found: s.j.order(), min: order });
    }
    Ok(StructureField { j: s.j.truncate(order), rho: s.rho })
}

fn pair_residual(tau: Series, star: Series, tau0: &Scalar, star0: &Scalar) -> Vec<Series> {
    let a = &tau - &constant_like(&tau, tau0);
    let b = &star - &constant_like(&star, star0);
    vec![a, b]
}

fn finish_variation(
    g: &MetricJet,
    frame: QMatrix,
    solution: CKSolution,
    fields: StructureFields,
    vary: impl Fn(&Series, &Series) -> Result<MetricJet>,
) -> Result<VariationSolution> {
    let frame_inv = invert_frame(&frame)?;
    let hf = vary(&solution.unknowns[0], &solution.unknowns[1])?;
    let metric = if frame.is_identity() { hf } else { hf.pullback_linear(&frame_inv)? };
    debug_assert_eq!(metric.dim(), g.dim());
    let xi = solution.unknowns[0].compose_linear(&frame_inv);
    let eta = solution.unknowns[1].compose_linear(&frame_inv);
    let linearization = normalized(solution.leading_block());
    Ok(VariationSolution { xi, eta, metric, fields, report: PipelineReport { frame, linearization, solution } })
}

/// Finds `(ξ, η)` making both `τ` and `τ⋆` of the Hermitian variation constant.
pub fn constant_tau_taustar(g: &MetricJet, s: &StructureField, order: usize) -> Result<VariationSolution> {
    let m = g.dim();
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::DimensionTooSmall { m, min: 4 });
    }
    let g = prepare(g, order)?;
    let s = truncate_field(s, order)?;
    let frame = hermitian_frame(&g, &s)?;
    let frame_inv = invert_frame(&frame)?;
    let gf = g.pullback_linear(&frame)?;
    let sf = s.pullback_linear(&frame, &frame_inv);
    check_hermitian_frame(&gf, &sf)?;
    let c0 = Curvature::new(&gf)?;
    let (tau0, star0) = (c0.scalar().eval_at_origin(), c0.star_scalar(&sf).eval_at_origin());
    let vary = |xi: &Series, eta: &Series| hermitian_variation(&gf, &sf, xi, eta);
    let system = QuasilinearSystem::new(2, m, |u| {
        let c = Curvature::new(&vary(&u[0], &u[1])?)?;
        Ok(pair_residual(c.scalar(), c.star_scalar(&sf), &tau0, &star0))
    });
    let solution = ck_solve(&system, order)?;
    finish_variation(&g, frame, solution, StructureFields::Hermitian(s.clone()), vary)
}

/// Hyper version: `τ` and `τ⋆` summed over the three structures.
pub fn constant_tau_taustar_hyper(g: &MetricJet, t: &StructureTriple, order: usize) -> Result<VariationSolution> {
    let m = g.dim();
    if m < 8 || !m.is_multiple_of(4) {
        return Err(Error::DimensionTooSmall { m, min: 8 });
    }
    let g = prepare(g, order)?;
    let t = StructureTriple {
        fields: [
            truncate_field(&t.fields[0], order)?,
            truncate_field(&t.fields[1], order)?,
            truncate_field(&t.fields[2], order)?,
        ],
        kind: t.kind,
    };
    let frame = hyper_frame(&g, &t)?;
    let frame_inv = invert_frame(&frame)?;
    let gf = g.pullback_linear(&frame)?;
    let tf = t.pullback_linear(&frame, &frame_inv);
    check_hyper_frame(&gf, &tf)?;
    let c0 = Curvature::new(&gf)?;
    let (tau0, star0) = (c0.scalar().eval_at_origin(), c0.star_scalar_hyper(&tf).eval_at_origin());
    let vary = |xi: &Series, eta: &Series| hyper_variation(&gf, &tf, xi, eta);
    let system = QuasilinearSystem::new(2, m, |u| {
        let c = Curvature::new(&vary(&u[0], &u[1])?)?;
        Ok(pair_residual(c.scalar(), c.star_scalar_hyper(&tf), &tau0, &star0))
    });
    let solution = ck_solve(&system, order)?;
    finish_variation(&g, frame, solution, StructureFields::Hyper(t.clone()), vary)
}

/// Expected normalized leading block of the conformal pipeline.
pub fn expected_conformal_linearization(m: usize, eps_mm: &Scalar) -> QMatrix {
    QMatrix::diagonal(&[int(2 - 2 * m as i64) * eps_mm])
}

/// Expected normalized leading block `[[−c ε¹¹ε^{mm}, −c'], [0, −c']]` for the
/// Hermitian (`c = 4, c' = 2`) and hyper (`c = 8, c' = 6`) pipelines.
pub fn expected_variation_linearization(hyper: bool, eps_11: &Scalar, eps_mm: &Scalar) -> QMatrix {
    let (c, c2) = if hyper { (8, 6) } else { (4, 2) };
    let mut out = QMatrix::zeros(2, 2);
    out[(0, 0)] = int(-c) * eps_11 * eps_mm;
    out[(0, 1)] = int(-c2);
    out[(1, 1)] = int(-c2);
    out
}

/// `ε^{ii}` of the orthonormal frame a pipeline solved in.
pub fn frame_eps_inv_diag(g: &MetricJet, frame: &QMatrix, i: usize) -> Scalar {
    let e = frame.congruence(&g.at_origin());
    if e[(i, i)].is_zero() {
        return Scalar::zero();
    }
    Scalar::one() / &e[(i, i)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(m: usize, n: usize, i: usize) -> Series {
        Series::var(m, n, i)
    }

    #[test]
    fn double_integration() {
        let sys = QuasilinearSystem::new(1, 2, |u| {
            let r = &u[0].derive(1).derive(1) + &Series::constant(2, u[0].order(), int(2));
            Ok(vec![r])
        });
        let sol = ck_solve(&sys, 6).unwrap();
        let x2 = x(2, 6, 1);
        assert_eq!(sol.unknowns[0], -&(&x2 * &x2));
        assert_eq!(sol.leading_block(), &QMatrix::from_i64(&[&[2]]));
        assert_eq!(sol.achieved, 4);
    }

    #[test]
    fn cosh_jet() {
        let sys = QuasilinearSystem::new(1, 2, |u| {
            let r = &(&u[0].derive(1).derive(1) - &u[0]) - &Series::one(2, u[0].order());
            Ok(vec![r])
        });
        let sol = ck_solve(&sys, 4).unwrap();
        let expect = Series::from_terms(2, 4, [(vec![0, 2], frac(1, 2)), (vec![0, 4], frac(1, 24))]);
        assert_eq!(sol.unknowns[0], expect);
    }

    #[test]
    fn wave_like() {
        let sys = QuasilinearSystem::new(1, 2, |u| {
            let r = &(&u[0].derive(0).derive(0) + &u[0].derive(1).derive(1)) - &Series::constant(2, u[0].order() - 2, int(2));
            Ok(vec![r])
        });
        let sol = ck_solve(&sys, 4).unwrap();
        let x2 = x(2, 4, 1);
        assert_eq!(sol.unknowns[0], &x2 * &x2);
    }

    #[test]
    fn singular_and_nonaffine() {
        let singular = QuasilinearSystem::new(1, 2, |u| Ok(vec![u[0].derive(0).derive(0)]));
        assert_eq!(ck_solve(&singular, 3).unwrap_err(), Error::SingularStep { step: 0 });
        let quadratic = QuasilinearSystem::new(1, 1, |u| {
            let s = u[0].derive(0).derive(0);
            Ok(vec![&(&s * &s) - &Series::one(1, s.order())])
        });
        assert_eq!(ck_solve(&quadratic, 3).unwrap_err(), Error::NonAffine { step: 0 });
    }

    #[test]
    fn flat_conformal_is_trivial() {
        let eps = QMatrix::diagonal(&[int(-1), int(1), int(1)]);
        let g = MetricJet::constant(&eps, 4).unwrap();
        let sol = constant_scalar_conformal(&g, 4).unwrap();
        assert!(sol.phi.is_zero());
        assert_eq!(sol.metric, g);
        assert_eq!(sol.report.linearization, expected_conformal_linearization(3, &int(1)));
    }

    #[test]
    fn conformal_rejects_dimension_one() {
        let g = MetricJet::constant(&QMatrix::identity(1), 3).unwrap();
        assert!(matches!(constant_scalar_conformal(&g, 3), Err(Error::DimensionTooSmall { .. })));
    }
}
