//! Metric jets realizing a prescribed curvature model, and the structure
//! preserving metric variations used by the constant-curvature pipelines.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::geometry::{MetricJet, StructureField, StructureFields, StructureTriple};
use crate::scalar::{frac, int, QMatrix};
use crate::series::{Series, SeriesMatrix};
use crate::tensor::{
    is_conformally_flat, orthonormalize_model, ricci, trace_form, CurvatureModel, HermitianStructure, HyperStructure, Structure,
};

/// Which construction produced a [`RealizedGeometry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// `g_ik = ε_ik − ⅓ A_ijlk x^j x^l`.
    Quadratic,
    /// `g = (1 + φ) ε` with `φ` quadratic, for conformally flat models.
    ConformallyFlat,
    /// Quadratic metric plus structures transported by the square root of `ε⁻¹ g`.
    StructureExtension,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Quadratic => "quadratic",
            Provenance::ConformallyFlat => "conformally-flat",
            Provenance::StructureExtension => "structure-extension",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RealizedGeometry {
    pub metric: MetricJet,
    pub fields: StructureFields,
    pub provenance: Provenance,
    pub origin: CurvatureModel,
    pub origin_structure: Structure,
}

/// Quadratic realization `g_ik = ε_ik − ⅓ Σ_{j,l} A_ijlk x_j x_l`, whose
/// curvature at the origin is exactly `A`.
pub fn realize(model: &CurvatureModel, order: usize) -> Result<RealizedGeometry> {
    if order < 2 {
        return Err(Error::OrderTooSmall { found: order, min: 2 });
    }
    let m = model.dim();
    let eps = model.form().eps();
    let a = model.tensor();
    let third = frac(-1, 3);
    let g = SeriesMatrix::from_fn(m, m, |i, k| {
        let mut terms = vec![(vec![0u8; m], eps[(i, k)].clone())];
        for j in 0..m {
            for l in 0..m {
                let c = a.get(i, j, l, k);
                if c.is_zero() {
                    continue;
                }
                let mut e = vec![0u8; m];
                e[j] += 1;
                e[l] += 1;
                terms.push((e, c * &third));
            }
        }
        Series::from_terms(m, order, terms)
    });
    Ok(RealizedGeometry {
        metric: MetricJet::new(g)?,
        fields: StructureFields::None,
        provenance: Provenance::Quadratic,
        origin: model.clone(),
        origin_structure: Structure::None,
    })
}

/// The quadratic conformal factor of a conformally flat model in an
/// orthonormal basis:
/// `φ = Σ_j (ε_jj τ + (2−2m) ρ_jj)/(2(m−1)(m−2)) x_j² + Σ_{i<j} 2/(2−m) ρ_ij x_i x_j`.
pub fn conformal_factor(model: &CurvatureModel, order: usize) -> Result<Series> {
    let m = model.dim();
    if m < 3 {
        return Err(Error::DimensionTooSmall { m, min: 3 });
    }
    if !model.form().is_orthonormal() {
        return Err(Error::NotAdapted("conformally flat realization needs a diagonal ±1 form".into()));
    }
    let eps = model.form().eps();
    let rho = ricci(model);
    let tau = trace_form(model.form(), &rho);
    let mi = m as i64;
    let diag_den = frac(1, 2 * (mi - 1) * (mi - 2));
    let off = frac(2, 2 - mi);
    let mut terms = Vec::new();
    for j in 0..m {
        let mut e = vec![0u8; m];
        e[j] = 2;
        let c = (&eps[(j, j)] * &tau + int(2 - 2 * mi) * &rho[(j, j)]) * &diag_den;
        terms.push((e, c));
        for k in j + 1..m {
            let mut e = vec![0u8; m];
            e[j] = 1;
            e[k] = 1;
            terms.push((e, &off * &rho[(j, k)]));
        }
    }
    Ok(Series::from_terms(m, order, terms))
}

/// Conformally flat realization `g = (1 + φ)·ε`.
pub fn realize_conformally_flat(model: &CurvatureModel, order: usize) -> Result<RealizedGeometry> {
    if order < 2 {
        return Err(Error::OrderTooSmall { found: order, min: 2 });
    }
    let m = model.dim();
    if m < 3 {
        return Err(Error::DimensionTooSmall { m, min: 3 });
    }
    if !model.form().is_orthonormal() {
        return Err(Error::NotAdapted("conformally flat realization needs a diagonal ±1 form".into()));
    }
    if !is_conformally_flat(model)? {
        return Err(Error::NotConformallyFlat);
    }
    let phi = conformal_factor(model, order)?;
    let factor = &Series::one(m, order) + &phi;
    let g = SeriesMatrix::from_constant(m, order, model.form().eps()).scale_series(&factor);
    Ok(RealizedGeometry {
        metric: MetricJet::new(g)?,
        fields: StructureFields::None,
        provenance: Provenance::ConformallyFlat,
        origin: model.clone(),
        origin_structure: Structure::None,
    })
}

/// Conformally flat realization for an arbitrary form: realize in an
/// orthonormal frame and transport the metric back.
pub fn realize_conformally_flat_any(model: &CurvatureModel, order: usize) -> Result<RealizedGeometry> {
    if model.form().is_orthonormal() {
        return realize_conformally_flat(model, order);
    }
    if !is_conformally_flat(model)? {
        return Err(Error::NotConformallyFlat);
    }
    let frame = orthonormalize_model(model, &Structure::None)?;
    let mut out = realize_conformally_flat(&frame.model, order)?;
    out.metric = out.metric.pullback_linear(&frame.basis.inverse()?)?;
    out.origin = model.clone();
    Ok(out)
}

/// `ψ = √(ε⁻¹ g)`, the root with identity constant term.
pub fn structure_root(model: &CurvatureModel, g: &MetricJet) -> Result<SeriesMatrix> {
    let eps = model.form().eps();
    if &g.at_origin() != eps {
        return Err(Error::NotAdapted("metric at the origin differs from the model form".into()));
    }
    let psi_big = g.matrix().left_mul_constant(model.form().eps_inv());
    psi_big.sqrt()
}

/// Extends a constant structure `J` to the field `ψ⁻¹ J ψ`, compatible with `g`.
pub fn extend_structure(model: &CurvatureModel, h: &HermitianStructure, g: &MetricJet) -> Result<StructureField> {
    let psi = structure_root(model, g)?;
    Ok(conjugate_field(&psi, h))
}

fn conjugate_field(psi: &SeriesMatrix, h: &HermitianStructure) -> StructureField {
    let psi_inv = psi.inverse().expect("root has identity constant term");
    let j = psi_inv.right_mul_constant(h.j()).mul(psi);
    StructureField { j, rho: h.rho() }
}

/// Conjugates all three structures by the same root.
pub fn extend_structure_hyper(model: &CurvatureModel, q: &HyperStructure, g: &MetricJet) -> Result<StructureTriple> {
    let psi = structure_root(model, g)?;
    let s = q.structures();
    Ok(StructureTriple { fields: [0, 1, 2].map(|a| conjugate_field(&psi, &s[a])), kind: q.kind() })
}

/// Extends whatever structure decorates the model along `g`.
pub fn extend_fields(model: &CurvatureModel, structure: &Structure, g: &MetricJet) -> Result<StructureFields> {
    Ok(match structure {
        Structure::None => StructureFields::None,
        Structure::Hermitian(h) => StructureFields::Hermitian(extend_structure(model, h, g)?),
        Structure::Hyper(q) => StructureFields::Hyper(extend_structure_hyper(model, q, g)?),
    })
}

/// Quadratic realization plus extension of whatever structure decorates the model.
pub fn realize_structured(model: &CurvatureModel, structure: &Structure, order: usize) -> Result<RealizedGeometry> {
    let mut out = realize(model, order)?;
    if *structure == Structure::None {
        return Ok(out);
    }
    out.fields = extend_fields(model, structure, &out.metric)?;
    out.provenance = Provenance::StructureExtension;
    out.origin_structure = structure.clone();
    Ok(out)
}

fn check_vanishing_at_origin(name: &str, s: &Series) -> Result<()> {
    if !s.eval_at_origin().is_zero() {
        return Err(Error::InvalidStructure(format!("{name} must vanish at the origin")));
    }
    Ok(())
}

fn check_orthonormal_origin(g: &MetricJet) -> Result<QMatrix> {
    let g0 = g.at_origin();
    let m = g.dim();
    let ok = (0..m).all(|i| {
        (0..m).all(|j| if i == j { g0[(i, i)] == int(1) || g0[(i, i)] == int(-1) } else { g0[(i, j)].is_zero() })
    });
    if !ok {
        return Err(Error::NotAdapted("metric is not orthonormal at the origin".into()));
    }
    Ok(g0)
}

/// Checks the frame conditions of the Hermitian variation: `g(0)` diagonal
/// `±1` and `J(0)` the standard block structure.
pub fn check_hermitian_frame(g: &MetricJet, s: &StructureField) -> Result<()> {
    let m = g.dim();
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::DimensionTooSmall { m, min: 4 });
    }
    check_orthonormal_origin(g)?;
    if s.at_origin() != HermitianStructure::standard(m, s.rho) {
        return Err(Error::NotAdapted("J(0) is not in standard block form".into()));
    }
    Ok(())
}

pub fn check_hyper_frame(g: &MetricJet, t: &StructureTriple) -> Result<()> {
    let m = g.dim();
    if m < 8 || !m.is_multiple_of(4) {
        return Err(Error::DimensionTooSmall { m, min: 8 });
    }
    check_orthonormal_origin(g)?;
    let std = HyperStructure::standard(m, t.kind);
    for a in 0..3 {
        if t.fields[a].at_origin() != std[a] {
            return Err(Error::NotAdapted(format!("J{}(0) is not in standard form", a + 1)));
        }
    }
    Ok(())
}

/// `dx_i∘dx_i − Σ ϱ_a (J_a* dx_i)∘(J_a* dx_i)` with `(J* dx_i)_k = J^i_k`.
fn twisted_square(m: usize, order: usize, i: usize, fields: &[&StructureField]) -> SeriesMatrix {
    let mut out = SeriesMatrix::zeros(m, order, m, m);
    out.set(i, i, Series::one(m, order));
    for f in fields {
        let row: Vec<&Series> = (0..m).map(|k| f.j.get(i, k)).collect();
        let rho = f.rho.scalar();
        for k in 0..m {
            if row[k].is_zero() {
                continue;
            }
            for l in k..m {
                if row[l].is_zero() {
                    continue;
                }
                let t = (row[k] * row[l]).scale(&rho);
                let v = out.get(k, l) - &t;
                if k != l {
                    out.set(l, k, v.clone());
                }
                out.set(k, l, v);
            }
        }
    }
    out
}

fn vary(g: &MetricJet, a: &SeriesMatrix, xi: &Series, b: &SeriesMatrix, eta: &Series) -> Result<MetricJet> {
    let two = int(2);
    let h = g.matrix().add(&a.scale_series(&xi.scale(&two))).add(&b.scale_series(&eta.scale(&two)));
    MetricJet::new(h)
}

/// `h = g + 2ξ{dx₁∘dx₁ − ϱ Jdx₁∘Jdx₁} + 2η{dx_m∘dx_m − ϱ Jdx_m∘Jdx_m}`.
pub fn hermitian_variation(g: &MetricJet, s: &StructureField, xi: &Series, eta: &Series) -> Result<MetricJet> {
    check_hermitian_frame(g, s)?;
    check_vanishing_at_origin("xi", xi)?;
    check_vanishing_at_origin("eta", eta)?;
    let (m, n) = (g.dim(), g.order().min(s.j.order()));
    let theta_1 = twisted_square(m, n, 0, &[s]);
    let theta_m = twisted_square(m, n, m - 1, &[s]);
    vary(g, &theta_1, xi, &theta_m, eta)
}

/// `h = g + 2ξ Ξ₁ + 2η Ξ_m`, `Ξ_i = dx_i∘dx_i − Σ_a ϱ_a J_a*dx_i∘J_a*dx_i`.
pub fn hyper_variation(g: &MetricJet, t: &StructureTriple, xi: &Series, eta: &Series) -> Result<MetricJet> {
    check_hyper_frame(g, t)?;
    check_vanishing_at_origin("xi", xi)?;
    check_vanishing_at_origin("eta", eta)?;
    let m = g.dim();
    let n = t.fields.iter().map(|f| f.j.order()).min().unwrap_or(0).min(g.order());
    let fields: Vec<&StructureField> = t.fields.iter().collect();
    let xi_1 = twisted_square(m, n, 0, &fields);
    let xi_m = twisted_square(m, n, m - 1, &fields);
    vary(g, &xi_1, xi, &xi_m, eta)
}

/// Standard constant structure fields for a model kind.
pub fn constant_fields(structure: &Structure, order: usize) -> StructureFields {
    match structure {
        Structure::None => StructureFields::None,
        Structure::Hermitian(h) => StructureFields::Hermitian(StructureField::constant(h.j(), h.rho(), order)),
        Structure::Hyper(q) => StructureFields::Hyper(StructureTriple::constant(q, order)),
    }
}
