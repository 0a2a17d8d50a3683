//! Line-oriented JSON documents for models, metric jets, solver outputs and
//! verification reports. Rationals are `"p/q"` strings, indices are 1-based
//! and series are maps from comma-joined exponent vectors to coefficients.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{MetricJet, StructureField, StructureFields, StructureTriple};
use crate::scalar::{format_scalar, parse_scalar, QMatrix, Scalar};
use crate::series::{Series, SeriesMatrix};
use crate::tensor::{
    symmetry_images, CurvTensor, CurvatureModel, HermitianStructure, HyperKind, HyperStructure, Identity, ModelKind,
    Rho, Structure, Violation, BilinearForm,
};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{key}: {message}")]
    Field { key: String, message: String },
}

fn field(key: impl Into<String>, message: impl Into<String>) -> DocError {
    DocError::Field { key: key.into(), message: message.into() }
}

/// Serializes to one compact JSON line (with trailing newline).
pub fn to_line<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string(doc).expect("documents serialize");
    s.push('\n');
    s
}

pub fn from_text<T: DeserializeOwned>(text: &str) -> Result<T, DocError> {
    serde_json::from_str(text).map_err(|e| DocError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn scalar_at(key: &str, s: &str) -> Result<Scalar, DocError> {
    parse_scalar(s).ok_or_else(|| field(key, format!("not a rational: {s:?}")))
}

fn join(idx: &[usize]) -> String {
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn split_indices(key: &str, ctx: &str, count: usize, bound: usize) -> Result<Vec<usize>, DocError> {
    let loc = format!("{ctx}[{key}]");
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != count {
        return Err(field(loc, format!("expected {count} comma-separated indices")));
    }
    parts
        .iter()
        .map(|p| match p.trim().parse::<usize>() {
            Ok(i) if (1..=bound).contains(&i) => Ok(i - 1),
            _ => Err(field(loc.clone(), format!("index {p:?} outside 1..={bound}"))),
        })
        .collect()
}

fn encode_matrix(a: &QMatrix) -> Vec<Vec<String>> {
    (0..a.rows()).map(|i| (0..a.cols()).map(|j| format_scalar(&a[(i, j)])).collect()).collect()
}

fn decode_matrix(key: &str, rows: &[Vec<String>], dim: usize) -> Result<QMatrix, DocError> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(field(key, format!("expected a {dim}x{dim} matrix")));
    }
    let mut out = QMatrix::zeros(dim, dim);
    for (i, r) in rows.iter().enumerate() {
        for (j, s) in r.iter().enumerate() {
            out[(i, j)] = scalar_at(&format!("{key}[{},{}]", i + 1, j + 1), s)?;
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub provenance: Option<String>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema: u32,
    pub kind: String,
    pub dim: usize,
    pub eps: Vec<Vec<String>>,
    #[serde(rename = "A")]
    pub a: BTreeMap<String, String>,
    #[serde(rename = "J", skip_serializing_if = "Option::is_none", default)]
    pub j: Option<Vec<Vec<String>>>,
    #[serde(rename = "J1", skip_serializing_if = "Option::is_none", default)]
    pub j1: Option<Vec<Vec<String>>>,
    #[serde(rename = "J2", skip_serializing_if = "Option::is_none", default)]
    pub j2: Option<Vec<Vec<String>>>,
    #[serde(rename = "J3", skip_serializing_if = "Option::is_none", default)]
    pub j3: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meta: Option<Meta>,
}

/// A model document after parsing but before validation, so that symmetry
/// conflicts and structure failures can be reported instead of aborting.
#[derive(Clone, Debug)]
pub struct RawModel {
    pub kind: ModelKind,
    pub eps: QMatrix,
    pub tensor: CurvTensor,
    pub conflicts: Vec<Violation>,
    pub structures: Vec<QMatrix>,
}

pub fn structure_kind(structure: &Structure) -> ModelKind {
    match structure {
        Structure::None => ModelKind::Plain,
        Structure::Hermitian(h) if h.rho() == Rho::Pseudo => ModelKind::Hermitian,
        Structure::Hermitian(_) => ModelKind::Para,
        Structure::Hyper(q) if q.kind() == HyperKind::Pseudo => ModelKind::HyperPseudo,
        Structure::Hyper(_) => ModelKind::HyperPara,
    }
}

fn hermitian_rho(kind: ModelKind) -> Rho {
    if kind == ModelKind::Para {
        Rho::Para
    } else {
        Rho::Pseudo
    }
}

fn hyper_kind(kind: ModelKind) -> HyperKind {
    if kind == ModelKind::HyperPara {
        HyperKind::Para
    } else {
        HyperKind::Pseudo
    }
}

impl ModelDocument {
    pub fn encode(model: &CurvatureModel, structure: &Structure, meta: Option<Meta>) -> Self {
        let m = model.dim();
        let t = model.tensor();
        let mut a = BTreeMap::new();
        for i in 0..m {
            for j in i + 1..m {
                for k in 0..m {
                    for l in k + 1..m {
                        if (i, j) > (k, l) {
                            continue;
                        }
                        let v = t.get(i, j, k, l);
                        if !v.is_zero() {
                            a.insert(join(&[i + 1, j + 1, k + 1, l + 1]), format_scalar(v));
                        }
                    }
                }
            }
        }
        let mut doc = ModelDocument {
            schema: SCHEMA,
            kind: structure_kind(structure).name().to_string(),
            dim: m,
            eps: encode_matrix(model.form().eps()),
            a,
            j: None,
            j1: None,
            j2: None,
            j3: None,
            meta,
        };
        match structure {
            Structure::None => {}
            Structure::Hermitian(h) => doc.j = Some(encode_matrix(h.j())),
            Structure::Hyper(q) => {
                let [a, b, c] = q.matrices();
                doc.j1 = Some(encode_matrix(a));
                doc.j2 = Some(encode_matrix(b));
                doc.j3 = Some(encode_matrix(c));
            }
        }
        doc
    }

    pub fn decode(&self) -> Result<RawModel, DocError> {
        if self.schema != SCHEMA {
            return Err(field("schema", format!("unsupported schema {}", self.schema)));
        }
        let kind = ModelKind::parse(&self.kind).ok_or_else(|| field("kind", format!("unknown kind {:?}", self.kind)))?;
        let m = self.dim;
        if m == 0 {
            return Err(field("dim", "must be positive"));
        }
        let eps = decode_matrix("eps", &self.eps, m)?;
        let mut tensor = CurvTensor::zeros(m);
        let mut source: BTreeMap<[usize; 4], ([usize; 4], Scalar)> = BTreeMap::new();
        let mut conflicts = Vec::new();
        for (key, value) in &self.a {
            let idx = split_indices(key, "A", 4, m)?;
            let idx = [idx[0], idx[1], idx[2], idx[3]];
            let v = scalar_at(&format!("A[{key}]"), value)?;
            for (img, same) in symmetry_images(idx) {
                let w = if same { v.clone() } else { -v.clone() };
                match source.get(&img) {
                    Some((from, prev)) if *prev != w => {
                        let [i, j, k, l] = idx;
                        let identity = if *from == [k, l, i, j] || *from == [l, k, j, i] {
                            Identity::PairSymmetry
                        } else {
                            Identity::Antisymmetry
                        };
                        conflicts.push(Violation { identity, witness: idx });
                        break;
                    }
                    Some(_) => {}
                    None => {
                        source.insert(img, (idx, w.clone()));
                        tensor.set_raw(img[0], img[1], img[2], img[3], w);
                    }
                }
            }
        }
        let structures = match kind {
            ModelKind::Plain => {
                if self.j.is_some() || self.j1.is_some() {
                    return Err(field("J", "plain models carry no structure"));
                }
                vec![]
            }
            ModelKind::Hermitian | ModelKind::Para => {
                let j = self.j.as_ref().ok_or_else(|| field("J", "missing"))?;
                vec![decode_matrix("J", j, m)?]
            }
            ModelKind::HyperPseudo | ModelKind::HyperPara => {
                let mut out = Vec::new();
                for (name, j) in [("J1", &self.j1), ("J2", &self.j2), ("J3", &self.j3)] {
                    let j = j.as_ref().ok_or_else(|| field(name, "missing"))?;
                    out.push(decode_matrix(name, j, m)?);
                }
                out
            }
        };
        Ok(RawModel { kind, eps, tensor, conflicts, structures })
    }

    pub fn to_model(&self) -> Result<(CurvatureModel, Structure), DocError> {
        self.decode()?.validated().map_err(|e| field("model", e.to_string()))
    }
}

impl RawModel {
    /// Validates form, tensor and structure.
    pub fn validated(&self) -> crate::Result<(CurvatureModel, Structure)> {
        if let Some(v) = self.conflicts.first() {
            return Err(crate::Error::InvalidCurvature(format!("conflicting entries: {v}")));
        }
        let form = BilinearForm::new(self.eps.clone())?;
        let model = CurvatureModel::new(form, self.tensor.clone())?;
        let structure = self.structure(model.form())?;
        Ok((model, structure))
    }

    pub fn structure(&self, form: &BilinearForm) -> crate::Result<Structure> {
        Ok(match self.kind {
            ModelKind::Plain => Structure::None,
            ModelKind::Hermitian | ModelKind::Para => {
                Structure::Hermitian(HermitianStructure::new(form, self.structures[0].clone(), hermitian_rho(self.kind))?)
            }
            ModelKind::HyperPseudo | ModelKind::HyperPara => {
                let js = [0, 1, 2].map(|a| self.structures[a].clone());
                Structure::Hyper(HyperStructure::new(form, js, hyper_kind(self.kind))?)
            }
        })
    }
}

pub type SeriesDoc = BTreeMap<String, String>;

pub fn encode_series(s: &Series) -> SeriesDoc {
    s.terms()
        .map(|(e, c)| (e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","), format_scalar(c)))
        .collect()
}

pub fn decode_series(key: &str, doc: &SeriesDoc, nvars: usize, order: usize) -> Result<Series, DocError> {
    let mut terms = Vec::with_capacity(doc.len());
    for (e, c) in doc {
        let loc = format!("{key}[{e}]");
        let exps: Vec<u8> = e
            .split(',')
            .map(|p| p.trim().parse::<u8>().map_err(|_| field(loc.clone(), "bad exponent")))
            .collect::<Result<_, _>>()?;
        if exps.len() != nvars {
            return Err(field(loc, format!("expected {nvars} exponents")));
        }
        if exps.iter().map(|&x| x as usize).sum::<usize>() > order {
            return Err(field(loc, format!("degree exceeds order {order}")));
        }
        terms.push((exps, scalar_at(&loc, c)?));
    }
    Ok(Series::from_terms(nvars, order, terms))
}

type MatrixDoc = BTreeMap<String, SeriesDoc>;

fn encode_series_matrix(a: &SeriesMatrix, upper: bool) -> MatrixDoc {
    let mut out = BTreeMap::new();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if (upper && j < i) || a.get(i, j).is_zero() {
                continue;
            }
            out.insert(join(&[i + 1, j + 1]), encode_series(a.get(i, j)));
        }
    }
    out
}

fn decode_series_matrix(key: &str, doc: &MatrixDoc, dim: usize, order: usize, symmetric: bool) -> Result<SeriesMatrix, DocError> {
    let mut out = SeriesMatrix::zeros(dim, order, dim, dim);
    for (k, v) in doc {
        let idx = split_indices(k, key, 2, dim)?;
        let s = decode_series(&format!("{key}[{k}]"), v, dim, order)?;
        if symmetric {
            if idx[1] < idx[0] {
                return Err(field(format!("{key}[{k}]"), "only entries with i <= j are stored"));
            }
            out.set(idx[1], idx[0], s.clone());
        }
        out.set(idx[0], idx[1], s);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct MetricJetDocument {
    pub schema: u32,
    #[serde(rename = "type")]
    pub doc_type: String,
    pub kind: String,
    pub dim: usize,
    pub order: usize,
    pub provenance: String,
    pub g: MatrixDoc,
    #[serde(rename = "J", skip_serializing_if = "Option::is_none", default)]
    pub j: Option<MatrixDoc>,
    #[serde(rename = "J1", skip_serializing_if = "Option::is_none", default)]
    pub j1: Option<MatrixDoc>,
    #[serde(rename = "J2", skip_serializing_if = "Option::is_none", default)]
    pub j2: Option<MatrixDoc>,
    #[serde(rename = "J3", skip_serializing_if = "Option::is_none", default)]
    pub j3: Option<MatrixDoc>,
}

impl MetricJetDocument {
    pub fn encode(g: &MetricJet, fields: &StructureFields, provenance: &str) -> Self {
        let kind = match fields {
            StructureFields::None => ModelKind::Plain,
            StructureFields::Hermitian(s) if s.rho == Rho::Pseudo => ModelKind::Hermitian,
            StructureFields::Hermitian(_) => ModelKind::Para,
            StructureFields::Hyper(t) if t.kind == HyperKind::Pseudo => ModelKind::HyperPseudo,
            StructureFields::Hyper(_) => ModelKind::HyperPara,
        };
        let mut doc = MetricJetDocument {
            schema: SCHEMA,
            doc_type: "metric-jet".into(),
            kind: kind.name().into(),
            dim: g.dim(),
            order: g.order(),
            provenance: provenance.into(),
            g: encode_series_matrix(g.matrix(), true),
            j: None,
            j1: None,
            j2: None,
            j3: None,
        };
        match fields {
            StructureFields::None => {}
            StructureFields::Hermitian(s) => doc.j = Some(encode_series_matrix(&s.j, false)),
            StructureFields::Hyper(t) => {
                doc.j1 = Some(encode_series_matrix(&t.fields[0].j, false));
                doc.j2 = Some(encode_series_matrix(&t.fields[1].j, false));
                doc.j3 = Some(encode_series_matrix(&t.fields[2].j, false));
            }
        }
        doc
    }

    pub fn decode(&self) -> Result<(MetricJet, StructureFields), DocError> {
        if self.schema != SCHEMA || self.doc_type != "metric-jet" {
            return Err(field("type", "not a metric-jet document"));
        }
        let kind = ModelKind::parse(&self.kind).ok_or_else(|| field("kind", format!("unknown kind {:?}", self.kind)))?;
        let (m, n) = (self.dim, self.order);
        let g = decode_series_matrix("g", &self.g, m, n, true)?;
        let g = MetricJet::new(g).map_err(|e| field("g", e.to_string()))?;
        let get = |name: &str, d: &Option<MatrixDoc>| -> Result<SeriesMatrix, DocError> {
            let d = d.as_ref().ok_or_else(|| field(name, "missing"))?;
            decode_series_matrix(name, d, m, n, false)
        };
        let fields = match kind {
            ModelKind::Plain => StructureFields::None,
            ModelKind::Hermitian | ModelKind::Para => {
                StructureFields::Hermitian(StructureField { j: get("J", &self.j)?, rho: hermitian_rho(kind) })
            }
            ModelKind::HyperPseudo | ModelKind::HyperPara => {
                let hk = hyper_kind(kind);
                let rhos = hk.rhos();
                let js = [get("J1", &self.j1)?, get("J2", &self.j2)?, get("J3", &self.j3)?];
                let [a, b, c] = js;
                StructureFields::Hyper(StructureTriple {
                    fields: [
                        StructureField { j: a, rho: rhos[0] },
                        StructureField { j: b, rho: rhos[1] },
                        StructureField { j: c, rho: rhos[2] },
                    ],
                    kind: hk,
                })
            }
        };
        Ok((g, fields))
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub schema: u32,
    #[serde(rename = "type")]
    pub doc_type: String,
    pub target: String,
    pub order: usize,
    pub unknowns: BTreeMap<String, SeriesDoc>,
    pub metric: MetricJetDocument,
}

impl SolutionDocument {
    pub fn encode(target: &str, unknowns: &[(&str, &Series)], metric: MetricJetDocument) -> Self {
        SolutionDocument {
            schema: SCHEMA,
            doc_type: "solution".into(),
            target: target.into(),
            order: metric.order,
            unknowns: unknowns.iter().map(|(k, s)| (k.to_string(), encode_series(s))).collect(),
            metric,
        }
    }

    pub fn decode(&self) -> Result<(BTreeMap<String, Series>, MetricJet, StructureFields), DocError> {
        if self.schema != SCHEMA || self.doc_type != "solution" {
            return Err(field("type", "not a solution document"));
        }
        let (g, f) = self.metric.decode()?;
        let mut u = BTreeMap::new();
        for (k, v) in &self.unknowns {
            u.insert(k.clone(), decode_series(&format!("unknowns.{k}"), v, self.metric.dim, self.order)?);
        }
        Ok((u, g, f))
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub determinants: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub linearization: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected_linearization: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub timings_us: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub schema: u32,
    pub operation: String,
    pub input: String,
    pub digest: String,
    #[serde(default)]
    pub orders: BTreeMap<String, usize>,
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl ReportDocument {
    pub fn new(operation: &str, input: &str, bytes: &[u8]) -> Self {
        ReportDocument {
            schema: SCHEMA,
            operation: operation.into(),
            input: input.into(),
            digest: sha256_hex(bytes),
            orders: BTreeMap::new(),
            verdicts: Vec::new(),
            diagnostics: Diagnostics::default(),
            error: None,
        }
    }

    pub fn verdict(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict::new(name, pass, detail));
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.verdicts.iter().all(|v| v.pass)
    }
}

pub fn matrix_strings(a: &QMatrix) -> Vec<Vec<String>> {
    encode_matrix(a)
}
