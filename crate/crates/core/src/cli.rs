//! The `curvreal` command line: `gen`, `check`, `realize`, `solve`.
//!
//! Exit status is 0 when every verdict passes, 1 when a verification fails
//! and 2 on usage or parse errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ck::{
    constant_scalar_conformal, constant_tau_taustar, constant_tau_taustar_hyper, expected_conformal_linearization,
    expected_variation_linearization, frame_eps_inv_diag, PipelineReport,
};
use crate::error::Error;
use crate::geometry::{constancy_degree, point_model, riemann, Curvature, MetricJet, StructureFields};
use crate::io::{
    from_text, matrix_strings, to_line, Meta, MetricJetDocument, ModelDocument, ReportDocument, SolutionDocument,
};
use crate::realization::{extend_fields, realize_conformally_flat_any, realize_structured};
use crate::scalar::{format_scalar, QMatrix};
use crate::series::Series;
use crate::tensor::{
    hermitian_violations, hyper_violations, random_conformally_flat, random_model, BilinearForm, CurvatureModel,
    HyperKind, Identity, ModelKind, Rho, Structure,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "curvreal", version, about = "Exact realization of curvature models by metric jets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded random curvature model document.
    Gen(GenArgs),
    /// Validate model documents.
    Check(CheckArgs),
    /// Realize models as metric jets.
    Realize(RealizeArgs),
    /// Deform realized metrics to constant scalar (and star-scalar) curvature.
    Solve(SolveArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    dim: usize,
    /// Negative and positive counts, e.g. `1,3`.
    #[arg(long, value_parser = parse_signature)]
    signature: (usize, usize),
    #[arg(long, default_value = "plain", value_parser = parse_kind)]
    kind: ModelKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit a conformally flat model `ε ⊙ S` (plain kind only).
    #[arg(long)]
    conformally_flat: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Batch {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Worker threads for independent input files.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Do not print reports to stdout.
    #[arg(long)]
    quiet: bool,
    /// Also write the reports, one per line, to this path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    batch: Batch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Plain,
    ConformallyFlat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    Tau,
    TauTaustar,
}

#[derive(Args, Debug)]
struct RealizeArgs {
    #[command(flatten)]
    batch: Batch,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, value_enum, default_value_t = Mode::Plain)]
    mode: Mode,
    /// Output file, or directory when several inputs are given.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    batch: Batch,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, value_enum, default_value_t = Target::Tau)]
    target: Target,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_signature(s: &str) -> Result<(usize, usize), String> {
    let (p, q) = s.split_once(',').ok_or("expected p,q")?;
    let p = p.trim().parse().map_err(|_| format!("bad count {p:?}"))?;
    let q = q.trim().parse().map_err(|_| format!("bad count {q:?}"))?;
    Ok((p, q))
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = ModelKind::ALL.iter().map(|k| k.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

/// Parses arguments and runs; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::Check(a) => batch(&a.batch, None, |path, bytes, _| check(path, bytes)),
        Command::Realize(a) => {
            let out = a.out.clone();
            batch(&a.batch, out.as_deref(), |path, bytes, out| realize_file(path, bytes, out, a.order, a.mode))
        }
        Command::Solve(a) => {
            let out = a.out.clone();
            batch(&a.batch, out.as_deref(), |path, bytes, out| solve_file(path, bytes, out, a.order, a.target))
        }
    }
}

fn gen(a: &GenArgs) -> i32 {
    let (p, q) = a.signature;
    if p + q != a.dim {
        eprintln!("error: signature {p},{q} does not match --dim {}", a.dim);
        return EXIT_USAGE;
    }
    let built = if a.conformally_flat {
        if a.kind != ModelKind::Plain {
            eprintln!("error: --conformally-flat requires --kind plain");
            return EXIT_USAGE;
        }
        random_conformally_flat(a.dim, p, a.seed).map(|m| (m, Structure::None))
    } else {
        random_model(a.dim, p, q, a.seed, a.kind)
    };
    let (model, structure) = match built {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let provenance = if a.conformally_flat { "random-conformally-flat" } else { "random" };
    let meta = Meta { seed: Some(a.seed), provenance: Some(provenance.into()) };
    let line = to_line(&ModelDocument::encode(&model, &structure, Some(meta)));
    match &a.out {
        Some(path) => {
            if let Err(e) = fs::write(path, line) {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
        None => print!("{line}"),
    }
    EXIT_OK
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::DimensionTooSmall { .. } | Error::OrderTooSmall { .. } | Error::Unsupported(_))
}

/// Result of processing one input file.
enum Outcome {
    Report(ReportDocument),
    Usage(String),
}

fn batch<F>(b: &Batch, out: Option<&Path>, f: F) -> i32
where
    F: Fn(&Path, &[u8], Option<PathBuf>) -> Outcome + Sync,
{
    let many = b.files.len() > 1;
    if many {
        if let Some(dir) = out {
            if let Err(e) = fs::create_dir_all(dir) {
                eprintln!("error: {}: {e}", dir.display());
                return EXIT_USAGE;
            }
        }
    }
    let target = |path: &Path| -> Option<PathBuf> {
        let out = out?;
        if !many {
            return Some(out.to_path_buf());
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        Some(out.join(format!("{stem}.out.json")))
    };
    let one = |path: &Path| -> Outcome {
        match fs::read(path) {
            Ok(bytes) => f(path, &bytes, target(path)),
            Err(e) => Outcome::Usage(format!("{}: {e}", path.display())),
        }
    };
    let results: Vec<Mutex<Option<Outcome>>> = b.files.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = b.jobs.max(1).min(b.files.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= b.files.len() {
                    break;
                }
                let r = one(&b.files[i]);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut code = EXIT_OK;
    let mut lines = String::new();
    for r in results {
        match r.into_inner().unwrap().expect("every file processed") {
            Outcome::Report(rep) => {
                if !rep.passed() {
                    code = code.max(EXIT_FAIL);
                }
                lines.push_str(&to_line(&rep));
            }
            Outcome::Usage(msg) => {
                eprintln!("error: {msg}");
                code = EXIT_USAGE;
            }
        }
    }
    if !b.quiet {
        print!("{lines}");
    }
    if let Some(path) = &b.report {
        if let Err(e) = fs::write(path, &lines) {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    }
    code
}

fn parse_model_text(path: &Path, bytes: &[u8]) -> Result<ModelDocument, String> {
    let text = std::str::from_utf8(bytes).map_err(|_| format!("{}: not UTF-8", path.display()))?;
    from_text::<ModelDocument>(text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_model(path: &Path, bytes: &[u8]) -> Result<(CurvatureModel, Structure), String> {
    let doc = parse_model_text(path, bytes)?;
    doc.to_model().map_err(|e| format!("{}: {e}", path.display()))
}

fn elapsed_us(t: Instant) -> u64 {
    t.elapsed().as_micros() as u64
}

fn check(path: &Path, bytes: &[u8]) -> Outcome {
    let start = Instant::now();
    let raw = match parse_model_text(path, bytes).and_then(|d| d.decode().map_err(|e| format!("{}: {e}", path.display()))) {
        Ok(r) => r,
        Err(e) => return Outcome::Usage(e),
    };
    let mut rep = ReportDocument::new("check", &path.display().to_string(), bytes);
    let form = BilinearForm::new(raw.eps.clone());
    rep.verdict("form", form.is_ok(), form.as_ref().err().map(|e| e.to_string()).unwrap_or_default());
    if let Ok(form) = &form {
        let (p, q) = form.signature();
        let sig = raw.kind.check_signature(p, q);
        let detail = match &sig {
            Ok(()) => format!("{p},{q}"),
            Err(e) => e.to_string(),
        };
        rep.verdict("signature", sig.is_ok(), detail);
    }
    let mut violations = raw.conflicts.clone();
    violations.extend(raw.tensor.validate());
    for (name, identity) in [
        ("antisymmetry", Identity::Antisymmetry),
        ("pair-symmetry", Identity::PairSymmetry),
        ("bianchi", Identity::Bianchi),
    ] {
        let first = violations.iter().find(|v| v.identity == identity);
        rep.verdict(name, first.is_none(), first.map(|v| v.to_string()).unwrap_or_default());
    }
    if let (Ok(form), false) = (&form, raw.structures.is_empty()) {
        let problems = match raw.kind {
            ModelKind::Hermitian => hermitian_violations(form, &raw.structures[0], Rho::Pseudo),
            ModelKind::Para => hermitian_violations(form, &raw.structures[0], Rho::Para),
            ModelKind::HyperPseudo | ModelKind::HyperPara => {
                let kind = if raw.kind == ModelKind::HyperPara { HyperKind::Para } else { HyperKind::Pseudo };
                let js = [0, 1, 2].map(|a| raw.structures[a].clone());
                hyper_violations(form, &js, kind)
            }
            ModelKind::Plain => vec![],
        };
        rep.verdict("structure", problems.is_empty(), problems.join("; "));
    }
    rep.orders.insert("dim".into(), raw.eps.rows());
    rep.diagnostics.timings_us.insert("total".into(), elapsed_us(start));
    Outcome::Report(rep)
}

fn write_output(path: Option<&Path>, line: &str, rep: &mut ReportDocument) -> bool {
    if let Some(p) = path {
        if let Err(e) = fs::write(p, line) {
            rep.error = Some(format!("{}: {e}", p.display()));
            return false;
        }
    }
    true
}

fn structure_verdicts(rep: &mut ReportDocument, g: &MetricJet, fields: &StructureFields, expected: &Structure) {
    if matches!(fields, StructureFields::None) {
        return;
    }
    let problems = match fields {
        StructureFields::None => vec![],
        StructureFields::Hermitian(s) => s.violations(g),
        StructureFields::Hyper(t) => t.violations(g),
    };
    rep.verdict("structure-identities", problems.is_empty(), problems.join("; "));
    let at0 = BilinearForm::new(g.at_origin()).and_then(|f| fields.at_origin(&f));
    let ok = matches!(&at0, Ok(s) if s == expected);
    rep.verdict("structure-at-origin", ok, at0.err().map(|e| e.to_string()).unwrap_or_default());
}

fn realize_file(path: &Path, bytes: &[u8], out: Option<PathBuf>, order: usize, mode: Mode) -> Outcome {
    let (model, structure) = match load_model(path, bytes) {
        Ok(x) => x,
        Err(e) => return Outcome::Usage(e),
    };
    if order < 2 {
        return Outcome::Usage(format!("--order must be at least 2, got {order}"));
    }
    let mut rep = ReportDocument::new("realize", &path.display().to_string(), bytes);
    rep.orders.insert("requested".into(), order);
    let start = Instant::now();
    let built = match mode {
        Mode::Plain => realize_structured(&model, &structure, order),
        Mode::ConformallyFlat => realize_conformally_flat_any(&model, order).and_then(|mut r| {
            r.fields = extend_fields(&model, &structure, &r.metric)?;
            Ok(r)
        }),
    };
    let realized = match built {
        Ok(r) => r,
        Err(e) if is_usage(&e) => return Outcome::Usage(format!("{}: {e}", path.display())),
        Err(e) => {
            if e == Error::NotConformallyFlat {
                rep.verdict("conformally-flat", false, "Weyl tensor of the model is nonzero");
            }
            rep.error = Some(e.to_string());
            return Outcome::Report(rep);
        }
    };
    rep.diagnostics.timings_us.insert("realize".into(), elapsed_us(start));
    let line = to_line(&MetricJetDocument::encode(&realized.metric, &realized.fields, realized.provenance.name()));
    if !write_output(out.as_deref(), &line, &mut rep) {
        return Outcome::Report(rep);
    }
    let start = Instant::now();
    let (g, fields) = match from_text::<MetricJetDocument>(&line).map_err(|e| e.to_string()).and_then(|d| d.decode().map_err(|e| e.to_string())) {
        Ok(x) => x,
        Err(e) => {
            rep.error = Some(format!("emitted jet does not reload: {e}"));
            return Outcome::Report(rep);
        }
    };
    rep.verdict("metric-at-origin", &g.at_origin() == model.form().eps(), "");
    match riemann(&g) {
        Ok(r) => {
            let ok = &r.eval_at_origin() == model.tensor();
            rep.verdict("point-curvature", ok, "");
            if mode == Mode::ConformallyFlat {
                let weyl = Curvature::new(&g).and_then(|c| c.weyl());
                let ok = matches!(&weyl, Ok(w) if w.is_zero());
                rep.verdict("weyl-flat", ok, format!("through degree {}", order - 2));
            }
        }
        Err(e) => rep.verdict("point-curvature", false, e.to_string()),
    }
    structure_verdicts(&mut rep, &g, &fields, &structure);
    rep.orders.insert("curvature".into(), order - 2);
    rep.diagnostics.timings_us.insert("verify".into(), elapsed_us(start));
    Outcome::Report(rep)
}

fn linearization_verdict(rep: &mut ReportDocument, report: &PipelineReport, expected: QMatrix) {
    let ok = report.linearization == expected;
    rep.diagnostics.linearization = Some(matrix_strings(&report.linearization));
    rep.diagnostics.expected_linearization = Some(matrix_strings(&expected));
    rep.diagnostics.determinants = report.solution.steps.iter().map(|s| format_scalar(&s.determinant)).collect();
    rep.verdict("linearization", ok, "");
}

fn two_jet_free(s: &Series) -> bool {
    s.terms().all(|(e, _)| e.iter().map(|&x| x as usize).sum::<usize>() > 2)
}

fn cauchy_data_ok(s: &Series, frame: &QMatrix) -> bool {
    let in_frame = s.compose_linear(frame);
    let ok = in_frame.terms().all(|(e, _)| e[e.len() - 1] >= 2);
    ok
}

fn solve_file(path: &Path, bytes: &[u8], out: Option<PathBuf>, order: usize, target: Target) -> Outcome {
    let (model, structure) = match load_model(path, bytes) {
        Ok(x) => x,
        Err(e) => return Outcome::Usage(e),
    };
    if order < 2 {
        return Outcome::Usage(format!("--order must be at least 2, got {order}"));
    }
    if target == Target::TauTaustar && structure == Structure::None {
        return Outcome::Usage(format!("{}: target tau-taustar needs a Hermitian or hyper model", path.display()));
    }
    let mut rep = ReportDocument::new("solve", &path.display().to_string(), bytes);
    rep.orders.insert("requested".into(), order);
    let start = Instant::now();
    let realized = match realize_structured(&model, &structure, order) {
        Ok(r) => r,
        Err(e) => {
            rep.error = Some(e.to_string());
            return Outcome::Report(rep);
        }
    };
    let g = realized.metric.clone();
    let solved = match (target, &realized.fields) {
        (Target::Tau, fields) => constant_scalar_conformal(&g, order).map(|s| {
            let expected = expected_conformal_linearization(g.dim(), &frame_eps_inv_diag(&g, &s.report.frame, g.dim() - 1));
            (vec![("phi", s.phi)], s.metric, fields.clone(), s.report, expected)
        }),
        (Target::TauTaustar, StructureFields::Hermitian(f)) => constant_tau_taustar(&g, f, order).map(|s| {
            let m = g.dim();
            let e11 = frame_eps_inv_diag(&g, &s.report.frame, 0);
            let emm = frame_eps_inv_diag(&g, &s.report.frame, m - 1);
            (vec![("xi", s.xi), ("eta", s.eta)], s.metric, s.fields, s.report, expected_variation_linearization(false, &e11, &emm))
        }),
        (Target::TauTaustar, StructureFields::Hyper(t)) => constant_tau_taustar_hyper(&g, t, order).map(|s| {
            let m = g.dim();
            let e11 = frame_eps_inv_diag(&g, &s.report.frame, 0);
            let emm = frame_eps_inv_diag(&g, &s.report.frame, m - 1);
            (vec![("xi", s.xi), ("eta", s.eta)], s.metric, s.fields, s.report, expected_variation_linearization(true, &e11, &emm))
        }),
        (Target::TauTaustar, StructureFields::None) => Err(Error::Unsupported("tau-taustar on a plain model".into())),
    };
    let (unknowns, h, fields, report, expected) = match solved {
        Ok(x) => x,
        Err(e) if is_usage(&e) => return Outcome::Usage(format!("{}: {e}", path.display())),
        Err(e) => {
            if let Error::SingularStep { step } | Error::NonAffine { step } = e {
                rep.orders.insert("failed-step".into(), step);
            }
            rep.error = Some(e.to_string());
            return Outcome::Report(rep);
        }
    };
    rep.diagnostics.timings_us.insert("solve".into(), elapsed_us(start));
    let target_name = match target {
        Target::Tau => "tau",
        Target::TauTaustar => "tau-taustar",
    };
    let named: Vec<(&str, &Series)> = unknowns.iter().map(|(k, s)| (*k, s)).collect();
    let doc = SolutionDocument::encode(target_name, &named, MetricJetDocument::encode(&h, &fields, "constant-curvature"));
    let line = to_line(&doc);
    if !write_output(out.as_deref(), &line, &mut rep) {
        return Outcome::Report(rep);
    }
    let start = Instant::now();
    let reloaded = from_text::<SolutionDocument>(&line).map_err(|e| e.to_string()).and_then(|d| d.decode().map_err(|e| e.to_string()));
    let (u, h, fields) = match reloaded {
        Ok(x) => x,
        Err(e) => {
            rep.error = Some(format!("emitted solution does not reload: {e}"));
            return Outcome::Report(rep);
        }
    };
    let want = order - 2;
    match Curvature::new(&h) {
        Ok(c) => {
            let d = constancy_degree(&c.scalar());
            rep.verdict("tau-constancy", d >= want, format!("degree {d}"));
            rep.orders.insert("tau-constancy".into(), d);
            let star = match &fields {
                StructureFields::Hermitian(f) if target == Target::TauTaustar => Some(c.star_scalar(f)),
                StructureFields::Hyper(t) if target == Target::TauTaustar => Some(c.star_scalar_hyper(t)),
                _ => None,
            };
            if let Some(star) = star {
                let d = constancy_degree(&star);
                rep.verdict("taustar-constancy", d >= want, format!("degree {d}"));
                rep.orders.insert("taustar-constancy".into(), d);
            }
        }
        Err(e) => rep.verdict("tau-constancy", false, e.to_string()),
    }
    rep.verdict("two-jet-vanishing", u.values().all(two_jet_free), "");
    rep.verdict("cauchy-data", u.values().all(|s| cauchy_data_ok(s, &report.frame)), "");
    let pm = point_model(&h, &fields);
    let ok = matches!(&pm, Ok((m, s)) if *m == model && *s == structure);
    rep.verdict("point-model", ok, pm.err().map(|e| e.to_string()).unwrap_or_default());
    structure_verdicts(&mut rep, &h, &fields, &structure);
    linearization_verdict(&mut rep, &report, expected);
    rep.diagnostics.timings_us.insert("verify".into(), elapsed_us(start));
    Outcome::Report(rep)
}
