//! Config-driven runs: `polyham <command> --config <file> [--seed N] [--out DIR]`.
//!
//! Exit codes: 0 all checks pass, 1 counterexample found, 2 hypotheses of
//! the checked statement not satisfied, 3 invalid config or parameters,
//! 4 I/O or file format error, 5 solver failure.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{Command, ConstantsSpec, DomainSpec, RunConfig, SolverMethod, SolverSpec};

use crate::error::{PolyhamError, Result};
use crate::fields::mthf::{self, MthfFile};
use crate::fields::random::band_limited;
use crate::fields::GridField;
use crate::hamiltonian::{CatalogHamiltonian, GrowthConstants, HamiltonianSpec};
use crate::inequalities::{qform_check, seeded_sweep, thm4_check, wirtinger_check, InequalityReport, Thm4Options, Thm4Outcome};
use crate::phase::PhaseLayout;
use crate::solver::{solve_convex_iterative, solve_linear_spectral, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Pass = 0,
    Counterexample = 1,
    Rejected = 2,
    InvalidConfig = 3,
    Io = 4,
    SolverFailure = 5,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn for_error(e: &PolyhamError) -> Self {
        match e {
            PolyhamError::Io(_) | PolyhamError::Format(_) => ExitStatus::Io,
            PolyhamError::SingularMode { .. } => ExitStatus::SolverFailure,
            _ => ExitStatus::InvalidConfig,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub artifacts: Vec<PathBuf>,
    /// One-line human summary.
    pub summary: String,
}

/// Cap the global rayon pool at `POLYHAM_THREADS` if set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("POLYHAM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| PolyhamError::InvalidParameter(format!("POLYHAM_THREADS = {v:?} is not a count")))?;
        // Already-initialized pools are left alone.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    Ok(())
}

/// Flatten reports into `id,name,lhs,rhs,margin,ratio`.
pub fn emit_plot_data<'a, W, I>(w: W, reports: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (usize, &'a InequalityReport)>,
{
    let mut csv = csv::Writer::from_writer(w);
    let io = |e: csv::Error| PolyhamError::Io(e.into());
    csv.write_record(["id", "name", "lhs", "rhs", "margin", "ratio"]).map_err(io)?;
    for (id, r) in reports {
        let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
        csv.write_record([
            id.to_string(),
            r.name.as_str().to_string(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.margin.to_string(),
            ratio,
        ])
        .map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    fn csv<'a, I>(&mut self, name: &str, reports: I) -> Result<()>
    where
        I: IntoIterator<Item = (usize, &'a InequalityReport)>,
    {
        let path = self.dir.join(name);
        emit_plot_data(fs::File::create(&path)?, reports)?;
        self.written.push(path);
        Ok(())
    }

    fn field(&mut self, name: &str, u: &GridField, layout: Option<&PhaseLayout>) -> Result<()> {
        let path = self.dir.join(name);
        mthf::save(&path, &MthfFile::grid(u.clone(), layout.map(|l| l.tag())))?;
        self.written.push(path);
        Ok(())
    }

    fn finish(self, status: ExitStatus, summary: String) -> RunOutcome {
        RunOutcome {
            status,
            artifacts: self.written,
            summary,
        }
    }
}

/// Validate and execute `cfg`, writing artifacts into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut art = Artifacts::new(&cfg.out)?;
    art.json("config.json", cfg)?;
    match cfg.command {
        Command::VerifyWirtinger | Command::VerifyQform => verify(cfg, art),
        Command::Solve => solve(cfg, art),
        Command::CheckThm4 => check_thm4(cfg, art),
        Command::Sweep => sweep(cfg, art),
    }
}

#[derive(Serialize)]
struct Row<'a> {
    id: usize,
    #[serde(flatten)]
    report: &'a InequalityReport,
}

fn verify(cfg: &RunConfig, mut art: Artifacts) -> Result<RunOutcome> {
    let layout = cfg.layout()?;
    let wirtinger = cfg.command == Command::VerifyWirtinger;
    let m = if wirtinger { cfg.n } else { layout.m() };
    let results = seeded_sweep(cfg.count, cfg.seed, |_, rng| -> Result<(GridField, InequalityReport)> {
        let d = cfg.domain.sample(rng)?;
        let u = band_limited(&d, m, cfg.bandwidth, wirtinger, rng);
        let r = if wirtinger { wirtinger_check(&u) } else { qform_check(&layout, &u)? };
        Ok((u, r))
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut failed = Vec::new();
    for (id, (u, r)) in results.iter().enumerate() {
        if !r.pass {
            art.field(&format!("counterexample-{id}.mthf"), u, (!wirtinger).then_some(&layout))?;
            failed.push(id);
        }
    }
    let worst_ratio = results
        .iter()
        .filter_map(|(_, r)| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let rows: Vec<Row> = results.iter().enumerate().map(|(id, (_, r))| Row { id, report: r }).collect();
    art.json(
        "report.json",
        &json!({
            "command": cfg.command.as_str(),
            "seed": cfg.seed,
            "count": cfg.count,
            "passed": cfg.count - failed.len(),
            "failed": failed,
            "worst_ratio": worst_ratio,
            "reports": rows,
        }),
    )?;
    art.csv("plot.csv", results.iter().enumerate().map(|(id, (_, r))| (id, r)))?;
    let status = if failed.is_empty() { ExitStatus::Pass } else { ExitStatus::Counterexample };
    let summary = format!(
        "{}: {}/{} pass, worst ratio {worst_ratio}",
        cfg.command.as_str(),
        cfg.count - failed.len(),
        cfg.count
    );
    Ok(art.finish(status, summary))
}

fn solve_field(cfg: &RunConfig, family: &CatalogHamiltonian, h: &HamiltonianSpec) -> Result<SolveReport> {
    let domain = cfg.domain.fixed()?;
    let layout = cfg.layout()?;
    let method = match (cfg.solver.method, family.as_forced_quadratic()) {
        (SolverMethod::Auto, Some(_)) => SolverMethod::Spectral,
        (SolverMethod::Auto, None) => SolverMethod::Iterative,
        (m, _) => m,
    };
    match method {
        SolverMethod::Spectral => {
            let fq = family.as_forced_quadratic().ok_or_else(|| {
                PolyhamError::InvalidParameter(format!("spectral solve needs a quadratic family, got {}", family.family()))
            })?;
            solve_linear_spectral(&domain, layout, &fq)
        }
        _ => solve_convex_iterative(&domain, h, None, &cfg.solver.iterative),
    }
}

fn solve(cfg: &RunConfig, mut art: Artifacts) -> Result<RunOutcome> {
    let family = cfg.hamiltonian()?;
    let layout = cfg.layout()?;
    let h = family.build(&cfg.domain.fixed()?, layout)?;
    let report = solve_field(cfg, family, &h)?;
    art.field("solution.mthf", &report.solution, Some(&layout))?;
    art.json(
        "solve.json",
        &json!({ "hamiltonian": family, "report": report.summary() }),
    )?;
    let status = if report.converged { ExitStatus::Pass } else { ExitStatus::SolverFailure };
    let summary = format!(
        "solve ({}): residual {:e} after {} iterations, converged = {}",
        report.method, report.residual_l2, report.iterations, report.converged
    );
    Ok(art.finish(status, summary))
}

/// The field to check: `input` if given, otherwise a fresh solve.
fn solution(cfg: &RunConfig, family: &CatalogHamiltonian, h: &HamiltonianSpec) -> Result<(GridField, Value)> {
    let domain = cfg.domain.fixed()?;
    match &cfg.input {
        Some(path) => {
            let file = mthf::load(path)?;
            let layout = cfg.layout()?;
            if let Some(tag) = file.layout {
                if tag != layout.tag() {
                    return Err(PolyhamError::LayoutMismatch(format!(
                        "{} holds layout {tag:?}, config expects {:?}",
                        path.display(),
                        layout.tag()
                    )));
                }
            }
            let u = file.into_grid()?;
            domain.same_as(u.domain(), "config domain and input field")?;
            Ok((u, json!({ "source": path })))
        }
        None => {
            let r = solve_field(cfg, family, h)?;
            let summary = serde_json::to_value(r.summary())?;
            Ok((r.solution, json!({ "source": "solve", "solve": summary })))
        }
    }
}

fn thm4_options(cfg: &RunConfig) -> Thm4Options {
    Thm4Options {
        sampling: cfg.sampling,
        ..Default::default()
    }
}

fn rejection(reason: String, alpha: f64, cfg: &RunConfig) -> Result<Thm4Outcome> {
    let d = cfg.domain.fixed()?;
    let mut hyp = BTreeMap::new();
    hyp.insert("alpha".into(), json!(alpha));
    hyp.insert(
        "alpha_window".into(),
        json!({ "lower": 0.0, "upper": d.growth_window(), "formula": "pi/(sqrt(p)*max T)" }),
    );
    Ok(Thm4Outcome::Rejected {
        reasons: vec![reason],
        hypotheses: hyp,
    })
}

fn outcome_status(outcome: &Thm4Outcome) -> ExitStatus {
    match outcome {
        Thm4Outcome::Rejected { .. } => ExitStatus::Rejected,
        Thm4Outcome::Verified { reports, .. } if reports.all_pass() => ExitStatus::Pass,
        Thm4Outcome::Verified { .. } => ExitStatus::Counterexample,
    }
}

fn check_thm4(cfg: &RunConfig, mut art: Artifacts) -> Result<RunOutcome> {
    let family = cfg.hamiltonian()?;
    let domain = cfg.domain.fixed()?;
    let layout = cfg.layout()?;
    let h = family.build(&domain, layout)?;
    let spec = cfg.constants()?;
    let (outcome, constants, source) = match spec.resolve(family, &domain, spec.alpha)? {
        Err(reason) => (rejection(reason, spec.alpha, cfg)?, None, Value::Null),
        Ok(c) => {
            let (u, source) = solution(cfg, family, &h)?;
            let outcome = thm4_check(&h, &u, &c, &thm4_options(cfg))?;
            if outcome_status(&outcome) == ExitStatus::Counterexample {
                art.field("counterexample-thm4.mthf", &u, Some(&layout))?;
            }
            (outcome, Some(c), source)
        }
    };
    let status = outcome_status(&outcome);
    art.json(
        "thm4.json",
        &json!({ "hamiltonian": family, "constants": constants, "field": source, "result": outcome }),
    )?;
    let rows: Vec<(usize, &InequalityReport)> = match &outcome {
        Thm4Outcome::Verified { reports, .. } => reports.reports().into_iter().map(|r| (0, r)).collect(),
        Thm4Outcome::Rejected { .. } => Vec::new(),
    };
    art.csv("plot.csv", rows)?;
    let summary = match &outcome {
        Thm4Outcome::Rejected { reasons, .. } => format!("check-thm4: hypotheses not satisfied: {}", reasons.join("; ")),
        Thm4Outcome::Verified { reports, .. } => format!(
            "check-thm4: {}",
            reports
                .reports()
                .iter()
                .map(|r| format!("{} margin {:e} ({})", r.name.as_str(), r.margin, if r.pass { "pass" } else { "FAIL" }))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    Ok(art.finish(status, summary))
}

/// A-priori bound check over `alpha_grid`. Certified constants are computed at
/// the smallest `alpha` and held fixed, since they remain valid for every
/// larger `alpha`; the bound then varies with `alpha` alone.
fn sweep(cfg: &RunConfig, mut art: Artifacts) -> Result<RunOutcome> {
    let family = cfg.hamiltonian()?;
    let domain = cfg.domain.fixed()?;
    let layout = cfg.layout()?;
    let h = family.build(&domain, layout)?;
    let spec = cfg.constants()?;
    let grid = cfg.alpha_grid.clone().expect("validated");
    let alpha_min = grid.iter().cloned().fold(f64::INFINITY, f64::min);

    let base: std::result::Result<GrowthConstants, String> = spec.resolve(family, &domain, alpha_min)?;
    let (u, source) = solution(cfg, family, &h)?;
    let mut outcomes = Vec::with_capacity(grid.len());
    for &alpha in &grid {
        let outcome = match &base {
            Err(reason) => rejection(reason.clone(), alpha, cfg)?,
            Ok(c) => thm4_check(&h, &u, &GrowthConstants { alpha, ..*c }, &thm4_options(cfg))?,
        };
        outcomes.push(outcome);
    }
    let status = outcomes.iter().map(outcome_status).max().unwrap_or(ExitStatus::Pass);
    if status == ExitStatus::Counterexample {
        art.field("counterexample-sweep.mthf", &u, Some(&layout))?;
    }
    let entries: Vec<Value> = grid
        .iter()
        .zip(&outcomes)
        .enumerate()
        .map(|(id, (a, o))| json!({ "id": id, "alpha": a, "result": o }))
        .collect();
    art.json(
        "sweep.json",
        &json!({
            "hamiltonian": family,
            "constants": base.as_ref().ok(),
            "field": source,
            "points": entries,
        }),
    )?;
    let mut rows = Vec::new();
    for (id, o) in outcomes.iter().enumerate() {
        if let Thm4Outcome::Verified { reports, .. } = o {
            rows.extend(reports.reports().into_iter().map(|r| (id, r)));
        }
    }
    art.csv("plot.csv", rows)?;
    let rejected = outcomes.iter().filter(|o| o.is_rejected()).count();
    let summary = format!("sweep: {} alpha values, {rejected} rejected", grid.len());
    Ok(art.finish(status, summary))
}
