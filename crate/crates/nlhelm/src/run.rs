//! Scenario runs: solve, verify, export and report.
//!
//! Every command writes its exports into one run directory and a `report.json`
//! that lists each artifact with its sha256 and carries the scenario hash.

use crate::diagnostics::{
    band_limited_noise, big_r_ratio, decay_rate, nonvanishing_probe, pde_residual, resolvent_ratio,
    truncated_kernel_slope, DiagnosticsError, RatioReport,
};
use crate::dual::{DualError, DualProblem, SolutionClass};
use crate::farfield::{
    compute_farfield, decay_exponent_fit, extend_field, farfield_of_source,
    farfield_relation_error, linear_farfield_check, radiation_error, FarFieldError,
    FarFieldPattern, SlopeFit,
};
use crate::grid::{lp_norm, Field, GridError, SphereMesh};
use crate::io::{
    load_checkpoint, read_field, save_checkpoint, save_state, sha256_hex, write_atomic,
    write_field, IoError,
};
use crate::kernel::{kernel_split, KernelError};
use crate::resolvent::{Resolvent, ResolventError, ResolventMethod};
use crate::scenario::{Issue, Scenario, ScenarioError};
use crate::solver::{
    bump_directions, separation, solve_mountain_pass_checkpointed, solve_multiplicity,
    SolutionRecord, SolverError,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const REPORT_FORMAT: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const BEST_STATE_FILE: &str = "best_state.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("checkpoint {path} belongs to scenario {found}, expected {expected}")]
    ForeignCheckpoint {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error("resuming needs a single mountain-pass run")]
    ResumeUnsupported,
    #[error("not converged (best residual {crit_residual:e}); best state in {}", .dump.display())]
    NotConverged { dump: PathBuf, crit_residual: f64 },
    #[error("found {found} of {requested} distinct solutions")]
    Incomplete { found: usize, requested: usize },
    #[error("the scenario has no `{0}` section")]
    MissingSection(&'static str),
    #[error("no solution dumps in {}", .0.display())]
    NoSolutions(PathBuf),
    #[error(transparent)]
    Solver(SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    FarField(#[from] FarFieldError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl From<SolverError> for RunError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Dual(d) => Self::Dual(d),
            other => Self::Solver(other),
        }
    }
}

impl RunError {
    /// 2 for configuration errors, 3 for runs that did not converge, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Scenario(_)
            | Self::ForeignCheckpoint { .. }
            | Self::ResumeUnsupported
            | Self::MissingSection(_) => 2,
            Self::Solver(SolverError::InvalidConfig(_)) => 2,
            Self::NotConverged { .. } | Self::Incomplete { .. } => 3,
            _ => 1,
        }
    }

    /// Machine-readable form of a configuration error.
    pub fn issues(&self) -> Vec<Issue> {
        match self {
            Self::Scenario(ScenarioError::Invalid(list)) => list.clone(),
            other => vec![Issue {
                field: String::new(),
                message: other.to_string(),
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionStamp {
    pub package: String,
    pub version: String,
    pub report_format: u32,
}

impl VersionStamp {
    fn current() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            report_format: REPORT_FORMAT,
        }
    }
}

/// A file written by the run, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

/// One configured assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("<= {limit:e}"),
            passed: value <= limit,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!(">= {limit:e}"),
            passed: value >= limit,
        }
    }

    pub fn above(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("> {limit:e}"),
            passed: value > limit,
        }
    }

    pub fn within(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("{target} ± {tolerance}"),
            passed: (value - target).abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    pub exponent: f64,
    pub amplitude: f64,
    pub goodness: f64,
    pub r_window: [f64; 2],
}

impl From<&SlopeFit> for DecaySummary {
    fn from(fit: &SlopeFit) -> Self {
        Self {
            exponent: fit.exponent,
            amplitude: fit.amplitude,
            goodness: fit.goodness,
            r_window: fit.r_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub j_value: f64,
    pub crit_residual: f64,
    /// `|J − (1/p′ − 1/2)‖v‖^{p′}| / J`.
    pub nehari_defect: f64,
    pub dual_norm: f64,
    pub iterations: usize,
    pub restart: usize,
    pub lattice_shift: Vec<i64>,
    pub rayleigh_steps: usize,
    pub rayleigh_decreases: usize,
    pub levels: Vec<f64>,
    pub pde_residual_l2: f64,
    pub pde_residual_max: f64,
    pub decay: Option<DecaySummary>,
    pub relation: Vec<f64>,
    pub radiation: Vec<f64>,
    pub symmetry_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicitySummary {
    /// Pairwise `min_± ‖v_i ∓ v_j‖_{p′}/‖v_i‖_{p′}`, row-major over `i < j`.
    pub separations: Vec<f64>,
    /// `pairing(z, K_p z)` of each bump direction.
    pub bump_forms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub version: VersionStamp,
    pub solutions: Vec<SolutionSummary>,
    pub multiplicity: Option<MultiplicitySummary>,
    /// Named scalar series of the auxiliary commands.
    pub measurements: BTreeMap<String, Vec<f64>>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
    /// Wall-clock seconds per stage; not part of the reproducible content.
    pub timings: BTreeMap<String, f64>,
    pub passed: bool,
}

impl RunReport {
    fn new(command: &str, scenario: &Scenario) -> Self {
        Self {
            command: command.into(),
            scenario: scenario.name.clone(),
            scenario_hash: scenario.hash(),
            version: VersionStamp::current(),
            solutions: Vec::new(),
            multiplicity: None,
            measurements: BTreeMap::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
            passed: false,
        }
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Re-hashes every artifact under `dir`.
    /// Reads `report.json` from a run directory.
    pub fn load(dir: &Path) -> Result<Self, IoError> {
        let path = dir.join(REPORT_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| IoError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| IoError::Format {
            path,
            message: e.to_string(),
        })
    }

    pub fn verify_artifacts(&self, dir: &Path) -> Result<(), IoError> {
        for a in &self.artifacts {
            let path = dir.join(&a.path);
            let bytes = std::fs::read(&path).map_err(|e| IoError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if sha256_hex(&bytes) != a.sha256 {
                return Err(IoError::ChecksumMismatch { path });
            }
        }
        Ok(())
    }

    /// Largest relative difference over all numbers of the two reports, timings
    /// and artifact checksums excluded. Infinite when the shapes differ.
    pub fn max_relative_difference(&self, other: &RunReport) -> f64 {
        let strip = |r: &RunReport| {
            let mut v = serde_json::to_value(r).expect("report serializes");
            v["timings"] = serde_json::Value::Null;
            v["artifacts"] = serde_json::Value::Null;
            v
        };
        json_difference(&strip(self), &strip(other))
    }
}

fn json_difference(a: &serde_json::Value, b: &serde_json::Value) -> f64 {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (
                x.as_f64().unwrap_or(f64::NAN),
                y.as_f64().unwrap_or(f64::NAN),
            );
            if x == y {
                0.0
            } else {
                (x - y).abs() / x.abs().max(y.abs())
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .map(|(x, y)| json_difference(x, y))
            .fold(0.0, f64::max),
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x
            .iter()
            .map(|(k, v)| y.get(k).map_or(f64::INFINITY, |w| json_difference(v, w)))
            .fold(0.0, f64::max),
        (x, y) if x == y => 0.0,
        _ => f64::INFINITY,
    }
}

/// Run directory bookkeeping shared by the commands.
struct Workspace {
    dir: PathBuf,
    report: RunReport,
    started: Instant,
}

impl Workspace {
    fn open(dir: &Path, command: &str, scenario: &Scenario) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|e| IoError::Io {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            report: RunReport::new(command, scenario),
            started: Instant::now(),
        })
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        *self.report.timings.entry(stage.into()).or_default() +=
            now.duration_since(self.started).as_secs_f64();
        self.started = now;
    }

    fn record(&mut self, name: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| IoError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        self.report.artifacts.push(Artifact {
            path: name.into(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        write_atomic(&self.dir.join(name), body.as_bytes())?;
        self.record(name)
    }

    fn field(&mut self, stem: &str, field: &Field) -> Result<(), RunError> {
        let header = write_field(&self.dir.join(format!("{stem}.json")), field)?;
        self.record(&format!("{stem}.json"))?;
        self.record(&header.payload_file)
    }

    fn csv(&mut self, name: &str, columns: &str, rows: &[Vec<f64>]) -> Result<(), RunError> {
        let mut out = format!("# scenario {}\n{columns}\n", self.report.scenario_hash);
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        self.text(name, &out)
    }

    fn finish(mut self) -> Result<RunReport, RunError> {
        self.lap("export");
        self.report.passed = self.report.checks.iter().all(|c| c.passed);
        let body = serde_json::to_vec_pretty(&self.report).expect("report serializes");
        write_atomic(&self.dir.join(REPORT_FILE), &body)?;
        Ok(self.report)
    }
}

fn load(path: &Path) -> Result<(Scenario, PathBuf), RunError> {
    let scenario = Scenario::load(path)?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    Ok((scenario, base))
}

/// Largest ratio of consecutive rungs; at most `1 + slack` for a decreasing ladder.
pub fn ladder_growth(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| {
            if w[0] == 0.0 && w[1] == 0.0 {
                1.0
            } else {
                w[1] / w[0]
            }
        })
        .fold(0.0, f64::max)
}

fn ladder_rows(radii: &[f64], errors: &[f64]) -> Vec<Vec<f64>> {
    radii
        .iter()
        .zip(errors)
        .map(|(r, e)| vec![*r, *e])
        .collect()
}

fn pattern_csv(hash: &str, pattern: &FarFieldPattern) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# scenario {hash}");
    out.push_str(&pattern.to_csv());
    out
}

/// Solves the scenario and verifies every solution. `resume` continues from a
/// checkpoint written by an earlier run of the same scenario.
pub fn run_scenario(path: &Path, out: &Path, resume: Option<&Path>) -> Result<RunReport, RunError> {
    let (scenario, base) = load(path)?;
    let mut ws = Workspace::open(
        out,
        if resume.is_some() { "resume" } else { "solve" },
        &scenario,
    )?;
    let prob = scenario.problem(&base)?;
    ws.lap("setup");
    let records = solve(&scenario, &prob, &mut ws, resume)?;
    ws.lap("solve");
    for (i, rec) in records.iter().enumerate() {
        ws.field(&format!("solution_{i}.v"), &rec.v_star)?;
        ws.field(&format!("solution_{i}.u"), &rec.u_star)?;
        let summary = verify_solution(&scenario, &prob, rec, i, &mut ws)?;
        ws.report.solutions.push(summary);
    }
    ws.lap("verify");
    if records.len() > 1 {
        multiplicity_checks(&scenario, &prob, &records, &mut ws)?;
    }
    let levels: Vec<Vec<f64>> = records
        .iter()
        .flat_map(|r| r.levels.iter().enumerate().map(|(k, j)| vec![k as f64, *j]))
        .collect();
    ws.csv("levels.csv", "run,J", &levels)?;
    ws.finish()
}

fn solve(
    scenario: &Scenario,
    prob: &DualProblem,
    ws: &mut Workspace,
    resume: Option<&Path>,
) -> Result<Vec<SolutionRecord>, RunError> {
    let hash = ws.report.scenario_hash.clone();
    if scenario.solver.deflation_count > 1 {
        if resume.is_some() {
            return Err(RunError::ResumeUnsupported);
        }
        return match solve_multiplicity(prob, &scenario.solver) {
            Ok(found) => Ok(found),
            Err(SolverError::PartialMultiplicity { found, requested }) => {
                for (i, rec) in found.iter().enumerate() {
                    ws.field(&format!("partial_{i}.v"), &rec.v_star)?;
                }
                Err(RunError::Incomplete {
                    found: found.len(),
                    requested,
                })
            }
            Err(e) => not_converged(ws, e),
        };
    }
    let start = match resume {
        Some(p) => {
            let (ck, found) = load_checkpoint(p)?;
            if found != hash {
                return Err(RunError::ForeignCheckpoint {
                    path: p.to_path_buf(),
                    found,
                    expected: hash,
                });
            }
            Some(ck)
        }
        None => None,
    };
    let target = ws.dir.join(CHECKPOINT_FILE);
    let mut sink = |ck: &crate::solver::SolverCheckpoint| {
        save_checkpoint(&target, ck, &hash).map_err(|e| SolverError::Checkpoint(e.to_string()))
    };
    match solve_mountain_pass_checkpointed(prob, &scenario.solver, start, &mut sink) {
        Ok(rec) => Ok(vec![rec]),
        Err(e) => not_converged(ws, e),
    }
}

fn not_converged<T>(ws: &mut Workspace, e: SolverError) -> Result<T, RunError> {
    match e {
        SolverError::NotConverged { best } => {
            let dump = ws.dir.join(BEST_STATE_FILE);
            save_state(&dump, &best)?;
            Err(RunError::NotConverged {
                dump,
                crit_residual: best.crit_residual,
            })
        }
        other => Err(other.into()),
    }
}

fn verify_solution(
    scenario: &Scenario,
    prob: &DualProblem,
    rec: &SolutionRecord,
    index: usize,
    ws: &mut Workspace,
) -> Result<SolutionSummary, RunError> {
    let checks = &scenario.checks;
    let tag = |name: &str| format!("solution_{index}.{name}");
    let dual_norm = lp_norm(&rec.v_star, prob.p_dual())?;
    let nehari_level = (1.0 / prob.p_dual() - 0.5) * dual_norm.powf(prob.p_dual());
    let nehari_defect = (rec.j_value - nehari_level).abs() / rec.j_value.abs();
    let residual = pde_residual(prob, &rec.u_star)?;
    let mut summary = SolutionSummary {
        j_value: rec.j_value,
        crit_residual: rec.crit_residual,
        nehari_defect,
        dual_norm,
        iterations: rec.iterations,
        restart: rec.restart,
        lattice_shift: rec.lattice_shift_applied.clone(),
        rayleigh_steps: rec.rayleigh_steps,
        rayleigh_decreases: rec.rayleigh_decreases,
        levels: rec.levels.clone(),
        pde_residual_l2: residual.l2,
        pde_residual_max: residual.max,
        decay: None,
        relation: Vec::new(),
        radiation: Vec::new(),
        symmetry_defect: None,
    };
    let out = &mut ws.report.checks;
    out.push(Check::at_most(
        &tag("crit_residual"),
        rec.crit_residual,
        scenario.solver.tol_crit,
    ));
    out.push(Check::above(&tag("level"), rec.j_value, 0.0));
    if let Some(limit) = checks.nehari_defect {
        out.push(Check::at_most(&tag("nehari_defect"), nehari_defect, limit));
    }
    if let Some(limit) = checks.pde_residual_l2 {
        out.push(Check::at_most(&tag("pde_residual_l2"), residual.l2, limit));
    }
    if let Some(fraction) = checks.rayleigh_ascent {
        let steps = rec.rayleigh_steps.max(1) as f64;
        let ascent = 1.0 - rec.rayleigh_decreases as f64 / steps;
        out.push(Check::at_least(&tag("rayleigh_ascent"), ascent, fraction));
    }
    if let (Some(ff), SolutionClass::Decaying) = (&scenario.farfield, prob.class()) {
        let mesh = SphereMesh::new(scenario.dim, ff.mesh_order)?;
        let pattern = compute_farfield(prob, &rec.u_star, &mesh)?;
        let source = prob.source(&rec.u_star)?;
        let outgoing = extend_field(&source, ff.extension_half_width)?;
        let standing = outgoing.real_part();
        let fit = decay_exponent_fit(&standing, ff.decay_window)?;
        let relation = farfield_relation_error(&standing, &pattern, &scenario.ladders.relation)?;
        let radiation = radiation_error(&outgoing, &scenario.ladders.radiation)?;
        let defect = pattern.symmetry_defect();
        let slack = 1.0 + checks.ladder_slack;
        if let Some(t) = checks.decay_exponent {
            out.push(Check::within(
                &tag("decay_exponent"),
                fit.exponent,
                t.value,
                t.tolerance,
            ));
        }
        if relation.len() > 1 {
            out.push(Check::at_most(
                &tag("relation_growth"),
                ladder_growth(&relation),
                slack,
            ));
        }
        if radiation.len() > 1 {
            out.push(Check::at_most(
                &tag("radiation_growth"),
                ladder_growth(&radiation),
                slack,
            ));
        }
        if let Some(limit) = checks.symmetry_defect {
            out.push(Check::at_most(&tag("symmetry_defect"), defect, limit));
        }
        ws.text(
            &format!("{}.csv", tag("farfield")),
            &pattern_csv(&ws.report.scenario_hash, &pattern),
        )?;
        ws.csv(
            &format!("{}.csv", tag("decay")),
            "r,max_abs_u",
            &fit.samples.iter().map(|s| s.to_vec()).collect::<Vec<_>>(),
        )?;
        ws.csv(
            &format!("{}.csv", tag("relation")),
            "R,error",
            &ladder_rows(&scenario.ladders.relation, &relation),
        )?;
        ws.csv(
            &format!("{}.csv", tag("radiation")),
            "R,error",
            &ladder_rows(&scenario.ladders.radiation, &radiation),
        )?;
        summary.decay = Some((&fit).into());
        summary.relation = relation;
        summary.radiation = radiation;
        summary.symmetry_defect = Some(defect);
    }
    Ok(summary)
}

fn multiplicity_checks(
    scenario: &Scenario,
    prob: &DualProblem,
    records: &[SolutionRecord],
    ws: &mut Workspace,
) -> Result<(), RunError> {
    let mut separations = Vec::new();
    for (i, a) in records.iter().enumerate() {
        for b in &records[i + 1..] {
            separations.push(separation(prob, &a.v_star, &b.v_star));
        }
    }
    let bumps = bump_directions(prob, records.len())?;
    let gap = records
        .windows(2)
        .map(|w| w[1].j_value - w[0].j_value)
        .fold(records[0].j_value, f64::min);
    let checks = &mut ws.report.checks;
    checks.push(Check::above("levels_increasing", gap, 0.0));
    checks.push(Check::above(
        "bump_forms",
        bumps.forms.iter().cloned().fold(f64::INFINITY, f64::min),
        0.0,
    ));
    if let Some(limit) = scenario.checks.separation {
        let closest = separations.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(Check::above("separation", closest, limit));
    }
    ws.report.multiplicity = Some(MultiplicitySummary {
        separations,
        bump_forms: bumps.forms,
    });
    Ok(())
}

/// Recomputes the far-field stage from the solution dumps of an earlier solve in `out`.
pub fn farfield_report(path: &Path, out: &Path) -> Result<RunReport, RunError> {
    let (scenario, base) = load(path)?;
    let ff = scenario
        .farfield
        .ok_or(RunError::MissingSection("farfield"))?;
    let mut ws = Workspace::open(out, "farfield", &scenario)?;
    let prob = scenario.problem(&base)?;
    let mesh = SphereMesh::new(scenario.dim, ff.mesh_order)?;
    let mut index = 0;
    loop {
        let dump = out.join(format!("solution_{index}.v.json"));
        if !dump.exists() {
            break;
        }
        let v = read_field(&dump)?;
        let u = prob.primal(&v)?;
        let pattern = compute_farfield(&prob, &u, &mesh)?;
        let outgoing = extend_field(&prob.source(&u)?, ff.extension_half_width)?;
        let relation =
            farfield_relation_error(&outgoing.real_part(), &pattern, &scenario.ladders.relation)?;
        let radiation = radiation_error(&outgoing, &scenario.ladders.radiation)?;
        let slack = 1.0 + scenario.checks.ladder_slack;
        let name = |s: &str| format!("solution_{index}.{s}");
        if relation.len() > 1 {
            ws.report.checks.push(Check::at_most(
                &name("relation_growth"),
                ladder_growth(&relation),
                slack,
            ));
        }
        if radiation.len() > 1 {
            ws.report.checks.push(Check::at_most(
                &name("radiation_growth"),
                ladder_growth(&radiation),
                slack,
            ));
        }
        if let Some(limit) = scenario.checks.symmetry_defect {
            ws.report.checks.push(Check::at_most(
                &name("symmetry_defect"),
                pattern.symmetry_defect(),
                limit,
            ));
        }
        ws.text(
            &format!("{}.csv", name("farfield")),
            &pattern_csv(&ws.report.scenario_hash, &pattern),
        )?;
        ws.csv(
            &format!("{}.csv", name("relation")),
            "R,error",
            &ladder_rows(&scenario.ladders.relation, &relation),
        )?;
        ws.csv(
            &format!("{}.csv", name("radiation")),
            "R,error",
            &ladder_rows(&scenario.ladders.radiation, &radiation),
        )?;
        ws.report.measurements.insert(name("relation"), relation);
        ws.report.measurements.insert(name("radiation"), radiation);
        index += 1;
    }
    if index == 0 {
        return Err(RunError::NoSolutions(out.to_path_buf()));
    }
    ws.lap("farfield");
    ws.finish()
}

/// Linear checks with the weight itself as source: resolvent cross-validation,
/// far-field remainder decay and the radiation condition of `Φ ∗ Q`.
pub fn linear_check(path: &Path, out: &Path) -> Result<RunReport, RunError> {
    let (scenario, base) = load(path)?;
    let mut ws = Workspace::open(out, "linear-check", &scenario)?;
    let f = scenario.weight_field(&base)?;
    let grid = *f.grid();
    let checks = scenario.checks;
    if let Some(limit) = checks.cross_validation {
        let schedule = &scenario.schedule;
        let multiplier = Resolvent::new(&grid, ResolventMethod::Multiplier, schedule)?.apply(&f)?;
        let kernel =
            Resolvent::new(&grid, ResolventMethod::KernelConvolution, schedule)?.apply(&f)?;
        let gap = lp_norm(&multiplier.combine(1.0, &kernel, -1.0)?, 2.0)? / lp_norm(&kernel, 2.0)?;
        ws.report
            .measurements
            .insert("cross_validation".into(), vec![gap]);
        ws.report
            .checks
            .push(Check::at_most("cross_validation", gap, limit));
        ws.lap("cross_validation");
    }
    let Some(ff) = scenario.farfield else {
        return ws.finish();
    };
    let mesh = SphereMesh::new(scenario.dim, ff.mesh_order)?;
    let pattern = farfield_of_source(&f, &mesh)?;
    if let Some(limit) = checks.symmetry_defect {
        ws.report.checks.push(Check::at_most(
            "symmetry_defect",
            pattern.symmetry_defect(),
            limit,
        ));
    }
    let hash = ws.report.scenario_hash.clone();
    ws.text("farfield.csv", &pattern_csv(&hash, &pattern))?;
    if !scenario.ladders.relation.is_empty() {
        let remainder = linear_farfield_check(&f, &scenario.ladders.relation, &mesh)?;
        if let Some(t) = checks.remainder_exponent {
            ws.report.checks.push(Check::within(
                "remainder_exponent",
                remainder.exponent,
                t.value,
                t.tolerance,
            ));
        }
        let rows: Vec<Vec<f64>> = remainder.samples.iter().map(|s| s.to_vec()).collect();
        ws.csv("remainder.csv", "r,max_remainder", &rows)?;
        ws.report
            .measurements
            .insert("remainder_exponent".into(), vec![remainder.exponent]);
        ws.lap("remainder");
    }
    if !scenario.ladders.radiation.is_empty() {
        let outgoing = extend_field(&f, ff.extension_half_width)?;
        let radiation = radiation_error(&outgoing, &scenario.ladders.radiation)?;
        if radiation.len() > 1 {
            ws.report.checks.push(Check::at_most(
                "radiation_growth",
                ladder_growth(&radiation),
                1.0 + checks.ladder_slack,
            ));
        }
        let rows = ladder_rows(&scenario.ladders.radiation, &radiation);
        ws.csv("radiation.csv", "R,error", &rows)?;
        ws.report.measurements.insert("radiation".into(), radiation);
        ws.lap("radiation");
    }
    ws.finish()
}

#[derive(Serialize)]
struct SplitDescriptor<'a> {
    scenario_hash: &'a str,
    profile: &'static str,
    cutoff_inner: f64,
    cutoff_outer: f64,
    phi1_constant: f64,
    phi2_constant: f64,
    phi2_tail_constant: f64,
    phi1: &'static str,
    phi2: &'static str,
}

/// Kernel split dumps with their decay constants, plus the truncated-kernel
/// decay fit on band-limited noise when a kernel ladder and family are given.
pub fn kernel_split_report(path: &Path, out: &Path) -> Result<RunReport, RunError> {
    let (scenario, _) = load(path)?;
    let mut ws = Workspace::open(out, "kernel-split", &scenario)?;
    let grid = scenario.grid_spec()?;
    let split = kernel_split(&grid)?;
    ws.lap("split");
    ws.field("phi1", &split.phi1)?;
    ws.field("phi2", &split.phi2)?;
    let descriptor = SplitDescriptor {
        scenario_hash: &ws.report.scenario_hash.clone(),
        profile: "one minus the normalized integral of exp(-1/(1-s^2)) over ||xi|-1|",
        cutoff_inner: split.cutoff_inner,
        cutoff_outer: split.cutoff_outer,
        phi1_constant: split.phi1_constant,
        phi2_constant: split.phi2_constant,
        phi2_tail_constant: split.phi2_tail_constant,
        phi1: "phi1.json",
        phi2: "phi2.json",
    };
    let body = serde_json::to_string_pretty(&descriptor).expect("descriptor serializes");
    ws.text("kernel_split.json", &body)?;
    let m = &mut ws.report.measurements;
    m.insert("phi1_constant".into(), vec![split.phi1_constant]);
    m.insert("phi2_constant".into(), vec![split.phi2_constant]);
    m.insert("phi2_tail_constant".into(), vec![split.phi2_tail_constant]);
    if let (Some(fam), false) = (scenario.family, scenario.ladders.kernel_decay.is_empty()) {
        let mut exponents = Vec::new();
        let mut rows = Vec::new();
        for member in 0..fam.size {
            let seed = scenario.solver.seed.wrapping_add(member as u64);
            let f = band_limited_noise(&grid, seed, fam.member_radius(member), fam.exponent)?;
            let fit = truncated_kernel_slope(fam.exponent, &scenario.ladders.kernel_decay, &f)?;
            rows.extend(fit.samples.iter().map(|s| vec![member as f64, s[0], s[1]]));
            exponents.push(fit.exponent);
        }
        let limit = -decay_rate(scenario.dim, fam.exponent);
        if let Some(slack) = scenario.checks.kernel_decay_slack {
            let worst = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            ws.report.checks.push(Check::at_most(
                "kernel_decay_exponent",
                worst,
                limit + slack,
            ));
        }
        ws.report
            .measurements
            .insert("kernel_decay_exponent".into(), exponents);
        ws.csv("kernel_decay.csv", "member,R,norm", &rows)?;
    }
    ws.lap("kernel_decay");
    ws.finish()
}

/// Resolvent bound ratios and the nonvanishing probe on the band-limited family.
pub fn family_diagnostics(path: &Path, out: &Path) -> Result<RunReport, RunError> {
    let (scenario, base) = load(path)?;
    let fam = scenario.family.ok_or(RunError::MissingSection("family"))?;
    let mut ws = Workspace::open(out, "diagnostics", &scenario)?;
    let prob = scenario.problem(&base)?;
    let grid = *prob.grid();
    let family = (0..fam.size)
        .map(|member| {
            let seed = scenario.solver.seed.wrapping_add(member as u64);
            band_limited_noise(&grid, seed, fam.member_radius(member), fam.exponent)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ws.lap("family");
    let mut plain = Vec::new();
    let mut local = Vec::new();
    for f in &family {
        plain.push(resolvent_ratio(prob.resolvent(), f, fam.exponent)?);
        if !scenario.ladders.big_r.is_empty() {
            local.push(big_r_ratio(
                prob.resolvent(),
                f,
                &scenario.ladders.big_r,
                fam.exponent,
            )?);
        }
    }
    ws.lap("ratios");
    let probe = nonvanishing_probe(
        &prob,
        &family,
        &scenario.ladders.concentration,
        fam.concentration_radius,
    )?;
    ws.lap("probe");
    let reports: Vec<RatioReport> = [("resolvent_ratio", plain), ("big_r_ratio", local)]
        .into_iter()
        .filter(|(_, r)| !r.is_empty())
        .map(|(id, r)| RatioReport::new(id, r))
        .collect();
    for r in &reports {
        if let Some(limit) = scenario.checks.family_spread {
            ws.report.checks.push(Check::at_most(
                &format!("{}_spread", r.family_id),
                r.spread(),
                limit,
            ));
        }
        ws.report
            .measurements
            .insert(r.family_id.clone(), r.ratios.clone());
    }
    ws.report.checks.push(Check {
        name: "nonvanishing".into(),
        value: probe.min_concentration_of_top,
        requirement: format!(">= {:e}", probe.concentration_floor),
        passed: probe.passed,
    });
    let rows: Vec<Vec<f64>> = probe
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut row = vec![i as f64, m.pairing];
            row.extend(&m.concentrations);
            row
        })
        .collect();
    let columns = std::iter::once("member,pairing".to_string())
        .chain(probe.rho_ladder.iter().map(|r| format!("conc_{r}")))
        .collect::<Vec<_>>()
        .join(",");
    ws.csv("nonvanishing.csv", &columns, &rows)?;
    let ratio_rows: Vec<Vec<f64>> = reports
        .iter()
        .enumerate()
        .flat_map(|(k, r)| {
            r.ratios
                .iter()
                .enumerate()
                .map(move |(i, v)| vec![k as f64, i as f64, *v])
        })
        .collect();
    ws.csv("ratios.csv", "family,member,ratio", &ratio_rows)?;
    ws.report.measurements.insert(
        "pairing".into(),
        probe.members.iter().map(|m| m.pairing).collect(),
    );
    ws.finish()
}
