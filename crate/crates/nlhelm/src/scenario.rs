//! Scenario files: every physical and numerical parameter of a run, validated
//! as a whole before any computation starts.

use crate::dual::{
    check_exponent, exponent_window, period_layout, DualError, DualProblem, SolutionClass,
};
use crate::grid::{Field, GridSpec, SphereMesh};
use crate::io::{read_field, sha256_hex, IoError};
use crate::resolvent::{schedule_floor, AbsorptionSchedule, ResolventMethod};
use crate::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// One failed check, addressed by a dotted path into the scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario ({} issue(s)): {}", .0.len(), .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Issue>),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Dual(#[from] DualError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points_per_axis: usize,
}

/// `amplitude · Π_a cos(2π m_a x_a / period)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineTerm {
    pub amplitude: f64,
    pub wave_vector: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `amplitude · exp(−|x − center|² / (2 sigma²))`.
    Gaussian {
        amplitude: f64,
        sigma: f64,
        center: Vec<f64>,
    },
    /// `base + Σ terms`.
    PeriodicCosine {
        base: f64,
        period: f64,
        terms: Vec<CosineTerm>,
    },
    /// `amplitude` on `|x| ≤ radius`.
    IndicatorBall { amplitude: f64, radius: f64 },
    /// Field dump, path relative to the scenario file.
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarFieldConfig {
    pub mesh_order: usize,
    /// Half-width of the concentric grid the solution is extended to.
    pub extension_half_width: f64,
    pub decay_window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladders {
    pub relation: Vec<f64>,
    pub radiation: Vec<f64>,
    /// Radii of the concentration probe.
    pub concentration: Vec<f64>,
    /// Radii of the `(1/R)∫_{B_R}|Rf|²` ratio.
    pub big_r: Vec<f64>,
    /// Radii of the truncated-kernel decay fit.
    pub kernel_decay: Vec<f64>,
}

/// Band-limited test family for the resolvent ratio and nonvanishing probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub size: usize,
    /// Exponent of the family's norms and of the truncated-kernel decay fit.
    pub exponent: f64,
    /// Noise radius of the first member; member `k` uses `noise_radius · radius_growth^k`.
    pub noise_radius: f64,
    pub radius_growth: f64,
    pub concentration_radius: f64,
}

impl FamilyConfig {
    pub fn member_radius(&self, member: usize) -> f64 {
        self.noise_radius * self.radius_growth.powi(member as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    pub tolerance: f64,
}

/// Assertions applied to the run report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    pub pde_residual_l2: Option<f64>,
    pub decay_exponent: Option<Target>,
    /// Allowed relative increase per rung on a decreasing ladder.
    pub ladder_slack: f64,
    /// Minimum fraction of nondecreasing Rayleigh steps.
    pub rayleigh_ascent: Option<f64>,
    /// Largest allowed `max / median` over the test family.
    pub family_spread: Option<f64>,
    /// Largest relative gap between `J` and `(1/p′ − 1/2)‖v‖^{p′}`.
    pub nehari_defect: Option<f64>,
    /// Smallest relative distance between two solutions of a multiplicity run.
    pub separation: Option<f64>,
    /// Largest `max |g(−ξ) + conj g(ξ)|` of a far-field pattern.
    pub symmetry_defect: Option<f64>,
    /// Largest relative L² gap between the multiplier and kernel-convolution resolvents.
    pub cross_validation: Option<f64>,
    /// Exponent of the linear far-field remainder.
    pub remainder_exponent: Option<Target>,
    /// Allowed excess of the truncated-kernel exponent over `−λ_p`.
    pub kernel_decay_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub grid: GridConfig,
    pub p: f64,
    pub weight: WeightSpec,
    pub class: SolutionClass,
    pub method: ResolventMethod,
    pub schedule: AbsorptionSchedule,
    pub solver: SolverConfig,
    pub farfield: Option<FarFieldConfig>,
    pub ladders: Ladders,
    pub family: Option<FamilyConfig>,
    pub checks: Checks,
}

fn find_key(value: &serde_json::Value, key: &str, at: &str, out: &mut Vec<String>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let path = if at.is_empty() {
                    k.clone()
                } else {
                    format!("{at}.{k}")
                };
                if k == key {
                    out.push(path.clone());
                }
                find_key(v, key, &path, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                find_key(v, key, &format!("{at}[{i}]"), out);
            }
        }
        _ => {}
    }
}

impl Scenario {
    /// Parses and validates. A wavenumber field `k` is rejected wherever it appears.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let mut hits = Vec::new();
        find_key(&raw, "k", "", &mut hits);
        if !hits.is_empty() {
            return Err(ScenarioError::Invalid(
                hits.into_iter()
                    .map(|field| Issue {
                        field,
                        message: "the wavenumber is fixed to k = 1; other wavenumbers follow by rescaling x ↦ kx"
                            .into(),
                    })
                    .collect(),
            ));
        }
        let scenario: Scenario =
            serde_json::from_value(raw).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let issues = scenario.issues(base_dir);
        if issues.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid(issues))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// sha256 of the canonical serialization.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("scenario serializes"))
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ScenarioError> {
        GridSpec::new(self.dim, self.grid.half_width, self.grid.points_per_axis).map_err(|e| {
            ScenarioError::Invalid(vec![Issue {
                field: "grid".into(),
                message: e.to_string(),
            }])
        })
    }

    pub fn weight_field(&self, base_dir: &Path) -> Result<Field, ScenarioError> {
        let grid = self.grid_spec()?;
        Ok(match &self.weight {
            WeightSpec::Gaussian {
                amplitude,
                sigma,
                center,
            } => {
                let (a, s, c) = (*amplitude, *sigma, center.clone());
                Field::from_fn_real(grid, move |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(x, c)| (x - c).powi(2)).sum();
                    a * (-r2 / (2.0 * s * s)).exp()
                })
            }
            WeightSpec::PeriodicCosine {
                base,
                period,
                terms,
            } => {
                let (b, t, terms) = (*base, *period, terms.clone());
                Field::from_fn_real(grid, move |x| {
                    b + terms
                        .iter()
                        .map(|term| {
                            term.amplitude
                                * x.iter()
                                    .zip(&term.wave_vector)
                                    .map(|(x, &m)| (2.0 * PI * m as f64 * x / t).cos())
                                    .product::<f64>()
                        })
                        .sum::<f64>()
                })
            }
            WeightSpec::IndicatorBall { amplitude, radius } => {
                let (a, r) = (*amplitude, *radius);
                Field::from_fn_real(
                    grid,
                    move |x| if crate::grid::norm(x) <= r { a } else { 0.0 },
                )
            }
            WeightSpec::File { path } => {
                let field = read_field(&base_dir.join(path))?;
                if *field.grid() != grid {
                    return Err(ScenarioError::Invalid(vec![Issue {
                        field: "weight.path".into(),
                        message: "stored field does not live on the scenario grid".into(),
                    }]));
                }
                field.real_part()
            }
        })
    }

    pub fn problem(&self, base_dir: &Path) -> Result<DualProblem, ScenarioError> {
        let q = self.weight_field(base_dir)?;
        Ok(DualProblem::new(
            &q,
            self.p,
            self.class,
            self.method,
            &self.schedule,
        )?)
    }

    /// Every violated constraint.
    pub fn issues(&self, base_dir: &Path) -> Vec<Issue> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| {
            out.push(Issue {
                field: field.into(),
                message,
            })
        };
        if self.name.trim().is_empty() {
            bad("name", "must not be empty".into());
        }
        let grid = match GridSpec::new(self.dim, self.grid.half_width, self.grid.points_per_axis) {
            Ok(g) => Some(g),
            Err(e) => {
                bad("grid", e.to_string());
                None
            }
        };
        if let Err(e) = check_exponent(self.dim.max(3), self.p, &self.class) {
            bad("p", e.to_string());
        }
        let nonnegative = "Q must be nonnegative".to_string();
        match &self.weight {
            WeightSpec::Gaussian {
                amplitude,
                sigma,
                center,
            } => {
                if !(*amplitude >= 0.0) {
                    bad("weight.amplitude", nonnegative.clone());
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    bad("weight.sigma", "must be positive".into());
                }
                if center.len() != self.dim {
                    bad("weight.center", format!("needs {} coordinates", self.dim));
                }
            }
            WeightSpec::PeriodicCosine {
                base,
                period,
                terms,
            } => {
                let total: f64 = terms.iter().map(|t| t.amplitude.abs()).sum();
                if !(*base >= total) {
                    bad(
                        "weight.base",
                        format!("{nonnegative}: base {base} is below Σ|amplitude| = {total}"),
                    );
                }
                if !(*period > 0.0 && period.is_finite()) {
                    bad("weight.period", "must be positive".into());
                }
                for (i, t) in terms.iter().enumerate() {
                    if t.wave_vector.len() != self.dim {
                        bad(
                            &format!("weight.terms[{i}].wave_vector"),
                            format!("needs {} entries", self.dim),
                        );
                    }
                }
            }
            WeightSpec::IndicatorBall { amplitude, radius } => {
                if !(*amplitude >= 0.0) {
                    bad("weight.amplitude", nonnegative.clone());
                }
                if !(*radius > 0.0) {
                    bad("weight.radius", "must be positive".into());
                }
            }
            WeightSpec::File { path } => {
                if let Some(grid) = grid {
                    match read_field(&base_dir.join(path)) {
                        Err(e) => bad("weight.path", e.to_string()),
                        Ok(f) if *f.grid() != grid => {
                            bad("weight.path", "stored field is on another grid".into())
                        }
                        Ok(f) => {
                            let min = f.real_values().into_iter().fold(f64::INFINITY, f64::min);
                            if min < 0.0 {
                                bad("weight.path", nonnegative.clone());
                            }
                        }
                    }
                }
            }
        }
        match (&self.class, &self.weight) {
            (
                SolutionClass::Periodic { .. },
                WeightSpec::Gaussian { .. } | WeightSpec::IndicatorBall { .. },
            ) => bad("class", "a periodic class needs a periodic weight".into()),
            (SolutionClass::Decaying, WeightSpec::PeriodicCosine { .. }) => bad(
                "class",
                "a decaying class needs a weight that vanishes at infinity".into(),
            ),
            (
                SolutionClass::Periodic { period },
                WeightSpec::PeriodicCosine {
                    period: q_period, ..
                },
            ) if (period - q_period).abs() > 1e-12 * period.abs() => bad(
                "class.period",
                format!("must equal the weight period {q_period}"),
            ),
            _ => {}
        }
        if let (SolutionClass::Periodic { period }, Some(grid)) = (&self.class, grid) {
            if let Err(e) = period_layout(&grid, *period) {
                bad("class.period", e.to_string());
            }
            if self.solver.recenter_radius > grid.half_width() / 2.0 {
                bad(
                    "solver.recenter_radius",
                    "must not exceed half the box half-width".into(),
                );
            }
        }
        match (&self.class, self.method) {
            (SolutionClass::Periodic { .. }, m) if m != ResolventMethod::TorusMultiplier => {
                bad("method", "the periodic class uses torus_multiplier".into())
            }
            (SolutionClass::Decaying, ResolventMethod::TorusMultiplier) => bad(
                "method",
                "the decaying class needs a free-space method".into(),
            ),
            _ => {}
        }
        if self.method == ResolventMethod::Multiplier && self.dim != 3 {
            bad(
                "method",
                "the multiplier method is available in dimension 3 only".into(),
            );
        }
        match (self.schedule.validate(), grid) {
            (Err(e), _) => bad("schedule", e.to_string()),
            (Ok(()), Some(grid)) => {
                if let Err(e) = self
                    .schedule
                    .check_guard(schedule_floor(&grid, self.method))
                {
                    bad("schedule", e.to_string());
                }
            }
            _ => {}
        }
        if let Err(e) = self.solver.validate() {
            bad("solver", e.to_string());
        }
        if self.solver.deflation_count > 1 && self.class != SolutionClass::Decaying {
            bad(
                "solver.deflation_count",
                "multiple pairs are sought for the decaying class only".into(),
            );
        }
        let half = self.grid.half_width;
        let ladder = |field: &str, values: &[f64], lo: f64, hi: f64, out: &mut Vec<Issue>| {
            for (i, &r) in values.iter().enumerate() {
                if !(r >= lo && r <= hi) {
                    out.push(Issue {
                        field: format!("{field}[{i}]"),
                        message: format!("{r} outside [{lo}, {hi}]"),
                    });
                }
            }
            if values.windows(2).any(|w| w[1] <= w[0]) {
                out.push(Issue {
                    field: field.into(),
                    message: "must be strictly increasing".into(),
                });
            }
        };
        match (&self.farfield, &self.class) {
            (Some(ff), SolutionClass::Decaying) => {
                if let Err(e) = SphereMesh::new(self.dim.max(3), ff.mesh_order) {
                    bad("farfield.mesh_order", e.to_string());
                }
                let ext = ff.extension_half_width;
                if !(ext >= half) {
                    bad(
                        "farfield.extension_half_width",
                        format!("must be at least the box half-width {half}"),
                    );
                }
                let [lo, hi] = ff.decay_window;
                if !(lo >= 1.0 && hi <= ext / 2.0 && lo < hi) {
                    bad(
                        "farfield.decay_window",
                        format!("must lie inside [1, {}]", ext / 2.0),
                    );
                }
                ladder(
                    "ladders.relation",
                    &self.ladders.relation,
                    f64::MIN_POSITIVE,
                    ext / 2.0,
                    &mut out,
                );
                ladder(
                    "ladders.radiation",
                    &self.ladders.radiation,
                    f64::MIN_POSITIVE,
                    ext / 2.0,
                    &mut out,
                );
            }
            (Some(_), SolutionClass::Periodic { .. }) => out.push(Issue {
                field: "farfield".into(),
                message: "far-field checks need a decaying class".into(),
            }),
            _ => {}
        }
        ladder(
            "ladders.concentration",
            &self.ladders.concentration,
            f64::MIN_POSITIVE,
            half / 2.0,
            &mut out,
        );
        ladder(
            "ladders.big_r",
            &self.ladders.big_r,
            1.0,
            half / 2.0,
            &mut out,
        );
        ladder(
            "ladders.kernel_decay",
            &self.ladders.kernel_decay,
            2.0,
            half / 4.0,
            &mut out,
        );
        if let Some(fam) = &self.family {
            if fam.size == 0 {
                out.push(Issue {
                    field: "family.size".into(),
                    message: "must be at least 1".into(),
                });
            }
            let (lower, _) = exponent_window(self.dim.max(3));
            if !(fam.exponent > lower && fam.exponent.is_finite()) {
                out.push(Issue {
                    field: "family.exponent".into(),
                    message: format!("must be finite and above {lower}"),
                });
            }
            if !(fam.noise_radius > 0.0) {
                out.push(Issue {
                    field: "family.noise_radius".into(),
                    message: "must be positive".into(),
                });
            }
            let widest = fam.noise_radius * fam.radius_growth.powi(fam.size.max(1) as i32 - 1);
            if !(fam.radius_growth >= 1.0 && widest <= half) {
                out.push(Issue {
                    field: "family.radius_growth".into(),
                    message: format!("must be at least 1 with every noise radius within {half}"),
                });
            }
            if !(fam.concentration_radius > 0.0 && fam.concentration_radius <= half / 2.0) {
                out.push(Issue {
                    field: "family.concentration_radius".into(),
                    message: format!("must lie in (0, {}]", half / 2.0),
                });
            }
        }
        let c = &self.checks;
        if !(c.ladder_slack >= 0.0) {
            out.push(Issue {
                field: "checks.ladder_slack".into(),
                message: "must be nonnegative".into(),
            });
        }
        for (field, v) in [
            ("checks.pde_residual_l2", c.pde_residual_l2),
            ("checks.rayleigh_ascent", c.rayleigh_ascent),
            ("checks.family_spread", c.family_spread),
            ("checks.nehari_defect", c.nehari_defect),
            ("checks.separation", c.separation),
            ("checks.symmetry_defect", c.symmetry_defect),
            ("checks.cross_validation", c.cross_validation),
            (
                "checks.remainder_exponent.tolerance",
                c.remainder_exponent.map(|t| t.tolerance),
            ),
            (
                "checks.decay_exponent.tolerance",
                c.decay_exponent.map(|t| t.tolerance),
            ),
        ] {
            if matches!(v, Some(x) if !(x > 0.0)) {
                out.push(Issue {
                    field: field.into(),
                    message: "must be positive".into(),
                });
            }
        }
        out
    }
}
