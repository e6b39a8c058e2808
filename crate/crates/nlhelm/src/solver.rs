//! Critical points of the dual functional by nonlinear power iteration with
//! Nehari scaling, lattice recentering for periodic weights, and a deflated
//! multi-bump search for several solutions.

use crate::dual::{period_layout, DualError, DualProblem, DualState, SolutionClass};
use crate::farfield::{FarFieldPattern, SlopeFit};
use crate::grid::{Field, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("K_p annihilates the direction")]
    DegenerateDirection,
    #[error("recentering needs a periodic weight")]
    RecenterUnavailable,
    #[error("multiplicity search needs a decaying weight")]
    MultiplicityNeedsDecaying,
    #[error("no run converged; best residual {:e}", .best.crit_residual)]
    NotConverged { best: Box<DualState> },
    #[error("found {} of {requested} distinct solutions", .found.len())]
    PartialMultiplicity {
        found: Vec<SolutionRecord>,
        requested: usize,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Dual(#[from] DualError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_crit: f64,
    pub max_iter: usize,
    /// Iterations between recenterings (periodic weights only); 0 disables.
    pub recenter_every: usize,
    /// Ball radius of the recentering mass functional.
    pub recenter_radius: f64,
    pub deflation_count: usize,
    pub seed: u64,
    pub restart_count: usize,
    /// Iterations between checkpoints; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_crit: 1e-6,
            max_iter: 5000,
            recenter_every: 25,
            recenter_radius: 1.0,
            deflation_count: 1,
            seed: 0,
            restart_count: 3,
            checkpoint_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.tol_crit.is_finite() && self.tol_crit > 0.0) {
            return bad("tol_crit must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.deflation_count == 0 {
            return bad("deflation_count must be at least 1");
        }
        if !(self.recenter_radius.is_finite() && self.recenter_radius > 0.0) {
            return bad("recenter_radius must be positive");
        }
        Ok(())
    }
}

/// A converged critical point. The diagnostic handles are filled in by the run driver.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub v_star: Field,
    pub u_star: Field,
    pub j_value: f64,
    pub crit_residual: f64,
    pub iterations: usize,
    pub restart: usize,
    pub lattice_shift_applied: Vec<i64>,
    pub rayleigh_steps: usize,
    pub rayleigh_decreases: usize,
    /// Levels of every converged run, in run order.
    pub levels: Vec<f64>,
    pub pde_residual_l2: Option<f64>,
    pub farfield: Option<FarFieldPattern>,
    pub decay_fit: Option<SlopeFit>,
}

/// Converged run kept while later restarts proceed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedRun {
    pub restart: usize,
    pub v: Field,
    pub j_value: f64,
    pub crit_residual: f64,
    pub iterations: usize,
    pub shift: Vec<i64>,
}

/// Everything needed to continue a mountain-pass search bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverCheckpoint {
    pub seed: u64,
    pub restart: usize,
    pub iteration: usize,
    /// Current unit direction.
    pub w: Field,
    /// Level and residual of the previous iterate.
    pub j_value: f64,
    pub crit_residual: f64,
    pub shift: Vec<i64>,
    pub rayleigh_prev: f64,
    pub rayleigh_steps: usize,
    pub rayleigh_decreases: usize,
    pub levels: Vec<f64>,
    pub best: Option<ConvergedRun>,
}

/// One application of `w ↦ |K_p w|^{p−2} K_p w`, normalized in `L^{p′}`.
pub fn power_step(prob: &DualProblem, w: &Field) -> Result<Field, SolverError> {
    let kw = prob.kp_apply(w)?;
    let values = w.real_values();
    let next = step_from(prob, &values, &kw.real_values())?;
    Ok(Field::from_real(*prob.grid(), next).expect("grid-sized"))
}

fn step_from(prob: &DualProblem, w: &[f64], kw: &[f64]) -> Result<Vec<f64>, SolverError> {
    let w_max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let k_max = kw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if w_max == 0.0 || k_max <= 1e-14 * w_max {
        return Err(SolverError::DegenerateDirection);
    }
    let mut z = prob.primal_power(kw);
    let size = prob.norm_dual(&z);
    for x in z.iter_mut() {
        *x /= size;
    }
    Ok(z)
}

/// Translates `w` by the period-lattice vector maximizing its `L^{p′}` mass in a ball
/// of radius `rho`, bringing that lattice point to the origin. Returns the field and the
/// applied shift in period units.
pub fn recenter(prob: &DualProblem, w: &Field, rho: f64) -> Result<(Field, Vec<i64>), SolverError> {
    let SolutionClass::Periodic { period } = *prob.class() else {
        return Err(SolverError::RecenterUnavailable);
    };
    let grid = *prob.grid();
    if w.grid() != &grid {
        return Err(DualError::Grid(crate::grid::GridError::GridMismatch).into());
    }
    let (cells, nodes) = period_layout(&grid, period)?;
    let mass: Vec<f64> = w
        .values()
        .iter()
        .map(|v| v.norm().powf(prob.p_dual()))
        .collect();
    let shift = best_lattice_shift(&grid, &mass, cells, nodes, rho)?;
    let node_shift: Vec<i64> = shift.iter().map(|s| s * nodes as i64).collect();
    Ok((w.translated(&node_shift), shift))
}

pub(crate) fn ball_offsets(grid: &GridSpec, rho: f64) -> Vec<Vec<i64>> {
    let n = grid.points_per_axis() as i64;
    let h = grid.spacing();
    let dim = grid.dim();
    let reach = (rho / h).floor() as i64;
    let mut out = Vec::new();
    let mut d = vec![-reach; dim];
    loop {
        let r2: f64 = d.iter().map(|&k| (k as f64 * h).powi(2)).sum();
        if r2 <= rho * rho && d.iter().all(|&k| k >= -n / 2 && k < n / 2) {
            out.push(d.clone());
        }
        let mut a = dim;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            d[a] += 1;
            if d[a] <= reach {
                break;
            }
            d[a] = -reach;
        }
    }
}

fn best_lattice_shift(
    grid: &GridSpec,
    mass: &[f64],
    cells: usize,
    nodes: usize,
    rho: f64,
) -> Result<Vec<i64>, SolverError> {
    if rho > grid.half_width() {
        return Err(DualError::Grid(crate::grid::GridError::RadiusExceedsBox {
            radius: rho,
            limit: grid.half_width(),
        })
        .into());
    }
    let dim = grid.dim();
    let n = grid.points_per_axis() as i64;
    let offsets = ball_offsets(grid, rho);
    let origin = (n / 2) as usize;
    let mut best = -1.0f64;
    let mut best_s = vec![0usize; dim];
    let mut s = vec![0usize; dim];
    let mut idx = vec![0usize; dim];
    loop {
        let mut total = 0.0;
        for off in &offsets {
            for a in 0..dim {
                idx[a] = ((origin + s[a] * nodes) as i64 + off[a]).rem_euclid(n) as usize;
            }
            total += mass[grid.ravel(&idx)];
        }
        if total > best + 1e-12 * best.abs() {
            best = total;
            best_s.clone_from(&s);
        }
        let mut a = dim;
        loop {
            if a == 0 {
                let k = cells as i64;
                return Ok(best_s.iter().map(|&v| wrap_index(-(v as i64), k)).collect());
            }
            a -= 1;
            s[a] += 1;
            if s[a] < cells {
                break;
            }
            s[a] = 0;
        }
    }
}

fn wrap_index(v: i64, k: i64) -> i64 {
    let r = v.rem_euclid(k);
    if r >= k - k / 2 {
        r - k
    } else {
        r
    }
}

/// Reproducible initial direction: uniform noise times `Q`.
pub fn initial_direction(prob: &DualProblem, seed: u64, restart: usize) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let q = prob.weight().real_values();
    let values = q.iter().map(|w| w * rng.gen_range(-1.0..1.0)).collect();
    Field::from_real(*prob.grid(), values).expect("grid-sized")
}

enum RunEnd {
    Converged(ConvergedRun),
    Failed(DualState),
}

struct RunState {
    iteration: usize,
    w: Vec<f64>,
    shift: Vec<i64>,
    rayleigh_prev: f64,
    steps: usize,
    decreases: usize,
    last_j: f64,
    last_residual: f64,
}

fn add_shift(total: &mut [i64], delta: &[i64], cells: i64) {
    for (t, d) in total.iter_mut().zip(delta) {
        *t = wrap_index(*t + d, cells);
    }
}

/// Power iteration from `state` until convergence, failure or `max_iter`.
fn iterate(
    prob: &DualProblem,
    cfg: &SolverConfig,
    restart: usize,
    state: &mut RunState,
    sink: &mut dyn FnMut(&RunState, usize) -> Result<(), SolverError>,
) -> Result<RunEnd, SolverError> {
    let grid = *prob.grid();
    let periodic = match *prob.class() {
        SolutionClass::Periodic { period } => Some(period_layout(&grid, period)?),
        SolutionClass::Decaying => None,
    };
    let mut best: Option<DualState> = None;
    let wrap = |v: Vec<f64>| Field::from_real(grid, v).expect("grid-sized");
    while state.iteration < cfg.max_iter {
        let it = state.iteration;
        if cfg.checkpoint_every > 0 && it.is_multiple_of(cfg.checkpoint_every) {
            sink(state, restart)?;
        }
        if let Some((cells, nodes)) = periodic {
            if cfg.recenter_every > 0 && it > 0 && it.is_multiple_of(cfg.recenter_every) {
                let mass: Vec<f64> = state
                    .w
                    .iter()
                    .map(|v| v.abs().powf(prob.p_dual()))
                    .collect();
                let delta = best_lattice_shift(&grid, &mass, cells, nodes, cfg.recenter_radius)?;
                if delta.iter().any(|&d| d != 0) {
                    let node_shift: Vec<i64> = delta.iter().map(|s| s * nodes as i64).collect();
                    state.w = wrap(std::mem::take(&mut state.w))
                        .translated(&node_shift)
                        .real_values();
                    add_shift(&mut state.shift, &delta, cells as i64);
                }
            }
        }
        let kw = prob.kp_values(&state.w);
        let size = prob.norm_dual(&state.w);
        let form = prob.pair(&state.w, &kw);
        let rayleigh = form / (size * size);
        if state.rayleigh_prev.is_finite() {
            state.steps += 1;
            if rayleigh < state.rayleigh_prev {
                state.decreases += 1;
            }
        }
        state.rayleigh_prev = rayleigh;
        let t = match prob.nehari_from(&state.w, &kw) {
            Ok(t) => t,
            Err(_) => {
                let v = wrap(state.w.clone());
                let s = best.unwrap_or(DualState {
                    v,
                    j_value: f64::NAN,
                    rayleigh,
                    crit_residual: f64::INFINITY,
                    iteration: it,
                });
                return Ok(RunEnd::Failed(s));
            }
        };
        let v: Vec<f64> = state.w.iter().map(|x| x * t).collect();
        let kv: Vec<f64> = kw.iter().map(|x| x * t).collect();
        let residual = prob.residual_from(&v, &kv);
        let j_value = prob.j_from(&v, &kv);
        state.last_j = j_value;
        state.last_residual = residual;
        if residual <= cfg.tol_crit {
            return Ok(RunEnd::Converged(ConvergedRun {
                restart,
                v: wrap(v),
                j_value,
                crit_residual: residual,
                iterations: it,
                shift: state.shift.clone(),
            }));
        }
        if best.as_ref().is_none_or(|b| residual < b.crit_residual) {
            best = Some(DualState {
                v: wrap(v),
                j_value,
                rayleigh,
                crit_residual: residual,
                iteration: it,
            });
        }
        state.w = step_from(prob, &state.w, &kw)?;
        state.iteration += 1;
    }
    Ok(RunEnd::Failed(best.expect("at least one iteration")))
}

fn fresh_state(prob: &DualProblem, initial: &Field) -> Result<RunState, SolverError> {
    let w = initial.real_values();
    let size = prob.norm_dual(&w);
    if size == 0.0 {
        return Err(SolverError::DegenerateDirection);
    }
    Ok(RunState {
        iteration: 0,
        w: w.iter().map(|x| x / size).collect(),
        shift: vec![0; prob.grid().dim()],
        rayleigh_prev: f64::NEG_INFINITY,
        steps: 0,
        decreases: 0,
        last_j: f64::NAN,
        last_residual: f64::NAN,
    })
}

fn record(
    prob: &DualProblem,
    run: ConvergedRun,
    levels: Vec<f64>,
    steps: usize,
    decreases: usize,
) -> Result<SolutionRecord, SolverError> {
    let u_star = prob.primal(&run.v)?;
    Ok(SolutionRecord {
        v_star: run.v,
        u_star,
        j_value: run.j_value,
        crit_residual: run.crit_residual,
        iterations: run.iterations,
        restart: run.restart,
        lattice_shift_applied: run.shift,
        rayleigh_steps: steps,
        rayleigh_decreases: decreases,
        levels,
        pde_residual_l2: None,
        farfield: None,
        decay_fit: None,
    })
}

/// One run from a given direction.
pub fn solve_mountain_pass_from(
    prob: &DualProblem,
    cfg: &SolverConfig,
    initial: &Field,
) -> Result<SolutionRecord, SolverError> {
    cfg.validate()?;
    if initial.grid() != prob.grid() {
        return Err(DualError::Grid(crate::grid::GridError::GridMismatch).into());
    }
    initial.require_real().map_err(DualError::from)?;
    let mut state = fresh_state(prob, initial)?;
    match iterate(prob, cfg, 0, &mut state, &mut |_, _| Ok(()))? {
        RunEnd::Converged(run) => {
            let levels = vec![run.j_value];
            record(prob, run, levels, state.steps, state.decreases)
        }
        RunEnd::Failed(best) => Err(SolverError::NotConverged {
            best: Box::new(best),
        }),
    }
}

/// Mountain-pass candidate: `restart_count + 1` seeded runs, keeping the lowest positive level.
pub fn solve_mountain_pass(
    prob: &DualProblem,
    cfg: &SolverConfig,
) -> Result<SolutionRecord, SolverError> {
    solve_mountain_pass_checkpointed(prob, cfg, None, &mut |_| Ok(()))
}

/// As [`solve_mountain_pass`], optionally resuming from `resume` and handing a
/// checkpoint to `sink` every `checkpoint_every` iterations.
pub fn solve_mountain_pass_checkpointed(
    prob: &DualProblem,
    cfg: &SolverConfig,
    resume: Option<SolverCheckpoint>,
    sink: &mut dyn FnMut(&SolverCheckpoint) -> Result<(), SolverError>,
) -> Result<SolutionRecord, SolverError> {
    cfg.validate()?;
    let grid = *prob.grid();
    let (first, mut levels, mut best, mut resumed, mut steps, mut decreases) = match resume {
        Some(cp) => {
            if cp.seed != cfg.seed || cp.w.grid() != &grid {
                return Err(SolverError::Checkpoint(
                    "checkpoint does not match this problem".into(),
                ));
            }
            let state = RunState {
                iteration: cp.iteration,
                w: cp.w.real_values(),
                shift: cp.shift.clone(),
                rayleigh_prev: cp.rayleigh_prev,
                steps: cp.rayleigh_steps,
                decreases: cp.rayleigh_decreases,
                last_j: cp.j_value,
                last_residual: cp.crit_residual,
            };
            (
                cp.restart,
                cp.levels,
                cp.best,
                Some(state),
                cp.rayleigh_steps,
                cp.rayleigh_decreases,
            )
        }
        None => (0, Vec::new(), None, None, 0, 0),
    };
    let mut failed: Option<DualState> = None;
    for restart in first..=cfg.restart_count {
        let mut state = match resumed.take() {
            Some(s) => s,
            None => {
                let mut s = fresh_state(prob, &initial_direction(prob, cfg.seed, restart))?;
                s.steps = steps;
                s.decreases = decreases;
                s
            }
        };
        let snapshot_levels = levels.clone();
        let snapshot_best = best.clone();
        let mut emit = |s: &RunState, restart: usize| {
            sink(&SolverCheckpoint {
                seed: cfg.seed,
                restart,
                iteration: s.iteration,
                w: Field::from_real(grid, s.w.clone()).expect("grid-sized"),
                j_value: s.last_j,
                crit_residual: s.last_residual,
                shift: s.shift.clone(),
                rayleigh_prev: s.rayleigh_prev,
                rayleigh_steps: s.steps,
                rayleigh_decreases: s.decreases,
                levels: snapshot_levels.clone(),
                best: snapshot_best.clone(),
            })
        };
        let end = match iterate(prob, cfg, restart, &mut state, &mut emit) {
            Err(SolverError::DegenerateDirection) => continue,
            other => other?,
        };
        steps = state.steps;
        decreases = state.decreases;
        match end {
            RunEnd::Converged(run) => {
                levels.push(run.j_value);
                if run.j_value > 0.0 && best.as_ref().is_none_or(|b| run.j_value < b.j_value) {
                    best = Some(run);
                }
            }
            RunEnd::Failed(s) => {
                if failed
                    .as_ref()
                    .is_none_or(|f| s.crit_residual < f.crit_residual)
                {
                    failed = Some(s);
                }
            }
        }
    }
    match best {
        Some(run) => record(prob, run, levels, steps, decreases),
        None => Err(SolverError::NotConverged {
            best: Box::new(failed.unwrap_or_else(|| DualState {
                v: Field::zeros(grid),
                j_value: f64::NAN,
                rayleigh: f64::NAN,
                crit_residual: f64::INFINITY,
                iteration: 0,
            })),
        }),
    }
}

/// Disjoint smooth bumps inside `{Q > 0}` for the multi-solution search.
#[derive(Debug, Clone)]
pub struct BumpSet {
    pub radius_delta: f64,
    pub diameter: f64,
    pub centers: Vec<Vec<f64>>,
    pub bumps: Vec<Field>,
    /// `⟨z_i, K_p z_i⟩` for each bump.
    pub forms: Vec<f64>,
}

/// `m` bumps of diameter `τ = δ/m²` on a line through the maximum of `Q`,
/// consecutive centers `δ/m + τ` apart, where `δ ≤ L/2` is the largest radius
/// whose ball around the maximum lies in `{Q > 0}`.
pub fn bump_directions(prob: &DualProblem, m: usize) -> Result<BumpSet, SolverError> {
    let grid = *prob.grid();
    let q = prob.weight().real_values();
    let (peak, _) =
        q.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let c0 = grid.position(peak);
    let mut delta = grid.half_width() / 2.0;
    grid.for_each_node(|flat, x| {
        if q[flat] <= 0.0 {
            let r = crate::grid::norm(&x.iter().zip(&c0).map(|(a, b)| a - b).collect::<Vec<_>>());
            delta = delta.min(r - grid.spacing());
        }
    });
    if delta <= grid.spacing() {
        return Err(SolverError::InvalidConfig(
            "support of Q is too small for bumps".into(),
        ));
    }
    let mf = m as f64;
    let tau = delta / (mf * mf);
    let step = delta / mf + tau;
    let mut centers = Vec::with_capacity(m);
    let mut bumps = Vec::with_capacity(m);
    let mut forms = Vec::with_capacity(m);
    for i in 0..m {
        let mut c = c0.clone();
        c[0] += (i as f64 - (mf - 1.0) / 2.0) * step;
        let cc = c.clone();
        let bump = Field::from_fn_real(grid, move |x| {
            let r = crate::grid::norm(&x.iter().zip(&cc).map(|(a, b)| a - b).collect::<Vec<_>>());
            let s = 2.0 * r / tau;
            if s < 1.0 {
                (-1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        });
        let values = bump.real_values();
        if values.iter().all(|&v| v == 0.0) {
            return Err(SolverError::InvalidConfig(
                "bump diameter is below the grid spacing".into(),
            ));
        }
        let kz = prob.kp_values(&values);
        forms.push(prob.pair(&values, &kz));
        centers.push(c);
        bumps.push(bump);
    }
    Ok(BumpSet {
        radius_delta: delta,
        diameter: tau,
        centers,
        bumps,
        forms,
    })
}

/// Sign patterns `σ_i = (−1)^{popcount(i & k)}`, distinct up to global sign.
fn sign_patterns(m: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let count = 1usize << m.min(16);
    for k in (1..count).chain(std::iter::once(0)) {
        let pattern: Vec<f64> = (0..m)
            .map(|i| {
                if (i & k).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let negated: Vec<f64> = pattern.iter().map(|s| -s).collect();
        if !out.contains(&pattern) && !out.contains(&negated) {
            out.push(pattern);
        }
    }
    out
}

/// `min_± ‖a ∓ b‖_{p′} / ‖a‖_{p′}`.
pub fn separation(prob: &DualProblem, a: &Field, b: &Field) -> f64 {
    let (x, y) = (a.real_values(), b.real_values());
    let plus: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
    let minus: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
    prob.norm_dual(&plus).min(prob.norm_dual(&minus)) / prob.norm_dual(&x)
}

/// Up to `deflation_count` distinct critical points sorted by level.
///
/// The first is the mountain-pass candidate. Further runs start from signed
/// bump combinations, made `K_p`-orthogonal to the solutions found so far
/// before the first step only.
pub fn solve_multiplicity(
    prob: &DualProblem,
    cfg: &SolverConfig,
) -> Result<Vec<SolutionRecord>, SolverError> {
    cfg.validate()?;
    let m = cfg.deflation_count;
    if m == 1 {
        return Ok(vec![solve_mountain_pass(prob, cfg)?]);
    }
    if !matches!(prob.class(), SolutionClass::Decaying) {
        return Err(SolverError::MultiplicityNeedsDecaying);
    }
    let mut found = vec![solve_mountain_pass(prob, cfg)?];
    let bumps = bump_directions(prob, m)?;
    let values: Vec<Vec<f64>> = bumps.bumps.iter().map(|b| b.real_values()).collect();
    let grid = *prob.grid();
    for pattern in sign_patterns(m) {
        if found.len() >= m {
            break;
        }
        let mut seed = vec![0.0; grid.len()];
        for (s, z) in pattern.iter().zip(&values) {
            for (a, b) in seed.iter_mut().zip(z) {
                *a += s * b;
            }
        }
        for rec in &found {
            let v = rec.v_star.real_values();
            let kv = prob.kp_values(&v);
            let coef = prob.pair(&seed, &kv) / prob.pair(&v, &kv);
            for (a, b) in seed.iter_mut().zip(&v) {
                *a -= coef * b;
            }
        }
        let initial = Field::from_real(grid, seed).expect("grid-sized");
        let candidate = match solve_mountain_pass_from(prob, cfg, &initial) {
            Ok(r) => r,
            Err(SolverError::NotConverged { .. }) | Err(SolverError::DegenerateDirection) => {
                continue
            }
            Err(e) => return Err(e),
        };
        let distinct = found
            .iter()
            .all(|r| separation(prob, &r.v_star, &candidate.v_star) > 10.0 * cfg.tol_crit);
        if candidate.j_value > 0.0 && distinct {
            found.push(candidate);
        }
    }
    found.sort_by(|a, b| a.j_value.total_cmp(&b.j_value));
    if found.len() < m {
        return Err(SolverError::PartialMultiplicity {
            found,
            requested: m,
        });
    }
    Ok(found)
}
