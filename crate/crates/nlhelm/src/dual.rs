//! The Birman–Schwinger operator `K_p v = Q^{1/p} Re R(Q^{1/p} v)`, the dual
//! functional `J(v) = ‖v‖_{p′}^{p′}/p′ − ½⟨v, K_p v⟩` and its derivative.

use crate::grid::{lp_norm_real, pairing_real, Field, GridError, GridSpec};
use crate::resolvent::{AbsorptionSchedule, Resolvent, ResolventError, ResolventMethod};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("exponent {p} outside the admissible window [{lower}, {upper}) (lower bound strict: {strict})")]
    InvalidExponent {
        p: f64,
        lower: f64,
        upper: f64,
        strict: bool,
    },
    #[error("Q must be nonnegative (minimum {0:e})")]
    NegativeWeight(f64),
    #[error("Q vanishes identically")]
    ZeroWeight,
    #[error("{method:?} cannot be used for the {class} class")]
    IncompatibleMethod {
        class: &'static str,
        method: ResolventMethod,
    },
    #[error("period {period} is incompatible with the grid: {reason}")]
    IncompatiblePeriod { period: f64, reason: String },
    #[error("quadratic form ⟨w, K_p w⟩ = {0:e} is not positive")]
    NonpositiveQuadraticForm(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
}

/// Whether `Q` decays at infinity or is periodic with the given period along every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionClass {
    Decaying,
    Periodic { period: f64 },
}

impl SolutionClass {
    pub fn label(&self) -> &'static str {
        match self {
            SolutionClass::Decaying => "decaying",
            SolutionClass::Periodic { .. } => "periodic",
        }
    }
}

/// `(lower, upper)` exponent bounds `2(N+1)/(N−1)` and `2N/(N−2)`.
pub fn exponent_window(dim: usize) -> (f64, f64) {
    let n = dim as f64;
    (2.0 * (n + 1.0) / (n - 1.0), 2.0 * n / (n - 2.0))
}

/// Checks `p` against the window: strict at the lower end for periodic `Q`.
pub fn check_exponent(dim: usize, p: f64, class: &SolutionClass) -> Result<(), DualError> {
    let (lower, upper) = exponent_window(dim);
    let strict = matches!(class, SolutionClass::Periodic { .. });
    let low_ok = if strict { p > lower } else { p >= lower };
    if p.is_finite() && low_ok && p < upper {
        Ok(())
    } else {
        Err(DualError::InvalidExponent {
            p,
            lower,
            upper,
            strict,
        })
    }
}

/// Number of periods per box side and nodes per period, when both are integers.
pub(crate) fn period_layout(grid: &GridSpec, period: f64) -> Result<(usize, usize), DualError> {
    let bad = |reason: &str| DualError::IncompatiblePeriod {
        period,
        reason: reason.to_string(),
    };
    if !(period.is_finite() && period > 0.0) {
        return Err(bad("period must be positive"));
    }
    let cells = 2.0 * grid.half_width() / period;
    let nodes = period / grid.spacing();
    if (cells - cells.round()).abs() > 1e-9 * cells || cells.round() < 1.0 {
        return Err(bad("the period does not divide the box side"));
    }
    if (nodes - nodes.round()).abs() > 1e-9 * nodes || nodes.round() < 1.0 {
        return Err(bad("the period is not a whole number of grid spacings"));
    }
    Ok((cells.round() as usize, nodes.round() as usize))
}

/// Dual iterate with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub v: Field,
    pub j_value: f64,
    pub rayleigh: f64,
    pub crit_residual: f64,
    pub iteration: usize,
}

/// Weight, exponent and resolvent defining `K_p` and `J`. Immutable once built.
#[derive(Debug, Clone)]
pub struct DualProblem {
    q: Field,
    q_root: Vec<f64>,
    p: f64,
    p_dual: f64,
    class: SolutionClass,
    schedule: AbsorptionSchedule,
    resolvent: Resolvent,
}

impl DualProblem {
    pub fn new(
        q: &Field,
        p: f64,
        class: SolutionClass,
        method: ResolventMethod,
        schedule: &AbsorptionSchedule,
    ) -> Result<Self, DualError> {
        q.require_real()?;
        let grid = *q.grid();
        check_exponent(grid.dim(), p, &class)?;
        let values = q.real_values();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            return Err(DualError::NegativeWeight(min));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(DualError::ZeroWeight);
        }
        match (&class, method) {
            (SolutionClass::Periodic { period }, ResolventMethod::TorusMultiplier) => {
                period_layout(&grid, *period)?;
            }
            (SolutionClass::Periodic { .. }, m) => {
                return Err(DualError::IncompatibleMethod {
                    class: "periodic",
                    method: m,
                })
            }
            (SolutionClass::Decaying, ResolventMethod::TorusMultiplier) => {
                return Err(DualError::IncompatibleMethod {
                    class: "decaying",
                    method,
                })
            }
            (SolutionClass::Decaying, _) => {}
        }
        let resolvent = Resolvent::new(&grid, method, schedule)?;
        let q_root = values.iter().map(|v| v.powf(1.0 / p)).collect();
        Ok(Self {
            q: Field::from_real(grid, values)?,
            q_root,
            p,
            p_dual: p / (p - 1.0),
            class,
            schedule: *schedule,
            resolvent,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.q.grid()
    }

    pub fn weight(&self) -> &Field {
        &self.q
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn p_dual(&self) -> f64 {
        self.p_dual
    }

    pub fn class(&self) -> &SolutionClass {
        &self.class
    }

    pub fn method(&self) -> ResolventMethod {
        self.resolvent.method()
    }

    pub fn schedule(&self) -> &AbsorptionSchedule {
        &self.schedule
    }

    pub fn resolvent(&self) -> &Resolvent {
        &self.resolvent
    }

    fn dv(&self) -> f64 {
        self.grid().cell_volume()
    }

    fn check_input(&self, v: &Field) -> Result<Vec<f64>, DualError> {
        if v.grid() != self.grid() {
            return Err(GridError::GridMismatch.into());
        }
        v.require_real()?;
        Ok(v.real_values())
    }

    fn wrap(&self, values: Vec<f64>) -> Field {
        Field::from_real(*self.grid(), values).expect("grid-sized buffer")
    }

    pub(crate) fn kp_values(&self, v: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = v.iter().zip(&self.q_root).map(|(a, q)| a * q).collect();
        let mut out = self.resolvent.apply_real_values(&weighted);
        for (o, q) in out.iter_mut().zip(&self.q_root) {
            *o *= q;
        }
        out
    }

    pub(crate) fn norm_dual(&self, v: &[f64]) -> f64 {
        lp_norm_real(v, self.p_dual, self.dv())
    }

    pub(crate) fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
        pairing_real(a, b, self.dv())
    }

    /// `|z|^{p−2} z`, the inverse of `v ↦ |v|^{p′−2} v`.
    pub(crate) fn primal_power(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&x| x.abs().powf(self.p - 2.0) * x).collect()
    }

    pub(crate) fn j_from(&self, v: &[f64], kv: &[f64]) -> f64 {
        self.norm_dual(v).powf(self.p_dual) / self.p_dual - 0.5 * self.pair(v, kv)
    }

    pub(crate) fn residual_from(&self, v: &[f64], kv: &[f64]) -> f64 {
        let size = self.norm_dual(v);
        if size == 0.0 {
            return 0.0;
        }
        let diff: Vec<f64> = v
            .iter()
            .zip(self.primal_power(kv))
            .map(|(a, b)| a - b)
            .collect();
        self.norm_dual(&diff) / size
    }

    /// `K_p v` for real `v`.
    pub fn kp_apply(&self, v: &Field) -> Result<Field, DualError> {
        let values = self.check_input(v)?;
        Ok(self.wrap(self.kp_values(&values)))
    }

    pub fn j_eval(&self, v: &Field) -> Result<f64, DualError> {
        let values = self.check_input(v)?;
        let kv = self.kp_values(&values);
        Ok(self.j_from(&values, &kv))
    }

    /// `|v|^{p′−2} v − K_p v`, with `|0|^{p′−2}·0 = 0`.
    pub fn j_grad(&self, v: &Field) -> Result<Field, DualError> {
        let values = self.check_input(v)?;
        let kv = self.kp_values(&values);
        let grad = values
            .iter()
            .zip(&kv)
            .map(|(&a, k)| {
                if a == 0.0 {
                    -k
                } else {
                    a.abs().powf(self.p_dual - 2.0) * a - k
                }
            })
            .collect();
        Ok(self.wrap(grad))
    }

    /// Maximizer `t*` of `t ↦ J(t w)`.
    pub fn nehari_scale(&self, w: &Field) -> Result<f64, DualError> {
        let values = self.check_input(w)?;
        let kw = self.kp_values(&values);
        self.nehari_from(&values, &kw)
    }

    pub(crate) fn nehari_from(&self, w: &[f64], kw: &[f64]) -> Result<f64, DualError> {
        let form = self.pair(w, kw);
        if !(form > 0.0) {
            return Err(DualError::NonpositiveQuadraticForm(form));
        }
        Ok((self.norm_dual(w).powf(self.p_dual) / form).powf(1.0 / (2.0 - self.p_dual)))
    }

    /// `⟨v, K_p v⟩ / ‖v‖²_{p′}`.
    pub fn rayleigh(&self, v: &Field) -> Result<f64, DualError> {
        let values = self.check_input(v)?;
        let kv = self.kp_values(&values);
        let size = self.norm_dual(&values);
        Ok(if size == 0.0 {
            0.0
        } else {
            self.pair(&values, &kv) / (size * size)
        })
    }

    /// `‖v − |K_p v|^{p−2} K_p v‖_{p′} / ‖v‖_{p′}`, zero at `v = 0`.
    pub fn crit_residual(&self, v: &Field) -> Result<f64, DualError> {
        let values = self.check_input(v)?;
        let kv = self.kp_values(&values);
        Ok(self.residual_from(&values, &kv))
    }

    /// All diagnostics of `v` from a single application of `K_p`.
    pub fn state(&self, v: &Field, iteration: usize) -> Result<DualState, DualError> {
        let values = self.check_input(v)?;
        let kv = self.kp_values(&values);
        let size = self.norm_dual(&values);
        Ok(DualState {
            v: v.clone(),
            j_value: self.j_from(&values, &kv),
            rayleigh: if size == 0.0 {
                0.0
            } else {
                self.pair(&values, &kv) / (size * size)
            },
            crit_residual: self.residual_from(&values, &kv),
            iteration,
        })
    }

    /// Primal field `u = Re R(Q^{1/p} v)`.
    pub fn primal(&self, v: &Field) -> Result<Field, DualError> {
        let values = self.check_input(v)?;
        let weighted: Vec<f64> = values
            .iter()
            .zip(&self.q_root)
            .map(|(a, q)| a * q)
            .collect();
        Ok(self.wrap(self.resolvent.apply_real_values(&weighted)))
    }

    /// Source `Q|u|^{p−2}u` of the primal equation.
    pub fn source(&self, u: &Field) -> Result<Field, DualError> {
        let values = self.check_input(u)?;
        let q = self.q.real_values();
        let f = values
            .iter()
            .zip(&q)
            .map(|(&x, &w)| w * x.abs().powf(self.p - 2.0) * x)
            .collect();
        Ok(self.wrap(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lp_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_real(grid: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_real(
            grid,
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn gaussian_problem(n: usize, half_width: f64) -> DualProblem {
        let grid = GridSpec::new(3, half_width, n).unwrap();
        let q = Field::from_fn_real(grid, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
        });
        let schedule = AbsorptionSchedule::new(0.1, 2, 1).unwrap();
        DualProblem::new(
            &q,
            5.0,
            SolutionClass::Decaying,
            ResolventMethod::KernelConvolution,
            &schedule,
        )
        .unwrap()
    }

    fn torus_unit(n: usize) -> DualProblem {
        let grid = GridSpec::new(3, PI, n).unwrap();
        let q = Field::from_real(grid, vec![1.0; grid.len()]).unwrap();
        let schedule = AbsorptionSchedule::guarded(&grid, 1.0);
        DualProblem::new(
            &q,
            5.0,
            SolutionClass::Periodic { period: PI / 2.0 },
            ResolventMethod::TorusMultiplier,
            &schedule,
        )
        .unwrap()
    }

    #[test]
    fn exponent_window_rules() {
        let per = SolutionClass::Periodic { period: 1.0 };
        assert!(check_exponent(3, 4.0, &SolutionClass::Decaying).is_ok());
        assert!(check_exponent(3, 4.0, &per).is_err());
        assert!(check_exponent(3, 6.0, &SolutionClass::Decaying).is_err());
        assert!(check_exponent(3, 5.0, &per).is_ok());
        assert_eq!(exponent_window(4), (10.0 / 3.0, 4.0));
    }

    #[test]
    fn construction_errors() {
        let grid = GridSpec::new(3, 4.0, 8).unwrap();
        let s = AbsorptionSchedule::new(0.1, 2, 1).unwrap();
        let zero = Field::zeros(grid);
        assert_eq!(
            DualProblem::new(
                &zero,
                5.0,
                SolutionClass::Decaying,
                ResolventMethod::KernelConvolution,
                &s
            )
            .unwrap_err(),
            DualError::ZeroWeight
        );
        let neg = Field::from_fn_real(grid, |x| x[0]);
        assert!(matches!(
            DualProblem::new(
                &neg,
                5.0,
                SolutionClass::Decaying,
                ResolventMethod::KernelConvolution,
                &s
            ),
            Err(DualError::NegativeWeight(_))
        ));
        let one = Field::from_real(grid, vec![1.0; grid.len()]).unwrap();
        assert!(matches!(
            DualProblem::new(
                &one,
                5.0,
                SolutionClass::Decaying,
                ResolventMethod::TorusMultiplier,
                &s
            ),
            Err(DualError::IncompatibleMethod { .. })
        ));
        let guarded = AbsorptionSchedule::guarded(&grid, 1.0);
        assert!(matches!(
            DualProblem::new(
                &one,
                5.0,
                SolutionClass::Periodic { period: 3.0 },
                ResolventMethod::TorusMultiplier,
                &guarded
            ),
            Err(DualError::IncompatiblePeriod { .. })
        ));
    }

    #[test]
    fn symmetry_and_parity() {
        let prob = gaussian_problem(16, 4.0);
        for seed in 0..3 {
            let v = random_real(*prob.grid(), 2 * seed);
            let w = random_real(*prob.grid(), 2 * seed + 1);
            let a = crate::grid::pairing(&w, &prob.kp_apply(&v).unwrap()).unwrap();
            let b = crate::grid::pairing(&v, &prob.kp_apply(&w).unwrap()).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
            let j = prob.j_eval(&v).unwrap();
            let jm = prob.j_eval(&v.scaled(-1.0)).unwrap();
            assert!((j - jm).abs() <= 1e-10 * j.abs());
        }
    }

    #[test]
    fn zero_is_trivial() {
        let prob = gaussian_problem(8, 4.0);
        let z = Field::zeros(*prob.grid()).tag_real().unwrap();
        assert_eq!(prob.j_eval(&z).unwrap(), 0.0);
        assert_eq!(prob.j_grad(&z).unwrap().max_abs(), 0.0);
        assert_eq!(prob.crit_residual(&z).unwrap(), 0.0);
        assert!(matches!(
            prob.nehari_scale(&z),
            Err(DualError::NonpositiveQuadraticForm(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let prob = gaussian_problem(12, 3.0);
        let v = random_real(*prob.grid(), 7);
        let raw = random_real(*prob.grid(), 8);
        let w = raw.scaled(1.0 / lp_norm(&raw, 2.0).unwrap());
        let g = crate::grid::pairing(&prob.j_grad(&v).unwrap(), &w).unwrap();
        let t = 1e-5;
        let fd = (prob.j_eval(&v.combine(1.0, &w, t).unwrap()).unwrap()
            - prob.j_eval(&v.combine(1.0, &w, -t).unwrap()).unwrap())
            / (2.0 * t);
        assert!((g - fd).abs() <= 1e-6 * g.abs().max(1.0), "{g} vs {fd}");
    }

    #[test]
    fn gradient_contracted_with_v() {
        let prob = gaussian_problem(12, 3.0);
        let v = random_real(*prob.grid(), 3);
        let lhs = crate::grid::pairing(&prob.j_grad(&v).unwrap(), &v).unwrap();
        let kv = prob.kp_apply(&v).unwrap();
        let rhs = lp_norm(&v, prob.p_dual()).unwrap().powf(prob.p_dual())
            - crate::grid::pairing(&v, &kv).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn nehari_scale_maximizes_along_the_ray() {
        let prob = gaussian_problem(12, 3.0);
        let w = Field::from_fn_real(*prob.grid(), |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let t = prob.nehari_scale(&w).unwrap();
        let j = |s: f64| prob.j_eval(&w.scaled(s)).unwrap();
        assert!(j(t) > 0.0);
        let d = 1e-4 * t;
        assert!(((j(t + d) - j(t - d)) / (2.0 * d)).abs() < 1e-6 * j(t) / t);
        let s = 1.7;
        let scaled = j(s);
        let size = lp_norm(&w, prob.p_dual()).unwrap().powf(prob.p_dual());
        let form = crate::grid::pairing(&w, &prob.kp_apply(&w).unwrap()).unwrap();
        let law = s.powf(prob.p_dual()) / prob.p_dual() * size - s * s / 2.0 * form;
        assert!((scaled - law).abs() <= 1e-12 * law.abs().max(1.0));
    }

    #[test]
    fn nehari_examples() {
        // ‖w‖ = 1 and ⟨w, Kw⟩ = 8 give 8^{-4/3}.
        let prob = torus_unit(8);
        let size: f64 = 1.0;
        let form: f64 = 8.0;
        let t = (size.powf(prob.p_dual()) / form).powf(1.0 / (2.0 - prob.p_dual()));
        assert!((t - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn unit_weight_off_shell_mode() {
        let prob = torus_unit(16);
        let v = Field::from_fn_real(*prob.grid(), |x| (2.0 * x[0]).cos());
        let out = prob.kp_apply(&v).unwrap();
        let third = v.scaled(1.0 / 3.0);
        let err = lp_norm(&out.combine(1.0, &third, -1.0).unwrap(), 2.0).unwrap()
            / lp_norm(&third, 2.0).unwrap();
        let eps = prob.schedule().eps0;
        assert!(err < eps * eps / 18.0 * 1.05);
    }

    #[test]
    fn oscillation_is_damped_by_decaying_weight() {
        let prob = gaussian_problem(32, 6.0);
        let mut prev = f64::INFINITY;
        for m in [1.0, 2.0, 4.0, 8.0] {
            let raw = Field::from_fn_real(*prob.grid(), |x| (m * x[0]).cos());
            let v = raw.scaled(1.0 / lp_norm(&raw, prob.p_dual()).unwrap());
            let size = lp_norm(&prob.kp_apply(&v).unwrap(), prob.p()).unwrap();
            assert!(size < prev);
            prev = size;
        }
    }

    #[test]
    fn state_is_consistent() {
        let prob = gaussian_problem(12, 3.0);
        let v = random_real(*prob.grid(), 4);
        let s = prob.state(&v, 3).unwrap();
        assert_eq!(s.j_value, prob.j_eval(&v).unwrap());
        assert_eq!(s.crit_residual, prob.crit_residual(&v).unwrap());
        assert_eq!(s.rayleigh, prob.rayleigh(&v).unwrap());
        assert!(prob
            .kp_apply(&Field::zeros(*prob.grid()).map(false, |_| num_complex::Complex64::i()))
            .is_err());
    }
}
