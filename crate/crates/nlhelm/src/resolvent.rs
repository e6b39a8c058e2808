//! The outgoing resolvent `R = (−Δ − 1 − i0)^{-1}` and its real part, applied
//! by an ε-regularized multiplier with extrapolation in ε or by aperiodic
//! convolution with the sampled kernel.

use crate::fft::{signed_index, smooth_even_at_least, CubeFft};
use crate::grid::{spectral_laplacian, Field, GridError, GridSpec};
use crate::kernel::{HelmholtzKernel, KernelError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolventError {
    #[error("absorption must be positive and finite, got {0}")]
    InvalidAbsorption(f64),
    #[error("invalid absorption schedule: {0}")]
    InvalidSchedule(String),
    #[error("smallest absorption {smallest:e} is below the resonance floor {floor:e}")]
    ScheduleTooAggressive { smallest: f64, floor: f64 },
    #[error("the truncated-kernel multiplier is only available in dimension 3, got {0}")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Absorption levels `ε_j = ε₀ 2^{-j}`, `j < levels`, combined by polynomial
/// extrapolation to `ε = 0` through the `extrapolation_order + 1` smallest levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionSchedule {
    pub eps0: f64,
    pub levels: usize,
    pub extrapolation_order: usize,
}

impl AbsorptionSchedule {
    pub fn new(
        eps0: f64,
        levels: usize,
        extrapolation_order: usize,
    ) -> Result<Self, ResolventError> {
        let schedule = Self {
            eps0,
            levels,
            extrapolation_order,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Two levels ending exactly `factor` times above the resonance floor of `grid`.
    pub fn guarded(grid: &GridSpec, factor: f64) -> Self {
        Self {
            eps0: 2.0 * factor * floor_eps(grid),
            levels: 2,
            extrapolation_order: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ResolventError> {
        if !(self.eps0.is_finite() && self.eps0 > 0.0) {
            return Err(ResolventError::InvalidAbsorption(self.eps0));
        }
        if self.levels == 0 {
            return Err(ResolventError::InvalidSchedule(
                "at least one level is required".into(),
            ));
        }
        if self.extrapolation_order + 1 > self.levels {
            return Err(ResolventError::InvalidSchedule(format!(
                "extrapolation order {} needs at least {} levels",
                self.extrapolation_order,
                self.extrapolation_order + 1
            )));
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (0..self.levels)
            .map(|j| self.eps0 * 0.5f64.powi(j as i32))
            .collect()
    }

    pub fn smallest(&self) -> f64 {
        self.eps0 * 0.5f64.powi(self.levels as i32 - 1)
    }

    /// `(ε, weight)` pairs of the extrapolation rule; weights sum to one.
    pub fn weights(&self) -> Vec<(f64, f64)> {
        let eps = self.epsilons();
        let used = &eps[eps.len() - self.extrapolation_order - 1..];
        used.iter()
            .enumerate()
            .map(|(i, &ei)| {
                let w = used
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &ej)| -ej / (ei - ej))
                    .product::<f64>();
                (ei, w)
            })
            .collect()
    }

    /// Fails when the smallest level sits below `floor`.
    pub fn check_guard(&self, floor: f64) -> Result<(), ResolventError> {
        self.validate()?;
        let smallest = self.smallest();
        if smallest < floor {
            return Err(ResolventError::ScheduleTooAggressive { smallest, floor });
        }
        Ok(())
    }
}

/// Resonance floor `Δξ² / 4` of a grid's frequency lattice.
pub fn floor_eps(grid: &GridSpec) -> f64 {
    let d = grid.freq_spacing();
    d * d / 4.0
}

/// How the resolvent is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventMethod {
    /// ε-regularized multiplier of the free-space kernel truncated beyond the
    /// largest grid displacement, extrapolated in ε and applied aperiodically.
    Multiplier,
    /// Aperiodic convolution with the sampled kernel.
    KernelConvolution,
    /// ε-regularized multiplier on the grid's own torus, extrapolated in ε.
    TorusMultiplier,
}

/// Aperiodic convolution from a source grid to a concentric target grid with
/// the same spacing, through a cyclic grid large enough to avoid wraparound.
#[derive(Debug, Clone)]
pub struct AperiodicConvolver {
    source: GridSpec,
    target: GridSpec,
    cyclic: usize,
    plan: CubeFft,
    kernel_hat: Vec<Complex64>,
    real_kernel_hat: Vec<Complex64>,
}

impl AperiodicConvolver {
    fn cyclic_size(source: &GridSpec, target: &GridSpec) -> usize {
        source.points_per_axis() + target.points_per_axis()
    }

    fn check_pair(source: &GridSpec, target: &GridSpec) -> Result<(), ResolventError> {
        if source.dim() != target.dim() || source.spacing() != target.spacing() {
            return Err(GridError::GridMismatch.into());
        }
        Ok(())
    }

    /// Kernel table indexed by cyclic displacement in FFT order.
    fn from_table(source: GridSpec, target: GridSpec, table: Vec<Complex64>) -> Self {
        let cyclic = Self::cyclic_size(&source, &target);
        let plan = CubeFft::new(cyclic, source.dim());
        let mut real_table: Vec<Complex64> =
            table.iter().map(|v| Complex64::new(v.re, 0.0)).collect();
        let mut kernel_hat = table;
        plan.forward(&mut kernel_hat);
        plan.forward(&mut real_table);
        Self {
            source,
            target,
            cyclic,
            plan,
            kernel_hat,
            real_kernel_hat: real_table,
        }
    }

    /// Sampled `Φ`, origin cell replaced by the equivalent-ball mean.
    pub fn sampled(source: &GridSpec, target: &GridSpec) -> Result<Self, ResolventError> {
        Self::check_pair(source, target)?;
        let kernel = HelmholtzKernel::new(source.dim())?;
        let h = source.spacing();
        let cyclic = Self::cyclic_size(source, target);
        let origin = Complex64::new(kernel.origin_cell_mean(source.cell_volume()), 0.0);
        let dim = source.dim();
        let len = cyclic.pow(dim as u32);
        let table: Vec<Complex64> = (0..len)
            .into_par_iter()
            .map(|flat| {
                let mut rest = flat;
                let mut r2 = 0.0;
                for _ in 0..dim {
                    let d = signed_index(rest % cyclic, cyclic) as f64 * h;
                    rest /= cyclic;
                    r2 += d * d;
                }
                if r2 == 0.0 {
                    origin
                } else {
                    kernel.radial(r2.sqrt())
                }
            })
            .collect();
        Ok(Self::from_table(*source, *target, table))
    }

    /// Truncated-kernel multiplier, extrapolated in ε over `schedule`.
    pub fn truncated_multiplier(
        source: &GridSpec,
        target: &GridSpec,
        schedule: &AbsorptionSchedule,
    ) -> Result<Self, ResolventError> {
        Self::check_pair(source, target)?;
        let dim = source.dim();
        if dim != 3 {
            return Err(ResolventError::UnsupportedDimension(dim));
        }
        let h = source.spacing();
        let cyclic = Self::cyclic_size(source, target);
        let taper = Taper::new(cyclic, dim, h);
        let lattice = multiplier_lattice(cyclic, dim);
        schedule.check_guard(truncated_floor(lattice, h))?;
        let weights: Vec<(Complex64, f64)> = schedule
            .weights()
            .into_iter()
            .map(|(e, w)| (Complex64::new(1.0, e).sqrt(), w))
            .collect();
        let dk = 2.0 * std::f64::consts::PI / (lattice as f64 * h);
        let len = lattice.pow(dim as u32);
        let mut full: Vec<Complex64> = (0..len)
            .into_par_iter()
            .map(|flat| {
                let mut rest = flat;
                let mut k2 = 0.0;
                for _ in 0..dim {
                    let k = signed_index(rest % lattice, lattice) as f64 * dk;
                    rest /= lattice;
                    k2 += k * k;
                }
                let rho = k2.sqrt();
                weights.iter().map(|&(k, w)| taper.symbol(rho, k) * w).sum()
            })
            .collect();
        CubeFft::new(lattice, dim).inverse(&mut full);
        let scale = (lattice as f64 * h).powi(-(dim as i32));
        let table_len = cyclic.pow(dim as u32);
        let table: Vec<Complex64> = (0..table_len)
            .map(|flat| {
                let mut rest = flat;
                let mut src = 0usize;
                let mut stride = 1usize;
                for _ in 0..dim {
                    let d = signed_index(rest % cyclic, cyclic);
                    rest /= cyclic;
                    src += d.rem_euclid(lattice as i64) as usize * stride;
                    stride *= lattice;
                }
                full[src] * scale
            })
            .collect();
        Ok(Self::from_table(*source, *target, table))
    }

    pub fn source(&self) -> &GridSpec {
        &self.source
    }

    pub fn target(&self) -> &GridSpec {
        &self.target
    }

    fn convolve(&self, input: &[Complex64], hat: &[Complex64]) -> Vec<Complex64> {
        let dim = self.source.dim();
        let c = self.cyclic;
        let ns = self.source.points_per_axis();
        let nt = self.target.points_per_axis();
        let mut work = vec![Complex64::default(); c.pow(dim as u32)];
        let mut idx = vec![0usize; dim];
        for (flat, v) in input.iter().enumerate() {
            self.source.unravel(flat, &mut idx);
            work[idx.iter().fold(0, |acc, &i| acc * c + i)] = *v;
        }
        self.plan.forward(&mut work);
        for (w, k) in work.iter_mut().zip(hat) {
            *w *= k;
        }
        self.plan.inverse(&mut work);
        let scale = self.source.cell_volume() / work.len() as f64;
        let offset = (nt as i64 - ns as i64) / 2;
        let mut out = vec![Complex64::default(); self.target.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            self.target.unravel(flat, &mut idx);
            let pos = idx.iter().fold(0, |acc, &i| {
                acc * c + (i as i64 - offset).rem_euclid(c as i64) as usize
            });
            *slot = work[pos] * scale;
        }
        out
    }

    /// Complex convolution `Φ ∗ f` on the target grid.
    pub fn apply(&self, f: &Field) -> Result<Field, ResolventError> {
        if f.grid() != &self.source {
            return Err(GridError::GridMismatch.into());
        }
        Ok(Field::from_complex(
            self.target,
            self.convolve(f.values(), &self.kernel_hat),
        )?)
    }

    /// `Ψ ∗ f` for real `f`, real-tagged.
    pub fn apply_real(&self, f: &Field) -> Result<Field, ResolventError> {
        if f.grid() != &self.source {
            return Err(GridError::GridMismatch.into());
        }
        f.require_real()?;
        Ok(Field::from_real(
            self.target,
            self.apply_real_values(&f.real_values()),
        )?)
    }

    pub(crate) fn apply_real_values(&self, f: &[f64]) -> Vec<f64> {
        let input: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.convolve(&input, &self.real_kernel_hat)
            .into_iter()
            .map(|v| v.re)
            .collect()
    }
}

const TAPER_CELLS: f64 = 3.0;

fn multiplier_lattice(cyclic: usize, dim: usize) -> usize {
    smooth_even_at_least(
        cyclic as f64 * (1.0 + (dim as f64).sqrt()) / 2.0 + 8.0 * TAPER_CELLS + 1.0,
    )
}

/// Smallest admissible absorption level for `method` on `grid`; zero when the
/// method does not use the schedule.
pub fn schedule_floor(grid: &GridSpec, method: ResolventMethod) -> f64 {
    match method {
        ResolventMethod::Multiplier => {
            let n = grid.points_per_axis();
            truncated_floor(multiplier_lattice(2 * n, grid.dim()), grid.spacing())
        }
        ResolventMethod::KernelConvolution => 0.0,
        ResolventMethod::TorusMultiplier => floor_eps(grid),
    }
}

fn truncated_floor(lattice: usize, h: f64) -> f64 {
    let d = 2.0 * std::f64::consts::PI / (lattice as f64 * h);
    d * d / 4.0
}

/// Radial cutoff `½ erfc((r − mid)/width)` applied to the outgoing kernel.
/// The cutoff is flat over every displacement of the cyclic table and has
/// decayed to `1e-14` before the lattice images begin.
#[derive(Debug, Clone, Copy)]
struct Taper {
    mid: f64,
    width: f64,
}

impl Taper {
    fn new(cyclic: usize, dim: usize, h: f64) -> Self {
        let width = TAPER_CELLS * h;
        let reach = (dim as f64).sqrt() * h * cyclic as f64 / 2.0;
        Self {
            mid: reach + 4.0 * width,
            width,
        }
    }

    /// `(1 − e^{z})/a` with `z = a(i·mid − a·width²/4)`.
    fn radial(&self, a: Complex64) -> Complex64 {
        let slope = Complex64::new(
            -a.re * self.width * self.width / 4.0,
            self.mid - a.im * self.width * self.width / 4.0,
        );
        let z = a * slope;
        let expm1_over_z = if z.norm() < 1e-4 {
            1.0 + z / 2.0 + z * z / 6.0
        } else {
            (z.exp() - 1.0) / z
        };
        -expm1_over_z * slope
    }

    /// Multiplier of the tapered `e^{ik|x|}/(4π|x|)` in three dimensions.
    fn symbol(&self, rho: f64, k: Complex64) -> Complex64 {
        if rho == 0.0 {
            let i = Complex64::i();
            let e = (i * k * self.mid - k * k * self.width * self.width / 4.0).exp();
            let de = e * (i * self.mid - k * self.width * self.width / 2.0);
            return (-de * k - 1.0 + e) / (k * k);
        }
        (self.radial(k + rho) - self.radial(k - rho)) / (2.0 * rho)
    }
}

#[derive(Debug, Clone)]
struct TorusMultiplier {
    plan: CubeFft,
    symbol: Vec<Complex64>,
    real_symbol: Vec<Complex64>,
}

impl TorusMultiplier {
    fn new(grid: &GridSpec, weights: &[(f64, f64)]) -> Self {
        let xi2 = grid.frequency_norms_sq();
        let symbol: Vec<Complex64> = xi2
            .iter()
            .map(|&k2| {
                weights
                    .iter()
                    .map(|&(e, w)| w / Complex64::new(k2 - 1.0, -e))
                    .sum()
            })
            .collect();
        let real_symbol = symbol.iter().map(|s| Complex64::new(s.re, 0.0)).collect();
        Self {
            plan: CubeFft::new(grid.points_per_axis(), grid.dim()),
            symbol,
            real_symbol,
        }
    }

    fn run(&self, values: &[Complex64], symbol: &[Complex64]) -> Vec<Complex64> {
        let mut work = values.to_vec();
        self.plan.forward(&mut work);
        let scale = 1.0 / work.len() as f64;
        for (w, s) in work.iter_mut().zip(symbol) {
            *w *= s * scale;
        }
        self.plan.inverse(&mut work);
        work
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Aperiodic(AperiodicConvolver),
    Torus(TorusMultiplier),
}

/// A resolvent prepared for one grid, method and schedule.
#[derive(Debug, Clone)]
pub struct Resolvent {
    grid: GridSpec,
    method: ResolventMethod,
    engine: Engine,
}

impl Resolvent {
    pub fn new(
        grid: &GridSpec,
        method: ResolventMethod,
        schedule: &AbsorptionSchedule,
    ) -> Result<Self, ResolventError> {
        schedule.validate()?;
        let engine = match method {
            ResolventMethod::Multiplier => Engine::Aperiodic(
                AperiodicConvolver::truncated_multiplier(grid, grid, schedule)?,
            ),
            ResolventMethod::KernelConvolution => {
                Engine::Aperiodic(AperiodicConvolver::sampled(grid, grid)?)
            }
            ResolventMethod::TorusMultiplier => {
                schedule.check_guard(floor_eps(grid))?;
                Engine::Torus(TorusMultiplier::new(grid, &schedule.weights()))
            }
        };
        Ok(Self {
            grid: *grid,
            method,
            engine,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn method(&self) -> ResolventMethod {
        self.method
    }

    /// Complex `R f`.
    pub fn apply(&self, f: &Field) -> Result<Field, ResolventError> {
        if f.grid() != &self.grid {
            return Err(GridError::GridMismatch.into());
        }
        match &self.engine {
            Engine::Aperiodic(conv) => conv.apply(f),
            Engine::Torus(t) => Ok(Field::from_complex(
                self.grid,
                t.run(f.values(), &t.symbol),
            )?),
        }
    }

    /// `Re R f` for real `f`, real-tagged.
    pub fn apply_real(&self, f: &Field) -> Result<Field, ResolventError> {
        if f.grid() != &self.grid {
            return Err(GridError::GridMismatch.into());
        }
        f.require_real()?;
        Ok(Field::from_real(
            self.grid,
            self.apply_real_values(&f.real_values()),
        )?)
    }

    pub(crate) fn apply_real_values(&self, f: &[f64]) -> Vec<f64> {
        match &self.engine {
            Engine::Aperiodic(conv) => conv.apply_real_values(f),
            Engine::Torus(t) => {
                let input: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                t.run(&input, &t.real_symbol)
                    .into_iter()
                    .map(|v| v.re)
                    .collect()
            }
        }
    }
}

/// `R_ε f`: divide `f̂` by `|ξ|² − 1 − iε` on the grid's torus.
pub fn resolvent_eps_apply(f: &Field, eps: f64) -> Result<Field, ResolventError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(ResolventError::InvalidAbsorption(eps));
    }
    let t = TorusMultiplier::new(f.grid(), &[(eps, 1.0)]);
    Ok(Field::from_complex(
        *f.grid(),
        t.run(f.values(), &t.symbol),
    )?)
}

/// Extrapolation of `R_ε f` to `ε = 0` across `schedule` on the grid's torus.
pub fn resolvent_apply(f: &Field, schedule: &AbsorptionSchedule) -> Result<Field, ResolventError> {
    Resolvent::new(f.grid(), ResolventMethod::TorusMultiplier, schedule)?.apply(f)
}

/// Aperiodic `Φ ∗ f` through zero padding to `(2n)^N`.
pub fn kernel_convolve(f: &Field) -> Result<Field, ResolventError> {
    AperiodicConvolver::sampled(f.grid(), f.grid())?.apply(f)
}

/// `Re` of the chosen method's output for real `f`.
pub fn real_resolvent_apply(
    f: &Field,
    method: ResolventMethod,
    schedule: &AbsorptionSchedule,
) -> Result<Field, ResolventError> {
    f.require_real()?;
    Resolvent::new(f.grid(), method, schedule)?.apply_real(f)
}

/// `(−Δ − 1) u` with the spectral Laplacian of the torus.
pub fn helmholtz_operator(u: &Field) -> Field {
    let lap = spectral_laplacian(u);
    lap.combine(-1.0, u, -1.0).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm, pairing};
    use crate::kernel::HelmholtzKernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_complex(grid: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Field::from_complex(grid, v).unwrap()
    }

    fn random_real(grid: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_real(
            grid,
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn rel_diff(a: &Field, b: &Field) -> f64 {
        lp_norm(&a.combine(1.0, b, -1.0).unwrap(), 2.0).unwrap() / lp_norm(b, 2.0).unwrap()
    }

    #[test]
    fn schedule_weights() {
        let s = AbsorptionSchedule::new(0.1, 2, 1).unwrap();
        let w = s.weights();
        assert_eq!(w, vec![(0.1, -1.0), (0.05, 2.0)]);
        let s3 = AbsorptionSchedule::new(0.4, 3, 2).unwrap();
        let total: f64 = s3.weights().iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(AbsorptionSchedule::new(0.0, 2, 1).is_err());
        assert!(AbsorptionSchedule::new(0.1, 1, 1).is_err());
        assert!(matches!(
            s.check_guard(0.06),
            Err(ResolventError::ScheduleTooAggressive { .. })
        ));
    }

    #[test]
    fn exact_multiplier_identity() {
        let grid = GridSpec::new(3, 5.0, 16).unwrap();
        for (seed, eps) in [(1u64, 0.1), (2, 0.01), (3, 1e-4)] {
            let f = random_complex(grid, seed);
            let u = resolvent_eps_apply(&f, eps).unwrap();
            let lhs = helmholtz_operator(&u);
            let resid = lhs.combine(1.0, &f, -1.0).unwrap();
            let expect = u.map(false, |v| v * Complex64::new(0.0, eps));
            let err = lp_norm(&resid.combine(1.0, &expect, -1.0).unwrap(), 2.0).unwrap();
            assert!(err <= 1e-12 * lp_norm(&f, 2.0).unwrap(), "eps {eps}: {err}");
        }
        assert!(matches!(
            resolvent_eps_apply(&Field::zeros(grid), 0.0),
            Err(ResolventError::InvalidAbsorption(_))
        ));
    }

    #[test]
    fn off_shell_mode() {
        let grid = GridSpec::new(3, PI, 16).unwrap();
        let f = Field::from_fn_real(grid, |x| (2.0 * x[0]).cos());
        let third = f.scaled(1.0 / 3.0);
        // Roundoff on the resonant shell |ξ| = 1 is amplified by 1/ε into the imaginary part only.
        let tiny = resolvent_eps_apply(&f, 1e-9).unwrap();
        assert!(rel_diff(&tiny.real_part(), &third) < 1e-12);
        // Order-one extrapolation from (ε, ε/2) leaves ε²/(2·9) in the real part.
        let schedule = AbsorptionSchedule::guarded(&grid, 1.0);
        let out = resolvent_apply(&f, &schedule).unwrap().real_part();
        let predicted = schedule.eps0 * schedule.eps0 / 18.0;
        let err = rel_diff(&out, &third);
        assert!(
            (err - predicted).abs() < 0.05 * predicted,
            "{err} vs {predicted}"
        );
        let high = AbsorptionSchedule {
            eps0: 4.0 * floor_eps(&grid) * 2.0,
            levels: 4,
            extrapolation_order: 3,
        };
        let better = resolvent_apply(&f, &high).unwrap().real_part();
        assert!(rel_diff(&better, &third) < err);
        let real = real_resolvent_apply(&f, ResolventMethod::TorusMultiplier, &schedule).unwrap();
        assert!(real.is_real());
        assert!(rel_diff(&real, &third) < 2.0 * predicted);
    }

    #[test]
    fn off_shell_difference_is_first_order() {
        let grid = GridSpec::new(3, 4.0, 16).unwrap();
        let f = Field::from_fn_real(grid, |x| (2.5 * x[0]).cos() * (-0.0 * x[1]).cos());
        let a = resolvent_eps_apply(&f, 0.02).unwrap();
        let b = resolvent_eps_apply(&f, 0.01).unwrap();
        let c = resolvent_eps_apply(&f, 0.005).unwrap();
        let d1 = lp_norm(&a.combine(1.0, &b, -1.0).unwrap(), 2.0).unwrap();
        let d2 = lp_norm(&b.combine(1.0, &c, -1.0).unwrap(), 2.0).unwrap();
        assert!((d1 / d2 - 2.0).abs() < 0.05);
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = GridSpec::new(3, 4.0, 8).unwrap();
        let z = Field::zeros(grid);
        assert_eq!(kernel_convolve(&z).unwrap().max_abs(), 0.0);
        assert_eq!(resolvent_eps_apply(&z, 0.1).unwrap().max_abs(), 0.0);
        let s = AbsorptionSchedule::guarded(&grid, 1.0);
        assert_eq!(resolvent_apply(&z, &s).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn point_mass_reproduces_kernel() {
        let grid = GridSpec::new(3, 3.0, 12).unwrap();
        let kernel = HelmholtzKernel::new(3).unwrap();
        let mut values = vec![Complex64::default(); grid.len()];
        let x0 = [2usize, 7, 5];
        values[grid.ravel(&x0)] = Complex64::new(1.0 / grid.cell_volume(), 0.0);
        let out = kernel_convolve(&Field::from_complex(grid, values).unwrap()).unwrap();
        let p0 = grid.position(grid.ravel(&x0));
        let origin = kernel.origin_cell_mean(grid.cell_volume());
        for (flat, v) in out.values().iter().enumerate() {
            let x = grid.position(flat);
            let d: Vec<f64> = x.iter().zip(&p0).map(|(a, b)| a - b).collect();
            let expect = kernel.eval(&d).unwrap_or(Complex64::new(origin, 0.0));
            assert!((v - expect).norm() <= 1e-10 * expect.norm().max(1.0));
        }
    }

    #[test]
    fn linearity() {
        let grid = GridSpec::new(3, 3.0, 12).unwrap();
        let f = random_complex(grid, 5);
        let g = random_complex(grid, 6);
        let combo = f.combine(2.0, &g, -0.5).unwrap();
        let lhs = kernel_convolve(&combo).unwrap();
        let rhs = kernel_convolve(&f)
            .unwrap()
            .combine(2.0, &kernel_convolve(&g).unwrap(), -0.5)
            .unwrap();
        assert!(rel_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn real_part_is_symmetric() {
        let grid = GridSpec::new(3, 6.0, 16).unwrap();
        let schedule = AbsorptionSchedule::new(0.02, 2, 1).unwrap();
        for method in [
            ResolventMethod::Multiplier,
            ResolventMethod::KernelConvolution,
            ResolventMethod::TorusMultiplier,
        ] {
            let schedule = if method == ResolventMethod::TorusMultiplier {
                AbsorptionSchedule::guarded(&grid, 1.0)
            } else {
                schedule
            };
            let r = Resolvent::new(&grid, method, &schedule).unwrap();
            let f = random_real(grid, 11);
            let g = random_real(grid, 12);
            let a = pairing(&g, &r.apply_real(&f).unwrap()).unwrap();
            let b = pairing(&f, &r.apply_real(&g).unwrap()).unwrap();
            assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(b.abs()),
                "{method:?}: {a} vs {b}"
            );
            let complex =
                Field::from_complex(grid, vec![Complex64::new(0.0, 1.0); grid.len()]).unwrap();
            assert!(matches!(
                r.apply_real(&complex),
                Err(ResolventError::Grid(GridError::ExpectedRealField(_)))
            ));
        }
    }

    #[test]
    fn truncated_multiplier_matches_sampled_kernel_away_from_origin() {
        let grid = GridSpec::new(3, 6.0, 24).unwrap();
        let schedule = AbsorptionSchedule::new(0.04, 2, 1).unwrap();
        let conv = AperiodicConvolver::truncated_multiplier(&grid, &grid, &schedule).unwrap();
        let mut values = vec![Complex64::default(); grid.len()];
        values[grid.origin_index()] = Complex64::new(1.0 / grid.cell_volume(), 0.0);
        let out = conv
            .apply(&Field::from_complex(grid, values).unwrap())
            .unwrap();
        let kernel = HelmholtzKernel::new(3).unwrap();
        for (flat, v) in out.values().iter().enumerate() {
            let x = grid.position(flat);
            let r = crate::grid::norm(&x);
            if (3.0..=6.0).contains(&r) {
                let expect = kernel.radial(r);
                assert!(
                    (v - expect).norm() < 0.05 * expect.norm(),
                    "r = {r}: {v} vs {expect}"
                );
            }
        }
    }
}
