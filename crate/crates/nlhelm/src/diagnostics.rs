//! Empirical checks of the resolvent bounds, truncated-kernel decay,
//! concentration and PDE residuals.

use crate::dual::{exponent_window, DualError, DualProblem};
use crate::farfield::{fit_power_law, SlopeFit};
use crate::fft::{signed_index, CubeFft};
use crate::grid::{gaussian_window, lp_norm, norm, Field, GridError, GridSpec};
use crate::kernel::{kernel_split, shell_cutoff, KernelError};
use crate::resolvent::{
    helmholtz_operator, AperiodicConvolver, Resolvent, ResolventError, ResolventMethod,
};
use crate::solver::ball_offsets;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("input field vanishes")]
    ZeroInput,
    #[error("empty family")]
    EmptyFamily,
    #[error("family member {index} has L^p′ norm {norm}, expected 1")]
    NotNormalized { index: usize, norm: f64 },
    #[error("exponent {p} gives a nonpositive decay rate {lambda}")]
    InvalidExponent { p: f64, lambda: f64 },
    #[error("relative out-of-band energy {0:e} exceeds 1e-10")]
    BadSpectrum(f64),
    #[error("radius {radius} outside [{min}, {max}]")]
    BadLadder { radius: f64, min: f64, max: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Dual(#[from] DualError),
}

/// Ratios over a family with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub family_id: String,
    pub ratios: Vec<f64>,
    pub median: f64,
    pub max: f64,
}

impl RatioReport {
    pub fn new(family_id: &str, ratios: Vec<f64>) -> Self {
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = match k {
            0 => f64::NAN,
            _ if k % 2 == 1 => sorted[k / 2],
            _ => 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]),
        };
        let max = sorted.last().copied().unwrap_or(f64::NAN);
        Self {
            family_id: family_id.to_string(),
            ratios,
            median,
            max,
        }
    }

    /// `max / median`.
    pub fn spread(&self) -> f64 {
        self.max / self.median
    }
}

/// `max_y ∫_{B_ρ(y)} |v|^s` over grid nodes `y`, torus distance.
pub fn concentration(v: &Field, rho: f64, power: f64) -> Result<f64, DiagnosticsError> {
    let grid = *v.grid();
    let limit = grid.half_width() / 2.0;
    if !(rho > 0.0) || rho > limit {
        return Err(GridError::RadiusExceedsBox { radius: rho, limit }.into());
    }
    let n = grid.points_per_axis() as i64;
    let dim = grid.dim();
    let mut ball = vec![Complex64::default(); grid.len()];
    let mut idx = vec![0usize; dim];
    for off in ball_offsets(&grid, rho) {
        for a in 0..dim {
            idx[a] = off[a].rem_euclid(n) as usize;
        }
        ball[grid.ravel(&idx)] = Complex64::new(1.0, 0.0);
    }
    let mut mass: Vec<Complex64> = v
        .values()
        .iter()
        .map(|x| Complex64::new(x.norm().powf(power), 0.0))
        .collect();
    let plan = CubeFft::new(grid.points_per_axis(), dim);
    plan.forward(&mut ball);
    plan.forward(&mut mass);
    // correlation with a symmetric ball equals convolution
    for (m, b) in mass.iter_mut().zip(&ball) {
        *m *= b;
    }
    plan.inverse(&mut mass);
    let best = mass.iter().map(|m| m.re).fold(0.0f64, f64::max) / grid.len() as f64;
    Ok(best * grid.cell_volume())
}

/// Per-member pairing and concentrations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeMember {
    pub pairing: f64,
    pub concentrations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonvanishingReport {
    pub rho_ladder: Vec<f64>,
    pub members: Vec<ProbeMember>,
    /// Radius used for the rank test.
    pub test_radius: f64,
    pub pairing_threshold: f64,
    pub min_concentration_of_top: f64,
    pub concentration_floor: f64,
    pub passed: bool,
}

fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Rank surrogate of nonvanishing: members whose `|⟨v, Re R v⟩|` is at or above the
/// family's 75th percentile must all have concentration at radius `test_radius`
/// above the family's 10th percentile. `test_radius` is appended to the ladder if absent.
pub fn nonvanishing_probe(
    prob: &DualProblem,
    family: &[Field],
    rho_ladder: &[f64],
    test_radius: f64,
) -> Result<NonvanishingReport, DiagnosticsError> {
    if family.is_empty() {
        return Err(DiagnosticsError::EmptyFamily);
    }
    let mut ladder = rho_ladder.to_vec();
    if !ladder.contains(&test_radius) {
        ladder.push(test_radius);
    }
    let test_slot = ladder
        .iter()
        .position(|&r| r == test_radius)
        .expect("present");
    let pd = prob.p_dual();
    let mut members = Vec::with_capacity(family.len());
    for (index, v) in family.iter().enumerate() {
        v.require_real()?;
        let size = lp_norm(v, pd)?;
        if (size - 1.0).abs() > 1e-8 {
            return Err(DiagnosticsError::NotNormalized { index, norm: size });
        }
        let rv = prob.resolvent().apply_real(v)?;
        let pairing = crate::grid::pairing(v, &rv)?.abs();
        let concentrations = ladder
            .iter()
            .map(|&r| concentration(v, r, pd))
            .collect::<Result<Vec<_>, _>>()?;
        members.push(ProbeMember {
            pairing,
            concentrations,
        });
    }
    let pairings: Vec<f64> = members.iter().map(|m| m.pairing).collect();
    let conc: Vec<f64> = members
        .iter()
        .map(|m| m.concentrations[test_slot])
        .collect();
    let pairing_threshold = percentile(&pairings, 0.75);
    let concentration_floor = percentile(&conc, 0.10);
    let min_concentration_of_top = members
        .iter()
        .filter(|m| m.pairing >= pairing_threshold)
        .map(|m| m.concentrations[test_slot])
        .fold(f64::INFINITY, f64::min);
    let passed = min_concentration_of_top > concentration_floor
        || (members.len() > 1 && conc.iter().all(|&c| (c - conc[0]).abs() <= 1e-12 * c.abs()));
    Ok(NonvanishingReport {
        rho_ladder: ladder,
        members,
        test_radius,
        pairing_threshold,
        min_concentration_of_top,
        concentration_floor,
        passed,
    })
}

/// `λ_p = (N−1)/2 − (N+1)/p`.
pub fn decay_rate(dim: usize, p: f64) -> f64 {
    let n = dim as f64;
    (n - 1.0) / 2.0 - (n + 1.0) / p
}

/// Real white noise inside the ball of radius `radius` about the origin, filtered by a
/// smooth cutoff to `||ξ|−1| ≤ 1/2` (1 on `||ξ|−1| ≤ 1/4`) and normalized in `L^{p′}`.
pub fn band_limited_noise(
    grid: &GridSpec,
    seed: u64,
    radius: f64,
    p: f64,
) -> Result<Field, DiagnosticsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<Complex64> = Vec::with_capacity(grid.len());
    grid.for_each_node(|_, x| {
        let sample: f64 = rng.gen_range(-1.0..1.0);
        values.push(Complex64::new(
            if norm(x) <= radius { sample } else { 0.0 },
            0.0,
        ));
    });
    let plan = CubeFft::new(grid.points_per_axis(), grid.dim());
    plan.forward(&mut values);
    let scale = 1.0 / grid.len() as f64;
    for (v, k2) in values.iter_mut().zip(grid.frequency_norms_sq()) {
        *v *= shell_cutoff(k2.sqrt(), 0.25, 0.5) * scale;
    }
    plan.inverse(&mut values);
    let f = Field::from_real(*grid, values.iter().map(|v| v.re).collect())?;
    let size = lp_norm(&f, p / (p - 1.0))?;
    if size == 0.0 {
        return Err(DiagnosticsError::ZeroInput);
    }
    Ok(f.scaled(1.0 / size))
}

/// Fraction of spectral energy outside `||ξ|−1| ≤ 1/2`.
pub fn out_of_band_energy(f: &Field) -> f64 {
    let grid = *f.grid();
    let mut values = f.values().to_vec();
    CubeFft::new(grid.points_per_axis(), grid.dim()).forward(&mut values);
    let mut inside = 0.0;
    let mut outside = 0.0;
    for (v, k2) in values.iter().zip(grid.frequency_norms_sq()) {
        if (k2.sqrt() - 1.0).abs() <= 0.5 {
            inside += v.norm_sqr();
        } else {
            outside += v.norm_sqr();
        }
    }
    if inside + outside == 0.0 {
        0.0
    } else {
        outside / (inside + outside)
    }
}

/// Power-law fit of `‖(1_{|x|≥R} Φ₁) ∗ f‖_p` over the ladder, `Φ₁` from the kernel
/// split on the doubled concentric grid, convolution zero-padded to `(2n)^N`.
pub fn truncated_kernel_slope(
    p: f64,
    ladder: &[f64],
    f: &Field,
) -> Result<SlopeFit, DiagnosticsError> {
    let grid = *f.grid();
    let dim = grid.dim();
    let lambda = decay_rate(dim, p);
    let (lower, _) = exponent_window(dim);
    if !(lambda > 0.0 && p > lower) {
        return Err(DiagnosticsError::InvalidExponent { p, lambda });
    }
    let (min, max) = (2.0, grid.half_width() / 4.0);
    for &r in ladder {
        if !(min..=max).contains(&r) {
            return Err(DiagnosticsError::BadLadder {
                radius: r,
                min,
                max,
            });
        }
    }
    let leak = out_of_band_energy(f);
    if leak > 1e-10 {
        return Err(DiagnosticsError::BadSpectrum(leak));
    }
    let n = grid.points_per_axis();
    let big = grid.concentric(2 * n)?;
    let nb = big.points_per_axis();
    let split = kernel_split(&big)?;
    let phi1 = split.phi1.into_values();
    let plan = CubeFft::new(nb, dim);
    let mut padded = vec![Complex64::default(); big.len()];
    let mut idx = vec![0usize; dim];
    for (flat, v) in f.values().iter().enumerate() {
        grid.unravel(flat, &mut idx);
        padded[idx.iter().fold(0, |acc, &i| acc * nb + i)] = *v;
    }
    plan.forward(&mut padded);
    let h = grid.spacing();
    let scale = grid.cell_volume() / big.len() as f64;
    let mut samples = Vec::with_capacity(ladder.len());
    for &r in ladder {
        let mut table = vec![Complex64::default(); big.len()];
        let mut src = vec![0usize; dim];
        for (flat, slot) in table.iter_mut().enumerate() {
            big.unravel(flat, &mut idx);
            let mut d2 = 0.0;
            for a in 0..dim {
                let d = signed_index(idx[a], nb);
                d2 += (d as f64 * h).powi(2);
                src[a] = (d + nb as i64 / 2) as usize;
            }
            if d2 >= r * r {
                *slot = phi1[big.ravel(&src)];
            }
        }
        plan.forward(&mut table);
        for (t, v) in table.iter_mut().zip(&padded) {
            *t *= v;
        }
        plan.inverse(&mut table);
        let mut sum = 0.0;
        for flat in 0..grid.len() {
            grid.unravel(flat, &mut idx);
            let pos = idx.iter().fold(0, |acc, &i| acc * nb + i);
            sum += (table[pos] * scale).norm().powf(p);
        }
        samples.push([r, (grid.cell_volume() * sum).powf(1.0 / p)]);
    }
    let lo = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ladder.iter().cloned().fold(0.0, f64::max);
    Ok(fit_power_law(&samples, [lo, hi]))
}

fn dual_norm(f: &Field, p: f64) -> Result<f64, DiagnosticsError> {
    let size = lp_norm(f, p / (p - 1.0))?;
    if size == 0.0 {
        return Err(DiagnosticsError::ZeroInput);
    }
    Ok(size)
}

/// `‖R f‖_p / ‖f‖_{p′}`.
pub fn resolvent_ratio(resolvent: &Resolvent, f: &Field, p: f64) -> Result<f64, DiagnosticsError> {
    let size = dual_norm(f, p)?;
    Ok(lp_norm(&resolvent.apply(f)?, p)? / size)
}

/// `max_R (1/R)∫_{B_R}|R f|² / ‖f‖²_{p′}` over the ladder.
pub fn big_r_ratio(
    resolvent: &Resolvent,
    f: &Field,
    ladder: &[f64],
    p: f64,
) -> Result<f64, DiagnosticsError> {
    let grid = *f.grid();
    let (min, max) = (1.0, grid.half_width() / 2.0);
    for &r in ladder {
        if !(min..=max).contains(&r) {
            return Err(DiagnosticsError::BadLadder {
                radius: r,
                min,
                max,
            });
        }
    }
    let size = dual_norm(f, p)?;
    let u = resolvent.apply(f)?;
    let radius = grid.radii();
    let mut best = 0.0f64;
    for &r in ladder {
        let sum: f64 = u
            .values()
            .iter()
            .zip(&radius)
            .filter(|(_, &x)| x <= r)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        best = best.max(sum * grid.cell_volume() / r);
    }
    Ok(best / (size * size))
}

/// Relative residuals of `−Δu − u = Q|u|^{p−2}u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeResidual {
    pub l2: f64,
    pub max: f64,
}

/// `(−Δ − 1)u − f` with the torus spectral Laplacian.
pub fn helmholtz_residual(u: &Field, f: &Field) -> Result<Field, DiagnosticsError> {
    Ok(helmholtz_operator(u).combine(1.0, f, -1.0)?)
}

/// PDE residual of a solution. On the torus class the global spectral residual is
/// used. A free-space solution is continued outside the box by its own resolvent
/// onto the doubled grid, cut off smoothly between `L` and `2L − 2h`, and
/// measured on `|x| ≤ L/2`.
pub fn pde_residual(prob: &DualProblem, u: &Field) -> Result<PdeResidual, DiagnosticsError> {
    let f = prob.source(u)?;
    let grid = *u.grid();
    let big = match prob.method() {
        ResolventMethod::TorusMultiplier => {
            let r = helmholtz_residual(u, &f)?;
            return Ok(relative(r.values(), f.values(), |_| true));
        }
        ResolventMethod::Multiplier => {
            let big = grid.concentric(2 * grid.points_per_axis())?;
            AperiodicConvolver::truncated_multiplier(&grid, &big, prob.schedule())?
        }
        ResolventMethod::KernelConvolution => {
            let big = grid.concentric(2 * grid.points_per_axis())?;
            AperiodicConvolver::sampled(&grid, &big)?
        }
    };
    let target = *big.target();
    let continued = big.apply(&f)?.real_part();
    let inner = u.zero_padded(target)?;
    let mask = Field::from_real(grid, vec![1.0; grid.len()])?.zero_padded(target)?;
    let l = grid.half_width();
    let radius = target.radii();
    let values = (0..target.len())
        .map(|i| {
            let v = if mask.values()[i].re > 0.5 {
                inner.values()[i]
            } else {
                continued.values()[i]
            };
            v * gaussian_window(radius[i], l, 2.0 * l - 2.0 * grid.spacing())
        })
        .collect();
    let fe = f.zero_padded(target)?;
    let r = helmholtz_residual(&Field::from_complex(target, values)?, &fe)?;
    Ok(relative(r.values(), fe.values(), |i| radius[i] <= l / 2.0))
}

fn relative(r: &[Complex64], f: &[Complex64], keep: impl Fn(usize) -> bool) -> PdeResidual {
    let (mut rn, mut fnorm, mut rmax, mut fmax) = (0.0, 0.0, 0.0f64, 0.0f64);
    for (i, (a, b)) in r.iter().zip(f).enumerate() {
        if keep(i) {
            rn += a.norm_sqr();
            fnorm += b.norm_sqr();
            rmax = rmax.max(a.norm());
            fmax = fmax.max(b.norm());
        }
    }
    if fnorm == 0.0 {
        return PdeResidual {
            l2: if rn == 0.0 { 0.0 } else { f64::INFINITY },
            max: if rmax == 0.0 { 0.0 } else { f64::INFINITY },
        };
    }
    PdeResidual {
        l2: (rn / fnorm).sqrt(),
        max: rmax / fmax,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::SolutionClass;
    use crate::resolvent::{resolvent_eps_apply, AbsorptionSchedule};
    use std::f64::consts::PI;

    fn ball_indicator(grid: GridSpec, c: [f64; 3], r: f64) -> Field {
        Field::from_fn_real(grid, move |x| {
            let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            if norm(&d) <= r {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn concentration_of_indicator() {
        let grid = GridSpec::new(3, 8.0, 64).unwrap();
        let v = ball_indicator(grid, [1.0, -2.0, 0.5], 1.0);
        let c = concentration(&v, 1.0, 1.25).unwrap();
        assert!((c - 4.0 * PI / 3.0).abs() < 0.3, "{c}");
        let shifted = v.translated(&[5, -3, 7]);
        assert!((concentration(&shifted, 1.0, 1.25).unwrap() - c).abs() < 1e-12 * c);
        let two = v
            .combine(1.0, &ball_indicator(grid, [-4.0, 3.0, 0.5], 1.0), 1.0)
            .unwrap();
        assert!((concentration(&two, 1.0, 1.25).unwrap() - c).abs() < 1e-12 * c);
        let mut prev = 0.0;
        for rho in [0.5, 1.0, 2.0, 3.0] {
            let c = concentration(&v, rho, 1.25).unwrap();
            assert!(c >= prev - 1e-12);
            prev = c;
        }
        assert!(concentration(&v, 5.0, 1.25).is_err());
    }

    #[test]
    fn ratio_report_statistics() {
        let r = RatioReport::new("x", vec![3.0, 1.0, 2.0, 10.0]);
        assert_eq!(r.median, 2.5);
        assert_eq!(r.max, 10.0);
        assert_eq!(r.spread(), 4.0);
    }

    #[test]
    fn ratios_are_scale_invariant() {
        let grid = GridSpec::new(3, 6.0, 16).unwrap();
        let res = Resolvent::new(
            &grid,
            ResolventMethod::KernelConvolution,
            &AbsorptionSchedule::new(0.1, 2, 1).unwrap(),
        )
        .unwrap();
        let f = Field::from_fn_real(grid, |x| {
            (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2])).exp() * (1.0 + x[0])
        });
        let a = resolvent_ratio(&res, &f, 5.0).unwrap();
        let b = resolvent_ratio(&res, &f.scaled(3.0), 5.0).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
        let c = big_r_ratio(&res, &f, &[1.0, 2.0, 3.0], 5.0).unwrap();
        let d = big_r_ratio(&res, &f.scaled(3.0), &[1.0, 2.0, 3.0], 5.0).unwrap();
        assert!((c - d).abs() <= 1e-10 * c);
        assert_eq!(
            resolvent_ratio(&res, &Field::zeros(grid), 5.0).unwrap_err(),
            DiagnosticsError::ZeroInput
        );
        assert!(big_r_ratio(&res, &f, &[0.5], 5.0).is_err());
    }

    #[test]
    fn eps_identity_in_residual() {
        let grid = GridSpec::new(3, 5.0, 16).unwrap();
        let f = Field::from_fn_real(grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        for eps in [0.4, 0.2, 0.1] {
            let u = resolvent_eps_apply(&f, eps).unwrap();
            let r = helmholtz_residual(&u, &f).unwrap();
            let expect = lp_norm(&u, 2.0).unwrap() * eps;
            assert!(
                (lp_norm(&r, 2.0).unwrap() - expect).abs()
                    <= 1e-12 * expect.max(lp_norm(&f, 2.0).unwrap())
            );
        }
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let grid = GridSpec::new(3, 8.0, 16).unwrap();
        let q = Field::from_fn_real(grid, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
        });
        let prob = DualProblem::new(
            &q,
            5.0,
            SolutionClass::Decaying,
            ResolventMethod::KernelConvolution,
            &AbsorptionSchedule::new(0.1, 2, 1).unwrap(),
        )
        .unwrap();
        let z = Field::zeros(grid).tag_real().unwrap();
        assert_eq!(
            pde_residual(&prob, &z).unwrap(),
            PdeResidual { l2: 0.0, max: 0.0 }
        );
    }

    #[test]
    fn residual_separates_solutions_from_other_fields() {
        let grid = GridSpec::new(3, 6.0, 24).unwrap();
        let q = Field::from_fn_real(grid, |x| (-norm(x).powi(2)).exp());
        let prob = DualProblem::new(
            &q,
            4.0,
            SolutionClass::Decaying,
            ResolventMethod::Multiplier,
            &AbsorptionSchedule::guarded(&grid.concentric(48).unwrap(), 4.0),
        )
        .unwrap();
        let v = Field::from_fn_real(grid, |x| (-norm(x).powi(2) / 2.0).exp());
        let u = prob.primal(&v).unwrap();
        let bump = Field::from_fn_real(grid, |x| (-norm(x).powi(2)).exp());
        let w = u.combine(1.0, &bump, 0.1 * u.max_abs()).unwrap();
        let off = pde_residual(&prob, &w).unwrap();
        assert!(off.l2 > 0.05, "{off:?}");
    }

    #[test]
    fn noise_is_band_limited_and_normalized() {
        let grid = GridSpec::new(3, 40.0, 80).unwrap();
        let f = band_limited_noise(&grid, 3, 1.5, 6.0).unwrap();
        assert!(out_of_band_energy(&f) < 1e-20);
        assert!((lp_norm(&f, 1.2).unwrap() - 1.0).abs() < 1e-12);
        let white = Field::from_fn_real(grid, |x| if norm(x) < 1.0 { 1.0 } else { 0.0 });
        assert!(matches!(
            truncated_kernel_slope(6.0, &[2.0, 4.0], &white),
            Err(DiagnosticsError::BadSpectrum(_))
        ));
        assert!(matches!(
            truncated_kernel_slope(4.0, &[2.0, 4.0], &f),
            Err(DiagnosticsError::InvalidExponent { .. })
        ));
        assert!((decay_rate(3, 6.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((decay_rate(3, 5.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn spreading_dilations_lose_pairing_and_concentration() {
        let grid = GridSpec::new(3, 12.0, 32).unwrap();
        let q = Field::from_real(grid, vec![1.0; grid.len()]).unwrap();
        let prob = DualProblem::new(
            &q,
            5.0,
            SolutionClass::Decaying,
            ResolventMethod::KernelConvolution,
            &AbsorptionSchedule::new(0.1, 2, 1).unwrap(),
        )
        .unwrap();
        let pd = prob.p_dual();
        let family: Vec<Field> = [1.0, 0.5, 0.25]
            .iter()
            .map(|&lam: &f64| {
                let raw = Field::from_fn_real(grid, move |x| {
                    let r2: f64 = x.iter().map(|v| (v * lam).powi(2)).sum();
                    (-r2).exp()
                });
                raw.scaled(1.0 / lp_norm(&raw, pd).unwrap())
            })
            .collect();
        let rep = nonvanishing_probe(&prob, &family, &[1.0], 2.0).unwrap();
        let last = rep.members.len() - 1;
        assert!(rep.members[last].pairing < rep.members[0].pairing);
        assert!(rep.members[last].concentrations[1] < rep.members[0].concentrations[1]);
        assert!(rep.passed);
        assert!(matches!(
            nonvanishing_probe(&prob, &[], &[1.0], 2.0),
            Err(DiagnosticsError::EmptyFamily)
        ));
    }
}
