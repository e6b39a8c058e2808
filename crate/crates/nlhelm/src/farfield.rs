//! Far-field coefficients, the averaged far-field relation, the outgoing
//! radiation condition and radial decay fits.

use crate::dual::{DualError, DualProblem};
use crate::grid::{
    gaussian_window, norm, spectral_gradient, Field, GridError, GridSpec, SphereMesh,
};
use crate::kernel::{HelmholtzKernel, KernelError};
use crate::resolvent::{AperiodicConvolver, ResolventError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FarFieldError {
    #[error("only {shells} shells in the window, at least 5 are needed")]
    WindowTooNarrow { shells: usize },
    #[error("bad radius window: {0}")]
    BadWindow(String),
    #[error("mesh dimension {mesh} does not match grid dimension {grid}")]
    MeshMismatch { mesh: usize, grid: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Dual(#[from] DualError),
}

/// `g(ξ) = −(i/4)(2π)^{(2−N)/2} f̂(ξ)` on the directions of a sphere mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldPattern {
    mesh: SphereMesh,
    g: Vec<Complex64>,
}

impl FarFieldPattern {
    pub fn mesh(&self) -> &SphereMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[Complex64] {
        &self.g
    }

    /// `g` at an arbitrary unit vector through the mesh stencil.
    pub fn interpolate(&self, dir: &[f64]) -> Complex64 {
        self.mesh
            .stencil(dir)
            .iter()
            .map(|&(i, w)| self.g[i] * w)
            .sum()
    }

    /// `max_ξ |g(−ξ) + conj g(ξ)| / max |g|`, zero for a real source.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.g.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        (0..self.g.len())
            .map(|i| (self.g[self.mesh.antipode(i)] + self.g[i].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// CSV with one row per direction: components, `Re g`, `Im g`, weight.
    pub fn to_csv(&self) -> String {
        let dim = self.mesh.dim();
        let mut out: Vec<String> = (1..=dim).map(|a| format!("xi{a}")).collect();
        out.extend(["re_g".into(), "im_g".into(), "weight".into()]);
        let mut text = out.join(",") + "\n";
        for ((d, g), w) in self
            .mesh
            .directions()
            .iter()
            .zip(&self.g)
            .zip(self.mesh.weights())
        {
            let cols: Vec<String> = d.iter().map(|v| format!("{v:.17e}")).collect();
            text += &format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                cols.join(","),
                g.re,
                g.im,
                w
            );
        }
        text
    }
}

/// Least-squares power law `A r^e` through positive samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_window: [f64; 2],
    /// Coefficient of determination of the log-log fit.
    pub goodness: f64,
    pub samples: Vec<[f64; 2]>,
}

/// Fits `log y = log A + e log r`. Needs at least two samples with positive values.
pub fn fit_power_law(samples: &[[f64; 2]], r_window: [f64; 2]) -> SlopeFit {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s[0] > 0.0 && s[1] > 0.0)
        .map(|s| (s[0].ln(), s[1].ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let goodness = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    SlopeFit {
        exponent: slope,
        amplitude: intercept.exp(),
        r_window,
        goodness,
        samples: samples.to_vec(),
    }
}

fn coefficient(dim: usize) -> Complex64 {
    let n = dim as f64;
    Complex64::new(0.0, -0.25 * (2.0 * PI).powf((2.0 - n) / 2.0))
}

/// `(2π)^{−N/2} h^N Σ_x f(x) e^{−i x·ξ}` at every direction, by separable phase tables.
fn direct_transform(f: &Field, directions: &[Vec<f64>]) -> Vec<Complex64> {
    let grid = *f.grid();
    let coords = grid.axis_coords();
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let scale = grid.cell_volume() * (2.0 * PI).powf(-(dim as f64) / 2.0);
    let values = f.values();
    directions
        .par_iter()
        .map(|xi| {
            let mut work: Vec<Complex64> = values.to_vec();
            for axis in (0..dim).rev() {
                let table: Vec<Complex64> = coords
                    .iter()
                    .map(|&x| Complex64::from_polar(1.0, -x * xi[axis]))
                    .collect();
                work = work
                    .chunks(n)
                    .map(|chunk| chunk.iter().zip(&table).map(|(a, b)| a * b).sum())
                    .collect();
            }
            work[0] * scale
        })
        .collect()
}

/// Pattern of an explicit source `f`.
pub fn farfield_of_source(f: &Field, mesh: &SphereMesh) -> Result<FarFieldPattern, FarFieldError> {
    let dim = f.grid().dim();
    if mesh.dim() != dim {
        return Err(FarFieldError::MeshMismatch {
            mesh: mesh.dim(),
            grid: dim,
        });
    }
    let c = coefficient(dim);
    let g = direct_transform(f, mesh.directions())
        .into_iter()
        .map(|v| v * c)
        .collect();
    Ok(FarFieldPattern {
        mesh: mesh.clone(),
        g,
    })
}

/// Pattern of a real solution `u` through its source `Q|u|^{p−2}u`.
pub fn compute_farfield(
    prob: &DualProblem,
    u: &Field,
    mesh: &SphereMesh,
) -> Result<FarFieldPattern, FarFieldError> {
    u.require_real()?;
    farfield_of_source(&prob.source(u)?, mesh)
}

fn check_radii(grid: &GridSpec, radii: &[f64]) -> Result<(), FarFieldError> {
    let limit = grid.half_width() / 2.0;
    for &r in radii {
        if !(r > 0.0) || r > limit * (1.0 + 1e-12) {
            return Err(GridError::RadiusExceedsBox { radius: r, limit }.into());
        }
    }
    Ok(())
}

/// `(1/R) Σ_{0<|x|≤R} integrand(x) h^N` for each `R`.
fn ball_averages(
    grid: &GridSpec,
    radii: &[f64],
    integrand: impl Fn(usize, &[f64], f64) -> f64,
) -> Vec<f64> {
    let mut sums = vec![0.0; radii.len()];
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    grid.for_each_node(|flat, x| {
        let r = norm(x);
        if r == 0.0 || r > r_max {
            return;
        }
        let value = integrand(flat, x, r);
        for (s, &big) in sums.iter_mut().zip(radii) {
            if r <= big {
                *s += value;
            }
        }
    });
    sums.iter()
        .zip(radii)
        .map(|(s, r)| s * grid.cell_volume() / r)
        .collect()
}

/// `(1/R)∫_{B_R} |u + 2(2π/|x|)^{(N−1)/2} Re[e^{i|x|−i(N−1)π/4} g(x̂)]|² dx` per radius.
/// The origin node is left out.
pub fn farfield_relation_error(
    u: &Field,
    pattern: &FarFieldPattern,
    radii: &[f64],
) -> Result<Vec<f64>, FarFieldError> {
    u.require_real()?;
    let grid = *u.grid();
    if pattern.mesh.dim() != grid.dim() {
        return Err(FarFieldError::MeshMismatch {
            mesh: pattern.mesh.dim(),
            grid: grid.dim(),
        });
    }
    check_radii(&grid, radii)?;
    let half = (grid.dim() as f64 - 1.0) / 2.0;
    let values = u.values();
    Ok(ball_averages(&grid, radii, |flat, x, r| {
        let dir: Vec<f64> = x.iter().map(|v| v / r).collect();
        let g = pattern.interpolate(&dir);
        let wave = Complex64::from_polar(1.0, r - half * PI / 2.0) * g;
        let tail = 2.0 * (2.0 * PI / r).powf(half) * wave.re;
        (values[flat].re + tail).powi(2)
    }))
}

/// `(1/R)∫_{B_R} |∇ũ − i ũ x̂|² dx` per radius. The gradient is spectral, taken
/// after a smooth cutoff that is 1 on `|x| ≤ L/2` and vanishes near the box faces.
pub fn radiation_error(u_tilde: &Field, radii: &[f64]) -> Result<Vec<f64>, FarFieldError> {
    let grid = *u_tilde.grid();
    check_radii(&grid, radii)?;
    let inner = grid.half_width() / 2.0;
    let outer = grid.half_width() - 2.0 * grid.spacing();
    let radius = grid.radii();
    let windowed = Field::from_complex(
        grid,
        u_tilde
            .values()
            .iter()
            .zip(&radius)
            .map(|(v, &r)| v * gaussian_window(r, inner, outer))
            .collect(),
    )?;
    let grads = spectral_gradient(&windowed);
    let values = windowed.values();
    let i = Complex64::i();
    Ok(ball_averages(&grid, radii, |flat, x, r| {
        grads
            .iter()
            .zip(x)
            .map(|(g, xa)| (g.values()[flat] - i * values[flat] * (xa / r)).norm_sqr())
            .sum()
    }))
}

/// Power-law fit of the shell maxima of `|u|` over overlapping shells of width
/// `π` and stride `π/2`, abscissa at the radius of each maximizing node.
pub fn decay_exponent_fit(u: &Field, r_window: [f64; 2]) -> Result<SlopeFit, FarFieldError> {
    let grid = *u.grid();
    let [lo, hi] = r_window;
    if !(lo >= 1.0 && hi <= grid.half_width() / 2.0 * (1.0 + 1e-12) && lo < hi) {
        return Err(FarFieldError::BadWindow(format!(
            "[{lo}, {hi}] must lie inside [1, {}]",
            grid.half_width() / 2.0
        )));
    }
    let mut shells = Vec::new();
    let mut a = lo;
    while a + PI <= hi * (1.0 + 1e-12) {
        shells.push(a);
        a += PI / 2.0;
    }
    let radius = grid.radii();
    let mut maxima: Vec<(f64, usize, f64)> = vec![(0.0, usize::MAX, 0.0); shells.len()];
    for (flat, (&r, v)) in radius.iter().zip(u.values()).enumerate() {
        let mag = v.norm();
        for (slot, &start) in maxima.iter_mut().zip(&shells) {
            if r >= start && r < start + PI && mag > slot.0 {
                *slot = (mag, flat, r);
            }
        }
    }
    let mut samples: Vec<[f64; 2]> = Vec::new();
    let mut seen = Vec::new();
    for (mag, flat, r) in maxima {
        if flat != usize::MAX && mag > 0.0 && !seen.contains(&flat) {
            seen.push(flat);
            samples.push([r, mag]);
        }
    }
    if samples.len() < 5 {
        return Err(FarFieldError::WindowTooNarrow {
            shells: samples.len(),
        });
    }
    Ok(fit_power_law(&samples, r_window))
}

/// Free-space field `Φ ∗ f` of a source on a concentric grid of half-width at
/// least `half_width`, same spacing.
pub fn extend_field(f: &Field, half_width: f64) -> Result<Field, FarFieldError> {
    let grid = *f.grid();
    let h = grid.spacing();
    let mut n = (2.0 * half_width / h).ceil() as usize;
    n += n % 2;
    let target = grid.concentric(n.max(grid.points_per_axis()))?;
    Ok(AperiodicConvolver::sampled(&grid, &target)?.apply(f)?)
}

/// Support radius `max |x|` over nodes with `|f| > 10⁻¹⁴ max |f|`.
pub fn support_radius(f: &Field) -> f64 {
    let peak = f.max_abs();
    let mut out: f64 = 0.0;
    f.grid().for_each_node(|flat, x| {
        if f.values()[flat].norm() > 1e-14 * peak {
            out = out.max(norm(x));
        }
    });
    out
}

/// Decay of `Φ ∗ f − √(π/2) e^{i r − i(N−3)π/4} r^{−(N−1)/2} f̂(x̂)`: at each radius the
/// maximum over mesh directions of the remainder modulus, computed by direct summation.
pub fn linear_farfield_check(
    f: &Field,
    radii: &[f64],
    mesh: &SphereMesh,
) -> Result<SlopeFit, FarFieldError> {
    let grid = *f.grid();
    let dim = grid.dim();
    if mesh.dim() != dim {
        return Err(FarFieldError::MeshMismatch {
            mesh: mesh.dim(),
            grid: dim,
        });
    }
    if radii.len() < 5 {
        return Err(FarFieldError::WindowTooNarrow {
            shells: radii.len(),
        });
    }
    let support = support_radius(f);
    let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().cloned().fold(0.0, f64::max);
    if lo <= support {
        return Err(FarFieldError::BadWindow(format!(
            "radius {lo} meets the support radius {support}"
        )));
    }
    let kernel = HelmholtzKernel::new(dim)?;
    let mut nodes: Vec<(Vec<f64>, Complex64)> = Vec::new();
    grid.for_each_node(|flat, x| {
        let v = f.values()[flat];
        if v != Complex64::default() {
            nodes.push((x.to_vec(), v));
        }
    });
    let f_hat = direct_transform(f, mesh.directions());
    let dv = grid.cell_volume();
    let half = (dim as f64 - 1.0) / 2.0;
    let lead_phase = (dim as f64 - 3.0) * PI / 4.0;
    let samples: Vec<[f64; 2]> = radii
        .iter()
        .map(|&r| {
            let worst = mesh
                .directions()
                .par_iter()
                .zip(&f_hat)
                .map(|(dir, fh)| {
                    let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
                    let mut total = Complex64::default();
                    for (y, v) in &nodes {
                        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                        total += kernel.radial(norm(&d)) * v;
                    }
                    total *= dv;
                    let lead =
                        Complex64::from_polar((PI / 2.0).sqrt() * r.powf(-half), r - lead_phase)
                            * fh;
                    (total - lead).norm()
                })
                .reduce(|| 0.0, f64::max);
            [r, worst]
        })
        .collect();
    if samples.iter().all(|s| s[1] == 0.0) {
        return Ok(SlopeFit {
            exponent: f64::NEG_INFINITY,
            amplitude: 0.0,
            r_window: [lo, hi],
            goodness: 1.0,
            samples,
        });
    }
    Ok(fit_power_law(&samples, [lo, hi]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_source_constant() {
        let grid = GridSpec::new(3, 4.0, 16).unwrap();
        let mut values = vec![0.0; grid.len()];
        values[grid.origin_index()] = 1.0 / grid.cell_volume();
        let f = Field::from_real(grid, values).unwrap();
        let mesh = SphereMesh::new(3, 2).unwrap();
        let pat = farfield_of_source(&f, &mesh).unwrap();
        let expect = Complex64::new(0.0, -1.0 / (16.0 * PI * PI));
        for g in pat.values() {
            assert!((g - expect).norm() <= 1e-10 * expect.norm());
        }
    }

    #[test]
    fn real_source_is_conjugate_symmetric() {
        let grid = GridSpec::new(3, 3.0, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Field::from_real(
            grid,
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let pat = farfield_of_source(&f, &SphereMesh::new(3, 2).unwrap()).unwrap();
        assert!(pat.symmetry_defect() < 1e-10);
    }

    #[test]
    fn zero_field_gives_zero_errors() {
        let grid = GridSpec::new(3, 8.0, 16).unwrap();
        let u = Field::zeros(grid).tag_real().unwrap();
        let pat = farfield_of_source(&u, &SphereMesh::new(3, 1).unwrap()).unwrap();
        assert!(pat.values().iter().all(|g| g.norm() == 0.0));
        assert_eq!(
            farfield_relation_error(&u, &pat, &[2.0, 4.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(radiation_error(&u, &[2.0, 4.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            farfield_relation_error(&u, &pat, &[5.0]),
            Err(FarFieldError::Grid(GridError::RadiusExceedsBox { .. }))
        ));
    }

    #[test]
    fn decay_of_analytic_profiles() {
        let grid = GridSpec::new(3, 32.0, 128).unwrap();
        let spherical = Field::from_fn_real(grid, |x| {
            let r = norm(x);
            if r == 0.0 {
                0.0
            } else {
                r.cos() / r
            }
        });
        let fit = decay_exponent_fit(&spherical, [2.0, 16.0]).unwrap();
        assert!((fit.exponent + 1.0).abs() < 0.05, "{fit:?}");
        let power = Field::from_fn_real(grid, |x| {
            let r = norm(x);
            if r == 0.0 {
                0.0
            } else {
                r.powi(-2)
            }
        });
        let fit = decay_exponent_fit(&power, [2.0, 16.0]).unwrap();
        assert!((fit.exponent + 2.0).abs() < 0.05);
        assert!(matches!(
            decay_exponent_fit(&power, [2.0, 6.0]),
            Err(FarFieldError::WindowTooNarrow { .. })
        ));
        assert!(matches!(
            decay_exponent_fit(&power, [0.5, 16.0]),
            Err(FarFieldError::BadWindow(_))
        ));
    }

    #[test]
    fn incoming_plane_wave_fails_radiation_condition() {
        let grid = GridSpec::new(3, 16.0, 64).unwrap();
        let wave = Field::from_fn(grid, |x| Complex64::from_polar(1.0, x[0]));
        let errs = radiation_error(&wave, &[2.0, 4.0, 8.0]).unwrap();
        // |e₁ − x̂|² averages to 2 over the ball.
        for (e, r) in errs.iter().zip([2.0f64, 4.0, 8.0]) {
            let expect = 2.0 * 4.0 * PI / 3.0 * r * r;
            assert!((e / expect - 1.0).abs() < 0.1, "{e} vs {expect}");
        }
    }

    #[test]
    fn outgoing_point_source_radiation_decreases() {
        let grid = GridSpec::new(3, 16.0, 64).unwrap();
        let kernel = HelmholtzKernel::new(3).unwrap();
        let x0 = [0.25, 0.0, 0.0];
        let u = Field::from_fn(grid, |x| {
            let d: Vec<f64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
            kernel.radial(norm(&d))
        });
        let errs = radiation_error(&u, &[2.0, 3.0, 4.5, 6.75]).unwrap();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn linear_remainder_decays_faster() {
        let grid = GridSpec::new(3, 1.5, 24).unwrap();
        let f = Field::from_fn_real(grid, |x| {
            let c = [0.3, -0.2, 0.1];
            let r = norm(&x.iter().zip(&c).map(|(a, b)| a - b).collect::<Vec<_>>());
            if r < 0.6 {
                (-1.0 / (1.0 - (r / 0.6).powi(2))).exp()
            } else {
                0.0
            }
        });
        let radii: Vec<f64> = (0..6).map(|k| 5.0 * 4f64.powf(k as f64 / 5.0)).collect();
        let fit = linear_farfield_check(&f, &radii, &SphereMesh::new(3, 1).unwrap()).unwrap();
        assert!((fit.exponent + 2.0).abs() < 0.3, "{fit:?}");
        let zero = Field::zeros(grid).tag_real().unwrap();
        let fit = linear_farfield_check(&zero, &radii, &SphereMesh::new(3, 1).unwrap()).unwrap();
        assert!(fit.samples.iter().all(|s| s[1] == 0.0));
        assert!(matches!(
            linear_farfield_check(
                &f,
                &[0.5, 1.0, 2.0, 3.0, 4.0],
                &SphereMesh::new(3, 1).unwrap()
            ),
            Err(FarFieldError::BadWindow(_))
        ));
    }

    #[test]
    fn power_law_fit_is_exact_on_power_laws() {
        let samples: Vec<[f64; 2]> = (1..8)
            .map(|k| [k as f64, 3.0 * (k as f64).powf(-1.5)])
            .collect();
        let fit = fit_power_law(&samples, [1.0, 7.0]);
        assert!((fit.exponent + 1.5).abs() < 1e-12 && (fit.amplitude - 3.0).abs() < 1e-12);
        assert!((fit.goodness - 1.0).abs() < 1e-12);
    }
}
