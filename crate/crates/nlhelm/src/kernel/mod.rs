//! The outgoing fundamental solution `Φ` of `−Δ − 1`, its real part `Ψ`, and
//! the split `Φ = Φ₁ + Φ₂` into a shell-localized part and a fast-decaying remainder.

pub mod hankel;

use crate::fft::CubeFft;
use crate::grid::{Field, GridError, GridSpec};
use crate::special::{ball_volume, gamma_half, gauss_legendre};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

/// Inner radius of the shell cutoff in `t = ||ξ| − 1|`.
pub const CUTOFF_INNER: f64 = 1.0 / 6.0;
/// Outer radius of the shell cutoff in `t = ||ξ| − 1|`.
pub const CUTOFF_OUTER: f64 = 1.0 / 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("the kernel is singular at the origin")]
    SingularPoint,
    #[error("dimension must be at least 3, got {0}")]
    InvalidDimension(usize),
    #[error("frequency spacing {spacing} is coarser than 1/12; the unit shell is unresolved")]
    ShellUnresolved { spacing: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `Φ(x) = (i/4)(2π|x|)^{(2−N)/2} H^{(1)}_{(N−2)/2}(|x|)` in dimension `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzKernel {
    dim: usize,
    bound_constant: f64,
}

impl HelmholtzKernel {
    pub fn new(dim: usize) -> Result<Self, KernelError> {
        if dim < 3 {
            return Err(KernelError::InvalidDimension(dim));
        }
        let mut kernel = Self {
            dim,
            bound_constant: 0.0,
        };
        kernel.bound_constant = kernel.sampled_bound_constant();
        Ok(kernel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Hankel order `ν = (N − 2)/2`.
    pub fn order(&self) -> f64 {
        (self.dim as f64 - 2.0) / 2.0
    }

    pub fn closed_form_available(&self) -> bool {
        self.dim % 2 == 1 || self.dim == 4
    }

    /// `C₀` with `|Φ(x)| ≤ C₀ max{|x|^{2−N}, |x|^{(1−N)/2}}`.
    pub fn bound_constant(&self) -> f64 {
        self.bound_constant
    }

    /// Radial profile `Φ(r)`, `r > 0`.
    pub fn radial(&self, r: f64) -> Complex64 {
        match self.dim {
            3 => Complex64::from_polar(1.0 / (4.0 * PI * r), r),
            5 => {
                Complex64::from_polar(1.0 / (8.0 * PI * PI * r * r), r)
                    * Complex64::new(1.0 / r, -1.0)
            }
            _ => self.radial_generic(r),
        }
    }

    /// Radial profile through the general Hankel path, bypassing closed forms.
    pub fn radial_generic(&self, r: f64) -> Complex64 {
        let n = self.dim as f64;
        let pre = Complex64::new(0.0, 0.25) * (2.0 * PI * r).powf((2.0 - n) / 2.0);
        pre * hankel::hankel1((self.dim - 2) as u32, r)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64, KernelError> {
        let r = crate::grid::norm(x);
        if r == 0.0 {
            return Err(KernelError::SingularPoint);
        }
        Ok(self.radial(r))
    }

    /// Leading coefficient `c` of the Laplace-type singularity `Φ ≈ c |x|^{2−N}`.
    pub fn singular_coefficient(&self) -> f64 {
        gamma_half(self.dim as u32 - 2) / (4.0 * PI.powf(self.dim as f64 / 2.0))
    }

    /// Mean of `c|x|^{2−N}` over the ball whose volume equals `cell_volume`.
    pub fn origin_cell_mean(&self, cell_volume: f64) -> f64 {
        let n = self.dim as f64;
        let a = (cell_volume / ball_volume(self.dim)).powf(1.0 / n);
        self.singular_coefficient() * n / (2.0 * a.powf(n - 2.0))
    }

    fn envelope(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        r.powf(2.0 - n).max(r.powf((1.0 - n) / 2.0))
    }

    fn sampled_bound_constant(&self) -> f64 {
        let samples = 4000;
        let (lo, hi) = (-4.0f64, 4.0f64);
        let worst = (0..=samples)
            .map(|i| {
                let r = 10f64.powf(lo + (hi - lo) * i as f64 / samples as f64);
                self.radial(r).norm() / self.envelope(r)
            })
            .fold(0.0f64, f64::max);
        1.05 * worst
    }
}

/// `Φ(x)` for `x ≠ 0` in dimension `dim`.
pub fn phi_eval(x: &[f64], dim: usize) -> Result<Complex64, KernelError> {
    if x.len() != dim {
        return Err(KernelError::InvalidDimension(x.len()));
    }
    HelmholtzKernel {
        dim,
        bound_constant: 0.0,
    }
    .eval(x)
}

/// `Ψ(x) = Re Φ(x)`.
pub fn psi_eval(x: &[f64], dim: usize) -> Result<f64, KernelError> {
    Ok(phi_eval(x, dim)?.re)
}

fn mollifier(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn mollifier_quadrature() -> &'static (Vec<f64>, Vec<f64>, f64) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>, f64)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(64);
        let total = x.iter().zip(&w).map(|(x, w)| w * mollifier(*x)).sum();
        (x, w, total)
    })
}

/// Shell cutoff `ψ̂` as a function of `|ξ|`: 1 on `||ξ|−1| ≤ 1/6`, 0 on
/// `||ξ|−1| ≥ 1/4`, and in between one minus the normalized integral of the
/// `exp(−1/(1−s²))` mollifier.
pub fn psi_hat(xi_norm: f64) -> f64 {
    shell_cutoff(xi_norm, CUTOFF_INNER, CUTOFF_OUTER)
}

/// Smooth radial cutoff equal to 1 on `||ξ|−1| ≤ inner` and 0 on `||ξ|−1| ≥ outer`.
pub fn shell_cutoff(xi_norm: f64, inner: f64, outer: f64) -> f64 {
    let t = (xi_norm - 1.0).abs();
    if t <= inner {
        return 1.0;
    }
    if t >= outer {
        return 0.0;
    }
    let s = (t - inner) / (outer - inner);
    let (x, w, total) = mollifier_quadrature();
    let partial: f64 = x
        .iter()
        .zip(w)
        .map(|(x, w)| w * mollifier(-1.0 + s * (x + 1.0)))
        .sum::<f64>()
        * s;
    (1.0 - partial / total).clamp(0.0, 1.0)
}

/// Multiplier of `Φ₂`: `(1 − ψ̂(ξ)) / (|ξ|² − 1)`, zero on the plateau of `ψ̂`.
pub fn phi2_symbol(xi_norm: f64) -> f64 {
    let cut = 1.0 - psi_hat(xi_norm);
    if cut == 0.0 {
        0.0
    } else {
        cut / (xi_norm * xi_norm - 1.0)
    }
}

/// Sampled `Φ₁`, `Φ₂` on a grid, with empirical decay constants.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
    pub phi1: Field,
    pub phi2: Field,
    /// `max |Φ₁(x)| (1+|x|)^{(N−1)/2}` over nodes other than the origin.
    pub phi1_constant: f64,
    /// `max |Φ₂(x)| / min{|x|^{2−N}, |x|^{−N}}` over `1/2 ≤ |x| ≤ L/2`.
    pub phi2_constant: f64,
    /// `max |Φ₂(x)| |x|^N` over `2 ≤ |x| ≤ L/2`.
    pub phi2_tail_constant: f64,
}

/// Samples of `Φ` at the grid nodes; the origin node carries the ball mean of the singular part.
pub fn sampled_kernel(grid: &GridSpec) -> Result<Field, KernelError> {
    let kernel = HelmholtzKernel::new(grid.dim())?;
    let origin = kernel.origin_cell_mean(grid.cell_volume());
    Ok(Field::from_fn(*grid, |x| {
        let r = crate::grid::norm(x);
        if r == 0.0 {
            Complex64::new(origin, 0.0)
        } else {
            kernel.radial(r)
        }
    }))
}

/// `Φ₂` from its regular multiplier on the torus, `Φ₁ = Φ − Φ₂`.
pub fn kernel_split(grid: &GridSpec) -> Result<KernelSplit, KernelError> {
    let dxi = grid.freq_spacing();
    if dxi > 1.0 / 12.0 {
        return Err(KernelError::ShellUnresolved { spacing: dxi });
    }
    let dim = grid.dim();
    let n = grid.points_per_axis();
    let xi2 = grid.frequency_norms_sq();
    let mut idx = vec![0usize; dim];
    let mut work: Vec<Complex64> = xi2
        .iter()
        .enumerate()
        .map(|(flat, k2)| {
            grid.unravel(flat, &mut idx);
            let sign = if idx.iter().sum::<usize>() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            Complex64::new(sign * phi2_symbol(k2.sqrt()), 0.0)
        })
        .collect();
    CubeFft::new(n, dim).inverse(&mut work);
    let scale = (2.0 * grid.half_width()).powi(-(dim as i32));
    let phi2_values: Vec<f64> = work.iter().map(|v| v.re * scale).collect();
    let phi = sampled_kernel(grid)?;
    let phi1_values: Vec<Complex64> = phi
        .values()
        .iter()
        .zip(&phi2_values)
        .map(|(p, q)| p - q)
        .collect();

    let radii = grid.radii();
    let nd = dim as f64;
    let l2 = grid.half_width() / 2.0;
    let mut phi1_constant = 0.0f64;
    let mut phi2_constant = 0.0f64;
    let mut phi2_tail_constant = 0.0f64;
    for (i, &r) in radii.iter().enumerate() {
        if r > 0.0 {
            phi1_constant =
                phi1_constant.max(phi1_values[i].norm() * (1.0 + r).powf((nd - 1.0) / 2.0));
        }
        if (0.5..=l2).contains(&r) {
            let env = r.powf(2.0 - nd).min(r.powf(-nd));
            phi2_constant = phi2_constant.max(phi2_values[i].abs() / env);
        }
        if (2.0..=l2).contains(&r) {
            phi2_tail_constant = phi2_tail_constant.max(phi2_values[i].abs() * r.powf(nd));
        }
    }
    Ok(KernelSplit {
        cutoff_inner: CUTOFF_INNER,
        cutoff_outer: CUTOFF_OUTER,
        phi1: Field::from_complex(*grid, phi1_values)?,
        phi2: Field::from_real(*grid, phi2_values)?,
        phi1_constant,
        phi2_constant,
        phi2_tail_constant,
    })
}
