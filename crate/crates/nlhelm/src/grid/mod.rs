//! Uniform periodic grids on `[-L, L)^N`, complex fields, the scaled spectral
//! transform, discrete Lebesgue norms, the real pairing and ball integrals.

mod sphere;

pub use sphere::SphereMesh;

use crate::fft::{signed_index, CubeFft};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Largest imaginary part (relative to `1 + max |Re|`) a real-tagged field may carry.
pub const REALNESS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("exponent must be finite and greater than 1, got {0}")]
    InvalidExponent(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("radius {radius} exceeds the admissible limit {limit}")]
    RadiusExceedsBox { radius: f64, limit: f64 },
    #[error("field is not real (max |Im| = {0:e})")]
    ExpectedRealField(f64),
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("invalid sphere mesh: {0}")]
    InvalidMesh(String),
}

/// Uniform grid on the torus `[-L, L)^N` with `n` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
    spacing: f64,
}

impl GridSpec {
    /// The stored half-width is rounded to `h * n / 2` so that `h * n == 2L` holds exactly.
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self, GridError> {
        if dim < 3 {
            return Err(GridError::InvalidGrid(format!(
                "dimension must be at least 3, got {dim}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        if points_per_axis < 8 || !points_per_axis.is_multiple_of(2) {
            return Err(GridError::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {points_per_axis}"
            )));
        }
        let spacing = 2.0 * half_width / points_per_axis as f64;
        Ok(Self {
            dim,
            half_width: spacing * points_per_axis as f64 / 2.0,
            points_per_axis,
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Node spacing `h = 2L / n`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Frequency lattice spacing `π / L`.
    pub fn freq_spacing(&self) -> f64 {
        PI / self.half_width
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Node coordinates along one axis.
    pub fn axis_coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points_per_axis)
            .map(|i| -self.half_width + i as f64 * h)
            .collect()
    }

    /// Angular frequencies along one axis in FFT order.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let dxi = self.freq_spacing();
        (0..n).map(|i| signed_index(i, n) as f64 * dxi).collect()
    }

    /// Per-axis node indices of a flat index.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        let n = self.points_per_axis;
        for slot in out.iter_mut().rev() {
            *slot = flat % n;
            flat /= n;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    /// Physical position of a node.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        self.unravel(flat, &mut idx);
        let h = self.spacing();
        idx.iter()
            .map(|&i| -self.half_width + i as f64 * h)
            .collect()
    }

    /// Flat index of the node at the origin.
    pub fn origin_index(&self) -> usize {
        self.ravel(&vec![self.points_per_axis / 2; self.dim])
    }

    /// Calls `visit(flat, x)` for every node in index order.
    pub fn for_each_node(&self, mut visit: impl FnMut(usize, &[f64])) {
        let coords = self.axis_coords();
        let mut idx = vec![0usize; self.dim];
        let mut x: Vec<f64> = vec![coords[0]; self.dim];
        for flat in 0..self.len() {
            visit(flat, &x);
            for a in (0..self.dim).rev() {
                idx[a] += 1;
                if idx[a] < self.points_per_axis {
                    x[a] = coords[idx[a]];
                    break;
                }
                idx[a] = 0;
                x[a] = coords[0];
            }
        }
    }

    /// `|x|` at every node.
    pub fn radii(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each_node(|_, x| out.push(norm(x)));
        out
    }

    /// `|ξ|²` at every frequency in FFT order.
    pub fn frequency_norms_sq(&self) -> Vec<f64> {
        let freqs: Vec<f64> = self.axis_frequencies().iter().map(|k| k * k).collect();
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0usize; self.dim];
        for (flat, slot) in out.iter_mut().enumerate() {
            self.unravel(flat, &mut idx);
            *slot = idx.iter().map(|&i| freqs[i]).sum();
        }
        out
    }

    /// Concentric grid with the same spacing and `points_per_axis` nodes.
    pub fn concentric(&self, points_per_axis: usize) -> Result<Self, GridError> {
        let h = self.spacing();
        let grid = Self::new(self.dim, h * points_per_axis as f64 / 2.0, points_per_axis)?;
        Ok(grid)
    }
}

/// Which space a field's samples live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Samples at `x_j = -L + j h`.
    Space,
    /// Samples at `ξ_m = m Δξ`, `m ∈ [-n/2, n/2)`, stored in centered order.
    Frequency,
}

/// Complex samples on a grid, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    domain: Domain,
    values: Vec<Complex64>,
    real: bool,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            domain: Domain::Space,
            values: vec![Complex64::default(); grid.len()],
            real: true,
        }
    }

    pub fn from_complex(grid: GridSpec, values: Vec<Complex64>) -> Result<Self, GridError> {
        check_len(&grid, values.len())?;
        Ok(Self {
            grid,
            domain: Domain::Space,
            values,
            real: false,
        })
    }

    pub fn from_real(grid: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        check_len(&grid, values.len())?;
        let values = values.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        Ok(Self {
            grid,
            domain: Domain::Space,
            values,
            real: true,
        })
    }

    pub fn from_fn_real(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        grid.for_each_node(|_, x| values.push(Complex64::new(f(x), 0.0)));
        Self {
            grid,
            domain: Domain::Space,
            values,
            real: true,
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        grid.for_each_node(|_, x| values.push(f(x)));
        Self {
            grid,
            domain: Domain::Space,
            values,
            real: false,
        }
    }

    /// Reassembles a field from stored samples. A real tag requires zero imaginary parts.
    pub fn from_parts(
        grid: GridSpec,
        domain: Domain,
        values: Vec<Complex64>,
        real: bool,
    ) -> Result<Self, GridError> {
        check_len(&grid, values.len())?;
        if real {
            if let Some(v) = values.iter().find(|v| v.im != 0.0) {
                return Err(GridError::ExpectedRealField(v.im.abs()));
            }
        }
        Ok(Self {
            grid,
            domain,
            values,
            real,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Real parts of the samples.
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Sets the realness tag after checking the imaginary parts are negligible.
    pub fn tag_real(mut self) -> Result<Self, GridError> {
        let max_re = self.values.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
        let max_im = self.values.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
        if max_im > REALNESS_TOL * (1.0 + max_re) {
            return Err(GridError::ExpectedRealField(max_im));
        }
        self.real = true;
        Ok(self)
    }

    /// Drops the imaginary parts.
    pub fn real_part(&self) -> Field {
        let values = self
            .values
            .iter()
            .map(|v| Complex64::new(v.re, 0.0))
            .collect();
        Self {
            grid: self.grid,
            domain: self.domain,
            values,
            real: true,
        }
    }

    pub fn require_real(&self) -> Result<(), GridError> {
        if self.real {
            Ok(())
        } else {
            let max_im = self.values.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
            Err(GridError::ExpectedRealField(max_im))
        }
    }

    pub fn require_same_grid(&self, other: &Field) -> Result<(), GridError> {
        if self.grid == other.grid && self.domain == other.domain {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }

    /// Measure of one sample: `h^N` in space, `Δξ^N` in frequency.
    pub fn cell_volume(&self) -> f64 {
        match self.domain {
            Domain::Space => self.grid.cell_volume(),
            Domain::Frequency => self.grid.freq_spacing().powi(self.grid.dim as i32),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        let values = self.values.iter().map(|v| v * alpha).collect();
        Self {
            values,
            ..self.clone()
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field, GridError> {
        self.require_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            domain: self.domain,
            values,
            real: self.real && other.real,
        })
    }

    /// Pointwise map; the result is real-tagged iff `keeps_real` and the input is.
    pub fn map(&self, keeps_real: bool, f: impl Fn(Complex64) -> Complex64) -> Field {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self {
            grid: self.grid,
            domain: self.domain,
            values,
            real: self.real && keeps_real,
        }
    }

    /// Zero extension onto a larger concentric grid with the same spacing.
    pub fn zero_padded(&self, target: GridSpec) -> Result<Field, GridError> {
        let (n, m) = (self.grid.points_per_axis, target.points_per_axis);
        let same_spacing = (target.spacing - self.grid.spacing).abs() <= 1e-12 * self.grid.spacing;
        if target.dim != self.grid.dim || m < n || (m - n) % 2 != 0 || !same_spacing {
            return Err(GridError::GridMismatch);
        }
        let off = (m - n) / 2;
        let mut out = vec![Complex64::default(); target.len()];
        let mut idx = vec![0usize; self.grid.dim];
        for (flat, v) in self.values.iter().enumerate() {
            self.grid.unravel(flat, &mut idx);
            idx.iter_mut().for_each(|i| *i += off);
            out[target.ravel(&idx)] = *v;
        }
        Ok(Self {
            grid: target,
            values: out,
            ..self.clone()
        })
    }

    /// Cyclic translation by whole nodes: `out[j] = self[j - shift]`.
    pub fn translated(&self, shift: &[i64]) -> Field {
        let n = self.grid.points_per_axis as i64;
        let dim = self.grid.dim;
        assert_eq!(shift.len(), dim, "shift has wrong dimension");
        let mut out = vec![Complex64::default(); self.values.len()];
        let mut idx = vec![0usize; dim];
        let mut src = vec![0usize; dim];
        for (flat, slot) in out.iter_mut().enumerate() {
            self.grid.unravel(flat, &mut idx);
            for a in 0..dim {
                src[a] = (idx[a] as i64 - shift[a]).rem_euclid(n) as usize;
            }
            *slot = self.values[self.grid.ravel(&src)];
        }
        Self {
            values: out,
            ..self.clone()
        }
    }
}

fn check_len(grid: &GridSpec, got: usize) -> Result<(), GridError> {
    if got == grid.len() {
        Ok(())
    } else {
        Err(GridError::WrongLength {
            expected: grid.len(),
            got,
        })
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_exponent(s: f64) -> Result<(), GridError> {
    if s.is_finite() && s > 1.0 {
        Ok(())
    } else {
        Err(GridError::InvalidExponent(s))
    }
}

/// Neumaier-compensated sum, accurate to a few ulps of the total regardless
/// of the number of terms.
pub(crate) fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for x in terms {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + carry
}

/// Discrete `‖f‖_s = (h^N Σ |f|^s)^{1/s}`.
pub fn lp_norm(f: &Field, s: f64) -> Result<f64, GridError> {
    check_exponent(s)?;
    let sum = if s == 2.0 {
        compensated_sum(f.values.iter().map(|v| v.norm_sqr()))
    } else {
        compensated_sum(f.values.iter().map(|v| v.norm().powf(s)))
    };
    Ok((f.cell_volume() * sum).powf(1.0 / s))
}

/// Discrete `‖v‖_s` of real samples with cell volume `dv`.
pub(crate) fn lp_norm_real(values: &[f64], s: f64, dv: f64) -> f64 {
    let sum = compensated_sum(values.iter().map(|v| v.abs().powf(s)));
    (dv * sum).powf(1.0 / s)
}

/// Real pairing `h^N Σ Re f · Re g` of two real-tagged fields.
pub fn pairing(f: &Field, g: &Field) -> Result<f64, GridError> {
    f.require_same_grid(g)?;
    f.require_real()?;
    g.require_real()?;
    let sum = compensated_sum(f.values.iter().zip(&g.values).map(|(a, b)| a.re * b.re));
    Ok(f.cell_volume() * sum)
}

pub(crate) fn pairing_real(a: &[f64], b: &[f64], dv: f64) -> f64 {
    dv * compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Transform direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Discretized `f̂(ξ) = (2π)^{-N/2} ∫ f(x) e^{-i x·ξ} dx` and its inverse.
///
/// Forward output lives in [`Domain::Frequency`] with centered ordering;
/// the inverse expects such a field and returns a spatial one.
pub fn spectral_transform(f: &Field, direction: Direction) -> Result<Field, GridError> {
    let grid = f.grid;
    let n = grid.points_per_axis;
    let dim = grid.dim;
    let plan = CubeFft::new(n, dim);
    let norm = (2.0 * PI).powf(-(dim as f64) / 2.0);
    let mut idx = vec![0usize; dim];
    let mut moved = vec![0usize; dim];
    let parity = |idx: &[usize]| -> f64 {
        if idx.iter().sum::<usize>() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    match direction {
        Direction::Forward => {
            if f.domain != Domain::Space {
                return Err(GridError::GridMismatch);
            }
            let mut work = f.values.clone();
            plan.forward(&mut work);
            let scale = norm * grid.cell_volume();
            let mut out = vec![Complex64::default(); work.len()];
            for (flat, v) in work.iter().enumerate() {
                grid.unravel(flat, &mut idx);
                for a in 0..dim {
                    moved[a] = (idx[a] + n / 2) % n;
                }
                // e^{iLξ_m} = (-1)^m along each axis
                out[grid.ravel(&moved)] = v * (scale * parity(&idx));
            }
            Ok(Field {
                grid,
                domain: Domain::Frequency,
                values: out,
                real: false,
            })
        }
        Direction::Inverse => {
            if f.domain != Domain::Frequency {
                return Err(GridError::GridMismatch);
            }
            let mut work = vec![Complex64::default(); f.values.len()];
            for (flat, v) in f.values.iter().enumerate() {
                grid.unravel(flat, &mut idx);
                for a in 0..dim {
                    moved[a] = (idx[a] + n / 2) % n;
                }
                work[grid.ravel(&moved)] = *v * parity(&moved);
            }
            plan.inverse(&mut work);
            let scale = norm * grid.freq_spacing().powi(dim as i32);
            for v in work.iter_mut() {
                *v *= scale;
            }
            Ok(Field {
                grid,
                domain: Domain::Space,
                values: work,
                real: false,
            })
        }
    }
}

/// Minimal-image displacement of `x - c` on the torus, one axis.
pub(crate) fn wrap(d: f64, half_width: f64) -> f64 {
    let period = 2.0 * half_width;
    let mut w = (d + half_width).rem_euclid(period) - half_width;
    if w >= half_width {
        w -= period;
    }
    w
}

/// `h^N Σ_{|x - c| ≤ ρ} |f(x)|^s` with torus distance.
pub fn ball_integral(f: &Field, center: &[f64], radius: f64, power: f64) -> Result<f64, GridError> {
    let grid = f.grid;
    if center.len() != grid.dim {
        return Err(GridError::InvalidGrid("center has wrong dimension".into()));
    }
    if !(radius > 0.0) || radius > grid.half_width {
        return Err(GridError::RadiusExceedsBox {
            radius,
            limit: grid.half_width,
        });
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(GridError::InvalidExponent(power));
    }
    let r2 = radius * radius;
    let mut sum = 0.0;
    grid.for_each_node(|flat, x| {
        let d2: f64 = x
            .iter()
            .zip(center)
            .map(|(xi, ci)| {
                let d = wrap(xi - ci, grid.half_width);
                d * d
            })
            .sum();
        if d2 <= r2 {
            sum += f.values[flat].norm().powf(power);
        }
    });
    Ok(grid.cell_volume() * sum)
}

/// Spectral Laplacian `Δf` on the torus.
pub fn spectral_laplacian(f: &Field) -> Field {
    let grid = f.grid;
    let plan = CubeFft::new(grid.points_per_axis, grid.dim);
    let xi2 = grid.frequency_norms_sq();
    let mut work = f.values.clone();
    plan.forward(&mut work);
    let scale = 1.0 / grid.len() as f64;
    for (v, k2) in work.iter_mut().zip(&xi2) {
        *v *= -k2 * scale;
    }
    plan.inverse(&mut work);
    finish_real(f, work)
}

/// Spectral gradient on the torus, one field per axis. Nyquist modes are dropped.
pub fn spectral_gradient(f: &Field) -> Vec<Field> {
    let grid = f.grid;
    let n = grid.points_per_axis;
    let plan = CubeFft::new(n, grid.dim);
    let freqs = grid.axis_frequencies();
    let mut spectrum = f.values.clone();
    plan.forward(&mut spectrum);
    let scale = 1.0 / grid.len() as f64;
    let mut idx = vec![0usize; grid.dim];
    (0..grid.dim)
        .map(|axis| {
            let mut work = spectrum.clone();
            for (flat, v) in work.iter_mut().enumerate() {
                grid.unravel(flat, &mut idx);
                let k = if idx[axis] == n / 2 {
                    0.0
                } else {
                    freqs[idx[axis]]
                };
                *v *= Complex64::new(0.0, k * scale);
            }
            plan.inverse(&mut work);
            finish_real(f, work)
        })
        .collect()
}

fn finish_real(input: &Field, mut values: Vec<Complex64>) -> Field {
    if input.real {
        for v in values.iter_mut() {
            v.im = 0.0;
        }
    }
    Field {
        grid: input.grid,
        domain: input.domain,
        values,
        real: input.real,
    }
}

/// Radial step `½ erfc((r − m)/w)` with `m` the midpoint of `[inner, outer]` and
/// `w = (outer − inner)/8`. It differs from 1 on `r ≤ inner`, and from 0 on
/// `r ≥ outer`, by less than 10⁻⁸, and its spectrum decays like a Gaussian.
pub fn gaussian_window(r: f64, inner: f64, outer: f64) -> f64 {
    let mid = 0.5 * (inner + outer);
    let width = (outer - inner) / 8.0;
    0.5 * libm::erfc((r - mid) / width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize, l: f64) -> GridSpec {
        GridSpec::new(3, l, n).unwrap()
    }

    fn random_field(grid: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Field::from_complex(grid, values).unwrap()
    }

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let terms = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(terms.iter().sum::<f64>(), 0.0);
        assert_eq!(compensated_sum(terms.into_iter()), 2.0);
        let tenths = std::iter::repeat_n(0.1, 1_000_000);
        assert!((compensated_sum(tenths) - 100_000.0).abs() < 1e-10);
    }

    #[test]
    fn zero_padding_keeps_positions() {
        let g = cube(8, 2.0);
        let f = random_field(g, 4);
        let big = g.concentric(12).unwrap();
        let p = f.zero_padded(big).unwrap();
        for (flat, v) in f.values().iter().enumerate() {
            let x = g.position(flat);
            let near = (0..big.len())
                .find(|&j| {
                    big.position(j)
                        .iter()
                        .zip(&x)
                        .all(|(a, b)| (a - b).abs() < 1e-12)
                })
                .unwrap();
            assert_eq!(p.values()[near], *v);
        }
        let mass: f64 = p.values().iter().map(|v| v.norm_sqr()).sum();
        let orig: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
        assert!((mass - orig).abs() <= 1e-12 * orig);
        assert_eq!(p.zero_padded(g).unwrap_err(), GridError::GridMismatch);
        assert_eq!(
            f.zero_padded(cube(12, 2.0)).unwrap_err(),
            GridError::GridMismatch
        );
    }

    #[test]
    fn spacing_times_count_is_exact() {
        for &(l, n) in &[
            (10.0, 48),
            (0.1, 10),
            (7.3, 64),
            (12.0, 48),
            (1.0 / 3.0, 22),
        ] {
            let g = GridSpec::new(3, l, n).unwrap();
            assert_eq!(g.spacing() * n as f64, 2.0 * g.half_width());
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(2, 1.0, 8).is_err());
        assert!(GridSpec::new(3, 1.0, 7).is_err());
        assert!(GridSpec::new(3, 1.0, 6).is_err());
        assert!(GridSpec::new(3, -1.0, 8).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = cube(16, 1.0);
        assert_eq!(lp_norm(&Field::zeros(g), 1.25).unwrap(), 0.0);
        let ones = Field::from_fn_real(g, |_| 1.0);
        assert!((lp_norm(&ones, 1.25).unwrap() - 8f64.powf(0.8)).abs() < 1e-12);
        let g = cube(16, PI);
        let c = Field::from_fn_real(g, |x| (2.0 * x[0]).cos());
        let expect = ((2.0 * PI).powi(3) / 2.0).sqrt();
        assert!((lp_norm(&c, 2.0).unwrap() - expect).abs() < 1e-10);
        assert!(matches!(
            lp_norm(&c, 1.0),
            Err(GridError::InvalidExponent(_))
        ));
    }

    #[test]
    fn pairing_examples() {
        let g = cube(16, PI);
        let c2 = Field::from_fn_real(g, |x| (2.0 * x[0]).cos());
        let c4 = Field::from_fn_real(g, |x| (4.0 * x[0]).cos());
        assert_eq!(pairing(&c2, &Field::zeros(g)).unwrap(), 0.0);
        assert!((pairing(&c2, &c2).unwrap() - (2.0 * PI).powi(3) / 2.0).abs() < 1e-9);
        assert!(pairing(&c2, &c4).unwrap().abs() < 1e-10);
        let other = Field::zeros(cube(8, PI));
        assert_eq!(pairing(&c2, &other), Err(GridError::GridMismatch));
    }

    #[test]
    fn delta_transform_is_flat() {
        let g = cube(16, 3.0);
        let mut values = vec![Complex64::default(); g.len()];
        values[g.origin_index()] = Complex64::new(1.0 / g.cell_volume(), 0.0);
        let f = Field::from_complex(g, values).unwrap();
        let hat = spectral_transform(&f, Direction::Forward).unwrap();
        let c = (2.0 * PI).powf(-1.5);
        for v in hat.values() {
            assert!((v - Complex64::new(c, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = cube(48, 8.0);
        let f = Field::from_fn_real(g, |x| {
            (-0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let hat = spectral_transform(&f, Direction::Forward).unwrap();
        let dxi = g.freq_spacing();
        let n = g.points_per_axis();
        let mut idx = [0usize; 3];
        for (flat, v) in hat.values().iter().enumerate() {
            g.unravel(flat, &mut idx);
            let k2: f64 = idx
                .iter()
                .map(|&i| ((i as f64 - (n / 2) as f64) * dxi).powi(2))
                .sum();
            assert!((v.re - (-0.5 * k2).exp()).abs() < 1e-10 && v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = cube(12, 2.5);
        let f = random_field(g, 3);
        let hat = spectral_transform(&f, Direction::Forward).unwrap();
        let back = spectral_transform(&hat, Direction::Inverse).unwrap();
        let err = lp_norm(&back.combine(1.0, &f, -1.0).unwrap(), 2.0).unwrap();
        let size = lp_norm(&f, 2.0).unwrap();
        assert!(err <= 1e-12 * size);
        let parseval = lp_norm(&hat, 2.0).unwrap();
        assert!((parseval - size).abs() <= 1e-12 * size);
    }

    #[test]
    fn ball_integral_examples() {
        let g = cube(40, 2.0);
        let ones = Field::from_fn_real(g, |_| 1.0);
        let vol = ball_integral(&ones, &[0.0; 3], 1.0, 1.0).unwrap();
        assert!((vol - 4.0 * PI / 3.0).abs() < 0.3);
        let y0 = [0.5, -0.5, 0.25];
        let ind = Field::from_fn_real(g, |x| {
            let d: f64 = x.iter().zip(&y0).map(|(a, b)| (a - b) * (a - b)).sum();
            if d <= 0.64 {
                1.0
            } else {
                0.0
            }
        });
        let v = ball_integral(&ind, &y0, 0.8, 2.0).unwrap();
        assert!((v - 4.0 * PI * 0.512 / 3.0).abs() < 0.2);
        let far = Field::from_fn_real(g, |x| if x[0] > 1.5 { 1.0 } else { 0.0 });
        assert_eq!(ball_integral(&far, &[0.0; 3], 1.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            ball_integral(&ones, &[0.0; 3], 2.5, 1.0),
            Err(GridError::RadiusExceedsBox { .. })
        ));
    }

    #[test]
    fn ball_uses_minimal_image() {
        let g = cube(16, 2.0);
        let f = Field::from_fn_real(g, |x| if x[0] < -1.6 { 1.0 } else { 0.0 });
        assert!(ball_integral(&f, &[1.9, 0.0, 0.0], 0.6, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn laplacian_of_mode() {
        let g = cube(16, PI);
        let f = Field::from_fn_real(g, |x| (2.0 * x[0]).cos() * x[1].sin());
        let lap = spectral_laplacian(&f);
        for (a, b) in lap.values().iter().zip(f.values()) {
            assert!((a.re + 5.0 * b.re).abs() < 1e-12);
        }
        let grad = spectral_gradient(&f);
        let expect = Field::from_fn_real(g, |x| -2.0 * (2.0 * x[0]).sin() * x[1].sin());
        for (a, b) in grad[0].values().iter().zip(expect.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn translation_is_a_permutation() {
        let g = cube(8, 1.0);
        let f = random_field(g, 9);
        let t = f.translated(&[3, -1, 8]);
        let back = t.translated(&[-3, 1, -8]);
        assert_eq!(back, f);
        let (a, b) = (lp_norm(&t, 1.7).unwrap(), lp_norm(&f, 1.7).unwrap());
        assert!((a - b).abs() <= 1e-14 * b);
    }

    #[test]
    fn window_is_a_smooth_step() {
        assert!(1.0 - gaussian_window(1.0, 1.0, 2.0) < 1e-8);
        assert!(gaussian_window(2.0, 1.0, 2.0) < 1e-8);
        assert!((gaussian_window(1.5, 1.0, 2.0) - 0.5).abs() < 1e-15);
    }
}
