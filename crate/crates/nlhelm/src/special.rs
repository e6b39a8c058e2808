//! Gamma values at integers and half-integers, and sphere measures.

use std::f64::consts::PI;

/// `Γ(k/2)` for a positive integer `k`.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k > 0, "gamma_half needs a positive argument");
    let (mut value, mut twice) = if k.is_multiple_of(2) {
        (1.0, 2u32)
    } else {
        (PI.sqrt(), 1u32)
    };
    while twice < k {
        value *= twice as f64 / 2.0;
        twice += 2;
    }
    value
}

/// Surface area of the unit sphere in `R^dim`.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half(dim as u32)
}

/// Volume of the unit ball in `R^dim`.
pub fn ball_volume(dim: usize) -> f64 {
    sphere_area(dim) / dim as f64
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(8), 6.0);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((moment - 2.0 / 31.0).abs() < 1e-14);
    }
}
