//! Hankel functions of the first kind `H^{(1)}_ν` for integer and
//! half-integer order, indexed by `2ν`.

use crate::special::gamma_half;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

/// Below this argument the ascending series is used, above it the large-argument expansion.
pub const SERIES_SWITCHOVER: f64 = 14.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `H^{(1)}_ν(s)` with `ν = two_nu / 2`. Half-integer orders use the terminating
/// form; integer orders choose the path by argument size.
pub fn hankel1(two_nu: u32, s: f64) -> Complex64 {
    if two_nu % 2 == 1 {
        hankel1_half_integer(two_nu, s)
    } else if s < SERIES_SWITCHOVER {
        hankel1_series(two_nu, s)
    } else {
        hankel1_asymptotic(two_nu, s)
    }
}

/// Terminating expansion, valid for half-integer order only:
/// `H_{l+1/2}(s) = sqrt(2/(πs)) e^{i(s-(l+1)π/2)} Σ_k i^k (l+k)! / (k!(l-k)!(2s)^k)`.
pub fn hankel1_half_integer(two_nu: u32, s: f64) -> Complex64 {
    assert!(two_nu % 2 == 1, "closed form needs half-integer order");
    let l = (two_nu as u64 - 1) / 2;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut coef = 1.0;
    let mut ik = Complex64::new(1.0, 0.0);
    for k in 0..=l {
        if k > 0 {
            coef *= ((l + k) * (l - k + 1)) as f64 / (k as f64 * 2.0 * s);
            ik *= Complex64::i();
        }
        sum += ik * coef;
    }
    let phase = s - (l + 1) as f64 * FRAC_PI_2;
    Complex64::from_polar((2.0 / (PI * s)).sqrt(), phase) * sum
}

/// `J_ν(s)` by its ascending series for `ν = two_nu / 2`, `two_nu` possibly negative odd.
fn bessel_j_series(two_nu: i32, s: f64) -> f64 {
    let nu = two_nu as f64 / 2.0;
    let half = s / 2.0;
    let g = gamma_of_half(two_nu + 2);
    let mut term = half.powf(nu) / g;
    let mut sum = term;
    let q = -half * half;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nu));
        sum += term;
        if k > s && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
        if k > 400.0 {
            break;
        }
    }
    sum
}

/// `Γ(k/2)` for any nonzero integer `k` that is not a nonpositive even number.
fn gamma_of_half(k: i32) -> f64 {
    if k > 0 {
        gamma_half(k as u32)
    } else {
        gamma_of_half(k + 2) / (k as f64 / 2.0)
    }
}

/// `J_n` and `Y_n` of integer order by ascending series.
fn bessel_jy_integer(n: u32, s: f64) -> (f64, f64) {
    let half = s / 2.0;
    let j = bessel_j_series(2 * n as i32, s);
    let mut finite = 0.0;
    if n > 0 {
        // Σ_{k<n} (n-k-1)!/k! (s/2)^{2k-n}
        let mut fact_num: f64 = (1..n).map(|v| v as f64).product();
        let mut fact_den = 1.0;
        for k in 0..n {
            if k > 0 {
                fact_num /= (n - k) as f64;
                fact_den *= k as f64;
            }
            finite += fact_num / fact_den * half.powi(2 * k as i32 - n as i32);
        }
    }
    let digamma = |m: u32| -> f64 { -EULER_GAMMA + (1..m).map(|j| 1.0 / j as f64).sum::<f64>() };
    let nfact: f64 = (1..=n).map(|v| v as f64).product();
    let mut term = half.powi(n as i32) / nfact;
    let q = -half * half;
    let mut psi_a = digamma(1);
    let mut psi_b = digamma(n + 1);
    let mut series = term * (psi_a + psi_b);
    let mut k = 0u32;
    loop {
        k += 1;
        term *= q / (k as f64 * (k + n) as f64);
        psi_a += 1.0 / k as f64;
        psi_b += 1.0 / (k + n) as f64;
        let add = term * (psi_a + psi_b);
        series += add;
        if k as f64 > s && add.abs() < 1e-17 * series.abs().max(1e-300) {
            break;
        }
        if k > 400 {
            break;
        }
    }
    let y = 2.0 / PI * j * half.ln() - finite / PI - series / PI;
    (j, y)
}

/// Ascending-series evaluation `J_ν + i Y_ν`.
pub fn hankel1_series(two_nu: u32, s: f64) -> Complex64 {
    if two_nu.is_multiple_of(2) {
        let (j, y) = bessel_jy_integer(two_nu / 2, s);
        Complex64::new(j, y)
    } else {
        // Y_{l+1/2} = (-1)^{l+1} J_{-(l+1/2)}
        let l = (two_nu - 1) / 2;
        let j = bessel_j_series(two_nu as i32, s);
        let jm = bessel_j_series(-(two_nu as i32), s);
        let sign = if l.is_multiple_of(2) { -1.0 } else { 1.0 };
        Complex64::new(j, sign * jm)
    }
}

/// Large-argument expansion
/// `sqrt(2/(πs)) e^{i(s - νπ/2 - π/4)} Σ_k i^k a_k(ν) / s^k`, truncated at its
/// smallest term (at least six corrections when the series does not terminate).
pub fn hankel1_asymptotic(two_nu: u32, s: f64) -> Complex64 {
    let nu = two_nu as f64 / 2.0;
    let mu = 4.0 * nu * nu;
    let mut sum = Complex64::new(1.0, 0.0);
    let mut a = 1.0;
    let mut ik = Complex64::new(1.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 1..200u32 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * s);
        ik *= Complex64::i();
        let size = a.abs();
        if size == 0.0 {
            break;
        }
        if k > 6 && (size > prev || size < 1e-17) {
            break;
        }
        sum += ik * a;
        prev = size;
    }
    let phase = s - nu * FRAC_PI_2 - FRAC_PI_4;
    Complex64::from_polar((2.0 / (PI * s)).sqrt(), phase) * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    // H^{(1)}_1 at 50-digit working precision, rounded to 17 digits.
    #[allow(clippy::excessive_precision)]
    const H1_REFERENCE: &[(f64, f64, f64)] = &[
        (0.001, 0.000_499_999_937_500_002_6, -636.622_167_231_139_43),
        (0.5, 0.242_268_457_674_873_89, -1.471_472_392_670_243_1),
        (1.0, 0.440_050_585_744_933_52, -0.781_212_821_300_288_72),
        (3.0, 0.339_058_958_525_936_46, 0.324_674_424_791_799_98),
        (7.5, 0.135_248_427_579_705_51, -0.259_128_510_486_116_25),
        (8.0, 0.234_636_346_853_914_62, -0.158_060_461_731_247_49),
        (13.9, 0.116_524_890_369_056_33, -0.179_750_951_069_548_34),
        (14.1, 0.148_784_351_297_393_91, -0.151_981_333_467_817_67),
        (20.0, 0.066_833_124_175_850_046, -0.165_511_614_362_521_3),
        (
            100.0,
            -0.077_145_352_014_112_158,
            -0.020_372_312_002_759_793,
        ),
    ];

    #[test]
    fn order_one_matches_reference() {
        for &(s, re, im) in H1_REFERENCE {
            let h = hankel1(2, s);
            let r = Complex64::new(re, im);
            assert!((h - r).norm() <= 1e-10 * r.norm(), "s = {s}: {h} vs {r}");
        }
    }

    #[test]
    fn paths_agree_near_switchover() {
        for two_nu in [1u32, 2, 3, 4] {
            for &s in &[12.0, 14.0] {
                let a = hankel1_series(two_nu, s);
                let b = hankel1_asymptotic(two_nu, s);
                assert!((a - b).norm() <= 1e-9 * b.norm(), "2ν = {two_nu}, s = {s}");
            }
        }
    }

    #[test]
    fn half_integer_paths_agree() {
        for two_nu in [1u32, 3, 5] {
            for &s in &[0.01, 0.3, 2.0, 9.0, 13.0] {
                let a = hankel1_series(two_nu, s);
                let b = hankel1_half_integer(two_nu, s);
                assert!((a - b).norm() <= 1e-10 * b.norm(), "2ν = {two_nu}, s = {s}");
            }
        }
    }

    #[test]
    fn order_half_closed_form() {
        let s: f64 = 2.0;
        let h = hankel1_half_integer(1, s);
        let expect =
            Complex64::new(0.0, -1.0) * (2.0 / (PI * s)).sqrt() * Complex64::from_polar(1.0, s);
        assert!((h - expect).norm() < 1e-15);
    }
}
