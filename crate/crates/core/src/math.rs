//! Special functions and small numerical helpers.
//!
//! Everything here is built on `libm` so the crate stays `no_std`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn logit(p: f64) -> f64 {
    ln(p / (1.0 - p))
}

#[inline]
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let two_pi = 2.0 * PI;
    let mut y = libm::fmod(x + PI, two_pi);
    if y <= 0.0 {
        y += two_pi;
    }
    y - PI
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + ln(values.iter().map(|v| exp(v - m)).sum::<f64>())
}

/// Digamma via upward recurrence and the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    if x <= 0.0 && x == libm::floor(x) {
        return f64::NAN;
    }
    let mut acc = 0.0;
    if x < 0.0 {
        // reflection
        return digamma(1.0 - x) - PI / libm::tan(PI * x);
    }
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + ln(x)
        - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

/// Regularized lower incomplete gamma function P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 − P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let log_prefix = a * ln(x) - x - ln_gamma(a);
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum * exp(log_prefix)).min(1.0)
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    // modified Lentz
    const TINY: f64 = 1e-300;
    let log_prefix = a * ln(x) - x - ln_gamma(a);
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (exp(log_prefix) * h).clamp(0.0, 1.0)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile: rational approximation refined by one Halley step.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = sqrt(-2.0 * ln(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = sqrt(-2.0 * ln(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement; the upper tail is refined on the complement to keep precision
    let e = if x > 0.0 {
        (1.0 - p) - 0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
    } else {
        0.5 * libm::erfc(-x / core::f64::consts::SQRT_2) - p
    };
    let u = e * sqrt(2.0 * PI) * exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

const BESSEL_SERIES_LIMIT: f64 = 100.0;

/// ln I0(κ) for κ ≥ 0.
pub fn ln_bessel_i0(k: f64) -> f64 {
    if k < BESSEL_SERIES_LIMIT {
        let q = 0.25 * k * k;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut m = 0.0;
        loop {
            m += 1.0;
            term *= q / (m * m);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        ln(sum)
    } else {
        let z = 1.0 / k;
        let series = 1.0
            + z * (0.125 + z * (0.070_312_5 + z * (0.073_242_187_5 + z * 0.112_152_099_609_375)));
        k - 0.5 * ln(2.0 * PI * k) + ln(series)
    }
}

/// I1(κ)/I0(κ) for κ ≥ 0.
pub fn bessel_i1_i0_ratio(k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    if k < BESSEL_SERIES_LIMIT {
        let q = 0.25 * k * k;
        let mut t0 = 1.0;
        let mut s0 = 1.0;
        let mut t1 = 1.0;
        let mut s1 = 1.0;
        let mut m = 0.0;
        loop {
            m += 1.0;
            t0 *= q / (m * m);
            t1 *= q / (m * (m + 1.0));
            s0 += t0;
            s1 += t1;
            if t0 < s0 * 1e-17 && t1 < s1 * 1e-17 {
                break;
            }
        }
        0.5 * k * s1 / s0
    } else {
        let z = 1.0 / k;
        let s0 = 1.0
            + z * (0.125 + z * (0.070_312_5 + z * (0.073_242_187_5 + z * 0.112_152_099_609_375)));
        let s1 = 1.0
            - z * (0.375 + z * (0.117_187_5 + z * (0.102_539_062_5 + z * 0.144_195_556_640_625)));
        s1 / s0
    }
}

/// Adaptive Simpson quadrature of `f` over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // split into panels first so narrow peaks are not missed
    let panels = 64;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + h * i as f64;
        let hi = if i + 1 == panels { b } else { lo + h };
        let fa = f(lo);
        let fb = f(hi);
        let fm = f(0.5 * (lo + hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Solves `x A = b` for a row vector `x` (A is n×n row-major) by Gaussian
/// elimination with partial pivoting. Returns `None` when A is singular.
pub fn solve_left(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    // x A = b  <=>  Aᵀ xᵀ = bᵀ
    let mut m = vec![0.0; n * (n + 1)];
    for i in 0..n {
        for j in 0..n {
            m[i * (n + 1) + j] = a[j * n + i];
        }
        m[i * (n + 1) + n] = b[i];
    }
    let w = n + 1;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * w + col].abs().total_cmp(&m[s * w + col].abs()))
            .unwrap();
        if m[pivot * w + col].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for j in 0..w {
                m.swap(pivot * w + j, col * w + j);
            }
        }
        let p = m[col * w + col];
        for r in (col + 1)..n {
            let factor = m[r * w + col] / p;
            if factor != 0.0 {
                for j in col..w {
                    m[r * w + j] -= factor * m[col * w + j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i * w + n];
        for j in (i + 1)..n {
            s -= m[i * w + j] * x[j];
        }
        x[i] = s / m[i * w + i];
    }
    Some(x)
}

/// Inverse of an n×n row-major matrix.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    // row i of A⁻¹ solves x A = e_i
    let mut e = vec![0.0; n];
    for i in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[i] = 1.0;
        let row = solve_left(a, &e, n)?;
        inv[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digamma_known_values() {
        // ψ(1) = −γ
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-13);
        // ψ(1/2) = −γ − 2 ln 2
        assert!((digamma(0.5) + 1.963_510_026_021_423_5).abs() < 1e-13);
        // numerical derivative of ln Γ
        for &x in &[0.07f64, 0.7, 2.5, 13.0, 48.0] {
            let h = 1e-5 * x.max(1.0);
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((digamma(x) - fd).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn incomplete_gamma_exponential_case() {
        for &x in &[0.01, 0.5, 1.0, 3.0, 20.0] {
            assert!((gamma_p(1.0, x) - (1.0 - exp(-x))).abs() < 1e-14);
        }
        for &(a, x) in &[(0.7, 0.3), (2.5, 1.2), (2.5, 9.0), (40.0, 35.0)] {
            assert!((gamma_p(a, x) + gamma_q(a, x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-14, "p={p}");
        }
        for &p in &[1e-12, 1e-8, 1e-4] {
            let x = normal_quantile(p);
            assert!(((normal_cdf(x) - p) / p).abs() < 1e-9);
            let y = normal_quantile(1.0 - p);
            assert!((x + y).abs() < 1e-4 * x.abs());
        }
    }

    #[test]
    fn bessel_matches_integral_representation() {
        // I0(k) = (1/π) ∫_0^π exp(k cos θ) dθ, evaluated relative to e^k
        for &k in &[0.0, 0.3, 2.0, 15.0, 80.0, 99.9, 100.1, 250.0] {
            let scaled = integrate(&|t: f64| exp(k * (libm::cos(t) - 1.0)), 0.0, PI, 1e-14) / PI;
            let expected = k + ln(scaled);
            assert!((ln_bessel_i0(k) - expected).abs() < 1e-10, "k={k}");
            let i1 = integrate(&|t: f64| libm::cos(t) * exp(k * (libm::cos(t) - 1.0)), 0.0, PI, 1e-14)
                / PI;
            if k > 0.0 {
                assert!((bessel_i1_i0_ratio(k) - i1 / scaled).abs() < 1e-10, "k={k}");
            }
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn solve_left_small_system() {
        // x [[2,1],[1,3]] = [3,5]  ->  2x0 + x1 = 3, x0 + 3x1 = 5
        let x = solve_left(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_left(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_none());
    }
}
