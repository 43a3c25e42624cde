//! Normal-distribution special functions: error function, normal CDF and
//! quantile, and the bivariate-normal orthant probability.
//!
//! All routines are iterative (Maclaurin series, Lentz continued fraction,
//! Newton refinement, Gauss–Legendre quadrature) rather than fixed rational
//! approximations, so they reach working precision for both `f32` and `f64`.

use std::sync::OnceLock;

use crate::scalar::Real;

/// Error function via Maclaurin series, accurate for |x| <= 1.
fn erf_series<F: Real>(x: F) -> F {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1u32;
    loop {
        // term_{n} = term_{n-1} * (-x^2) / n, summand = term / (2n + 1)
        term = term * (-x2) / F::from_u32(n).unwrap();
        let summand = term / F::from_u32(2 * n + 1).unwrap();
        sum += summand;
        if summand.abs() <= sum.abs() * F::eps() || n > 60 {
            break;
        }
        n += 1;
    }
    sum * F::of(2.0) / F::pi().sqrt()
}

/// Scaled complementary error function `exp(x^2) * erfc(x)` for x >= 1,
/// via the Lentz evaluation of the classical continued fraction
/// `sqrt(pi) exp(x^2) erfc(x) = 1/(x+ (1/2)/(x+ (1)/(x+ (3/2)/(x+ ...))))`.
fn erfcx_cf<F: Real>(x: F) -> F {
    let tiny = F::of(1e-30);
    let mut f = x;
    let mut c = x;
    let mut d = F::zero();
    for j in 1..=300u32 {
        let a = F::from_u32(j).unwrap() / F::of(2.0);
        d = x + a * d;
        if d == F::zero() {
            d = tiny;
        }
        c = x + a / c;
        if c == F::zero() {
            c = tiny;
        }
        d = F::one() / d;
        let delta = c * d;
        f *= delta;
        if (delta - F::one()).abs() < F::eps() {
            break;
        }
    }
    F::one() / (f * F::pi().sqrt())
}

/// Error function.
pub fn erf<F: Real>(x: F) -> F {
    if x != x {
        return x;
    }
    let ax = x.abs();
    if ax <= F::one() {
        erf_series(x)
    } else {
        let tail = erfcx_cf(ax) * (-ax * ax).exp();
        let mag = F::one() - tail;
        if x > F::zero() {
            mag
        } else {
            -mag
        }
    }
}

/// Complementary error function `1 - erf(x)`.
pub fn erfc<F: Real>(x: F) -> F {
    if x != x {
        return x;
    }
    if x > F::one() {
        if x > F::of(30.0) {
            // exp(-x^2) underflows well before this for f32/f64
            return erfcx_cf(x) * (-x * x).exp();
        }
        erfcx_cf(x) * (-x * x).exp()
    } else if x < -F::one() {
        F::of(2.0) - erfc(-x)
    } else {
        F::one() - erf_series(x)
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)` for `x >= 0`.
pub fn erfcx<F: Real>(x: F) -> F {
    debug_assert!(x >= F::zero());
    if x >= F::one() {
        erfcx_cf(x)
    } else {
        (x * x).exp() * (F::one() - erf_series(x))
    }
}

/// Standard normal density.
pub fn norm_pdf<F: Real>(x: F) -> F {
    (-x * x / F::of(2.0)).exp() / F::two_pi().sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf<F: Real>(x: F) -> F {
    if x == F::infinity() {
        return F::one();
    }
    if x == F::neg_infinity() {
        return F::zero();
    }
    erfc(-x / F::of(2.0).sqrt()) / F::of(2.0)
}

/// Standard normal survival function `1 - CDF(x)`, precise in the right tail.
pub fn norm_sf<F: Real>(x: F) -> F {
    norm_cdf(-x)
}

/// Log of the standard normal CDF, stable deep into the left tail.
pub fn log_norm_cdf<F: Real>(x: F) -> F {
    if x > -F::one() {
        norm_cdf(x).ln()
    } else {
        // Phi(x) = 0.5 * erfcx(-x/sqrt2) * exp(-x^2/2)
        let y = -x / F::of(2.0).sqrt();
        (erfcx(y) / F::of(2.0)).ln() - x * x / F::of(2.0)
    }
}

/// Mills-ratio style quotient `Phi(x) / phi(x)`, stable for all x.
fn cdf_over_pdf<F: Real>(x: F) -> F {
    let y = -x / F::of(2.0).sqrt();
    if y >= F::zero() {
        // left half-line: both terms shrink together
        F::two_pi().sqrt() * erfcx(y) / F::of(2.0)
    } else {
        norm_cdf(x) / norm_pdf(x)
    }
}

/// Standard normal quantile (inverse CDF).
///
/// Uses a coarse rational initial guess refined by Newton iterations on
/// `log Phi`, which keeps full relative precision arbitrarily deep in the
/// tails. `p` must lie strictly inside (0, 1).
pub fn norm_quantile<F: Real>(p: F) -> F {
    assert!(
        p > F::zero() && p < F::one(),
        "norm_quantile requires p in (0, 1)"
    );
    let half = F::of(0.5);
    if p > half {
        return -norm_quantile(F::one() - p);
    }
    // Initial guess: Abramowitz-Stegun 26.2.23 (|error| < 4.5e-4).
    let t = (-F::of(2.0) * p.ln()).sqrt();
    let num = F::of(2.515517) + t * (F::of(0.802853) + t * F::of(0.010328));
    let den = F::one()
        + t * (F::of(1.432788) + t * (F::of(0.189269) + t * F::of(0.001308)));
    let mut x = -(t - num / den);
    let log_p = p.ln();
    for _ in 0..4 {
        let step = (log_norm_cdf(x) - log_p) * cdf_over_pdf(x);
        x -= step;
        if step.abs() <= x.abs() * F::eps() * F::of(4.0) {
            break;
        }
    }
    x
}

fn legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    // Newton iteration on P_n; nodes/weights for [-1, 1].
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let k = k as f64;
            let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out
}

fn gl64() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| legendre_nodes(64))
}

/// Orthant probability `P(Z1 > 0 and Z2 > 0)` for a bivariate normal with
/// means `(m1, m2)`, unit variances, and correlation `rho`.
///
/// Evaluated as `Phi(m1) Phi(m2)` plus the Plackett correction integral
/// over correlation, by 64-node Gauss-Legendre quadrature.
pub fn bvn_orthant<F: Real>(m1: F, m2: F, rho: F) -> F {
    debug_assert!(rho.abs() < F::one());
    if m1 == F::neg_infinity() || m2 == F::neg_infinity() {
        return F::zero();
    }
    if m1 == F::infinity() {
        return norm_cdf(m2);
    }
    if m2 == F::infinity() {
        return norm_cdf(m1);
    }
    let independent = norm_cdf(m1) * norm_cdf(m2);
    if rho == F::zero() {
        return independent;
    }
    // P(Z1 > 0, Z2 > 0) = P(E1 > a, E2 > b) with a = -m1, b = -m2.
    let a = -m1;
    let b = -m2;
    let half_rho = rho / F::of(2.0);
    let mut corr = F::zero();
    for &(node, weight) in gl64() {
        // map [-1, 1] -> [0, rho]
        let r = half_rho * (F::of(node) + F::one());
        let omr2 = F::one() - r * r;
        let q = (a * a - F::of(2.0) * r * a * b + b * b) / (F::of(2.0) * omr2);
        corr += F::of(weight) * (-q).exp() / omr2.sqrt();
    }
    corr *= half_rho / F::two_pi();
    (independent + corr).clamp(F::zero(), F::one())
}
