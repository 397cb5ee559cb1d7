//! Small numerically-stable helpers shared across modules.

/// Compensated (Kahan) summation. Used wherever a mass balance must hold to
/// 1e-10 over millions of terms; naive `iter().sum()` drifts past that.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Stable `log(sum(exp(x_i)))` via the shift-by-max trick.
/// Returns `-inf` for an empty slice or when every entry is `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max; // all -inf (or an inf/nan already present)
    }
    let s = kahan_sum(values.iter().map(|&x| (x - max).exp()));
    max + s.ln()
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via erfc; |error| < 1.2e-16 relative on the erf core.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function. Maclaurin series below |x| = 3 (absolute
/// error there is bounded by e^{x^2}*eps < 2e-12), Lentz continued fraction
/// beyond (relative error < 1e-14).
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x <= 3.0 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..80 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-20 * sum.abs().max(1e-300) {
                break;
            }
        }
        1.0 - sum * 2.0 / std::f64::consts::PI.sqrt()
    } else {
        // erfc(x) = e^{-x^2}/(x sqrt(pi)) * K, K the classic continued
        // fraction 1/(1+ (1/2)/(x^2 + ...)) evaluated by modified Lentz.
        let x2 = x * x;
        let tiny = 1e-300;
        let mut f = tiny;
        let mut c = f;
        let mut d = 0.0;
        // Convergents of 1/(x + (1/2)/(x + (2/2)/(x + ...))) times x.
        for i in 0..200 {
            let (a, b) = if i == 0 { (1.0, x) } else { (i as f64 / 2.0, x) };
            d = b + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x2).exp() / std::f64::consts::PI.sqrt() * f
    }
}

/// Inverse standard normal CDF (Acklam's rational approximation followed by
/// one Halley refinement; |abs err| < 1e-13 over (0,1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile domain");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    let x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement against the exact CDF.
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Fixed 64-node Gauss-Legendre rule on [a, b].
pub fn gauss_legendre_64(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gl64();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for i in 0..64 {
        acc += weights[i] * f(mid + half * nodes[i]);
    }
    acc * half
}

fn gl64() -> (&'static [f64; 64], &'static [f64; 64]) {
    use std::sync::OnceLock;
    static TABLE: OnceLock<([f64; 64], [f64; 64])> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        // Newton iteration on Legendre P_64; standard construction.
        let n = 64usize;
        let mut nodes = [0.0f64; 64];
        let mut weights = [0.0f64; 64];
        for i in 0..(n + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (p, dp) = legendre_and_deriv(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_and_deriv(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    });
    (&t.0, &t.1)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Mean and standard error of a sample.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = kahan_sum(samples.iter().copied()) / m;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = kahan_sum(samples.iter().map(|&x| (x - mean) * (x - mean))) / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive() {
        let xs = [-1.0, -2.0, -3.0];
        let naive = ((-1.0f64).exp() + (-2.0f64).exp() + (-3.0f64).exp()).ln();
        assert!((logsumexp(&xs) - naive).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_shifted_large() {
        let xs = [1000.0, 1001.0, 1002.0];
        let expect = 1002.0 + (1.0f64 + (-1.0f64).exp() + (-2.0f64).exp()).ln();
        assert!((logsumexp(&xs) - expect).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_empty_and_neg_inf() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((logsumexp(&[f64::NEG_INFINITY, 0.0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn kahan_beats_naive_on_mass_balance() {
        let n = 4_000_000usize;
        let v = 1.0 / n as f64;
        let s = kahan_sum((0..n).map(|_| v));
        assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn normal_cdf_known_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-10);
        assert!((normal_cdf(-2.0) - 0.022750131948179195).abs() < 1e-10);
    }

    #[test]
    fn quantile_roundtrips_cdf() {
        for &p in &[1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-6] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-11, "p={p}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_gaussian() {
        let v = gauss_legendre_64(|x| (-0.5 * x * x).exp(), -8.0, 8.0);
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }
}
