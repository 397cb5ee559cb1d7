//! Seeded i.i.d. random field over lattice sites (n, x), its log moment
//! generating function lambda(beta) and derived quantities.
//!
//! Sites are addressed by a counter-based hash of (seed, n, x), so any site
//! can be evaluated in any order without materializing the lattice and two
//! queries of the same site always agree bit-exactly.

use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre_64, normal_cdf, normal_pdf, normal_quantile};
use serde::{Deserialize, Serialize};

/// Largest |beta| the lambda family accepts. All supported kinds have
/// lambda finite everywhere; the cap keeps quadratures in their verified
/// accuracy range.
pub const MAX_BETA: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    GaussianUnit,
    Rademacher,
    /// Standard gaussian conditioned on |Z| <= b, rescaled to unit variance.
    TruncatedGaussian { b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub seed: u64,
}

impl EnvSpec {
    pub fn new(kind: EnvKind, seed: u64) -> EnvSpec {
        EnvSpec { kind, seed }
    }

    pub fn with_seed(&self, seed: u64) -> EnvSpec {
        EnvSpec { kind: self.kind, seed }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta.abs() > MAX_BETA {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("|beta| must be finite and <= {MAX_BETA}, got {beta}"),
        });
    }
    Ok(())
}

fn trunc_params(b: f64) -> Result<(f64, f64, f64)> {
    if !(0.25..=6.0).contains(&b) {
        return Err(Error::InvalidParameter {
            name: "b",
            reason: format!("truncation level must lie in [0.25, 6], got {b}"),
        });
    }
    let z = 2.0 * normal_cdf(b) - 1.0; // P(|Z| <= b)
    let sigma2 = 1.0 - 2.0 * b * normal_pdf(b) / z; // variance of truncated Z
    Ok((z, sigma2, 1.0 / sigma2.sqrt()))
}

/// lambda(beta) = log E[exp(beta w)].
pub fn log_mgf(spec: &EnvSpec, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    match spec.kind {
        EnvKind::GaussianUnit => Ok(0.5 * beta * beta),
        EnvKind::Rademacher => {
            // log cosh, stable for large |beta|.
            let a = beta.abs();
            Ok(a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2)
        }
        EnvKind::TruncatedGaussian { b } => {
            let (z, _s2, s) = trunc_params(b)?;
            // E[e^{beta s Z} | |Z| <= b] by 64-node Gauss-Legendre; the
            // integrand is entire so the rule is far below 1e-10 error for
            // b <= 6, |beta| <= MAX_BETA.
            let m0 = gauss_legendre_64(
                |zv| (beta * s * zv).exp() * normal_pdf(zv),
                -b,
                b,
            );
            Ok((m0 / z).ln())
        }
    }
}

/// lambda'(beta): closed form for gaussian/rademacher, Richardson-extrapolated
/// central differences (step 1e-5) otherwise.
pub fn lambda_prime(spec: &EnvSpec, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    match spec.kind {
        EnvKind::GaussianUnit => Ok(beta),
        EnvKind::Rademacher => Ok(beta.tanh()),
        EnvKind::TruncatedGaussian { .. } => {
            let h = 1e-5;
            let f = |x: f64| log_mgf(spec, x);
            let d1 = (f(beta + h)? - f(beta - h)?) / (2.0 * h);
            let d2 = (f(beta + 2.0 * h)? - f(beta - 2.0 * h)?) / (4.0 * h);
            Ok((4.0 * d1 - d2) / 3.0)
        }
    }
}

/// lambda''(beta), same scheme as [`lambda_prime`].
pub fn lambda_double_prime(spec: &EnvSpec, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    match spec.kind {
        EnvKind::GaussianUnit => Ok(1.0),
        EnvKind::Rademacher => {
            let t = beta.tanh();
            Ok(1.0 - t * t)
        }
        EnvKind::TruncatedGaussian { .. } => {
            let h = 1e-5;
            let f = |x: f64| log_mgf(spec, x);
            let s1 = (f(beta + h)? - 2.0 * f(beta)? + f(beta - h)?) / (h * h);
            let s2 = (f(beta + 2.0 * h)? - 2.0 * f(beta)? + f(beta - 2.0 * h)?) / (4.0 * h * h);
            Ok((4.0 * s1 - s2) / 3.0)
        }
    }
}

/// gamma(beta) = lambda(2 beta) - 2 lambda(beta) >= 0, the pair-collision
/// exponent of the replica second moment.
pub fn gamma(spec: &EnvSpec, beta: f64) -> Result<f64> {
    check_beta(2.0 * beta)?;
    Ok(log_mgf(spec, 2.0 * beta)? - 2.0 * log_mgf(spec, beta)?)
}

/// Site-addressable view of the field.
pub trait Field: Sync {
    fn value(&self, n: u32, x: i64) -> f64;
}

#[derive(Debug, Clone)]
pub struct FieldView {
    spec: EnvSpec,
    trunc: Option<TruncTable>,
}

#[derive(Debug, Clone, Copy)]
struct TruncTable {
    cdf_low: f64,
    span: f64,
    scale: f64,
}

/// Build the lazily evaluated field for a spec.
pub fn field(spec: &EnvSpec) -> Result<FieldView> {
    let trunc = match spec.kind {
        EnvKind::TruncatedGaussian { b } => {
            let (z, _s2, s) = trunc_params(b)?;
            Some(TruncTable { cdf_low: normal_cdf(-b), span: z, scale: s })
        }
        _ => None,
    };
    Ok(FieldView { spec: *spec, trunc })
}

impl FieldView {
    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }
}

impl Field for FieldView {
    fn value(&self, n: u32, x: i64) -> f64 {
        let h0 = site_hash(self.spec.seed, n, x, 0);
        match self.spec.kind {
            EnvKind::GaussianUnit => {
                let h1 = site_hash(self.spec.seed, n, x, 1);
                let u1 = to_unit(h0);
                let u2 = to_unit(h1);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            }
            EnvKind::Rademacher => {
                if h0 >> 63 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            EnvKind::TruncatedGaussian { .. } => {
                let t = self.trunc.expect("trunc table present for truncated kind");
                let u = to_unit(h0);
                normal_quantile(t.cdf_low + u * t.span) * t.scale
            }
        }
    }
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Counter-based site hash: every word is absorbed through a full
/// splitmix64 finalizer so neighboring (n, x) decohere.
#[inline]
pub fn site_hash(seed: u64, n: u32, x: i64, stream: u32) -> u64 {
    let mut h = seed ^ 0x9E3779B97F4A7C15;
    h = mix(h.wrapping_add((n as u64).wrapping_mul(0xD1342543DE82EF95)));
    h = mix(h ^ (x as u64).wrapping_mul(0x2545F4914F6CDD1D));
    h = mix(h ^ (stream as u64).wrapping_mul(0x9E3779B97F4A7C15));
    h
}

/// Uniform in (0, 1) from 53 bits, bounded away from both endpoints.
#[inline]
pub fn to_unit(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Replica/stream seed derivation from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix(master ^ stream.wrapping_mul(0xD1342543DE82EF95).wrapping_add(0x2545F4914F6CDD1D))
}

/// Field with a single site's value shifted by `delta`; the finite
/// difference probe used to check gradient identities.
pub struct OverrideField<'a, F: Field> {
    pub base: &'a F,
    pub site: (u32, i64),
    pub delta: f64,
}

impl<F: Field> Field for OverrideField<'_, F> {
    fn value(&self, n: u32, x: i64) -> f64 {
        let v = self.base.value(n, x);
        if (n, x) == self.site {
            v + self.delta
        } else {
            v
        }
    }
}

/// Field translated in time and space: value(n, x) of the shifted field is
/// the base field at (n + dt, x + dx).
pub struct ShiftedField<'a, F: Field> {
    pub base: &'a F,
    pub dt: u32,
    pub dx: i64,
}

impl<F: Field> Field for ShiftedField<'_, F> {
    fn value(&self, n: u32, x: i64) -> f64 {
        self.base.value(n + self.dt, x + self.dx)
    }
}

/// Field with means shifted by `shift` along a pinned trajectory
/// (path[n] is the walk position at time n); realizes the size-biased
/// tilt whose site means are lambda'(beta) on the path.
pub struct TiltedField<'a, F: Field> {
    pub base: &'a F,
    pub path: &'a [i64],
    pub shift: f64,
}

impl<F: Field> Field for TiltedField<'_, F> {
    fn value(&self, n: u32, x: i64) -> f64 {
        let v = self.base.value(n, x);
        if (n as usize) < self.path.len() && self.path[n as usize] == x {
            v + self.shift
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_stderr;

    fn gspec(seed: u64) -> EnvSpec {
        EnvSpec::new(EnvKind::GaussianUnit, seed)
    }

    #[test]
    fn lambda_closed_forms() {
        let g = gspec(1);
        assert_eq!(log_mgf(&g, 0.0).unwrap(), 0.0);
        assert_eq!(log_mgf(&g, 1.0).unwrap(), 0.5);
        let r = EnvSpec::new(EnvKind::Rademacher, 1);
        assert!((log_mgf(&r, 0.0).unwrap()).abs() < 1e-15);
        assert!((log_mgf(&r, 1.0).unwrap() - 1f64.cosh().ln()).abs() < 1e-14);
        assert!((log_mgf(&r, 1.0).unwrap() - 0.4337808304830272).abs() < 1e-12);
    }

    #[test]
    fn beta_out_of_range() {
        assert!(matches!(
            log_mgf(&gspec(1), 17.0),
            Err(Error::InvalidParameter { name: "beta", .. })
        ));
    }

    #[test]
    fn derivatives_closed_forms() {
        let g = gspec(1);
        for beta in [0.0, 0.3, 1.7] {
            assert_eq!(lambda_prime(&g, beta).unwrap(), beta);
            assert_eq!(lambda_double_prime(&g, beta).unwrap(), 1.0);
        }
        let r = EnvSpec::new(EnvKind::Rademacher, 1);
        assert!((lambda_prime(&r, 0.5).unwrap() - 0.5f64.tanh()).abs() < 1e-15);
        assert!((lambda_prime(&r, 0.5).unwrap() - 0.46211715726000974).abs() < 1e-12);
        assert!((lambda_prime(&r, 0.0).unwrap()).abs() < 1e-15);
        assert!((lambda_double_prime(&r, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_gaussian_lambda_and_derivatives() {
        let t = EnvSpec::new(EnvKind::TruncatedGaussian { b: 3.0 }, 1);
        assert!(log_mgf(&t, 0.0).unwrap().abs() < 1e-12);
        // Mean 0, variance 1: lambda'(0) = 0, lambda''(0) = 1.
        assert!(lambda_prime(&t, 0.0).unwrap().abs() < 1e-9);
        assert!((lambda_double_prime(&t, 0.0).unwrap() - 1.0).abs() < 1e-5);
        // Symmetry: lambda is even.
        let l = log_mgf(&t, 0.8).unwrap();
        assert!((l - log_mgf(&t, -0.8).unwrap()).abs() < 1e-13);
        // Bounded support means lambda grows at most linearly; sanity only.
        assert!(log_mgf(&t, 4.0).unwrap() < 0.5 * 16.0);
    }

    #[test]
    fn gamma_values() {
        let g = gspec(1);
        for beta in [0.1, 0.5, 1.3] {
            assert!((gamma(&g, beta).unwrap() - beta * beta).abs() < 1e-14);
        }
        assert_eq!(gamma(&g, 0.0).unwrap(), 0.0);
        let r = EnvSpec::new(EnvKind::Rademacher, 1);
        let expect = 0.6f64.cosh().ln() - 2.0 * 0.3f64.cosh().ln();
        assert!((gamma(&r, 0.3).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn lambda_convex_on_grid() {
        for kind in [
            EnvKind::GaussianUnit,
            EnvKind::Rademacher,
            EnvKind::TruncatedGaussian { b: 2.0 },
        ] {
            let spec = EnvSpec::new(kind, 7);
            let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.4).collect();
            for &b1 in &grid {
                for &b2 in &grid {
                    let mid = log_mgf(&spec, 0.5 * (b1 + b2)).unwrap();
                    let avg =
                        0.5 * (log_mgf(&spec, b1).unwrap() + log_mgf(&spec, b2).unwrap());
                    assert!(mid <= avg + 1e-12, "{kind:?} {b1} {b2}");
                }
            }
        }
    }

    #[test]
    fn small_beta_asymptotics() {
        for kind in [EnvKind::Rademacher, EnvKind::TruncatedGaussian { b: 2.5 }] {
            let spec = EnvSpec::new(kind, 7);
            let mut prev_gamma_gap = f64::INFINITY;
            for &beta in &[0.1, 0.05, 0.025] {
                let gap = (gamma(&spec, beta).unwrap() / (beta * beta) - 1.0).abs();
                assert!(gap < prev_gamma_gap, "{kind:?} beta={beta}");
                prev_gamma_gap = gap;
                assert!((lambda_prime(&spec, beta).unwrap() / beta - 1.0).abs() < 0.02);
                assert!((lambda_double_prime(&spec, beta).unwrap() - 1.0).abs() < 0.02);
            }
        }
    }

    #[test]
    fn field_determinism_under_interleaved_queries() {
        let view = field(&gspec(42)).unwrap();
        let probes: Vec<(u32, i64)> =
            (0..10_000).map(|i| (i as u32 % 512, (i as i64 * 7919) % 4096 - 2048)).collect();
        let before: Vec<f64> = probes.iter().map(|&(n, x)| view.value(n, x)).collect();
        // Query a large block of other sites in between.
        let mut sink = 0.0;
        for n in 0..200u32 {
            for x in -2500i64..2500 {
                sink += view.value(n, x);
            }
        }
        assert!(sink.is_finite());
        for (i, &(n, x)) in probes.iter().enumerate() {
            let v = view.value(n, x);
            assert!(v.to_bits() == before[i].to_bits(), "site ({n},{x}) drifted");
        }
    }

    #[test]
    fn rademacher_support() {
        let view = field(&EnvSpec::new(EnvKind::Rademacher, 3)).unwrap();
        for n in 0..64u32 {
            for x in -64i64..=64 {
                let v = view.value(n, x);
                assert!(v == 1.0 || v == -1.0);
            }
        }
    }

    #[test]
    fn gaussian_moments_over_a_million_sites() {
        let view = field(&gspec(2024)).unwrap();
        let mut vals = Vec::with_capacity(1_000_000);
        for n in 0..1000u32 {
            for x in 0..1000i64 {
                vals.push(view.value(n, x));
            }
        }
        let (mean, _) = mean_stderr(&vals);
        assert!(mean.abs() < 4.0 / (vals.len() as f64).sqrt() * 1.5, "mean {mean}");
        let var =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn truncated_moments_and_support() {
        let b = 2.0;
        let spec = EnvSpec::new(EnvKind::TruncatedGaussian { b }, 5);
        let view = field(&spec).unwrap();
        let (_, _s2, scale) = trunc_params(b).unwrap();
        let bound = b * scale;
        let mut vals = Vec::with_capacity(200_000);
        for n in 0..200u32 {
            for x in 0..1000i64 {
                let v = view.value(n, x);
                assert!(v.abs() <= bound + 1e-9);
                vals.push(v);
            }
        }
        let (mean, _) = mean_stderr(&vals);
        let var =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn override_and_shift_wrappers() {
        let view = field(&gspec(9)).unwrap();
        let ov = OverrideField { base: &view, site: (3, -4), delta: 0.5 };
        assert!((ov.value(3, -4) - view.value(3, -4) - 0.5).abs() < 1e-15);
        assert_eq!(ov.value(3, -3).to_bits(), view.value(3, -3).to_bits());
        let sh = ShiftedField { base: &view, dt: 10, dx: 100 };
        assert_eq!(sh.value(2, 7).to_bits(), view.value(12, 107).to_bits());
    }
}
