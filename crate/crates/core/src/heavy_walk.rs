//! Symmetric heavy-tailed increment laws with Cauchy-type k^{-2} tails,
//! exact n-step distributions by convolution doubling, scaling constants
//! a_n, and local-limit diagnostics.
//!
//! Laws are finitely supported and exactly normalized, so every downstream
//! probability is exact up to float rounding; window truncation is always
//! accumulated, never renormalized away.

use crate::convolve::{self, WindowedKernelConv};
use crate::error::{Error, Result};
use crate::numeric::kahan_sum;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Shape of the slowly varying factor L(.) in the increment tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlowlyVarying {
    Constant,
    /// L(k) proportional to (log k)^exponent at infinity.
    LogPower { exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawKind {
    Canonical,
    LogPower,
    Custom,
}

/// A symmetric, finitely supported step distribution on the integers.
///
/// Stored as the half pmf `half[k] = P(S1 = k) = P(S1 = -k)` for
/// `0 <= k <= x_max`, together with precomputed tail sums.
#[derive(Debug, Clone)]
pub struct IncrementLaw {
    kind: LawKind,
    x_max: u32,
    half: Vec<f64>,
    /// tail[a] = P(|S1| > a) for 0 <= a <= x_max (tail[x_max] = 0).
    tail: Vec<f64>,
    tail_constant: f64,
    slowly_varying: SlowlyVarying,
    fingerprint: String,
}

impl IncrementLaw {
    /// The canonical Cauchy-domain test law: probs(+-k) = c k^{-2} for
    /// 1 <= k <= x_max, probs(0) = 0, c = (2 sum k^{-2})^{-1}.
    pub fn canonical(x_max: u32) -> Result<IncrementLaw> {
        if x_max == 0 {
            return Err(Error::InvalidParameter {
                name: "X_max",
                reason: "support radius must be at least 1".into(),
            });
        }
        let s2 = kahan_sum((1..=x_max as u64).map(|k| 1.0 / (k as f64 * k as f64)));
        let c = 1.0 / (2.0 * s2);
        let mut half = Vec::with_capacity(x_max as usize + 1);
        half.push(0.0);
        for k in 1..=x_max as u64 {
            half.push(c / (k as f64 * k as f64));
        }
        Self::assemble(LawKind::Canonical, half, c, SlowlyVarying::Constant)
    }

    /// k^{-2} (log(e+k))^rho tails; exercises a genuinely non-constant L.
    pub fn log_power(x_max: u32, rho: f64) -> Result<IncrementLaw> {
        if x_max == 0 {
            return Err(Error::InvalidParameter {
                name: "X_max",
                reason: "support radius must be at least 1".into(),
            });
        }
        let weight = |k: u64| {
            (std::f64::consts::E + k as f64).ln().powf(rho) / (k as f64 * k as f64)
        };
        let total = kahan_sum((1..=x_max as u64).map(weight));
        let c = 1.0 / (2.0 * total);
        let mut half = Vec::with_capacity(x_max as usize + 1);
        half.push(0.0);
        for k in 1..=x_max as u64 {
            half.push(c * weight(k));
        }
        Self::assemble(LawKind::LogPower, half, c, SlowlyVarying::LogPower { exponent: rho })
    }

    /// Build from an explicit half pmf (index k = 0..=x_max gives the mass
    /// at +-k). Must already be normalized: half[0] + 2 sum half[k] = 1.
    pub fn from_half_probs(half: Vec<f64>) -> Result<IncrementLaw> {
        if half.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "X_max",
                reason: "support radius must be at least 1".into(),
            });
        }
        let x_max = (half.len() - 1) as u32;
        let c = half[x_max as usize] * (x_max as f64) * (x_max as f64);
        Self::assemble(LawKind::Custom, half, c, SlowlyVarying::Constant)
    }

    fn assemble(
        kind: LawKind,
        half: Vec<f64>,
        tail_constant: f64,
        slowly_varying: SlowlyVarying,
    ) -> Result<IncrementLaw> {
        let x_max = (half.len() - 1) as u32;
        if half.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "probs",
                reason: "negative or non-finite mass".into(),
            });
        }
        let total = half[0] + 2.0 * kahan_sum(half[1..].iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "probs",
                reason: format!("total mass {total} is not 1 within 1e-12"),
            });
        }
        // Suffix sums: tail[a] = 2 * sum_{k > a} half[k].
        let mut tail = vec![0.0; half.len()];
        let mut acc = 0.0;
        let mut comp = 0.0;
        for a in (0..half.len() - 1).rev() {
            let v = 2.0 * half[a + 1] - comp;
            let t = acc + v;
            comp = (t - acc) - v;
            acc = t;
            tail[a] = acc;
        }
        let fingerprint = {
            use sha2::{Digest, Sha256};
            let mut h = Sha256::new();
            h.update(format!("{kind:?};x_max={x_max};").as_bytes());
            for &p in &half {
                h.update(p.to_le_bytes());
            }
            let digest = h.finalize();
            digest[..8].iter().map(|b| format!("{b:02x}")).collect::<String>()
        };
        Ok(IncrementLaw { kind, x_max, half, tail, tail_constant, slowly_varying, fingerprint })
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn support_radius(&self) -> u32 {
        self.x_max
    }

    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    pub fn slowly_varying(&self) -> SlowlyVarying {
        self.slowly_varying
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// P(S1 = k).
    pub fn prob(&self, k: i64) -> f64 {
        let a = k.unsigned_abs();
        if a > self.x_max as u64 {
            0.0
        } else {
            self.half[a as usize]
        }
    }

    pub fn half_probs(&self) -> &[f64] {
        &self.half
    }

    /// P(|S1| > a). Exact suffix sums; 1 for a < 0, 0 beyond the support.
    pub fn tail_prob(&self, a: i64) -> f64 {
        if a < 0 {
            return 1.0;
        }
        if a >= self.x_max as i64 {
            return 0.0;
        }
        self.tail[a as usize]
    }

    /// Empirical slowly varying function L(k) = k * P(|S1| > k).
    pub fn l_function(&self, k: i64) -> f64 {
        k as f64 * self.tail_prob(k)
    }

    /// Full pmf vector over offsets -x_max..=x_max.
    pub fn full_probs(&self) -> Vec<f64> {
        let x = self.x_max as usize;
        let mut v = vec![0.0; 2 * x + 1];
        for k in 0..=x {
            v[x + k] = self.half[k];
            v[x - k] = self.half[k];
        }
        v
    }

    /// Law of S1 - S1~ for two independent copies (symmetric, support 2 x_max).
    pub fn self_difference(&self) -> IncrementLaw {
        let full = self.full_probs();
        let conv = convolve::convolve(&full, &full);
        let x = self.x_max as usize;
        let center = 2 * x;
        let mut half: Vec<f64> = (0..=2 * x).map(|k| conv[center + k].max(0.0)).collect();
        // Renormalize away convolution rounding before validation.
        let total = half[0] + 2.0 * kahan_sum(half[1..].iter().copied());
        for p in &mut half {
            *p /= total;
        }
        Self::assemble(LawKind::Custom, half, self.tail_constant, self.slowly_varying)
            .expect("self-difference of a valid law is valid")
    }
}

/// Exact distribution of S_n restricted to a window, with the mass that
/// left the window accumulated into `truncation_loss`.
#[derive(Debug, Clone)]
pub struct NStepPmf {
    n: u64,
    window_radius: i64,
    probs: Vec<f64>,
    truncation_loss: f64,
}

impl NStepPmf {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn window_radius(&self) -> i64 {
        self.window_radius
    }

    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn prob(&self, x: i64) -> f64 {
        if x.abs() > self.window_radius {
            0.0
        } else {
            self.probs[(x + self.window_radius) as usize]
        }
    }

    /// Offsets -W..=W in order, paired with their probabilities.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let w = self.window_radius;
        self.probs.iter().enumerate().map(move |(i, &p)| (i as i64 - w, p))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mass(&self) -> f64 {
        kahan_sum(self.probs.iter().copied())
    }

    fn from_probs(n: u64, window_radius: i64, mut probs: Vec<f64>) -> NStepPmf {
        let w = probs.len() - 1;
        // Clamp FFT ringing and re-enforce symmetry exactly.
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        for i in 0..probs.len() / 2 {
            let avg = 0.5 * (probs[i] + probs[w - i]);
            probs[i] = avg;
            probs[w - i] = avg;
        }
        let truncation_loss = (1.0 - kahan_sum(probs.iter().copied())).max(0.0);
        NStepPmf { n, window_radius, probs, truncation_loss }
    }
}

/// Distribution of S_n on [-window_radius, window_radius], by binary
/// convolution doubling. Exact (up to rounding) wherever no mass has left
/// the window; `truncation_loss` carries the remainder.
pub fn n_step_pmf(law: &IncrementLaw, n: u64, window_radius: i64) -> Result<NStepPmf> {
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", reason: "need n >= 1".into() });
    }
    if window_radius < law.support_radius() as i64 {
        return Err(Error::InvalidParameter {
            name: "window_radius",
            reason: format!(
                "window {window_radius} smaller than single-step support {}",
                law.support_radius()
            ),
        });
    }
    let w = window_radius as usize;
    let len = 2 * w + 1;
    let mut one = vec![0.0; len];
    for k in -(law.support_radius() as i64)..=law.support_radius() as i64 {
        one[(k + window_radius) as usize] = law.prob(k);
    }
    if n == 1 {
        return Ok(NStepPmf::from_probs(1, window_radius, one));
    }
    let mut cur = one.clone();
    let bits = 63 - n.leading_zeros() as u64; // position of MSB
    for b in (0..bits).rev() {
        cur = square_windowed(&cur, w);
        if (n >> b) & 1 == 1 {
            cur = conv_windowed(&cur, &one, w);
        }
    }
    Ok(NStepPmf::from_probs(n, window_radius, cur))
}

fn square_windowed(a: &[f64], w: usize) -> Vec<f64> {
    conv_windowed(a, a, w)
}

fn conv_windowed(a: &[f64], b: &[f64], w: usize) -> Vec<f64> {
    let full = convolve::convolve(a, b);
    // Both inputs live on [-w, w]; the full product spans [-2w, 2w] and the
    // window keeps indices 2w-w .. 2w+w of the length-(4w+1) vector.
    let mut out = vec![0.0; 2 * w + 1];
    out.copy_from_slice(&full[w..=3 * w]);
    out
}

/// A sequential single-step recursion (p_{m+1} = p_m * p_1 on the window).
/// Same contract as [`n_step_pmf`]; used where every intermediate level is
/// needed, e.g. restricted-overlap sums.
pub struct SequentialPmf {
    law_radius: i64,
    window_radius: i64,
    conv: WindowedKernelConv,
    cur: Vec<f64>,
    next: Vec<f64>,
    n: u64,
}

impl SequentialPmf {
    pub fn new(law: &IncrementLaw, window_radius: i64) -> Result<SequentialPmf> {
        if window_radius < law.support_radius() as i64 {
            return Err(Error::InvalidParameter {
                name: "window_radius",
                reason: "window smaller than single-step support".into(),
            });
        }
        let w = window_radius as usize;
        let kernel = law.full_probs();
        let conv = WindowedKernelConv::new(&kernel, law.support_radius() as usize, w);
        let mut cur = vec![0.0; 2 * w + 1];
        for k in -(law.support_radius() as i64)..=law.support_radius() as i64 {
            cur[(k + window_radius) as usize] = law.prob(k);
        }
        Ok(SequentialPmf {
            law_radius: law.support_radius() as i64,
            window_radius,
            conv,
            next: vec![0.0; cur.len()],
            cur,
            n: 1,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn law_radius(&self) -> i64 {
        self.law_radius
    }

    /// Advance to the (n+1)-step distribution.
    pub fn step(&mut self) {
        self.conv.apply(&self.cur, &mut self.next);
        for v in self.next.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        self.n += 1;
    }

    pub fn prob(&self, x: i64) -> f64 {
        if x.abs() > self.window_radius {
            0.0
        } else {
            self.cur[(x + self.window_radius) as usize]
        }
    }

    pub fn snapshot(&self) -> NStepPmf {
        NStepPmf::from_probs(self.n, self.window_radius, self.cur.clone())
    }
}

/// The scaling constants a_n = min{a >= 1 : n P(|S1| > a) <= 1} and
/// phi(n) = a_n / n, tabulated for 1 <= n <= n_max.
#[derive(Debug, Clone)]
pub struct ScalingSequence {
    a: Vec<i64>,
}

impl ScalingSequence {
    pub fn n_max(&self) -> u64 {
        (self.a.len() - 1) as u64
    }

    pub fn a(&self, n: u64) -> i64 {
        self.a[n as usize]
    }

    pub fn phi(&self, n: u64) -> f64 {
        self.a[n as usize] as f64 / n as f64
    }
}

pub fn scaling_constants(law: &IncrementLaw, n_max: u64) -> Result<ScalingSequence> {
    if n_max == 0 {
        return Err(Error::InvalidParameter { name: "n_max", reason: "need n_max >= 1".into() });
    }
    let mut a = Vec::with_capacity(n_max as usize + 1);
    a.push(0);
    let mut cur: i64 = 1;
    for n in 1..=n_max {
        // tail is nonincreasing in a and the threshold 1/n shrinks, so the
        // minimizing a never decreases.
        while law.tail_prob(cur) * n as f64 > 1.0 {
            cur += 1;
        }
        a.push(cur);
    }
    Ok(ScalingSequence { a })
}

/// Characteristic function of a symmetric law sampled on the DFT grid
/// t_j = 2 pi j / M. On this grid the Riemann sum (1/M) sum_j phi(t_j)^m
/// equals sum_{x = 0 mod M} p_m(x) exactly, so return probabilities come
/// out alias-exact whenever m * x_max < M and alias-bounded otherwise.
pub struct CharGrid {
    m: usize,
    /// phi(2 pi j / M) for j = 0..=M/2 (the law is symmetric, so real).
    phi: Vec<f64>,
}

impl CharGrid {
    pub fn build(law: &IncrementLaw, m: usize) -> CharGrid {
        assert!(m.is_power_of_two() && m >= 4);
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
        buf[0].re = law.prob(0);
        for k in 1..=law.support_radius() as usize {
            let p = law.half_probs()[k];
            buf[k % m].re += p;
            buf[(m - k % m) % m].re += p;
        }
        convolve::fft_forward(&mut buf);
        let phi = buf[..=m / 2].iter().map(|c| c.re).collect();
        CharGrid { m, phi }
    }

    /// Grid size tuned so the aliasing term stays negligible for return
    /// probabilities up to exponent `max_exponent`.
    pub fn suggested_size(max_exponent: u64) -> usize {
        convolve::next_pow2((20 * max_exponent).clamp(4096, 1 << 23) as usize)
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    /// P(S_m = 0) + aliasing, where the alias term is
    /// sum_{k != 0} p_m(kM) (zero whenever m * x_max < M).
    pub fn return_probability(&self, m: u64) -> f64 {
        let half = self.m / 2;
        let e = m as i32;
        let mut terms = Vec::with_capacity(half + 1);
        terms.push(self.phi[0].powi(e));
        terms.push(self.phi[half].powi(e));
        for j in 1..half {
            terms.push(2.0 * self.phi[j].powi(e));
        }
        kahan_sum(terms.into_iter()) / self.m as f64
    }

    /// Collision probabilities P(S_n = S~_n) = p_{2n}(0) for n = 1..=n_max,
    /// computed by iterating psi = phi^2 over the grid with pruning of
    /// points whose contribution has decayed below 1e-18.
    pub fn collision_sequence(&self, n_max: usize) -> Vec<f64> {
        let half = self.m / 2;
        let inv_m = 1.0 / self.m as f64;
        // Weight of grid point j in the full-circle average.
        let mut psi: Vec<f64> = Vec::with_capacity(half + 1);
        let mut weight: Vec<f64> = Vec::with_capacity(half + 1);
        for j in 0..=half {
            let p = self.phi[j] * self.phi[j];
            psi.push(p);
            weight.push(if j == 0 || j == half { inv_m } else { 2.0 * inv_m });
        }
        let mut running: Vec<f64> = psi.clone();
        let mut out = Vec::with_capacity(n_max + 1);
        out.push(f64::NAN); // index 0 unused
        const PRUNE: f64 = 1e-18;
        let mut since_compact = 0usize;
        for _n in 1..=n_max {
            let mut sum = 0.0;
            let mut comp = 0.0;
            for (r, w) in running.iter().zip(weight.iter()) {
                let v = r * w - comp;
                let t = sum + v;
                comp = (t - sum) - v;
                sum = t;
            }
            out.push(sum);
            for (r, p) in running.iter_mut().zip(psi.iter()) {
                *r *= p;
            }
            since_compact += 1;
            if since_compact == 64 {
                since_compact = 0;
                let mut k = 0usize;
                for i in 0..running.len() {
                    if running[i] >= PRUNE {
                        running[k] = running[i];
                        psi[k] = psi[i];
                        weight[k] = weight[i];
                        k += 1;
                    }
                }
                running.truncate(k);
                psi.truncate(k);
                weight.truncate(k);
            }
        }
        out
    }

    /// Heuristic upper estimate of the alias term for exponent m: the
    /// wrapped tail mass sum_{k != 0} p_m(kM) under a k^{-2}-type bound with
    /// a factor-4 safety margin.
    pub fn alias_estimate(&self, tail_constant: f64, m_exp: u64) -> f64 {
        let m = self.m as f64;
        (4.0 * tail_constant * m_exp as f64 / (m * m) * (std::f64::consts::PI.powi(2) / 3.0))
            .min(1.0)
    }
}

/// a_n * P(S_n = 0): the finite-n estimate of the limiting stable density
/// at the origin for this law's own scaling. Meaningful once a_n is well
/// into the tail regime (a_n >= 10 or so).
pub fn estimate_g0(law: &IncrementLaw, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", reason: "need n >= 1".into() });
    }
    let grid = CharGrid::build(law, CharGrid::suggested_size(n));
    let scaling = scaling_constants(law, n)?;
    Ok(estimate_g0_on(&grid, &scaling, n))
}

/// As [`estimate_g0`] with the characteristic grid and scaling reused.
pub fn estimate_g0_on(grid: &CharGrid, scaling: &ScalingSequence, n: u64) -> f64 {
    scaling.a(n) as f64 * grid.return_probability(n)
}

/// The symmetric Cauchy density with peak g0: g(y) = g0 / (1 + (pi g0 y)^2).
pub fn cauchy_reference(g0: f64, y: f64) -> f64 {
    let z = std::f64::consts::PI * g0 * y;
    g0 / (1.0 + z * z)
}

/// sup_x |a_n P(S_n = x) - g(x / a_n)| over the computed window, with the
/// reference density fitted at this same n. For a fixed reference across an
/// n-grid (convergence trends), use [`llt_error_profile_with`].
pub fn llt_error_profile(law: &IncrementLaw, n: u64) -> Result<f64> {
    let g0 = estimate_g0(law, n)?;
    llt_error_profile_with(law, n, g0)
}

pub fn llt_error_profile_with(law: &IncrementLaw, n: u64, g0: f64) -> Result<f64> {
    let (pmf, scaling) = diagnostic_pmf(law, n)?;
    let a_n = scaling.a(n) as f64;
    let mut sup = 0.0f64;
    for (x, p) in pmf.iter() {
        let err = (a_n * p - cauchy_reference(g0, x as f64 / a_n)).abs();
        if err > sup {
            sup = err;
        }
    }
    Ok(sup)
}

/// Empirical c2 of the heavy-tail local bound: max over |k| >= c1 a_n within
/// the window (and inside the single-step support, where L > 0) of
/// P(S_n = k) k^2 / (n L(k)).
pub fn berger_ratio(law: &IncrementLaw, n: u64, c1: f64) -> Result<f64> {
    if c1 <= 0.0 {
        return Err(Error::InvalidParameter { name: "c1", reason: "need c1 > 0".into() });
    }
    let (pmf, scaling) = diagnostic_pmf(law, n)?;
    let a_n = scaling.a(n);
    let k_lo = (c1 * a_n as f64).ceil() as i64;
    let k_hi = (law.support_radius() as i64 - 1).min(pmf.window_radius());
    if k_lo > k_hi {
        return Err(Error::EmptyRange(format!(
            "no offsets with |k| in [{k_lo}, {k_hi}] for n={n}, c1={c1}"
        )));
    }
    let mut max = 0.0f64;
    for k in k_lo..=k_hi {
        for s in [k, -k] {
            let l = law.l_function(s.abs());
            let r = pmf.prob(s) * (s as f64) * (s as f64) / (n as f64 * l);
            if r > max {
                max = r;
            }
        }
    }
    Ok(max)
}

fn diagnostic_pmf(law: &IncrementLaw, n: u64) -> Result<(NStepPmf, ScalingSequence)> {
    let scaling = scaling_constants(law, n)?;
    let w = (16 * scaling.a(n)).max(law.support_radius() as i64);
    Ok((n_step_pmf(law, n, w)?, scaling))
}

/// Inverse-CDF sampler for walk increments.
pub struct WalkSampler {
    cum: Vec<f64>,
    x_max: i64,
}

impl WalkSampler {
    pub fn new(law: &IncrementLaw) -> WalkSampler {
        let full = law.full_probs();
        let mut cum = Vec::with_capacity(full.len());
        let mut acc = 0.0;
        for &p in &full {
            acc += p;
            cum.push(acc);
        }
        WalkSampler { cum, x_max: law.support_radius() as i64 }
    }

    /// Map a uniform u in [0,1) to a step offset.
    pub fn step(&self, u: f64) -> i64 {
        let target = u * self.cum.last().copied().unwrap_or(1.0);
        let idx = self.cum.partition_point(|&c| c <= target);
        idx.min(self.cum.len() - 1) as i64 - self.x_max
    }
}
