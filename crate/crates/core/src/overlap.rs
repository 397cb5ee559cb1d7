//! The collision overlap D(N) = sum_{n<=N} P(S_n = S~_n) for two
//! independent copies of the walk, its generalized inverse, restricted
//! variants, and exact replica-pair transfer matrices.
//!
//! For a symmetric law the collision probability equals the return
//! probability p_{2n}(0), which the default table builder evaluates through
//! the characteristic-function grid (alias-exact for small n, with the
//! aliasing tail reported as an error bound). A windowed convolution
//! builder computing sum_x p_n(x)^2 directly is kept alongside; the two
//! agree to rounding wherever both are exact.

use crate::convolve::WindowedKernelConv;
use crate::environment::{self, EnvSpec, Field};
use crate::error::{Error, Result};
use crate::heavy_walk::{scaling_constants, CharGrid, IncrementLaw, ScalingSequence, SequentialPmf};
use crate::numeric::kahan_sum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableBackend {
    Spectral { grid_size: usize },
    Windowed { window_radius: i64 },
}

/// Tabulated collision probabilities and their prefix sums D(n), together
/// with the law's scaling constants over the same range.
pub struct OverlapTable {
    law_fingerprint: String,
    collision: Vec<f64>,
    d: Vec<f64>,
    a: ScalingSequence,
    error_bound: f64,
    backend: TableBackend,
}

impl OverlapTable {
    /// Spectral builder: collision(n) = p_{2n}(0) from the characteristic
    /// grid. Cost is one FFT plus O(grid log) pruned power iterations; no
    /// window enters, the only inexactness is the reported aliasing bound.
    pub fn build(law: &IncrementLaw, n_max: u64) -> Result<OverlapTable> {
        if n_max == 0 {
            return Err(Error::InvalidParameter { name: "N_max", reason: "need N_max >= 1".into() });
        }
        let m = CharGrid::suggested_size(law, n_max);
        let grid = CharGrid::build(law, m);
        let collision = grid.collision_sequence(n_max as usize);
        let error_bound = (1..=n_max)
            .map(|n| grid.alias_estimate(law.tail_constant(), 2 * n))
            .sum::<f64>()
            .min(1.0);
        let a = scaling_constants(law, n_max)?;
        Ok(Self::assemble(
            law,
            collision,
            a,
            error_bound,
            TableBackend::Spectral { grid_size: m },
        ))
    }

    /// Windowed builder: collision(n) = sum_x p_n(x)^2 with the n-step pmf
    /// evaluated on [-window_radius, window_radius] and truncation loss
    /// accumulated into the error bound. O(window) per level.
    pub fn build_windowed(
        law: &IncrementLaw,
        n_max: u64,
        window_radius: i64,
    ) -> Result<OverlapTable> {
        if n_max == 0 {
            return Err(Error::InvalidParameter { name: "N_max", reason: "need N_max >= 1".into() });
        }
        let mut seq = SequentialPmf::new(law, window_radius)?;
        let mut collision = vec![f64::NAN];
        let mut worst_loss = 0.0f64;
        for n in 1..=n_max {
            if n > 1 {
                seq.step();
            }
            let snap = seq.snapshot();
            collision.push(kahan_sum(snap.iter().map(|(_, p)| p * p)));
            worst_loss = worst_loss.max(snap.truncation_loss());
        }
        let a = scaling_constants(law, n_max)?;
        // A truncated pmf underestimates sum p^2 by at most 2*loss (each
        // squared term is short by at most loss times its own value).
        let error_bound = 2.0 * worst_loss * n_max as f64;
        Ok(Self::assemble(
            law,
            collision,
            a,
            error_bound,
            TableBackend::Windowed { window_radius },
        ))
    }

    fn assemble(
        law: &IncrementLaw,
        collision: Vec<f64>,
        a: ScalingSequence,
        error_bound: f64,
        backend: TableBackend,
    ) -> OverlapTable {
        let mut d = Vec::with_capacity(collision.len());
        d.push(0.0);
        let mut acc = 0.0;
        let mut comp = 0.0;
        for &c in &collision[1..] {
            let v = c - comp;
            let t = acc + v;
            comp = (t - acc) - v;
            acc = t;
            d.push(acc);
        }
        OverlapTable {
            law_fingerprint: law.fingerprint().to_string(),
            collision,
            d,
            a,
            error_bound,
            backend,
        }
    }

    /// Reassemble from persisted rows; used by the table cache.
    pub fn from_parts(
        law_fingerprint: String,
        collision: Vec<f64>,
        a_values: Vec<i64>,
        error_bound: f64,
        backend: TableBackend,
    ) -> Result<OverlapTable> {
        if collision.is_empty() || a_values.len() != collision.len() {
            return Err(Error::Format("collision/a length mismatch".into()));
        }
        let a = ScalingSequence::from_values(a_values);
        let mut d = Vec::with_capacity(collision.len());
        d.push(0.0);
        let mut acc = 0.0;
        for &c in &collision[1..] {
            acc += c;
            d.push(acc);
        }
        Ok(OverlapTable { law_fingerprint, collision, d, a, error_bound, backend })
    }

    pub fn law_fingerprint(&self) -> &str {
        &self.law_fingerprint
    }

    pub fn n_max(&self) -> u64 {
        (self.collision.len() - 1) as u64
    }

    pub fn backend(&self) -> TableBackend {
        self.backend
    }

    /// Reported bound on the total absolute error of D from aliasing or
    /// window truncation.
    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    /// P(S_n = S~_n), 1 <= n <= n_max.
    pub fn collision(&self, n: u64) -> f64 {
        self.collision[n as usize]
    }

    /// D(n) with D(0) = 0.
    pub fn d(&self, n: u64) -> f64 {
        self.d[n as usize]
    }

    pub fn scaling(&self) -> &ScalingSequence {
        &self.a
    }

    pub fn a(&self, n: u64) -> i64 {
        self.a.a(n)
    }

    pub fn phi(&self, n: u64) -> f64 {
        self.a.phi(n)
    }

    /// D^{-1}(x) = max{N : D(N) <= x}. Errors with the required threshold
    /// when even D(n_max) <= x, i.e. the table cannot witness the maximum.
    pub fn d_inverse(&self, x: f64) -> Result<u64> {
        if !(x >= 0.0) {
            return Err(Error::InvalidParameter { name: "x", reason: "need x >= 0".into() });
        }
        let last = *self.d.last().unwrap();
        if last <= x {
            return Err(Error::NeedsLongerTable { required: x, available: last });
        }
        // D is strictly increasing (every collision probability is
        // positive), so partition_point finds the first n with D(n) > x.
        let first_above = self.d.partition_point(|&v| v <= x);
        Ok((first_above - 1) as u64)
    }
}

/// Partial sums of 1/a_n and 1/(n L(n)) at dyadic levels, with last-octave
/// slopes against log n. Both sums growing like log N (non-flattening
/// slopes, bounded ratio) is the recurrence signature of the criterion
/// sum 1/(nL(n)) = inf <=> sum 1/a_n = inf.
#[derive(Debug, Clone)]
pub struct RecurrenceReport {
    /// (n, sum_{m<=n} 1/a_m, sum_{m<=n} 1/(m L(m))) at dyadic n.
    pub dyadic: Vec<(u64, f64, f64)>,
    /// Increment of each sum over the last octave divided by log 2.
    pub slope_inv_a: f64,
    pub slope_inv_nl: f64,
    pub recurrent_type: bool,
}

pub fn recurrence_diagnostic(law: &IncrementLaw, n_max: u64) -> Result<RecurrenceReport> {
    let cap = (law.support_radius() as u64).saturating_sub(1);
    let n_max = n_max.min(cap.max(2));
    let scaling = scaling_constants(law, n_max)?;
    let mut sum_a = 0.0;
    let mut sum_nl = 0.0;
    let mut dyadic = Vec::new();
    for n in 1..=n_max {
        sum_a += 1.0 / scaling.a(n) as f64;
        let l = law.l_function(n as i64);
        if l > 0.0 {
            sum_nl += 1.0 / (n as f64 * l);
        }
        if n.is_power_of_two() {
            dyadic.push((n, sum_a, sum_nl));
        }
    }
    if dyadic.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "N_max",
            reason: "need at least three dyadic levels".into(),
        });
    }
    let k = dyadic.len();
    let ln2 = std::f64::consts::LN_2;
    let slope_inv_a = (dyadic[k - 1].1 - dyadic[k - 2].1) / ln2;
    let slope_inv_nl = (dyadic[k - 1].2 - dyadic[k - 2].2) / ln2;
    let prev_a = (dyadic[k - 2].1 - dyadic[k - 3].1) / ln2;
    let prev_nl = (dyadic[k - 2].2 - dyadic[k - 3].2) / ln2;
    let recurrent_type = slope_inv_a > 0.6 * prev_a && slope_inv_nl > 0.6 * prev_nl;
    Ok(RecurrenceReport { dyadic, slope_inv_a, slope_inv_nl, recurrent_type })
}

/// D_hat(u) = sum_{t<=u} P(S_{2t} = 0, |S_t| <= R a_t), evaluated as the
/// window-restricted square sums of the t-step pmfs.
#[derive(Debug, Clone, Copy)]
pub struct RestrictedOverlap {
    pub d_hat: f64,
    /// The unrestricted sums over the same computed pmfs.
    pub d: f64,
    pub max_truncation_loss: f64,
}

pub fn restricted_overlap(law: &IncrementLaw, u: u64, r: f64) -> Result<RestrictedOverlap> {
    if u == 0 {
        return Err(Error::InvalidParameter { name: "u", reason: "need u >= 1".into() });
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter { name: "R", reason: "need R > 0".into() });
    }
    let scaling = scaling_constants(law, u)?;
    let window = ((4.0 * r * scaling.a(u) as f64) as i64).max(law.support_radius() as i64);
    let mut seq = SequentialPmf::new(law, window)?;
    let mut d_hat = 0.0;
    let mut d = 0.0;
    let mut worst = 0.0f64;
    for t in 1..=u {
        if t > 1 {
            seq.step();
        }
        let snap = seq.snapshot();
        let cutoff = (r * scaling.a(t) as f64).floor() as i64;
        let mut restricted = 0.0;
        let mut full = 0.0;
        for (x, p) in snap.iter() {
            let sq = p * p;
            full += sq;
            if x.abs() <= cutoff {
                restricted += sq;
            }
        }
        d_hat += restricted;
        d += full;
        worst = worst.max(snap.truncation_loss());
    }
    Ok(RestrictedOverlap { d_hat, d, max_truncation_loss: worst })
}

/// D(qu)/D(u).
pub fn d_ratio_check(table: &OverlapTable, q: u64, u: u64) -> Result<f64> {
    if q == 0 || u == 0 {
        return Err(Error::InvalidParameter { name: "q", reason: "need q, u >= 1".into() });
    }
    let qu = q.checked_mul(u).ok_or(Error::InvalidParameter {
        name: "q",
        reason: "q*u overflows".into(),
    })?;
    if qu > table.n_max() {
        return Err(Error::NeedsLongerTable {
            required: qu as f64,
            available: table.n_max() as f64,
        });
    }
    Ok(table.d(qu) / table.d(u))
}

#[derive(Debug, Clone, Copy)]
pub struct WindowCollisionBound {
    pub restricted: f64,
    pub full: f64,
}

/// Both sides of the block-window collision inequality
/// sum_{s<=n} sum_{x in I~0} p_s(0,x)^2 <= D(n), with I~0 the open interval
/// (-i0_radius, i0_radius).
pub fn window_collision_bound(
    law: &IncrementLaw,
    table: &OverlapTable,
    n: u64,
    i0_radius: i64,
) -> Result<WindowCollisionBound> {
    if n > table.n_max() {
        return Err(Error::NeedsLongerTable { required: n as f64, available: table.n_max() as f64 });
    }
    let window = ((2 * i0_radius).max(64) as i64).max(law.support_radius() as i64);
    let mut seq = SequentialPmf::new(law, window)?;
    let mut restricted = 0.0;
    for s in 1..=n {
        if s > 1 {
            seq.step();
        }
        let mut level = 0.0;
        for x in (-i0_radius + 1)..i0_radius {
            let p = seq.prob(x);
            level += p * p;
        }
        restricted += level;
    }
    Ok(WindowCollisionBound { restricted, full: table.d(n) })
}

/// Replica second-moment pair: E over two independent walks of
/// exp(gamma(beta) * Y_N) with Y_N the collision count, both walks killed
/// outside [-radius, radius]. `y_weighted` is the companion value
/// beta^2 * E[Y_N exp(gamma Y_N)].
#[derive(Debug, Clone, Copy)]
pub struct PairMoment {
    pub moment: f64,
    pub y_weighted: f64,
}

const PAIR_STATE_BUDGET: usize = 1_500_000;

pub fn pair_overlap_moment(
    law: &IncrementLaw,
    env: &EnvSpec,
    beta: f64,
    n: u64,
    radius: i64,
) -> Result<PairMoment> {
    let gamma = environment::gamma(env, beta)?;
    let s = (2 * radius + 1) as usize;
    if s * s > PAIR_STATE_BUDGET {
        return Err(Error::TooLarge(format!(
            "pair state space {s}x{s} exceeds budget {PAIR_STATE_BUDGET}"
        )));
    }
    let k_radius = (law.support_radius() as i64).min(2 * radius) as usize;
    let kernel = kernel_slice(law, k_radius);
    let mut conv = WindowedKernelConv::new(&kernel, k_radius, radius as usize);
    let mut f = vec![0.0f64; s * s];
    let mut g = vec![0.0f64; s * s];
    f[(radius as usize) * s + radius as usize] = 1.0;
    let eg = gamma.exp();
    let mut row_in = vec![0.0f64; s];
    for _step in 1..=n {
        conv_pair(&mut conv, &mut f, s, &mut row_in);
        conv_pair(&mut conv, &mut g, s, &mut row_in);
        for i in 0..s {
            let idx = i * s + i;
            g[idx] = eg * (g[idx] + f[idx]);
            f[idx] *= eg;
        }
    }
    Ok(PairMoment {
        moment: kahan_sum(f.iter().copied()),
        y_weighted: beta * beta * kahan_sum(g.iter().copied()),
    })
}

/// Same moments through the difference walk V = S - S~ (kernel = the law's
/// self-difference), with no window on the pair besides |V| <= v_radius.
/// This is the unrestricted second moment up to the V-truncation loss, so
/// it scales to horizons where the 2-D pair grid cannot fit.
pub fn pair_moment_difference_walk(
    law: &IncrementLaw,
    env: &EnvSpec,
    beta: f64,
    n: u64,
    v_radius: i64,
) -> Result<PairMoment> {
    let gamma = environment::gamma(env, beta)?;
    let diff = law.self_difference();
    let k_radius = (diff.support_radius() as i64).min(2 * v_radius) as usize;
    let kernel = kernel_slice(&diff, k_radius);
    let mut conv = WindowedKernelConv::new(&kernel, k_radius, v_radius as usize);
    let s = (2 * v_radius + 1) as usize;
    let mut f = vec![0.0f64; s];
    let mut g = vec![0.0f64; s];
    let mut scratch = vec![0.0f64; s];
    f[v_radius as usize] = 1.0;
    let eg = gamma.exp();
    for _step in 1..=n {
        scratch.copy_from_slice(&f);
        conv.apply(&scratch, &mut f);
        scratch.copy_from_slice(&g);
        conv.apply(&scratch, &mut g);
        for v in [&mut f, &mut g] {
            for x in v.iter_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
        }
        let idx = v_radius as usize;
        g[idx] = eg * (g[idx] + f[idx]);
        f[idx] *= eg;
    }
    Ok(PairMoment {
        moment: kahan_sum(f.iter().copied()),
        y_weighted: beta * beta * kahan_sum(g.iter().copied()),
    })
}

/// Environment-weighted pair kernel for one fixed disorder realization:
/// returns (E2[W], E2[Y_N W]) with W = exp(beta sum_n (w(n,S_n)+w(n,S~_n))
/// - 2 N lambda) and both walks killed outside the window. The exact
/// right-hand side of the pointwise gradient-norm bound.
pub fn pair_env_weighted_moment<F: Field>(
    law: &IncrementLaw,
    fieldv: &F,
    beta: f64,
    lambda: f64,
    n: u64,
    radius: i64,
) -> Result<(f64, f64)> {
    let s = (2 * radius + 1) as usize;
    if s * s > PAIR_STATE_BUDGET {
        return Err(Error::TooLarge(format!(
            "pair state space {s}x{s} exceeds budget {PAIR_STATE_BUDGET}"
        )));
    }
    let k_radius = (law.support_radius() as i64).min(2 * radius) as usize;
    let kernel = kernel_slice(law, k_radius);
    let mut conv = WindowedKernelConv::new(&kernel, k_radius, radius as usize);
    let mut f = vec![0.0f64; s * s];
    let mut g = vec![0.0f64; s * s];
    f[(radius as usize) * s + radius as usize] = 1.0;
    let mut row_in = vec![0.0f64; s];
    let mut site = vec![0.0f64; s];
    for step in 1..=n {
        conv_pair(&mut conv, &mut f, s, &mut row_in);
        conv_pair(&mut conv, &mut g, s, &mut row_in);
        for (i, sv) in site.iter_mut().enumerate() {
            let x = i as i64 - radius;
            *sv = (beta * fieldv.value(step as u32, x) - lambda).exp();
        }
        for i in 0..s {
            for j in 0..s {
                let wgt = site[i] * site[j];
                let idx = i * s + j;
                f[idx] *= wgt;
                g[idx] *= wgt;
                if i == j {
                    g[idx] += f[idx];
                }
            }
        }
    }
    Ok((kahan_sum(f.iter().copied()), kahan_sum(g.iter().copied())))
}

fn kernel_slice(law: &IncrementLaw, k_radius: usize) -> Vec<f64> {
    let mut kernel = vec![0.0; 2 * k_radius + 1];
    for (j, k) in (-(k_radius as i64)..=k_radius as i64).enumerate() {
        kernel[j] = law.prob(k);
    }
    kernel
}

fn conv_pair(conv: &mut WindowedKernelConv, grid: &mut [f64], s: usize, row_in: &mut [f64]) {
    for pass in 0..2 {
        for r in 0..s {
            let row = &mut grid[r * s..(r + 1) * s];
            row_in.copy_from_slice(row);
            conv.apply(row_in, row);
            for v in row.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        if pass == 0 {
            transpose_square(grid, s);
        }
    }
    transpose_square(grid, s);
}

fn transpose_square(grid: &mut [f64], s: usize) {
    for i in 0..s {
        for j in (i + 1)..s {
            grid.swap(i * s + j, j * s + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvKind;
    use crate::heavy_walk::n_step_pmf;

    #[test]
    fn collision_one_closed_form() {
        // 2 c^2 sum k^{-4} against the tabulated value; exact by aliasing
        // at this grid size.
        let law = IncrementLaw::canonical(1 << 12).unwrap();
        let table = OverlapTable::build(&law, 4).unwrap();
        let c = law.tail_constant();
        let s4 = kahan_sum((1..=(1u64 << 12)).map(|k| (k as f64).powi(-4)));
        let closed = 2.0 * c * c * s4;
        assert!(
            (table.collision(1) - closed).abs() < 1e-14,
            "{} vs {closed}",
            table.collision(1)
        );
        // The infinite-support limit is exactly 0.2; at 2^12 we're within 1e-4.
        assert!((table.collision(1) - 0.2).abs() < 1e-4);
        assert_eq!(table.d(0), 0.0);
        assert_eq!(table.d(1), table.collision(1));
    }

    #[test]
    fn spectral_and_windowed_builders_agree() {
        let law = IncrementLaw::canonical(2).unwrap();
        let spectral = OverlapTable::build(&law, 40).unwrap();
        let windowed = OverlapTable::build_windowed(&law, 40, 120).unwrap();
        for n in 1..=40u64 {
            assert!(
                (spectral.collision(n) - windowed.collision(n)).abs() < 1e-12,
                "n={n}"
            );
        }
    }

    #[test]
    fn d_inverse_roundtrip_and_ties() {
        let law = IncrementLaw::canonical(64).unwrap();
        let table = OverlapTable::build(&law, 200).unwrap();
        for k in [0u64, 1, 7, 100, 199] {
            assert_eq!(table.d_inverse(table.d(k)).unwrap(), k, "k={k}");
        }
        assert_eq!(table.d_inverse(0.0).unwrap(), 0);
        match table.d_inverse(1e9) {
            Err(Error::NeedsLongerTable { required, available }) => {
                assert_eq!(required, 1e9);
                assert!(available < 1e9);
            }
            other => panic!("expected needs-longer-table, got {other:?}"),
        }
    }

    #[test]
    fn d_is_strictly_increasing_with_nonnegative_increments() {
        let law = IncrementLaw::canonical(8).unwrap();
        let table = OverlapTable::build(&law, 300).unwrap();
        for n in 1..=300u64 {
            let inc = table.d(n) - table.d(n - 1);
            assert!((inc - table.collision(n)).abs() < 1e-15);
            assert!(inc > 0.0);
        }
    }

    #[test]
    fn recurrence_growth_of_canonical_law() {
        let law = IncrementLaw::canonical(1 << 16).unwrap();
        let report = recurrence_diagnostic(&law, 1 << 12).unwrap();
        assert!(report.recurrent_type);
        // Both partial sums strictly increase across dyadic levels.
        for pair in report.dyadic.windows(2) {
            assert!(pair[1].1 > pair[0].1);
            assert!(pair[1].2 > pair[0].2);
        }
        // Ratio of the two partial sums stays within [1/10, 10].
        for &(_, sa, snl) in &report.dyadic {
            let ratio = sa / snl;
            assert!((0.1..=10.0).contains(&ratio), "ratio {ratio}");
        }
        // sum 1/a_n over log N stabilizes: compare the top two levels.
        let k = report.dyadic.len();
        let (n1, s1, _) = report.dyadic[k - 2];
        let (n2, s2, _) = report.dyadic[k - 1];
        let r1 = s1 / (n1 as f64).ln();
        let r2 = s2 / (n2 as f64).ln();
        assert!((r2 - r1).abs() / r1 < 0.05, "{r1} vs {r2}");
    }

    #[test]
    fn restricted_overlap_limits() {
        let law = IncrementLaw::canonical(2).unwrap();
        // Huge R: no restriction bites, d_hat == d on the computed pmfs.
        let wide = restricted_overlap(&law, 12, 50.0).unwrap();
        assert!((wide.d_hat - wide.d).abs() < 1e-15);
        // u = 1, large R: the single-step square sum.
        let one = restricted_overlap(&law, 1, 50.0).unwrap();
        let expect = kahan_sum((-2i64..=2).map(|k| law.prob(k) * law.prob(k)));
        assert!((one.d_hat - expect).abs() < 1e-15);
        // Tight R: strictly smaller but still positive.
        let tight = restricted_overlap(&law, 12, 1.0).unwrap();
        assert!(tight.d_hat < wide.d_hat);
        assert!(tight.d_hat > 0.0);
        assert!(tight.d_hat <= tight.d);
    }

    #[test]
    fn d_ratio_check_basics() {
        let law = IncrementLaw::canonical(16).unwrap();
        let table = OverlapTable::build(&law, 512).unwrap();
        assert_eq!(d_ratio_check(&table, 1, 100).unwrap(), 1.0);
        let r = d_ratio_check(&table, 4, 100).unwrap();
        assert!(r >= 1.0);
        assert!(matches!(
            d_ratio_check(&table, 8, 100),
            Err(Error::NeedsLongerTable { .. })
        ));
    }

    #[test]
    fn window_collision_bound_cases() {
        let law = IncrementLaw::canonical(2).unwrap();
        let table = OverlapTable::build(&law, 16).unwrap();
        // Window covering the whole reachable support: equality.
        let full = window_collision_bound(&law, &table, 8, 2 * 8 + 1).unwrap();
        assert!((full.restricted - full.full).abs() < 1e-12);
        // I~0 = {0}: sum of squared return probabilities, strictly below D.
        let origin = window_collision_bound(&law, &table, 8, 1).unwrap();
        let mut expect = 0.0;
        for s in 1..=8u64 {
            let p = n_step_pmf(&law, s, 16).unwrap().prob(0);
            expect += p * p;
        }
        assert!((origin.restricted - expect).abs() < 1e-13);
        assert!(origin.restricted < origin.full);
    }

    fn enumerate_pair_moment(law: &IncrementLaw, gamma: f64, n: u64) -> (f64, f64) {
        // Brute force over ordered pairs of paths.
        let steps: Vec<i64> = (-(law.support_radius() as i64)..=law.support_radius() as i64)
            .filter(|&k| law.prob(k) > 0.0)
            .collect();
        let mut paths: Vec<(Vec<i64>, f64)> = vec![(vec![0], 1.0)];
        for _ in 0..n {
            let mut next = Vec::new();
            for (p, w) in &paths {
                for &s in &steps {
                    let mut q = p.clone();
                    q.push(p.last().unwrap() + s);
                    next.push((q, w * law.prob(s)));
                }
            }
            paths = next;
        }
        let mut moment = 0.0;
        let mut yw = 0.0;
        for (p1, w1) in &paths {
            for (p2, w2) in &paths {
                let y = (1..=n as usize).filter(|&k| p1[k] == p2[k]).count() as f64;
                let v = w1 * w2 * (gamma * y).exp();
                moment += v;
                yw += y * v;
            }
        }
        (moment, yw)
    }

    #[test]
    fn pair_moment_beta_zero() {
        let law = IncrementLaw::canonical(1).unwrap();
        let env = EnvSpec::new(EnvKind::GaussianUnit, 0);
        let m = pair_overlap_moment(&law, &env, 0.0, 4, 8).unwrap();
        assert!((m.moment - 1.0).abs() < 1e-12);
        assert_eq!(m.y_weighted, 0.0);
    }

    #[test]
    fn pair_moment_matches_double_path_enumeration() {
        let env = EnvSpec::new(EnvKind::GaussianUnit, 0);
        for (x_max, beta, n) in [(1u32, 0.6f64, 3u64), (2, 0.4, 3)] {
            let law = IncrementLaw::canonical(x_max).unwrap();
            let gamma = beta * beta; // gaussian-unit
            let (bm, byw) = enumerate_pair_moment(&law, gamma, n);
            let radius = (x_max as i64) * n as i64 + 1;
            let pm = pair_overlap_moment(&law, &env, beta, n, radius).unwrap();
            assert!((pm.moment - bm).abs() < 1e-12, "moment {} vs {bm}", pm.moment);
            assert!(
                (pm.y_weighted - beta * beta * byw).abs() < 1e-12,
                "yw {} vs {}",
                pm.y_weighted,
                beta * beta * byw
            );
            // The difference-walk route agrees on wide windows.
            let dm = pair_moment_difference_walk(&law, &env, beta, n, 2 * radius).unwrap();
            assert!((dm.moment - bm).abs() < 1e-12);
            assert!((dm.y_weighted - beta * beta * byw).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_moment_too_large_signal() {
        let law = IncrementLaw::canonical(1).unwrap();
        let env = EnvSpec::new(EnvKind::GaussianUnit, 0);
        assert!(matches!(
            pair_overlap_moment(&law, &env, 0.3, 4, 5000),
            Err(Error::TooLarge(_))
        ));
    }
}
