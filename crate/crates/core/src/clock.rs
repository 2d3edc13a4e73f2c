//! Stochastic models of imperfect clocks.
//!
//! A clock's readout `t` differs from ideal time `s` by a cumulative error
//! `Delta(t)`, whose derivative `alpha(t)` is a zero-mean stationary process.
//! The generic model is the Ornstein-Uhlenbeck process with correlation
//! `c(tau) = (kappa/theta)^2 e^{-|tau|/theta}`; a tabulated correlation model
//! covers measured clocks. Samplers are pure functions of `(params, seed,
//! stream)`, so ensembles are reproducible and order-independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::numeric::{linear_fit, KahanSum};
use crate::par;
use crate::{Error, Result};

/// A clock with `kappa/theta` at or above this ratio is outside the
/// good-clock regime; callers are warned but never rejected.
pub const GOOD_CLOCK_RATIO: f64 = 0.1;

/// The sampling grid must resolve the correlation time: `dt <= theta / 20`.
pub const GRID_RESOLUTION: f64 = 20.0;

/// Longest autocorrelation lag retained by the estimator.
const MAX_LAGS: usize = 512;

/// Correlation structure of the relative-error process.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationModel {
    /// Exponential correlation; the generic good clock.
    OrnsteinUhlenbeck,
    /// User-supplied correlation sampled on an ascending `tau >= 0` grid,
    /// linearly interpolated and even-extended to negative lags.
    Tabulated { tau: Vec<f64>, c: Vec<f64> },
}

/// Statistical fingerprint of a clock: tick spacing `epsilon`, correlation
/// time `theta`, noise amplitude `kappa` (both in time units), and the
/// correlation model.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockParams {
    epsilon: f64,
    theta: f64,
    kappa: f64,
    model: CorrelationModel,
}

impl ClockParams {
    /// Ornstein-Uhlenbeck clock. `kappa = 0` is the ideal-clock limit and is
    /// accepted; bad ratios `kappa/theta` are recorded, not rejected.
    pub fn new(epsilon: f64, theta: f64, kappa: f64) -> Result<Self> {
        Self::with_model(epsilon, theta, kappa, CorrelationModel::OrnsteinUhlenbeck)
    }

    pub fn with_model(
        epsilon: f64,
        theta: f64,
        kappa: f64,
        model: CorrelationModel,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::parameter("epsilon must be positive and finite"));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::parameter("theta must be positive and finite"));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::parameter("kappa must be non-negative and finite"));
        }
        if let CorrelationModel::Tabulated { tau, c } = &model {
            if tau.is_empty() || tau.len() != c.len() {
                return Err(Error::parameter(
                    "tabulated correlation needs equal, non-empty tau and c grids",
                ));
            }
            if tau[0] != 0.0 {
                return Err(Error::parameter("tabulated correlation must start at tau = 0"));
            }
            if tau.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::parameter("tabulated tau grid must be strictly ascending"));
            }
        }
        Ok(Self {
            epsilon,
            theta,
            kappa,
            model,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn model(&self) -> &CorrelationModel {
        &self.model
    }

    /// Variance of the relative error in the stationary state,
    /// `c0 = (kappa/theta)^2`. Must stay well below 1 for the Gaussian
    /// description to hold.
    pub fn c0(&self) -> f64 {
        let r = self.kappa / self.theta;
        r * r
    }

    pub fn kappa_theta_ratio(&self) -> f64 {
        self.kappa / self.theta
    }

    /// Whether the clock sits inside the good-clock regime
    /// (`kappa/theta < 0.1`).
    pub fn is_good_clock(&self) -> bool {
        self.kappa_theta_ratio() < GOOD_CLOCK_RATIO
    }

    /// Diffusion constant `D = kappa^2 / theta` of the induced master
    /// equation.
    pub fn diffusion(&self) -> f64 {
        self.kappa * self.kappa / self.theta
    }

    /// Correlation `c(tau)` of the relative-error process. Even in `tau`;
    /// tabulated models refuse to extrapolate.
    pub fn correlation(&self, tau: f64) -> Result<f64> {
        let a = tau.abs();
        match &self.model {
            CorrelationModel::OrnsteinUhlenbeck => Ok(self.c0() * (-a / self.theta).exp()),
            CorrelationModel::Tabulated { tau: grid, c } => {
                let last = *grid.last().unwrap();
                if a > last {
                    return Err(Error::range(format!(
                        "tau = {tau} outside tabulated range [-{last}, {last}]"
                    )));
                }
                let idx = grid.partition_point(|&g| g < a);
                if idx == 0 {
                    return Ok(c[0]);
                }
                let (t0, t1) = (grid[idx - 1], grid[idx.min(grid.len() - 1)]);
                if t1 == t0 {
                    return Ok(c[idx - 1]);
                }
                let w = (a - t0) / (t1 - t0);
                Ok(c[idx - 1] * (1.0 - w) + c[idx.min(c.len() - 1)] * w)
            }
        }
    }

    /// Clock time over which accumulated errors stay below the system's
    /// characteristic evolution time `zeta`: `zeta^2 theta / kappa^2`.
    /// Infinite for the ideal clock.
    pub fn period_of_applicability(&self, zeta: f64) -> Result<f64> {
        if !(zeta > 0.0) {
            return Err(Error::parameter("zeta must be positive"));
        }
        if self.kappa == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(zeta * zeta * self.theta / (self.kappa * self.kappa))
    }
}

/// One realization of the relative-error process on a uniform grid, with the
/// cumulative error accumulated by the trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid_dt: f64,
    alpha: Vec<f64>,
    delta: Vec<f64>,
    causality_violations: usize,
    seed: u64,
    stream: u64,
}

impl NoisePath {
    pub fn grid_dt(&self) -> f64 {
        self.grid_dt
    }

    /// Relative errors `alpha(t_i)`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Cumulative errors `Delta(t_i)`; `delta[0] = 0` always.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Number of samples with `alpha <= -1` (causality violations — counted,
    /// never clipped).
    pub fn causality_violations(&self) -> usize {
        self.causality_violations
    }

    pub fn seed(&self) -> (u64, u64) {
        (self.seed, self.stream)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.grid_dt
    }
}

/// Ticks `s_k = k epsilon + Delta_k` of a discrete clock, together with the
/// relative-error sequence that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSequence {
    epsilon: f64,
    ticks: Vec<f64>,
    alpha: Vec<f64>,
    causality_violations: usize,
    seed: u64,
    stream: u64,
}

impl TickSequence {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Ideal arrival times `s_k`, `k = 0..=n_ticks`.
    pub fn ticks(&self) -> &[f64] {
        &self.ticks
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn causality_violations(&self) -> usize {
        self.causality_violations
    }

    /// Cumulative error at tick `k`.
    pub fn delta(&self, k: usize) -> f64 {
        self.ticks[k] - k as f64 * self.epsilon
    }
}

/// RNG for path `stream` of ensemble `seed`. ChaCha streams keep paths
/// independent while letting any path be regenerated in isolation.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples a stationary Ornstein-Uhlenbeck path on a uniform grid covering
/// `[0, horizon]`.
///
/// The initial value is drawn from the stationary law `N(0, (kappa/theta)^2)`
/// and each step uses the exact conditional update, so there is no burn-in
/// and no discretization bias in the correlation.
pub fn sample_ou_path(
    params: &ClockParams,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<NoisePath> {
    sample_ou_path_indexed(params, horizon, dt, seed, 0)
}

/// As [`sample_ou_path`], with an explicit ensemble stream index.
pub fn sample_ou_path_indexed(
    params: &ClockParams,
    horizon: f64,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<NoisePath> {
    let steps = grid_steps(params, horizon, dt)?;
    require_ou(params)?;
    Ok(sample_ou_path_steps(params, steps, dt, seed, stream))
}

/// Core sampler over a pre-validated grid of `steps` intervals.
pub(crate) fn sample_ou_path_steps(
    params: &ClockParams,
    steps: usize,
    dt: f64,
    seed: u64,
    stream: u64,
) -> NoisePath {
    let mut rng = path_rng(seed, stream);

    let sigma = params.kappa / params.theta;
    let decay = (-dt / params.theta).exp();
    // 1 - e^{-2 dt/theta}, evaluated without cancellation for small dt.
    let step_sigma = sigma * (-(-2.0 * dt / params.theta).exp_m1()).sqrt();

    let mut alpha = Vec::with_capacity(steps + 1);
    let mut delta = Vec::with_capacity(steps + 1);
    let mut violations = 0usize;

    let z0: f64 = rng.sample(StandardNormal);
    let mut a = sigma * z0;
    if a <= -1.0 {
        violations += 1;
    }
    alpha.push(a);
    delta.push(0.0);

    let mut d = 0.0f64;
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        let next = a * decay + step_sigma * z;
        if next <= -1.0 {
            violations += 1;
        }
        d += 0.5 * dt * (a + next);
        alpha.push(next);
        delta.push(d);
        a = next;
    }

    NoisePath {
        grid_dt: dt,
        alpha,
        delta,
        causality_violations: violations,
        seed,
        stream,
    }
}

/// Number of grid intervals needed to cover `[0, horizon]` at spacing `dt`,
/// after validating the sampling preconditions.
pub(crate) fn grid_steps(params: &ClockParams, horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || dt > params.theta / GRID_RESOLUTION {
        return Err(Error::parameter(format!(
            "dt = {dt} must lie in (0, theta/{GRID_RESOLUTION} = {}]",
            params.theta / GRID_RESOLUTION
        )));
    }
    if horizon < dt {
        return Err(Error::parameter(format!(
            "horizon = {horizon} shorter than one step dt = {dt}"
        )));
    }
    // Tolerate representation error in horizon/dt before rounding up.
    Ok(((horizon / dt) * (1.0 - 1e-12)).ceil() as usize)
}

pub(crate) fn require_ou(params: &ClockParams) -> Result<()> {
    match params.model {
        CorrelationModel::OrnsteinUhlenbeck => Ok(()),
        CorrelationModel::Tabulated { .. } => Err(Error::parameter(
            "path sampling is defined for the OrnsteinUhlenbeck model only",
        )),
    }
}

/// Samples the first `n_ticks` ticks of a discrete clock: `s_k = k epsilon +
/// Delta_k` with `Delta_{k+1} = Delta_k + epsilon alpha_k` and the alpha
/// sequence a stationary OU process sampled at spacing epsilon.
pub fn sample_tick_sequence(
    params: &ClockParams,
    n_ticks: usize,
    seed: u64,
) -> Result<TickSequence> {
    sample_tick_sequence_indexed(params, n_ticks, seed, 0)
}

/// As [`sample_tick_sequence`], with an explicit ensemble stream index.
pub fn sample_tick_sequence_indexed(
    params: &ClockParams,
    n_ticks: usize,
    seed: u64,
    stream: u64,
) -> Result<TickSequence> {
    if n_ticks < 1 {
        return Err(Error::parameter("n_ticks must be at least 1"));
    }
    require_ou(params)?;
    let mut rng = path_rng(seed, stream);

    let sigma = params.kappa / params.theta;
    let decay = (-params.epsilon / params.theta).exp();
    let step_sigma = sigma * (-(-2.0 * params.epsilon / params.theta).exp_m1()).sqrt();

    let mut alpha = Vec::with_capacity(n_ticks);
    let mut ticks = Vec::with_capacity(n_ticks + 1);
    let mut violations = 0usize;

    let z0: f64 = rng.sample(StandardNormal);
    let mut a = sigma * z0;
    let mut delta = 0.0f64;
    ticks.push(0.0);
    for k in 0..n_ticks {
        if a <= -1.0 {
            violations += 1;
        }
        alpha.push(a);
        delta += params.epsilon * a;
        ticks.push((k + 1) as f64 * params.epsilon + delta);
        let z: f64 = rng.sample(StandardNormal);
        a = a * decay + step_sigma * z;
    }

    Ok(TickSequence {
        epsilon: params.epsilon,
        ticks,
        alpha,
        causality_violations: violations,
        seed,
        stream,
    })
}

/// Empirical statistics recovered from sampled paths.
#[derive(Debug, Clone)]
pub struct ClockStats {
    /// Pooled mean of the relative errors.
    pub mean_alpha: f64,
    /// Biased (1/N) autocorrelation estimate at lags `j >= 0`; negative lags
    /// follow by symmetry and are not stored.
    pub c_hat: Vec<f64>,
    /// Time spacing between successive lags (the sampling step).
    pub lag_spacing: f64,
    /// Correlation-time estimate `theta_hat = spacing * sum_j c_j / (2 c_0)`;
    /// absent when the data carry no fluctuations.
    pub theta_hat: Option<f64>,
    /// `kappa_hat = theta_hat * sqrt(c_0)`.
    pub kappa_hat: Option<f64>,
    /// Diffusion estimate from the cumulative error: half the fitted growth
    /// rate of `<Delta^2>` against elapsed time. The variance of an
    /// exponentially correlated clock grows as `2 (kappa^2/theta) t`, so this
    /// estimates `kappa^2/theta` directly.
    pub variance_slope: f64,
    /// Paths that went into the estimate.
    pub n_paths: usize,
    /// Total relative-error samples.
    pub total_samples: usize,
    /// Causality violations observed across all paths.
    pub causality_violations: usize,
}

/// Estimates clock statistics from continuous noise paths.
pub fn estimate_stats(paths: &[NoisePath]) -> Result<ClockStats> {
    if paths.is_empty() {
        return Err(Error::parameter("need at least one path"));
    }
    let spacing = paths[0].grid_dt;
    if paths.iter().any(|p| p.grid_dt != spacing) {
        return Err(Error::parameter("paths must share one grid spacing"));
    }
    let alphas: Vec<&[f64]> = paths.iter().map(|p| p.alpha.as_slice()).collect();
    let deltas: Vec<&[f64]> = paths.iter().map(|p| p.delta.as_slice()).collect();
    let violations = paths.iter().map(|p| p.causality_violations).sum();
    estimate_from_sequences(&alphas, &deltas, spacing, violations)
}

/// Estimates clock statistics from discrete tick sequences.
pub fn estimate_stats_ticks(sequences: &[TickSequence]) -> Result<ClockStats> {
    if sequences.is_empty() {
        return Err(Error::parameter("need at least one tick sequence"));
    }
    let spacing = sequences[0].epsilon;
    if sequences.iter().any(|s| s.epsilon != spacing) {
        return Err(Error::parameter("tick sequences must share one epsilon"));
    }
    let alphas: Vec<&[f64]> = sequences.iter().map(|s| s.alpha.as_slice()).collect();
    let deltas: Vec<Vec<f64>> = sequences
        .iter()
        .map(|s| (0..s.ticks.len()).map(|k| s.delta(k)).collect())
        .collect();
    let delta_refs: Vec<&[f64]> = deltas.iter().map(|d| d.as_slice()).collect();
    let violations = sequences.iter().map(|s| s.causality_violations).sum();
    estimate_from_sequences(&alphas, &delta_refs, spacing, violations)
}

fn estimate_from_sequences(
    alphas: &[&[f64]],
    deltas: &[&[f64]],
    spacing: f64,
    causality_violations: usize,
) -> Result<ClockStats> {
    if alphas.iter().any(|a| a.len() < 2) {
        return Err(Error::parameter("each path needs at least two samples"));
    }
    let total_samples: usize = alphas.iter().map(|a| a.len()).sum();
    let mean_alpha = alphas
        .iter()
        .flat_map(|a| a.iter())
        .fold(KahanSum::new(), |mut acc, &x| {
            acc.add(x);
            acc
        })
        .value()
        / total_samples as f64;

    let max_lag = alphas.iter().map(|a| a.len() - 1).min().unwrap().min(MAX_LAGS);

    // Per-path biased autocovariances about the pooled mean, combined with
    // sample-count weights. Computed per path so ensembles parallelize.
    let partials: Vec<(Vec<f64>, f64)> = par::map_indices(alphas.len(), |p| {
        let a = alphas[p];
        let n = a.len();
        let mut c = vec![0.0f64; max_lag + 1];
        for (j, cj) in c.iter_mut().enumerate() {
            let mut acc = KahanSum::new();
            for i in 0..(n - j) {
                acc.add((a[i] - mean_alpha) * (a[i + j] - mean_alpha));
            }
            *cj = acc.value() / n as f64;
        }
        (c, n as f64)
    });

    let weight_total: f64 = partials.iter().map(|(_, w)| w).sum();
    let mut c_hat = vec![0.0f64; max_lag + 1];
    for (c, w) in &partials {
        for (j, cj) in c.iter().enumerate() {
            c_hat[j] += cj * w / weight_total;
        }
    }

    // Integrated correlation time, truncated at the first non-positive lag to
    // keep the noisy tail out of the sum.
    let c0 = c_hat[0];
    let (theta_hat, kappa_hat) = if c0 > 0.0 {
        let mut sum = c0;
        for &cj in &c_hat[1..] {
            if cj <= 0.0 {
                break;
            }
            sum += 2.0 * cj;
        }
        let theta = spacing * sum / (2.0 * c0);
        (Some(theta), Some(theta * c0.sqrt()))
    } else {
        (None, None)
    };

    // <Delta^2> against elapsed time, fitted over the second half of the grid
    // where the growth is linear; half the slope estimates kappa^2/theta.
    let min_len = deltas.iter().map(|d| d.len()).min().unwrap();
    let mut ts = Vec::new();
    let mut var = Vec::new();
    for i in (min_len / 2)..min_len {
        let mut acc = KahanSum::new();
        for d in deltas {
            acc.add(d[i] * d[i]);
        }
        ts.push(i as f64 * spacing);
        var.push(acc.value() / deltas.len() as f64);
    }
    let variance_slope = linear_fit(&ts, &var).map(|(m, _)| 0.5 * m).unwrap_or(0.0);

    Ok(ClockStats {
        mean_alpha,
        c_hat,
        lag_spacing: spacing,
        theta_hat,
        kappa_hat,
        variance_slope,
        n_paths: alphas.len(),
        total_samples,
        causality_violations,
    })
}
