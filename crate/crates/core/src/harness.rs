//! Goodness-of-fit tests, Monte Carlo bookkeeping and CLT experiments.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::bridge;
use crate::error::{Error, Result};
use crate::offspring::OffspringLaw;
use crate::rtrw::{
    annealed_hitting_variance, correction_sum_j, hitting_centrings, hitting_time, negative_truncation,
    quenched_centring_g, run_rtrw, sigma_sq_blocks, speed_formula, Environment, Record, SigmaEstimate, TrapModel,
};
use crate::stream::{self, child_seed, Domain};

/// Default significance threshold: a test passes when `p > 0.01`.
pub const DEFAULT_THRESHOLD: f64 = 0.01;
/// Smallest sample for which the asymptotic KS p-value is used.
pub const KS_MIN_SAMPLE: usize = 50;
/// Monte Carlo checks pass when the estimate is within this many standard errors.
pub const Z_TOLERANCE: f64 = 4.0;

/// `Phi(x)` from the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// CDF of `|N(0, variance)|`.
pub fn half_normal_cdf(x: f64, variance: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - erfc(x / (2.0 * variance).sqrt())
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut s = 0.0;
        for k in 1..=50 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * pi2 / (8.0 * x * x)).exp();
            s += term;
            if term < 1e-18 {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub threshold: f64,
    pub pass: bool,
}

impl TestReport {
    pub fn new(statistic: f64, p_value: f64, n: usize, threshold: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport { statistic, p_value, n, threshold, pass: p_value > threshold }
    }
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `D_n = sup_x |F_n(x) - F(x)|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let s = sorted(sample)?;
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// One-sample Kolmogorov-Smirnov test at [`DEFAULT_THRESHOLD`].
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestReport> {
    ks_test_with(sample, cdf, DEFAULT_THRESHOLD)
}

/// Asymptotic p-value with the `sqrt(n) + 0.12 + 0.11/sqrt(n)` small-sample
/// adjustment.
pub fn ks_test_with(sample: &[f64], cdf: impl Fn(f64) -> f64, threshold: f64) -> Result<TestReport> {
    if sample.len() < KS_MIN_SAMPLE {
        return Err(Error::SampleTooSmall { needed: KS_MIN_SAMPLE, have: sample.len() });
    }
    let d = ks_statistic(sample, cdf)?;
    let rn = (sample.len() as f64).sqrt();
    Ok(TestReport::new(d, kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d), sample.len(), threshold))
}

/// Two-sample Kolmogorov-Smirnov test. Ties are handled by evaluating both
/// empirical CDFs after each distinct value.
pub fn ks_two_sample(a: &[f64], b: &[f64], threshold: f64) -> Result<TestReport> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLE {
            return Err(Error::SampleTooSmall { needed: KS_MIN_SAMPLE, have: s.len() });
        }
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    Ok(TestReport::new(d, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d), a.len() + b.len(), threshold))
}

/// Anderson-Darling test with the asymptotic null distribution of
/// Marsaglia and Marsaglia (2004).
pub fn anderson_darling(sample: &[f64], cdf: impl Fn(f64) -> f64, threshold: f64) -> Result<TestReport> {
    if sample.len() < KS_MIN_SAMPLE {
        return Err(Error::SampleTooSmall { needed: KS_MIN_SAMPLE, have: sample.len() });
    }
    let s = sorted(sample)?;
    let n = s.len();
    let eps = 1e-300;
    let mut acc = 0.0;
    for i in 0..n {
        let lo = cdf(s[i]).clamp(eps, 1.0 - 1e-16);
        let hi = cdf(s[n - 1 - i]).clamp(eps, 1.0 - 1e-16);
        acc += (2 * i + 1) as f64 * (lo.ln() + (1.0 - hi).ln());
    }
    let a2 = -(n as f64) - acc / n as f64;
    Ok(TestReport::new(a2, 1.0 - ad_inf_cdf(a2), n, threshold))
}

fn ad_inf_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 2.0 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    } else {
        (-(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z).exp()).exp()
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { value: f64::NAN, se: f64::NAN, n };
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { value: m, se: f64::INFINITY, n };
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate { value: m, se: (v / n as f64).sqrt(), n }
}

/// An estimate compared with an exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub estimate: f64,
    pub se: f64,
    pub expected: f64,
    pub z: f64,
    pub pass: bool,
}

impl McCheck {
    pub fn new(estimate: Estimate, expected: f64) -> Self {
        let z = z_score(estimate.value, estimate.se, expected);
        McCheck { estimate: estimate.value, se: estimate.se, expected, z, pass: z.abs() <= Z_TOLERANCE }
    }
}

/// `(estimate - expected) / se`; 0 when both the difference and `se` vanish.
pub fn z_score(estimate: f64, se: f64, expected: f64) -> f64 {
    let diff = estimate - expected;
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

/// Runs `f(0..n)` on the current rayon pool; results are in index order.
pub fn replicate<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// At least `needed` of the reports pass.
pub fn passes_majority(reports: &[TestReport], needed: usize) -> bool {
    reports.iter().filter(|r| r.pass).count() >= needed
}

/// Spreads values on the lattice `{0, 2, 4, ...}` (or the odd one) into a
/// continuous sample: `v > 0` becomes uniform on `(v-1, v+1)`, `0` uniform on
/// `(0, 1)`.
pub fn parity_jitter<R: Rng + ?Sized>(values: &[u64], rng: &mut R) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let u: f64 = rng.random();
            if v == 0 {
                u
            } else {
                v as f64 - 1.0 + 2.0 * u
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CltMode {
    AnnealedPosition,
    QuenchedPosition,
    QuenchedHitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centring {
    /// `T nu` (annealed), `G(T)` (quenched position) or `H(n)` (hitting).
    #[default]
    Exact,
    /// `T nu` for position modes, `n (beta+1)/(beta-1) E[eta_0]` for hitting.
    Deterministic,
}

fn default_nested() -> u64 {
    200
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub mode: CltMode,
    pub model: TrapModel,
    pub beta: f64,
    /// `T` for position modes, the level `n` for hitting.
    pub horizon: f64,
    pub replicas: u64,
    pub seed: u64,
    pub calibration_seed: u64,
    #[serde(default)]
    pub centring: Centring,
    /// Length of the calibration run for the block variance; `100 T` if unset.
    #[serde(default)]
    pub calibration_horizon: Option<f64>,
    /// Quenched position: search for an environment with
    /// `|J(floor(nu T))| > sqrt(Var(m) floor(nu T))`.
    #[serde(default)]
    pub prescreen: bool,
    #[serde(default = "default_nested")]
    pub nested_outer: u64,
    #[serde(default = "default_nested")]
    pub nested_inner: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl CltConfig {
    pub fn new(mode: CltMode, model: TrapModel, beta: f64, horizon: f64, replicas: u64, seed: u64) -> Self {
        CltConfig {
            mode,
            model,
            beta,
            horizon,
            replicas,
            seed,
            calibration_seed: child_seed(seed, Domain::Calibration, 0),
            centring: Centring::Exact,
            calibration_horizon: None,
            prescreen: false,
            nested_outer: default_nested(),
            nested_inner: default_nested(),
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must exceed 1, got {}", self.beta)));
        }
        if !(self.horizon >= 1.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be at least 1, got {}", self.horizon)));
        }
        if self.replicas < KS_MIN_SAMPLE as u64 {
            return Err(Error::Config(format!("need at least {KS_MIN_SAMPLE} replicas, got {}", self.replicas)));
        }
        if self.calibration_seed == self.seed {
            return Err(Error::Config("calibration seed must differ from the test seed".into()));
        }
        if self.nested_outer < 2 || self.nested_inner < 2 {
            return Err(Error::Config("nested calibration needs at least 2 x 2 samples".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltOutcome {
    pub config: CltConfig,
    pub report: TestReport,
    pub standardized: Vec<f64>,
    pub centre: f64,
    pub scale: f64,
    pub nu: f64,
    pub mean_eta0: f64,
    /// Block estimate behind the annealed scale.
    pub sigma_blocks: Option<SigmaEstimate>,
    /// Hitting variance per level behind the quenched scales.
    pub sigma_hit_sq: Option<Estimate>,
    /// Index of the environment used by quenched modes.
    pub environment_index: Option<u64>,
    /// `J(floor(nu T))` of that environment.
    pub correction_j: Option<f64>,
}

/// Speed and annealed mean holding time in closed form.
pub fn model_speed(model: &TrapModel, beta: f64) -> Result<(f64, f64)> {
    let mean = model
        .annealed_mean()
        .ok_or_else(|| Error::Domain("annealed mean holding time is infinite".into()))?;
    Ok((speed_formula(beta, mean)?, mean))
}

/// The block estimate of the annealed variance from one long run on the
/// calibration seed.
pub fn calibrate_sigma_sq(model: &TrapModel, beta: f64, horizon: f64, calibration_seed: u64) -> Result<SigmaEstimate> {
    let (nu, mean) = model_speed(model, beta)?;
    let env = Environment::new(model.clone(), child_seed(calibration_seed, Domain::Environment, 0), 0, -1)?;
    let mut rng = stream::stream(calibration_seed, Domain::Calibration, 0);
    let run = run_rtrw(&env, beta, horizon, &mut rng, &Record::with_regenerations())?;
    sigma_sq_blocks(&run.blocks(), mean, nu, child_seed(calibration_seed, Domain::Bootstrap, 0))
}

/// `E[Var_omega(tau_1)]` by nested Monte Carlo: `outer` environments,
/// `inner` walks in each. Uses only calibration streams.
pub fn nested_hitting_variance(
    model: &TrapModel,
    beta: f64,
    outer: u64,
    inner: u64,
    calibration_seed: u64,
) -> Result<Estimate> {
    let k = negative_truncation(beta);
    let per_env = replicate(outer, |e| {
        let env = Environment::new(model.clone(), child_seed(calibration_seed, Domain::Environment, e), -k, 0)?;
        let taus = (0..inner)
            .map(|r| hitting_time(&env, beta, 1, &mut stream::stream(calibration_seed, Domain::Calibration, e * inner + r)))
            .collect::<Result<Vec<f64>>>()?;
        let m = taus.iter().sum::<f64>() / inner as f64;
        Ok(taus.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (inner - 1) as f64)
    })?;
    Ok(mean_se(&per_env))
}

fn hitting_variance(config: &CltConfig) -> Result<Estimate> {
    match (config.mode, annealed_hitting_variance(&config.model, config.beta)) {
        (CltMode::QuenchedPosition, Ok(v)) => Ok(Estimate { value: v, se: 0.0, n: 0 }),
        _ => nested_hitting_variance(
            &config.model,
            config.beta,
            config.nested_outer,
            config.nested_inner,
            config.calibration_seed,
        ),
    }
}

/// Environment `index` for quenched experiments, materialized on `[lo, hi]`.
fn quenched_environment(config: &CltConfig, index: u64, lo: i64, hi: i64) -> Result<Environment> {
    Environment::new(config.model.clone(), child_seed(config.seed, Domain::Environment, index), lo, hi)
}

const PRESCREEN_ATTEMPTS: u64 = 10_000;

/// Runs the experiment, standardizes each replica and tests against `Phi`.
pub fn clt_experiment(config: &CltConfig) -> Result<CltOutcome> {
    config.validate()?;
    let beta = config.beta;
    let t = config.horizon;
    let (nu, mean) = model_speed(&config.model, beta)?;
    let mut out = CltOutcome {
        config: config.clone(),
        report: TestReport::new(0.0, 0.0, 0, config.threshold),
        standardized: Vec::new(),
        centre: 0.0,
        scale: 0.0,
        nu,
        mean_eta0: mean,
        sigma_blocks: None,
        sigma_hit_sq: None,
        environment_index: None,
        correction_j: None,
    };
    let raw: Vec<f64> = match config.mode {
        CltMode::AnnealedPosition => {
            let cal = calibrate_sigma_sq(
                &config.model,
                beta,
                config.calibration_horizon.unwrap_or(100.0 * t),
                config.calibration_seed,
            )?;
            out.centre = nu * t;
            out.scale = (cal.value * t).sqrt();
            out.sigma_blocks = Some(cal);
            replicate(config.replicas, |i| {
                let env = Environment::new(config.model.clone(), child_seed(config.seed, Domain::Environment, i), 0, -1)?;
                let mut rng = stream::stream(config.seed, Domain::Replica, i);
                Ok(run_rtrw(&env, beta, t, &mut rng, &Record::none())?.position as f64)
            })?
        }
        CltMode::QuenchedPosition => {
            let n = (nu * t).floor() as i64;
            let (index, env) = if config.prescreen {
                let var_m = config
                    .model
                    .site_mean_variance()
                    .ok_or_else(|| Error::Config("prescreening needs a closed-form site-mean variance".into()))?;
                let bound = (var_m * n as f64).sqrt();
                let mut found = None;
                for e in 0..PRESCREEN_ATTEMPTS {
                    let env = quenched_environment(config, e, 0, n)?;
                    if correction_sum_j(&env, n as u64, mean)?.abs() > bound {
                        found = Some((e, env));
                        break;
                    }
                }
                found.ok_or_else(|| Error::Config("no environment passed the prescreen".into()))?
            } else {
                (0, quenched_environment(config, 0, 0, n)?)
            };
            let sh = hitting_variance(config)?;
            out.environment_index = Some(index);
            out.correction_j = Some(correction_sum_j(&env, n.max(0) as u64, mean)?);
            out.centre = match config.centring {
                Centring::Exact => quenched_centring_g(&env, beta, t, nu, mean)?,
                Centring::Deterministic => nu * t,
            };
            out.scale = sh.value.sqrt() * nu.powf(1.5) * t.sqrt();
            out.sigma_hit_sq = Some(sh);
            replicate(config.replicas, |i| {
                let mut rng = stream::stream(config.seed, Domain::Replica, i);
                Ok(run_rtrw(&env, beta, t, &mut rng, &Record::none())?.position as f64)
            })?
        }
        CltMode::QuenchedHitting => {
            let level = t.round() as i64;
            let env = quenched_environment(config, 0, -negative_truncation(beta), level)?;
            let sh = hitting_variance(config)?;
            out.environment_index = Some(0);
            out.correction_j = Some(correction_sum_j(&env, level as u64, mean)?);
            out.centre = match config.centring {
                Centring::Exact => hitting_centrings(&env, beta, level)?.0,
                Centring::Deterministic => level as f64 * (beta + 1.0) / (beta - 1.0) * mean,
            };
            out.scale = (sh.value * level as f64).sqrt();
            out.sigma_hit_sq = Some(sh);
            replicate(config.replicas, |i| {
                let mut rng = stream::stream(config.seed, Domain::Replica, i);
                hitting_time(&env, beta, level, &mut rng)
            })?
        }
    };
    if !(out.scale > 0.0 && out.scale.is_finite()) {
        return Err(Error::Domain(format!("degenerate scale {}", out.scale)));
    }
    out.standardized = raw.iter().map(|x| (x - out.centre) / out.scale).collect();
    out.report = ks_test_with(&out.standardized, normal_cdf, config.threshold)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EinsteinRow {
    pub beta: f64,
    /// `nu_beta / (beta - 1)` in closed form.
    pub closed_form: f64,
    pub estimate: f64,
    pub se: f64,
    pub limit: f64,
    pub z: f64,
}

/// For each bias: the closed-form `nu_beta/(beta-1)`, and a Monte Carlo
/// estimate from `replicas` annealed tree-trap walks run to `horizon`.
pub fn einstein_sweep(
    law: &OffspringLaw,
    betas: &[f64],
    replicas: u64,
    horizon: f64,
    seed: u64,
) -> Result<Vec<EinsteinRow>> {
    let limit = if betas.is_empty() { f64::NAN } else { bridge::einstein_limit(law)? };
    betas
        .iter()
        .enumerate()
        .map(|(b, &beta)| {
            if !(beta > 1.0 && beta * law.mean() < 1.0) {
                return Err(Error::Domain(format!("bias {beta} outside (1, 1/mu)")));
            }
            let closed_form = bridge::tree_speed(law, beta)? / (beta - 1.0);
            let model = TrapModel::TreeExcursion { law: law.clone(), beta };
            let s = child_seed(seed, Domain::Replica, b as u64);
            let speeds = replicate(replicas, |i| {
                let env = Environment::new(model.clone(), child_seed(s, Domain::Environment, i), 0, -1)?;
                let mut rng = stream::stream(s, Domain::Replica, i);
                Ok(run_rtrw(&env, beta, horizon, &mut rng, &Record::none())?.position as f64 / horizon / (beta - 1.0))
            })?;
            let est = mean_se(&speeds);
            Ok(EinsteinRow {
                beta,
                closed_form,
                estimate: est.value,
                se: est.se,
                limit,
                z: z_score(est.value, est.se, closed_form),
            })
        })
        .collect()
}

/// Closed-form column approaches the limit as `beta` decreases.
pub fn einstein_monotone(rows: &[EinsteinRow]) -> bool {
    let mut r: Vec<&EinsteinRow> = rows.iter().collect();
    r.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    r.windows(2).all(|w| (w[0].closed_form - w[0].limit).abs() < (w[1].closed_form - w[1].limit).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn normal_cdf_examples() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959963985) - 0.975).abs() < 1e-9);
        for x in [0.3, 1.0, 2.5, 6.0] {
            assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() < 1e-12);
        }
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for x in [1.1, 1.15, 1.18, 1.2, 1.3] {
            let pi2 = std::f64::consts::PI.powi(2);
            let theta: f64 = (1..=50).map(|k| (-(2.0 * k as f64 - 1.0).powi(2) * pi2 / (8.0 * x * x)).exp()).sum();
            let lo = 1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * theta;
            assert!((lo - kolmogorov_sf(x)).abs() < 1e-12, "{x}");
        }
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ideal_quantiles_fit_perfectly() {
        let n = 100;
        let s: Vec<f64> = (1..=n).map(|i| normal_quantile((i as f64 - 0.5) / n as f64)).collect();
        let r = ks_test(&s, normal_cdf).unwrap();
        assert!((r.statistic - 0.005).abs() < 1e-9);
        assert!(r.p_value > 0.999 && r.pass);
    }

    #[test]
    fn shifted_sample_is_rejected() {
        let mut rng = stream::derive_stream(11, 0);
        let s: Vec<f64> = (0..2000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); z + 1.0 }).collect();
        let r = ks_test(&s, normal_cdf).unwrap();
        assert!(r.p_value < 1e-6);
        assert!(r.statistic > 0.3);
    }

    #[test]
    fn statistic_matches_brute_force() {
        let mut rng = stream::derive_stream(5, 0);
        let s: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, &x) in sorted.iter().enumerate() {
            d = d.max(((i + 1) as f64 / 50.0 - x).abs()).max((x - i as f64 / 50.0).abs());
        }
        assert_eq!(ks_test(&s, |x| x).unwrap().statistic, d);
        assert!(matches!(ks_test(&s[..49], |x| x), Err(Error::SampleTooSmall { .. })));
    }

    #[test]
    fn two_sample_ties_and_shift() {
        let a: Vec<f64> = (0..200).map(|i| (i % 10) as f64).collect();
        let r = ks_two_sample(&a, &a, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.statistic, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 3.0).collect();
        assert!((ks_two_sample(&a, &b, DEFAULT_THRESHOLD).unwrap().statistic - 0.3).abs() < 1e-12);
    }

    #[test]
    fn anderson_darling_separates() {
        let mut rng = stream::derive_stream(12, 0);
        let s: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(anderson_darling(&s, normal_cdf, 0.01).unwrap().pass);
        let wide: Vec<f64> = s.iter().map(|x| 1.5 * x).collect();
        assert!(!anderson_darling(&wide, normal_cdf, 0.01).unwrap().pass);
    }

    #[test]
    fn half_normal_and_jitter() {
        assert_eq!(half_normal_cdf(0.0, 2.0), 0.0);
        assert!((half_normal_cdf(1.0, 1.0) - (2.0 * normal_cdf(1.0) - 1.0)).abs() < 1e-14);
        let j = parity_jitter(&[0, 2, 4], &mut stream::derive_stream(1, 1));
        assert!((0.0..1.0).contains(&j[0]) && (1.0..3.0).contains(&j[1]) && (3.0..5.0).contains(&j[2]));
    }

    #[test]
    fn replicate_keeps_order() {
        let v = replicate(1000, |i| Ok(i * 2)).unwrap();
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i as u64));
        assert!(replicate(10, |i| if i == 7 { Err(Error::Domain("x".into())) } else { Ok(i) }).is_err());
    }

    #[test]
    fn z_scores_and_majority() {
        let c = McCheck::new(Estimate { value: 1.1, se: 0.05, n: 10 }, 1.0);
        assert!((c.z - 2.0).abs() < 1e-12 && c.pass);
        assert_eq!(z_score(1.0, 0.0, 1.0), 0.0);
        let p = TestReport::new(0.1, 0.5, 100, 0.01);
        let f = TestReport::new(0.1, 0.001, 100, 0.01);
        assert!(passes_majority(&[p, f, p], 2));
        assert!(!passes_majority(&[p, f, f], 2));
    }

    #[test]
    fn empty_sweep_is_empty() {
        assert!(einstein_sweep(&crate::laws::law_a(), &[], 10, 100.0, 1).unwrap().is_empty());
    }

    #[test]
    fn config_checks() {
        let mut c = CltConfig::new(CltMode::AnnealedPosition, TrapModel::UnitDeterministic, 2.0, 100.0, 100, 1);
        assert!(c.validate().is_ok());
        c.calibration_seed = 1;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
