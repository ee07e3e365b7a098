//! The randomly trapped random walk on Z.
//!
//! `Y` is the walk on Z stepping `+1` with probability `beta/(beta + 1)`.
//! Each visit to `x` costs a fresh holding time drawn from the site law
//! `omega_x`, the clock is `S_n = eta_0 + ... + eta_{n-1}`, and
//! `X_t = Y_k` for `S_k <= t < S_{k+1}`.

mod centring;
mod regeneration;
mod walk;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::bridge;
use crate::error::{Error, Result};
use crate::offspring::OffspringLaw;
use crate::stream;
use crate::tree_walk::{self, WalkKernel};
use crate::trees::{self, BranchTree};

pub use centring::{
    annealed_hitting_variance, correction_sum_j, hitting_centrings, negative_truncation, quenched_centring_g,
};
pub use regeneration::{
    confirmation_buffer, detect_regenerations, sigma_sq_blocks, Regeneration, RegenerationBlock, SigmaEstimate,
    BOOTSTRAP_RESAMPLES,
};
pub use walk::{hitting_time, run_rtrw, Record, Trajectory};

/// Family of per-site holding-time laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrapModel {
    /// Every holding time is 1.
    UnitDeterministic,
    /// Site holding time is the constant `m1` with probability `p`, else `m2`.
    TwoPointDeterministic { m1: f64, m2: f64, p: f64 },
    /// Holding times are exponential with a per-site mean drawn from a
    /// discrete law given as `(mean, probability)` pairs.
    ExponentialMean { means: Vec<(f64, f64)> },
    /// Holding time is the absorption time of the biased walk on a random
    /// trap tree.
    TreeExcursion { law: OffspringLaw, beta: f64 },
}

impl TrapModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrapModel::UnitDeterministic => Ok(()),
            TrapModel::TwoPointDeterministic { m1, m2, p } => {
                if !(*m1 > 0.0 && *m2 > 0.0 && m1.is_finite() && m2.is_finite()) {
                    return Err(Error::Config(format!("holding times {m1}, {m2} must be positive")));
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Config(format!("probability {p} outside [0, 1]")));
                }
                Ok(())
            }
            TrapModel::ExponentialMean { means } => {
                if means.is_empty() {
                    return Err(Error::Config("empty law of site means".into()));
                }
                let total: f64 = means.iter().map(|m| m.1).sum();
                if (total - 1.0).abs() > 1e-9 || means.iter().any(|&(m, p)| !(m > 0.0) || p < 0.0) {
                    return Err(Error::Config("site means must be positive with probabilities summing to 1".into()));
                }
                Ok(())
            }
            TrapModel::TreeExcursion { law, beta } => {
                law.require_subcritical()?;
                if !(*beta >= 1.0 && beta.is_finite()) {
                    return Err(Error::Config(format!("tree bias {beta} must be at least 1")));
                }
                Ok(())
            }
        }
    }

    /// `E[eta_0]` averaged over the environment, `None` when infinite.
    pub fn annealed_mean(&self) -> Option<f64> {
        match self {
            TrapModel::UnitDeterministic => Some(1.0),
            TrapModel::TwoPointDeterministic { m1, m2, p } => Some(p * m1 + (1.0 - p) * m2),
            TrapModel::ExponentialMean { means } => Some(means.iter().map(|&(m, p)| m * p).sum()),
            TrapModel::TreeExcursion { law, beta } => bridge::expected_eta0(law, *beta).ok().flatten(),
        }
    }

    /// Variance over the environment of the quenched site mean, when known
    /// in closed form.
    pub fn site_mean_variance(&self) -> Option<f64> {
        match self {
            TrapModel::UnitDeterministic => Some(0.0),
            TrapModel::TwoPointDeterministic { m1, m2, p } => Some(p * (1.0 - p) * (m1 - m2).powi(2)),
            TrapModel::ExponentialMean { means } => {
                let m: f64 = means.iter().map(|&(m, p)| m * p).sum();
                Some(means.iter().map(|&(x, p)| p * x * x).sum::<f64>() - m * m)
            }
            TrapModel::TreeExcursion { .. } => None,
        }
    }

    /// `E[Var_omega(eta_0)]`, when known in closed form.
    pub fn mean_quenched_variance(&self) -> Option<f64> {
        match self {
            TrapModel::UnitDeterministic | TrapModel::TwoPointDeterministic { .. } => Some(0.0),
            TrapModel::ExponentialMean { means } => Some(means.iter().map(|&(m, p)| p * m * m).sum()),
            TrapModel::TreeExcursion { .. } => None,
        }
    }

    /// Draws the parameters of site `x` from its reserved stream.
    pub fn sample_site(&self, seed: u64, x: i64) -> Result<SiteTrap> {
        let mut rng = stream::site_stream(seed, x);
        self.sample_site_with(&mut rng)
    }

    pub fn sample_site_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SiteTrap> {
        Ok(match self {
            TrapModel::UnitDeterministic => SiteTrap::Fixed(1.0),
            TrapModel::TwoPointDeterministic { m1, m2, p } => {
                SiteTrap::Fixed(if rng.random::<f64>() < *p { *m1 } else { *m2 })
            }
            TrapModel::ExponentialMean { means } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut mean = means[means.len() - 1].0;
                for &(m, p) in means {
                    acc += p;
                    if u < acc {
                        mean = m;
                        break;
                    }
                }
                SiteTrap::Exponential(mean)
            }
            TrapModel::TreeExcursion { law, beta } => {
                let tree = trees::sample_branch_tree(law, rng)?;
                SiteTrap::branch(tree, *beta)?
            }
        })
    }
}

/// Materialized parameters of one site.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteTrap {
    Fixed(f64),
    Exponential(f64),
    Branch { tree: BranchTree, beta: f64, mean: f64 },
}

impl SiteTrap {
    /// Trap tree with its exact quenched mean excursion time.
    pub fn branch(tree: BranchTree, beta: f64) -> Result<Self> {
        let kernel = WalkKernel::ancestor_absorbing(&tree, beta)?;
        let mean = tree_walk::expected_hitting_time(&kernel, BranchTree::RHO, BranchTree::RHO_BAR)?;
        Ok(SiteTrap::Branch { tree, beta, mean })
    }

    /// `E^omega[eta_{x,0}]`.
    pub fn quenched_mean(&self) -> f64 {
        match self {
            SiteTrap::Fixed(m) | SiteTrap::Exponential(m) => *m,
            SiteTrap::Branch { mean, .. } => *mean,
        }
    }

    /// A fresh holding time.
    pub fn sample_holding<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SiteTrap::Fixed(m) => *m,
            SiteTrap::Exponential(m) => Exp::new(1.0 / m).expect("positive mean").sample(rng),
            SiteTrap::Branch { tree, beta, .. } => {
                tree_walk::simulate_excursion(tree, *beta, rng).expect("bias validated at construction") as f64
            }
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            SiteTrap::Fixed(m) => serde_json::json!({"fixed": m}),
            SiteTrap::Exponential(m) => serde_json::json!({"exponential_mean": m}),
            SiteTrap::Branch { tree, mean, .. } => serde_json::json!({
                "branch_edges": tree.tree().to_edge_list(),
                "quenched_mean": mean,
            }),
        }
    }
}

/// An environment materialized on a window `[lo, hi]` of Z. Site `x` is
/// always drawn from stream `(seed, Site, x)`, so growing the window never
/// changes existing sites.
#[derive(Debug, Clone)]
pub struct Environment {
    model: TrapModel,
    seed: u64,
    lo: i64,
    sites: Vec<SiteTrap>,
}

impl Environment {
    pub fn new(model: TrapModel, seed: u64, lo: i64, hi: i64) -> Result<Self> {
        model.validate()?;
        let mut env = Environment { model, seed, lo, sites: Vec::new() };
        if hi >= lo {
            env.sites.reserve((hi - lo + 1) as usize);
            for x in lo..=hi {
                let site = env.model.sample_site(seed, x)?;
                env.sites.push(site);
            }
        }
        Ok(env)
    }

    /// Environment with explicit sites on `[lo, lo + sites.len())`; sites
    /// outside are drawn from `seed` as usual.
    pub fn from_sites(model: TrapModel, seed: u64, lo: i64, sites: Vec<SiteTrap>) -> Result<Self> {
        model.validate()?;
        Ok(Environment { model, seed, lo, sites })
    }

    pub fn model(&self) -> &TrapModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Materialized window `[lo, hi]`; empty when `hi < lo`.
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.lo + self.sites.len() as i64 - 1)
    }

    pub fn covers(&self, x: i64) -> bool {
        let (lo, hi) = self.window();
        lo <= x && x <= hi
    }

    pub fn site(&self, x: i64) -> Result<&SiteTrap> {
        if self.covers(x) {
            Ok(&self.sites[(x - self.lo) as usize])
        } else {
            let (lo, hi) = self.window();
            Err(Error::MissingSite { site: x, lo, hi })
        }
    }

    pub fn quenched_mean(&self, x: i64) -> Result<f64> {
        Ok(self.site(x)?.quenched_mean())
    }

    /// Grows the window to contain `x`, at least doubling its length.
    pub fn extend_to(&mut self, x: i64) -> Result<()> {
        if self.covers(x) {
            return Ok(());
        }
        let (lo, hi) = self.window();
        let len = self.sites.len().max(1) as i64;
        if self.sites.is_empty() {
            self.lo = x;
            self.sites.push(self.model.sample_site(self.seed, x)?);
            return Ok(());
        }
        if x > hi {
            let new_hi = x.max(hi + len);
            for y in hi + 1..=new_hi {
                let site = self.model.sample_site(self.seed, y)?;
                self.sites.push(site);
            }
        } else {
            let new_lo = x.min(lo - len);
            let mut front = Vec::with_capacity((lo - new_lo) as usize + self.sites.len());
            for y in new_lo..lo {
                front.push(self.model.sample_site(self.seed, y)?);
            }
            front.append(&mut self.sites);
            self.sites = front;
            self.lo = new_lo;
        }
        Ok(())
    }

    /// `{"model": ..., "seed": ..., "sites": {"x": params}}`.
    pub fn to_json(&self) -> String {
        let sites: serde_json::Map<String, serde_json::Value> = self
            .sites
            .iter()
            .enumerate()
            .map(|(i, s)| ((self.lo + i as i64).to_string(), s.to_json()))
            .collect();
        serde_json::json!({"model": self.model, "seed": self.seed, "sites": sites}).to_string()
    }
}

/// Read-only view of an environment that materializes sites outside the
/// window privately, so one environment can serve many walks at once.
pub(crate) struct SiteCache<'a> {
    env: &'a Environment,
    below: Vec<SiteTrap>,
    above: Vec<SiteTrap>,
}

impl<'a> SiteCache<'a> {
    pub fn new(env: &'a Environment) -> Self {
        SiteCache { env, below: Vec::new(), above: Vec::new() }
    }

    pub fn get(&mut self, x: i64) -> Result<&SiteTrap> {
        let (lo, hi) = self.env.window();
        let model = &self.env.model;
        let seed = self.env.seed;
        let extend = |e: Error| Error::Extension(e.to_string());
        if self.env.sites.is_empty() {
            // Window empty: `above` holds 0, 1, ... and `below` holds -1, -2, ...
            if x >= 0 {
                while self.above.len() <= x as usize {
                    let y = self.above.len() as i64;
                    self.above.push(model.sample_site(seed, y).map_err(extend)?);
                }
                return Ok(&self.above[x as usize]);
            }
            let i = (-x - 1) as usize;
            while self.below.len() <= i {
                let y = -(self.below.len() as i64) - 1;
                self.below.push(model.sample_site(seed, y).map_err(extend)?);
            }
            return Ok(&self.below[i]);
        }
        if x < lo {
            let i = (lo - 1 - x) as usize;
            while self.below.len() <= i {
                let y = lo - 1 - self.below.len() as i64;
                self.below.push(model.sample_site(seed, y).map_err(extend)?);
            }
            Ok(&self.below[i])
        } else if x > hi {
            let i = (x - hi - 1) as usize;
            while self.above.len() <= i {
                let y = hi + 1 + self.above.len() as i64;
                self.above.push(model.sample_site(seed, y).map_err(extend)?);
            }
            Ok(&self.above[i])
        } else {
            Ok(&self.env.sites[(x - lo) as usize])
        }
    }
}

/// `nu = (beta - 1)/(E[eta_0] (beta + 1))`.
pub fn speed_formula(beta: f64, mean_eta0: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("bias {beta} must be positive")));
    }
    if !(mean_eta0 > 0.0 && mean_eta0.is_finite()) {
        return Err(Error::Domain(format!("mean holding time {mean_eta0} must be positive and finite")));
    }
    Ok((beta - 1.0) / (mean_eta0 * (beta + 1.0)))
}
