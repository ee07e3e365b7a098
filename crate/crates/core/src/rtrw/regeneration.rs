use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{self, Domain};

/// Number of bootstrap resamples behind [`SigmaEstimate::se`].
pub const BOOTSTRAP_RESAMPLES: u64 = 200;

/// A regeneration time `kappa` with `Y_kappa` and `S_kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regeneration {
    pub kappa: u64,
    pub level: i64,
    pub clock: f64,
}

/// Increments between two consecutive regenerations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegenerationBlock {
    pub dx: i64,
    pub dt: f64,
    pub dk: u64,
}

/// Steps at the end of a run whose regeneration candidates are discarded:
/// `max(1000, 50/(beta - 1))`. No candidate survives when `beta <= 1`.
pub fn confirmation_buffer(beta: f64) -> u64 {
    if beta <= 1.0 {
        return u64::MAX;
    }
    (50.0 / (beta - 1.0)).ceil().max(1000.0) as u64
}

/// Online regeneration candidates for a nearest-neighbour walk. A candidate
/// is a first visit to a new maximum; it dies when the walk steps below it.
#[derive(Debug, Default)]
pub(crate) struct RegenerationTracker {
    stack: Vec<Regeneration>,
    max: i64,
}

impl RegenerationTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn visit(&mut self, kappa: u64, level: i64, clock: f64) {
        while self.stack.last().is_some_and(|c| c.level > level) {
            self.stack.pop();
        }
        if level > self.max {
            self.max = level;
            self.stack.push(Regeneration { kappa, level, clock });
        }
    }

    pub fn confirmed(self, last_step: u64, buffer: u64) -> Vec<Regeneration> {
        let mut out = self.stack;
        out.retain(|c| c.kappa.saturating_add(buffer) <= last_step);
        out
    }
}

/// All `m >= 1` with `min_{l >= m} Y_l > max_{l < m} Y_l`, excluding those
/// within `confirmation_horizon` steps of the end of the path.
pub fn detect_regenerations(path: &[i64], confirmation_horizon: usize) -> Vec<usize> {
    let n = path.len();
    if n < 2 {
        return Vec::new();
    }
    let mut suffix_min = vec![0; n];
    suffix_min[n - 1] = path[n - 1];
    for i in (0..n - 1).rev() {
        suffix_min[i] = suffix_min[i + 1].min(path[i]);
    }
    let last = n - 1;
    let mut out = Vec::new();
    let mut prefix_max = path[0];
    for m in 1..n {
        if m + confirmation_horizon > last {
            break;
        }
        if suffix_min[m] > prefix_max {
            out.push(m);
        }
        prefix_max = prefix_max.max(path[m]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    /// Estimate of the annealed position variance per unit time.
    pub value: f64,
    /// Bootstrap standard error.
    pub se: f64,
    pub blocks: usize,
    /// Mean of the centred block increments and its standard error.
    pub mean_z: f64,
    pub se_mean_z: f64,
}

fn plug_in(blocks: &[RegenerationBlock], idx: impl Iterator<Item = usize>, mean_eta0: f64, nu: f64) -> f64 {
    let (mut z2, mut gap, mut n) = (0.0, 0.0, 0.0);
    for i in idx {
        let b = &blocks[i];
        let z = b.dx as f64 - nu * b.dt;
        z2 += z * z;
        gap += b.dk as f64;
        n += 1.0;
    }
    (z2 / n) / (mean_eta0 * (gap / n))
}

/// `mean(Z_j^2) / (E[eta_0] mean(kappa_j - kappa_{j-1}))` with
/// `Z_j = dx - nu dt`, over blocks that all follow the first regeneration.
/// The standard error comes from resampling blocks with stream
/// `(bootstrap_seed, Bootstrap, b)`.
pub fn sigma_sq_blocks(
    blocks: &[RegenerationBlock],
    mean_eta0: f64,
    nu: f64,
    bootstrap_seed: u64,
) -> Result<SigmaEstimate> {
    if blocks.len() < 2 {
        return Err(Error::TooFewBlocks { needed: 2, have: blocks.len() });
    }
    if !(mean_eta0 > 0.0 && mean_eta0.is_finite()) {
        return Err(Error::Domain(format!("mean holding time {mean_eta0} must be positive and finite")));
    }
    let n = blocks.len();
    let value = plug_in(blocks, 0..n, mean_eta0, nu);

    let mut reps = Vec::with_capacity(BOOTSTRAP_RESAMPLES as usize);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut rng = stream::stream(bootstrap_seed, Domain::Bootstrap, b);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        reps.push(plug_in(blocks, idx.into_iter(), mean_eta0, nu));
    }
    let m = reps.iter().sum::<f64>() / reps.len() as f64;
    let se = (reps.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();

    let zs: Vec<f64> = blocks.iter().map(|b| b.dx as f64 - nu * b.dt).collect();
    let mean_z = zs.iter().sum::<f64>() / n as f64;
    let var_z = zs.iter().map(|z| (z - mean_z).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(SigmaEstimate { value, se, blocks: n, mean_z, se_mean_z: (var_z / n as f64).sqrt() })
}
