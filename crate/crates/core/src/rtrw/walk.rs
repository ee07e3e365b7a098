use rand::Rng;

use super::regeneration::{confirmation_buffer, Regeneration, RegenerationBlock, RegenerationTracker};
use super::{Environment, SiteCache};
use crate::error::{Error, Result};
use crate::tree_walk::z_step;

/// What to keep from a run besides the final position.
#[derive(Debug, Clone, Default)]
pub struct Record {
    /// Keep `(Y_k, S_k)` for every step.
    pub path: bool,
    /// Report `X_t` at these times; must be sorted.
    pub times: Vec<f64>,
    /// Track regeneration times.
    pub regenerations: bool,
    /// Trailing steps whose regeneration candidates are discarded; defaults
    /// to [`confirmation_buffer`].
    pub buffer: Option<u64>,
}

impl Record {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_regenerations() -> Self {
        Record { regenerations: true, ..Self::default() }
    }

    pub fn at_times(times: Vec<f64>) -> Self {
        Record { times, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `X_T`.
    pub position: i64,
    /// `S_k` for the step `k` in force at the horizon.
    pub clock: f64,
    /// Number of completed steps of `Y` by the horizon.
    pub steps: u64,
    pub regenerations: Vec<Regeneration>,
    /// `(Y_k, S_k)` for `k = 0..=steps`, when recorded.
    pub path: Option<Vec<(i64, f64)>>,
    /// `X_t` at the requested times.
    pub observed: Vec<i64>,
}

impl Trajectory {
    /// Increments between consecutive regenerations; the stretch before the
    /// first regeneration is not included.
    pub fn blocks(&self) -> Vec<RegenerationBlock> {
        self.regenerations
            .windows(2)
            .map(|w| RegenerationBlock {
                dx: w[1].level - w[0].level,
                dt: w[1].clock - w[0].clock,
                dk: w[1].kappa - w[0].kappa,
            })
            .collect()
    }
}

/// Runs the walk up to time `horizon` in environment `env`; sites outside
/// the materialized window are drawn on demand.
pub fn run_rtrw<R: Rng + ?Sized>(
    env: &Environment,
    beta: f64,
    horizon: f64,
    rng: &mut R,
    record: &Record,
) -> Result<Trajectory> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("bias {beta} must be positive")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon {horizon} must be finite and nonnegative")));
    }
    if record.times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("observation times must be sorted".into()));
    }
    let mut sites = SiteCache::new(env);
    let mut y: i64 = 0;
    let mut s = 0.0;
    let mut k: u64 = 0;
    let mut observed = Vec::with_capacity(record.times.len());
    let mut next_obs = 0;
    let mut path = record.path.then(|| vec![(0, 0.0)]);
    let mut tracker = RegenerationTracker::new();

    loop {
        let eta = sites.get(y)?.sample_holding(rng);
        let next = s + eta;
        while next_obs < record.times.len() && record.times[next_obs] < next {
            observed.push(y);
            next_obs += 1;
        }
        if next > horizon {
            break;
        }
        s = next;
        y += z_step(beta, rng);
        k += 1;
        if record.regenerations {
            tracker.visit(k, y, s);
        }
        if let Some(p) = path.as_mut() {
            p.push((y, s));
        }
    }

    let regenerations = if record.regenerations {
        let buffer = record.buffer.unwrap_or_else(|| confirmation_buffer(beta));
        tracker.confirmed(k, buffer)
    } else {
        Vec::new()
    };
    Ok(Trajectory { position: y, clock: s, steps: k, regenerations, path, observed })
}

/// `tau_n`, the time at which `X` first reaches level `n >= 1`.
pub fn hitting_time<R: Rng + ?Sized>(env: &Environment, beta: f64, n: i64, rng: &mut R) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("target level {n} must be positive")));
    }
    if !(beta > 1.0) {
        return Err(Error::Domain(format!("hitting times need beta > 1, got {beta}")));
    }
    let mut sites = SiteCache::new(env);
    let mut y = 0;
    let mut s = 0.0;
    while y < n {
        s += sites.get(y)?.sample_holding(rng);
        y += z_step(beta, rng);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtrw::TrapModel;
    use crate::stream::derive_stream;

    #[test]
    fn zero_horizon_stays_put() {
        let env = Environment::new(TrapModel::UnitDeterministic, 1, 0, -1).unwrap();
        let t = run_rtrw(&env, 2.0, 0.0, &mut derive_stream(1, 0), &Record::with_regenerations()).unwrap();
        assert_eq!(t.position, 0);
        assert_eq!(t.steps, 0);
        assert!(t.regenerations.is_empty());
    }

    #[test]
    fn clock_is_consistent_with_position() {
        let model = TrapModel::ExponentialMean { means: vec![(0.5, 0.5), (2.0, 0.5)] };
        let env = Environment::new(model, 4, 0, -1).unwrap();
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 2.5).collect();
        let record = Record { path: true, times: times.clone(), ..Record::default() };
        let t = run_rtrw(&env, 1.5, 500.0, &mut derive_stream(4, 0), &record).unwrap();
        let path = t.path.unwrap();
        assert!(path.windows(2).all(|w| w[1].1 > w[0].1));
        for (&time, &x) in times.iter().zip(&t.observed) {
            let k = path.partition_point(|&(_, s)| s <= time) - 1;
            assert_eq!(path[k].0, x, "t={time}");
        }
        assert_eq!(path.last().unwrap().0, t.position);
    }

    #[test]
    fn unit_traps_tick_once_per_step() {
        let env = Environment::new(TrapModel::UnitDeterministic, 1, 0, -1).unwrap();
        let t = run_rtrw(&env, 2.0, 100.0, &mut derive_stream(2, 0), &Record::none()).unwrap();
        assert_eq!(t.steps, 100);
        assert_eq!(t.clock, 100.0);
        assert_eq!(t.position.rem_euclid(2), 0);
    }
}
