//! The biased walk on the subcritical GW tree conditioned to survive, seen
//! as a trapped walk on its backbone.
//!
//! Each backbone vertex with its branches is a trap; the time the walk
//! spends there between backbone moves is an excursion of the walk on a
//! [`BranchTree`] until it is absorbed at the ancestor.

use std::borrow::Cow;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::OffspringLaw;
use crate::rtrw::{Environment, SiteTrap, TrapModel};
use crate::stream::{self, Domain};
use crate::tree_walk;
use crate::trees::{self, KestenWindow, ROOT};

/// Default `delta` for the quenched moment condition `E[xi^{3+delta}] < inf`.
pub const DEFAULT_DELTA: f64 = 0.5;

fn require_mean(law: &OffspringLaw) -> Result<()> {
    law.require_subcritical()?;
    if law.mean() <= 0.0 {
        return Err(Error::InvalidLaw("offspring mean must be positive".into()));
    }
    Ok(())
}

/// `E[eta_0]`, the annealed mean excursion time of a trap:
/// `[mu(beta+1)(1-beta mu) + 2 beta (sigma^2 - mu(1-mu))] / [mu(beta+1)(1-beta mu)]`.
/// `None` when infinite (`beta mu >= 1` or infinite offspring variance).
pub fn expected_eta0(law: &OffspringLaw, beta: f64) -> Result<Option<f64>> {
    require_mean(law)?;
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("bias {beta} must be at least 1")));
    }
    let mu = law.mean();
    if beta * mu >= 1.0 || !law.moment_finite(2.0) {
        return Ok(None);
    }
    let den = mu * (beta + 1.0) * (1.0 - beta * mu);
    let num = den + 2.0 * beta * (law.variance() - mu * (1.0 - mu));
    Ok(Some(num / den))
}

/// `nu_beta = mu (beta-1)(1-beta mu) / [mu(beta+1)(1-beta mu) + 2 beta (sigma^2 - mu(1-mu))]`,
/// and 0 when `beta mu >= 1`.
pub fn tree_speed(law: &OffspringLaw, beta: f64) -> Result<f64> {
    require_mean(law)?;
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("tree speed needs beta > 1, got {beta}")));
    }
    let mu = law.mean();
    if beta * mu >= 1.0 || !law.moment_finite(2.0) {
        return Ok(0.0);
    }
    let a = mu * (beta + 1.0) * (1.0 - beta * mu);
    Ok(mu * (beta - 1.0) * (1.0 - beta * mu) / (a + 2.0 * beta * (law.variance() - mu * (1.0 - mu))))
}

/// `lim_{beta -> 1+} nu_beta / (beta - 1) = mu (1 - mu) / (2 sigma^2)`.
pub fn einstein_limit(law: &OffspringLaw) -> Result<f64> {
    require_mean(law)?;
    let s2 = law.variance();
    if s2 <= 0.0 {
        return Err(Error::DegenerateTree("offspring variance is zero".into()));
    }
    let mu = law.mean();
    Ok(mu * (1.0 - mu) / (2.0 * s2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub beta: f64,
    pub mu: f64,
    pub delta: f64,
    /// `beta mu < 1` and finite offspring variance.
    pub ballistic: bool,
    /// `beta^2 mu < 1` and `E[xi^3] < inf`.
    pub annealed_clt: bool,
    /// `beta^2 mu < 1` and `E[xi^{3+delta}] < inf`.
    pub quenched_clt: bool,
    /// `beta^2 mu >= 1` or `E[xi^3] = inf`.
    pub necessity_violation: bool,
}

pub fn regime(law: &OffspringLaw, beta: f64, delta: f64) -> RegimeReport {
    let mu = law.mean();
    let b2 = beta * beta * mu < 1.0;
    RegimeReport {
        beta,
        mu,
        delta,
        ballistic: beta * mu < 1.0 && law.moment_finite(2.0),
        annealed_clt: b2 && law.moment_finite(3.0),
        quenched_clt: b2 && law.moment_finite(3.0 + delta),
        necessity_violation: !b2 || !law.moment_finite(3.0),
    }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {}", "beta", self.beta)?;
        writeln!(f, "{:<22} {}", "mu", self.mu)?;
        writeln!(f, "{:<22} {:.6}", "beta*mu", self.beta * self.mu)?;
        writeln!(f, "{:<22} {:.6}", "beta^2*mu", self.beta * self.beta * self.mu)?;
        writeln!(f, "{:<22} {}", "delta", self.delta)?;
        writeln!(f, "{:<22} {}", "ballistic", self.ballistic)?;
        writeln!(f, "{:<22} {}", "annealed_clt", self.annealed_clt)?;
        writeln!(f, "{:<22} {}", "quenched_clt", self.quenched_clt)?;
        write!(f, "{:<22} {}", "necessity_violation", self.necessity_violation)
    }
}

/// RTRW environment on `[lo, hi]` whose traps are i.i.d. branch trees,
/// keyed by a draw from `rng`.
pub fn build_tree_environment<R: Rng + ?Sized>(
    law: &OffspringLaw,
    beta: f64,
    lo: i64,
    hi: i64,
    rng: &mut R,
) -> Result<Environment> {
    Environment::new(TrapModel::TreeExcursion { law: law.clone(), beta }, rng.random(), lo, hi)
}

/// What to keep from a walk on a Kesten window.
#[derive(Debug, Clone, Default)]
pub struct TreeWalkRecord {
    /// Report the walk at these step counts; must be sorted.
    pub times: Vec<u64>,
    /// Keep `|X_n|` and `|X~_n|` for every step.
    pub path: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeWalkRun {
    /// `|X_n|` at the horizon.
    pub distance: u64,
    /// `|X~_n|`, the backbone index of the walk's branch, at the horizon.
    pub projection: u64,
    /// `|X_n|` at the requested times.
    pub observed_distance: Vec<u64>,
    pub observed_projection: Vec<u64>,
    /// `max_{m <= n} (|X_m| - |X~_m|)` at the requested times.
    pub max_deviation: Vec<u64>,
    pub path_distance: Option<Vec<u64>>,
    pub path_projection: Option<Vec<u64>>,
}

/// `horizon` steps of the biased walk from `rho_0`. The window is cloned
/// only if the walk outruns its decorations.
pub fn simulate_tree_walk<R: Rng + ?Sized>(
    window: &KestenWindow,
    beta: f64,
    horizon: u64,
    rng: &mut R,
    record: &TreeWalkRecord,
) -> Result<TreeWalkRun> {
    walk_on(Cow::Borrowed(window), beta, horizon, rng, record).map(|(run, _)| run)
}

/// As [`simulate_tree_walk`], taking ownership so extensions never copy.
/// Returns the possibly extended window.
pub fn simulate_tree_walk_owned<R: Rng + ?Sized>(
    window: KestenWindow,
    beta: f64,
    horizon: u64,
    rng: &mut R,
    record: &TreeWalkRecord,
) -> Result<(TreeWalkRun, KestenWindow)> {
    walk_on(Cow::Owned(window), beta, horizon, rng, record).map(|(run, w)| (run, w.into_owned()))
}

fn walk_on<'a, R: Rng + ?Sized>(
    mut window: Cow<'a, KestenWindow>,
    beta: f64,
    horizon: u64,
    rng: &mut R,
    record: &TreeWalkRecord,
) -> Result<(TreeWalkRun, Cow<'a, KestenWindow>)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("bias {beta} must be positive")));
    }
    if record.times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("observation times must be sorted".into()));
    }
    let mut v = ROOT;
    let mut max_dev = 0;
    let mut next_obs = 0;
    let mut out = TreeWalkRun {
        distance: 0,
        projection: 0,
        observed_distance: Vec::with_capacity(record.times.len()),
        observed_projection: Vec::with_capacity(record.times.len()),
        max_deviation: Vec::with_capacity(record.times.len()),
        path_distance: record.path.then(|| Vec::with_capacity(horizon as usize + 1)),
        path_projection: record.path.then(|| Vec::with_capacity(horizon as usize + 1)),
    };
    let mut n = 0;
    loop {
        if !window.is_decorated(v) {
            // Only the last backbone vertex can be undecorated.
            window.to_mut().extend()?;
            continue;
        }
        let w: &KestenWindow = &window;
        let dist = w.tree().depth(v) as u64;
        let proj = w.anchor(v) as u64;
        max_dev = max_dev.max(dist - proj);
        while next_obs < record.times.len() && record.times[next_obs] == n {
            out.observed_distance.push(dist);
            out.observed_projection.push(proj);
            out.max_deviation.push(max_dev);
            next_obs += 1;
        }
        if let (Some(pd), Some(pp)) = (out.path_distance.as_mut(), out.path_projection.as_mut()) {
            pd.push(dist);
            pp.push(proj);
        }
        if n == horizon {
            out.distance = dist;
            out.projection = proj;
            break;
        }
        let tree = w.tree();
        let children = tree.children(v);
        let u: f64 = rng.random();
        v = if v == ROOT {
            children[((u * children.len() as f64) as usize).min(children.len() - 1)]
        } else {
            let z = 1.0 + beta * children.len() as f64;
            let up = 1.0 / z;
            if u < up {
                tree.parent(v).expect("non-root")
            } else {
                let i = ((u - up) * z / beta) as usize;
                children[i.min(children.len() - 1)]
            }
        };
        n += 1;
    }
    Ok((out, window))
}

/// `E^{T*}[eta~_{rho_k}]`: exact mean holding time of the projected walk at
/// backbone vertex `k`.
pub fn window_branch_mean(window: &KestenWindow, beta: f64, k: usize) -> Result<f64> {
    if k >= window.len() {
        return Err(Error::MissingSite { site: k as i64, lo: 0, hi: window.len() as i64 - 1 });
    }
    Ok(SiteTrap::branch(window.branch_tree(k), beta)?.quenched_mean())
}

/// `G(t) = nu t - nu sum_{k=1}^{floor(nu t)} (beta+1)/(beta-1) (E^{T*}[eta~_{rho_k}] - E[eta_0])`
/// with `nu = nu_beta`.
pub fn quenched_tree_centring(window: &KestenWindow, beta: f64, t: f64) -> Result<f64> {
    let nu = tree_speed(window.law(), beta)?;
    let mean = expected_eta0(window.law(), beta)?
        .ok_or_else(|| Error::Domain("annealed mean holding time is infinite".into()))?;
    let n = (nu * t).floor().max(0.0) as usize;
    let c = (beta + 1.0) / (beta - 1.0);
    let mut s = 0.0;
    for k in 1..=n {
        s += window_branch_mean(window, beta, k)? - mean;
    }
    Ok(nu * t - nu * c * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub sizes: Vec<usize>,
    /// `mean(eta^2)` over the first `sizes[i]` draws.
    pub second_moments: Vec<f64>,
    /// Relative change between consecutive sizes.
    pub relative_changes: Vec<f64>,
    pub strictly_increasing: bool,
    /// Last relative change below 10%.
    pub stable: bool,
    pub regime: Option<RegimeReport>,
}

impl DivergenceReport {
    /// Growth at every scale: what an infinite second moment looks like.
    pub fn divergence_consistent(&self) -> bool {
        self.strictly_increasing
    }
}

/// Second moment of annealed holding times at nested sample sizes. Draw `i`
/// uses stream `(seed, Probe, i)`, so the result does not depend on how the
/// draws are split across threads.
pub fn second_moment_probe(model: &TrapModel, sizes: &[usize], seed: u64) -> Result<DivergenceReport> {
    model.validate()?;
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::Domain("sample sizes must be positive and strictly increasing".into()));
    }
    let total = *sizes.last().expect("non-empty");
    let squares: Vec<f64> = (0..total as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream::stream(seed, Domain::Probe, i);
            let eta = annealed_holding(model, &mut rng)?;
            Ok(eta * eta)
        })
        .collect::<Result<_>>()?;
    let mut second_moments = Vec::with_capacity(sizes.len());
    let mut acc = 0.0;
    let mut done = 0;
    for &n in sizes {
        acc += squares[done..n].iter().sum::<f64>();
        done = n;
        second_moments.push(acc / n as f64);
    }
    let relative_changes: Vec<f64> = second_moments.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    Ok(DivergenceReport {
        sizes: sizes.to_vec(),
        strictly_increasing: second_moments.windows(2).all(|w| w[1] > w[0]),
        stable: relative_changes.last().is_none_or(|c| c.abs() < 0.1),
        relative_changes,
        second_moments,
        regime: match model {
            TrapModel::TreeExcursion { law, beta } => Some(regime(law, *beta, DEFAULT_DELTA)),
            _ => None,
        },
    })
}

/// The second-moment probe for tree traps.
pub fn divergence_probe(law: &OffspringLaw, beta: f64, sizes: &[usize], seed: u64) -> Result<DivergenceReport> {
    second_moment_probe(&TrapModel::TreeExcursion { law: law.clone(), beta }, sizes, seed)
}

/// One holding time with a fresh environment site.
pub fn annealed_holding<R: Rng + ?Sized>(model: &TrapModel, rng: &mut R) -> Result<f64> {
    match model {
        TrapModel::TreeExcursion { law, beta } => {
            let tree = trees::sample_branch_tree(law, rng)?;
            Ok(tree_walk::simulate_excursion(&tree, *beta, rng)? as f64)
        }
        _ => Ok(model.sample_site_with(rng)?.sample_holding(rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws;
    use crate::rtrw::speed_formula;
    use crate::trees::RootedTree;

    #[test]
    fn expected_eta0_examples() {
        let a = laws::law_a();
        let e = expected_eta0(&a, 1.1).unwrap().unwrap();
        assert!((e - 1.9616 / 0.2016).abs() < 1e-12);
        assert_eq!(expected_eta0(&a, 1.25).unwrap(), None);
        for eps in [1e-3, 1e-6] {
            let law = OffspringLaw::from_pairs(&[(0, eps), (1, 1.0 - eps)]).unwrap();
            let e = expected_eta0(&law, 1.0).unwrap().unwrap();
            assert!((e - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tree_speed_examples() {
        let a = laws::law_a();
        assert!((tree_speed(&a, 1.1).unwrap() - 0.0096 / 1.9616).abs() < 1e-15);
        assert_eq!(tree_speed(&a, 1.25).unwrap(), 0.0);
        let b = laws::law_b();
        let v = tree_speed(&b, 1.05).unwrap();
        assert!(v > 0.0 && v < 0.05 / 2.05);
    }

    #[test]
    fn bridge_identity() {
        for law in [laws::law_a(), laws::law_b()] {
            for beta in [1.01, 1.05, 1.1, 1.2] {
                if beta * law.mean() >= 1.0 {
                    continue;
                }
                let e = expected_eta0(&law, beta).unwrap().unwrap();
                let lhs = tree_speed(&law, beta).unwrap();
                let rhs = speed_formula(beta, e).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * rhs, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn einstein_examples() {
        assert!((einstein_limit(&laws::law_a()).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((einstein_limit(&laws::law_b()).unwrap() - 0.09 / 2.18).abs() < 1e-15);
        for law in [laws::law_a(), laws::law_b()] {
            let e1 = expected_eta0(&law, 1.0).unwrap().unwrap();
            assert!((1.0 / (2.0 * e1) - einstein_limit(&law).unwrap()).abs() < 1e-12);
        }
        let flat = OffspringLaw::from_pairs(&[(0, 1.0)]).unwrap();
        assert!(einstein_limit(&flat).is_err());
    }

    #[test]
    fn regime_examples() {
        let a = laws::law_a();
        let r = regime(&a, 1.1, DEFAULT_DELTA);
        assert!(r.ballistic && r.annealed_clt && r.quenched_clt && !r.necessity_violation);
        let r = regime(&a, 1.12, DEFAULT_DELTA);
        assert!(r.ballistic && !r.annealed_clt && r.necessity_violation);
        let r = regime(&a, 1.3, DEFAULT_DELTA);
        assert!(!r.ballistic && !r.annealed_clt && !r.quenched_clt && r.necessity_violation);
        let heavy = laws::law_b().with_tail_index(3.2).unwrap();
        let r = regime(&heavy, 1.02, DEFAULT_DELTA);
        assert!(r.annealed_clt && !r.quenched_clt);
        assert!(r.to_string().contains("necessity_violation"));
    }

    #[test]
    fn empty_branches_give_unit_means() {
        let law = OffspringLaw::from_pairs(&[(0, 0.999_999), (1, 1e-6)]).unwrap();
        let w = KestenWindow::new(&law, 20, 5).unwrap();
        for k in 0..20 {
            assert!(w.branch_roots(k).is_empty());
            assert_eq!(window_branch_mean(&w, 1.5, k).unwrap(), 1.0);
        }
        let beta = 1.5;
        let e = expected_eta0(&law, beta).unwrap().unwrap();
        let nu = tree_speed(&law, beta).unwrap();
        let t = 10.0 / nu + 0.5;
        let n = (nu * t).floor();
        let expected = nu * t - nu * n * (beta + 1.0) / (beta - 1.0) * (1.0 - e);
        assert!((quenched_tree_centring(&w, beta, t).unwrap() - expected).abs() < 1e-9);
        assert_eq!(quenched_tree_centring(&w, beta, 0.5 / nu).unwrap(), 0.5);
    }

    #[test]
    fn bare_window_walk_is_reflected_biased_walk() {
        let law = OffspringLaw::from_pairs(&[(0, 0.999_999), (1, 1e-6)]).unwrap();
        let w = KestenWindow::new(&law, 4, 9).unwrap();
        let mut rng = stream::derive_stream(3, 0);
        let rec = TreeWalkRecord { path: true, ..TreeWalkRecord::default() };
        let run = simulate_tree_walk(&w, 2.0, 2000, &mut rng, &rec).unwrap();
        let d = run.path_distance.unwrap();
        let p = run.path_projection.unwrap();
        assert_eq!(d, p);
        assert!(d.windows(2).all(|w| w[0].abs_diff(w[1]) == 1));
        assert!(run.distance > 100);
    }

    #[test]
    fn tree_walk_is_reproducible() {
        let w = KestenWindow::new(&laws::law_a(), 8, 1).unwrap();
        let rec = TreeWalkRecord { times: vec![10, 100, 1000], path: false };
        let a = simulate_tree_walk(&w, 1.1, 1000, &mut stream::derive_stream(2, 7), &rec).unwrap();
        let b = simulate_tree_walk(&w, 1.1, 1000, &mut stream::derive_stream(2, 7), &rec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.observed_distance.len(), 3);
        assert!(a.max_deviation.windows(2).all(|m| m[0] <= m[1]));
    }

    #[test]
    fn deterministic_traps_are_stable() {
        let r = second_moment_probe(&TrapModel::UnitDeterministic, &[10, 100, 1000], 1).unwrap();
        assert!(r.stable);
        assert_eq!(r.second_moments, vec![1.0, 1.0, 1.0]);
        assert!(!r.divergence_consistent());
    }

    #[test]
    fn branch_tree_shorthand_matches_solve() {
        let b = trees::BranchTree::from_inner(&RootedTree::path(1));
        let mean = SiteTrap::branch(b, 1.1).unwrap().quenched_mean();
        assert!((mean - 2.047619047619).abs() < 1e-9);
    }
}
