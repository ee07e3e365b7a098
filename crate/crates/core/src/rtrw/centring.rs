use super::{Environment, TrapModel};
use crate::error::{Error, Result};
use crate::tree_walk::{expected_local_time, gamblers_ruin};

/// `K = ceil(40 / ln beta)`: sites below `-K` carry local-time weight below
/// `beta^{-K} < 1e-17` and are dropped from hitting centrings.
pub fn negative_truncation(beta: f64) -> i64 {
    (40.0 / beta.ln()).ceil() as i64
}

fn bias_factor(beta: f64) -> Result<f64> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("centrings need beta > 1, got {beta}")));
    }
    Ok((beta + 1.0) / (beta - 1.0))
}

/// `J(n) = sum_{k=0}^{n-1} (E^omega[eta_{k,0}] - E[eta_0])`.
pub fn correction_sum_j(env: &Environment, n: u64, mean_eta0: f64) -> Result<f64> {
    let mut s = 0.0;
    for k in 0..n as i64 {
        s += env.quenched_mean(k)? - mean_eta0;
    }
    Ok(s)
}

/// `G(t) = nu t - nu (beta+1)/(beta-1) J(floor(nu t))`.
pub fn quenched_centring_g(env: &Environment, beta: f64, t: f64, nu: f64, mean_eta0: f64) -> Result<f64> {
    let c = bias_factor(beta)?;
    let n = (nu * t).floor().max(0.0) as u64;
    Ok(nu * t - nu * c * correction_sum_j(env, n, mean_eta0)?)
}

/// `(H(n), H~(n))`: the exact quenched mean of `tau_n`,
/// `sum_k E_0[L(k, tau_n)] E^omega[eta_{k,0}]` over `-K <= k < n`, and its
/// linearization `(beta+1)/(beta-1) sum_{k=0}^{n-1} E^omega[eta_{k,0}]`.
pub fn hitting_centrings(env: &Environment, beta: f64, n: i64) -> Result<(f64, f64)> {
    let c = bias_factor(beta)?;
    if n < 1 {
        return Err(Error::Domain(format!("level {n} must be positive")));
    }
    let big_k = negative_truncation(beta);
    let mut h = 0.0;
    let mut h_tilde = 0.0;
    for k in -big_k..n {
        let m = env.quenched_mean(k)?;
        h += expected_local_time(beta, k, n)? * m;
        if k >= 0 {
            h_tilde += m;
        }
    }
    Ok((h, c * h_tilde))
}

/// `E[Var_omega(tau_1)]` averaged over the environment, for models whose
/// site-mean law is known in closed form:
/// `E[Var_omega eta] E[tau_1^Y] + E[m]^2 Var(tau_1^Y) + Var(m) sum_k Var(L_k)`,
/// with `L_k` the visits of `Y` to `k <= 0` before it reaches 1.
pub fn annealed_hitting_variance(model: &TrapModel, beta: f64) -> Result<f64> {
    let c = bias_factor(beta)?;
    let mean = model
        .annealed_mean()
        .ok_or_else(|| Error::Domain("annealed mean holding time is infinite".into()))?;
    let var_m = model
        .site_mean_variance()
        .ok_or_else(|| Error::Domain("site-mean variance has no closed form for this model".into()))?;
    let quenched_var = model
        .mean_quenched_variance()
        .ok_or_else(|| Error::Domain("quenched variance has no closed form for this model".into()))?;

    let p = beta / (beta + 1.0);
    let q = 1.0 - p;
    let var_tau_y = 4.0 * p * q / (p - q).powi(3);

    // L_0 is geometric with success p; for k < 0, L_k is 0 unless k is
    // reached, then geometric with the escape probability e_k.
    let mut sum_var_l = 0.0;
    for k in (-negative_truncation(beta)..=0).rev() {
        let (r, e) = if k == 0 {
            (1.0, p)
        } else {
            let a = beta.powi((1 - k) as i32);
            (gamblers_ruin(beta, k, 1)?, a * (beta - 1.0) / ((beta + 1.0) * (a - 1.0)))
        };
        let m1 = r / e;
        let m2 = r * (2.0 - e) / (e * e);
        sum_var_l += m2 - m1 * m1;
    }
    Ok(quenched_var * c + mean * mean * var_tau_y + var_m * sum_var_l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtrw::SiteTrap;

    fn two_point() -> TrapModel {
        TrapModel::TwoPointDeterministic { m1: 1.0, m2: 3.0, p: 0.5 }
    }

    fn env_with(means: &[f64]) -> Environment {
        let sites = means.iter().map(|&m| SiteTrap::Fixed(m)).collect();
        Environment::from_sites(two_point(), 0, 0, sites).unwrap()
    }

    #[test]
    fn g_examples() {
        let unit = Environment::new(TrapModel::UnitDeterministic, 0, 0, 100).unwrap();
        assert!((quenched_centring_g(&unit, 2.0, 90.0, 1.0 / 3.0, 1.0).unwrap() - 30.0).abs() < 1e-12);

        let sym = env_with(&[1.0, 3.0, 3.0, 1.0]);
        assert!((quenched_centring_g(&sym, 1.5, 40.0, 0.1, 2.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(correction_sum_j(&sym, 4, 2.0).unwrap(), 0.0);

        let high = env_with(&[3.0, 3.0, 3.0, 3.0]);
        assert!((quenched_centring_g(&high, 1.5, 40.0, 0.1, 2.0).unwrap() - 2.0).abs() < 1e-12);
        // Fewer than one site in range: empty sum.
        assert_eq!(quenched_centring_g(&high, 1.5, 5.0, 0.1, 2.0).unwrap(), 0.5);
        assert!(matches!(correction_sum_j(&high, 5, 2.0), Err(Error::MissingSite { .. })));
    }

    #[test]
    fn unit_traps_hitting_centrings_coincide() {
        let env = Environment::new(TrapModel::UnitDeterministic, 0, -100, 300).unwrap();
        let (h, ht) = hitting_centrings(&env, 2.0, 1).unwrap();
        assert!((h - 3.0).abs() < 1e-12 && (ht - 3.0).abs() < 1e-12);
        for n in [2, 10, 200] {
            let (h, ht) = hitting_centrings(&env, 2.0, n).unwrap();
            assert!((h - 3.0 * n as f64).abs() < 1e-9 * n as f64);
            assert!((ht - h).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn missing_negative_sites_are_reported() {
        let env = Environment::new(TrapModel::UnitDeterministic, 0, 0, 10).unwrap();
        assert!(matches!(hitting_centrings(&env, 2.0, 3), Err(Error::MissingSite { .. })));
    }

    #[test]
    fn hitting_variance_without_environment_noise() {
        // Unit traps: tau_1 is the hitting time of the plain biased walk.
        let beta: f64 = 2.0;
        let (p, q): (f64, f64) = (2.0 / 3.0, 1.0 / 3.0);
        let v = annealed_hitting_variance(&TrapModel::UnitDeterministic, beta).unwrap();
        assert!((v - 4.0 * p * q / (p - q).powi(3)).abs() < 1e-12);
        let tree = TrapModel::TreeExcursion { law: crate::laws::law_a(), beta: 1.1 };
        assert!(annealed_hitting_variance(&tree, 1.1).is_err());
    }
}
