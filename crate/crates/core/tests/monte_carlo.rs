//! Monte Carlo estimates against exact values, each within 4 standard errors.

use rand::Rng;
use trapwalk::bridge::{build_tree_environment, expected_eta0};
use trapwalk::harness::{mean_se, McCheck};
use trapwalk::laws;
use trapwalk::offspring::{cross_moment_zn_zm, mean_zn, second_moment_zn, third_moment_zn, OffspringLaw};
use trapwalk::stream::{self, Domain};
use trapwalk::tree_walk::{expected_local_time, gamblers_ruin, simulate_excursion, z_step};
use trapwalk::trees::{sample_branch_tree, sample_gw_tree, DEFAULT_SIZE_CAP};

fn check(samples: &[f64], expected: f64, what: &str) {
    let c = McCheck::new(mean_se(samples), expected);
    assert!(c.pass, "{what}: {} +- {} vs {expected} (z = {:.2})", c.estimate, c.se, c.z);
}

fn generation_samples(law: &OffspringLaw, trees: u64, seed: u64, depth: usize) -> Vec<Vec<f64>> {
    (0..trees)
        .map(|i| {
            let mut rng = stream::stream(seed, Domain::Tree, i);
            let t = sample_gw_tree(law, &mut rng, DEFAULT_SIZE_CAP).unwrap();
            let mut z: Vec<f64> = t.generation_sizes().into_iter().map(|x| x as f64).collect();
            z.resize(depth + 1, 0.0);
            z
        })
        .collect()
}

#[test]
fn generation_moments_match_recursions() {
    for (name, law) in [("A", laws::law_a()), ("B", laws::law_b())] {
        let z = generation_samples(&law, 20_000, 17, 6);
        for n in 1..=6u32 {
            let col = |p: i32| z.iter().map(|g| g[n as usize].powi(p)).collect::<Vec<f64>>();
            check(&col(1), mean_zn(&law, n), &format!("{name} E[Z_{n}]"));
            check(&col(2), second_moment_zn(&law, n), &format!("{name} E[Z_{n}^2]"));
            check(&col(3), third_moment_zn(&law, n), &format!("{name} E[Z_{n}^3]"));
            for m in n + 1..=6 {
                let cross: Vec<f64> = z.iter().map(|g| g[n as usize] * g[m as usize]).collect();
                check(&cross, cross_moment_zn_zm(&law, n, m).unwrap(), &format!("{name} E[Z_{n} Z_{m}]"));
            }
        }
    }
}

#[test]
fn excursion_mean_matches_closed_form() {
    let law = laws::law_a();
    let beta = 1.1;
    let eta: Vec<f64> = (0..100_000)
        .map(|i| {
            let mut rng = stream::stream(3, Domain::Probe, i);
            let b = sample_branch_tree(&law, &mut rng).unwrap();
            simulate_excursion(&b, beta, &mut rng).unwrap() as f64
        })
        .collect();
    check(&eta, expected_eta0(&law, beta).unwrap().unwrap(), "E[eta_0]");
}

#[test]
fn quenched_site_means_average_to_annealed_mean() {
    let law = laws::law_a();
    let env = build_tree_environment(&law, 1.1, 0, 99_999, &mut stream::derive_stream(8, 0)).unwrap();
    let means: Vec<f64> = (0..100_000).map(|x| env.quenched_mean(x).unwrap()).collect();
    check(&means, 1.9616 / 0.2016, "mean of quenched site means");
}

#[test]
fn lattice_walk_matches_ruin_and_local_time() {
    let beta = 1.5;
    let (k, n) = (-3, 4);
    let mut ruined = Vec::with_capacity(100_000);
    let mut visits_zero = Vec::with_capacity(100_000);
    for i in 0..100_000 {
        let mut rng = stream::derive_stream(21, i);
        let mut y = 0;
        let mut at_zero = 0.0;
        let mut hit_k = false;
        while y < n {
            if y == 0 {
                at_zero += 1.0;
            }
            if y == k {
                hit_k = true;
            }
            y += z_step(beta, &mut rng);
        }
        ruined.push(f64::from(u8::from(hit_k)));
        visits_zero.push(at_zero);
    }
    // Hitting k before n is the same event as hitting k before tau_n.
    check(&ruined, gamblers_ruin(beta, k, n).unwrap(), "ruin");
    check(&visits_zero, expected_local_time(beta, 0, n).unwrap(), "local time at 0");
}

#[test]
fn streams_are_reproducible_and_uncorrelated() {
    let a: Vec<f64> = {
        let mut r = stream::derive_stream(99, 0);
        (0..10_000).map(|_| r.random()).collect()
    };
    let again: Vec<f64> = {
        let mut r = stream::derive_stream(99, 0);
        (0..10_000).map(|_| r.random()).collect()
    };
    assert_eq!(a[..100], again[..100]);
    let b: Vec<f64> = {
        let mut r = stream::derive_stream(99, 1);
        (0..10_000).map(|_| r.random()).collect()
    };
    let (ma, mb) = (mean_se(&a).value, mean_se(&b).value);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    assert!((cov / (va * vb).sqrt()).abs() < 0.05);
}
