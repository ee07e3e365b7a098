use rand_distr::{Distribution, StandardNormal};
use trapwalk::harness::{clt_experiment, ks_test, normal_cdf, Centring, CltConfig, CltMode};
use trapwalk::rtrw::TrapModel;
use trapwalk::stream::{self, Domain};

fn two_point() -> TrapModel {
    TrapModel::TwoPointDeterministic { m1: 1.0, m2: 3.0, p: 0.5 }
}

#[test]
fn ks_size_under_the_null() {
    let rejections = (0..500u64)
        .filter(|&r| {
            let mut rng = stream::stream(42, Domain::Probe, r);
            let xs: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
            !ks_test(&xs, normal_cdf).unwrap().pass
        })
        .count();
    // Nominal 1%; the asymptotic p-value is slightly conservative at n = 200.
    assert!(rejections <= 15, "{rejections} of 500 rejected");
}

#[test]
fn clt_experiment_ignores_thread_count() {
    let mut cfg = CltConfig::new(CltMode::AnnealedPosition, two_point(), 1.5, 500.0, 120, 8);
    cfg.calibration_horizon = Some(2e4);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| clt_experiment(&cfg).unwrap())
    };
    let (a, b) = (run(1), run(3));
    let bits = |o: &trapwalk::harness::CltOutcome| o.standardized.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.report, b.report);
}

#[test]
fn unit_traps_annealed_clt_passes() {
    let cfg = CltConfig::new(CltMode::AnnealedPosition, TrapModel::UnitDeterministic, 2.0, 1e4, 2000, 1);
    let o = clt_experiment(&cfg).unwrap();
    assert!(o.report.pass, "{:?}", o.report);
}

#[test]
fn two_point_hitting_clt_passes() {
    let cfg = CltConfig::new(CltMode::QuenchedHitting, two_point(), 1.5, 1e4, 2000, 1);
    let o = clt_experiment(&cfg).unwrap();
    assert!(o.report.pass, "{:?}", o.report);
}

#[test]
fn deterministic_centring_fails_on_a_screened_environment() {
    let mut cfg = CltConfig::new(CltMode::QuenchedPosition, two_point(), 1.5, 1e4, 2000, 1);
    cfg.prescreen = true;
    cfg.centring = Centring::Deterministic;
    let o = clt_experiment(&cfg).unwrap();
    assert!(o.correction_j.unwrap().abs() > 0.0);
    assert!(o.report.p_value < 0.01, "{:?}", o.report);
}
