//! The eight experiment suites. Every random quantity comes from a stream
//! keyed by the config seed, so output does not depend on the thread count.

use trapwalk::bridge::{
    divergence_probe, einstein_limit, expected_eta0, simulate_tree_walk_owned, tree_speed, TreeWalkRecord,
};
use trapwalk::harness::{
    clt_experiment, einstein_monotone, einstein_sweep, half_normal_cdf, ks_test_with, ks_two_sample, mean_se,
    nested_hitting_variance, parity_jitter, replicate, Centring, CltConfig, CltMode, CltOutcome, McCheck,
    TestReport, DEFAULT_THRESHOLD,
};
use trapwalk::offspring::{cross_moment_zn_zm, mean_zn, second_moment_zn, survival_ratio, third_moment_zn};
use trapwalk::rtrw::{
    annealed_hitting_variance, hitting_centrings, negative_truncation, run_rtrw, sigma_sq_blocks, speed_formula,
    Environment, Record, TrapModel,
};
use trapwalk::stream::{self, child_seed, Domain};
use trapwalk::tree_walk::{
    expected_local_time, expected_return_time, expected_return_time_formula, expected_visits, gamblers_ruin,
    hitting_probability, return_time_second_moment, simulate_excursion, z_step, VisitMoments, WalkKernel,
};
use trapwalk::trees::{sample_branch_tree, sample_gw_tree, KestenWindow, RootedTree, DEFAULT_SIZE_CAP, ROOT};
use trapwalk::{laws, OffspringLaw};

use crate::config::{ExperimentConfig, Suite};
use crate::report::{num, Check, SuiteReport, Table};
use crate::CliError;

type Res<T> = Result<T, CliError>;

pub fn run_suite(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    match cfg.suite {
        Suite::VerifyAnalytics => verify_analytics(cfg),
        Suite::Speed => speed(cfg),
        Suite::AnnealedClt => annealed_clt(cfg),
        Suite::QuenchedClt => quenched_clt(cfg),
        Suite::QuenchedHitting => quenched_hitting(cfg),
        Suite::Einstein => einstein(cfg),
        Suite::Coupling => coupling(cfg),
        Suite::Necessity => necessity(cfg),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Seeds `seed, seed + 1, ...` for repeated goodness-of-fit runs.
fn repeat_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.repeats.unwrap_or(3)).map(|r| cfg.seed.wrapping_add(r)).collect()
}

/// Passes needed out of `n` repeats: 2 of 3, 1 of 1.
fn majority(n: usize) -> usize {
    n - n / 3
}

fn p_values(reports: &[TestReport]) -> String {
    reports.iter().map(|r| format!("{:.4}", r.p_value)).collect::<Vec<_>>().join(" ")
}

fn beta_or(cfg: &ExperimentConfig, default: f64) -> f64 {
    cfg.beta.unwrap_or(default)
}

fn require_tree_regime(law: &OffspringLaw, beta: f64) -> Res<()> {
    if !(beta > 1.0 && beta * law.mean() < 1.0) {
        return Err(CliError::Config(format!("bias {beta} outside (1, 1/mu) for mu = {}", law.mean())));
    }
    Ok(())
}

// ---- verify-analytics ----

/// Law-A style tree conditioned on the root having a child.
fn conditioned_tree(law: &OffspringLaw, seed: u64, i: u64) -> Res<RootedTree> {
    let mut rng = stream::stream(seed, Domain::Tree, i);
    loop {
        let t = sample_gw_tree(law, &mut rng, DEFAULT_SIZE_CAP)?;
        if t.num_children(ROOT) > 0 {
            return Ok(t);
        }
    }
}

fn verify_analytics(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    let mut report = SuiteReport::new(Suite::VerifyAnalytics);
    let law = cfg.law_or_default()?;
    let betas = cfg.betas.clone().unwrap_or_else(|| vec![1.1, 1.5, 2.0]);
    let trees = cfg.trees.unwrap_or(1000);
    let seed = cfg.seed;

    // Return-time identities on sampled trees.
    let tree_seed = child_seed(seed, Domain::Tree, 0);
    let sample: Vec<RootedTree> = (0..trees).map(|i| conditioned_tree(&law, tree_seed, i)).collect::<Res<_>>()?;
    let mut identities = Table::new("return-time", &["beta", "trees", "max_rel_first", "max_rel_second"]);
    let (mut worst_first, mut worst_second) = (0.0f64, 0.0f64);
    for &beta in &betas {
        let errs = replicate(trees, |i| {
            let t = &sample[i as usize];
            let solved = expected_return_time(t, beta)?;
            let first = rel(expected_return_time_formula(t, beta)?, solved);
            let second = rel(VisitMoments::new(t, beta)?.total(), return_time_second_moment(t, beta)?);
            Ok((first, second))
        })?;
        let f = max_abs(errs.iter().map(|e| e.0));
        let s = max_abs(errs.iter().map(|e| e.1));
        worst_first = worst_first.max(f);
        worst_second = worst_second.max(s);
        identities.push(vec![beta, trees as f64, f, s]);
    }
    report.check(Check::within("return time: closed form vs solve (max rel)", 0.0, worst_first, 1e-8));
    report.check(Check::within("return time: visit pair sum vs second moment (max rel)", 0.0, worst_second, 1e-8));
    report.tables.push(identities);

    // Ruin and local times against absorption solves on a path.
    let mut lattice = Table::new("lattice", &["beta", "k", "n", "closed", "solve", "rel"]);
    let (mut worst_ruin, mut worst_local) = (0.0f64, 0.0f64);
    for &beta in &betas {
        for (k, n) in [(-1i64, 1i64), (-3, 5), (-10, 2), (-4, 20)] {
            // Vertex i of the path is the site k + i; the root is absorbing here.
            let path = RootedTree::path((n - k) as usize);
            let kernel = WalkKernel::root_reflecting(&path, beta)?;
            let solve = hitting_probability(&kernel, (-k) as usize, &[ROOT], &[(n - k) as usize])?;
            let closed = gamblers_ruin(beta, k, n)?;
            worst_ruin = worst_ruin.max(rel(closed, solve));
            lattice.push(vec![beta, k as f64, n as f64, closed, solve, rel(closed, solve)]);
        }
        // Reflection at the far root is below double precision.
        let depth = (40.0 / beta.ln()).ceil() as i64;
        for n in [1i64, 3, 12] {
            let path = RootedTree::path((depth + n) as usize);
            let kernel = WalkKernel::root_reflecting(&path, beta)?;
            for site in [-5, -2, -1, 0, n / 2, n - 1] {
                let solve = expected_visits(&kernel, depth as usize, (site + depth) as usize, &[(depth + n) as usize])?;
                let closed = expected_local_time(beta, site, n)?;
                worst_local = worst_local.max(rel(closed, solve));
                lattice.push(vec![beta, site as f64, n as f64, closed, solve, rel(closed, solve)]);
            }
        }
    }
    report.check(Check::within("gambler's ruin: closed form vs solve (max rel)", 0.0, worst_ruin, 1e-10));
    report.check(Check::within("local time: closed form vs solve (max rel)", 0.0, worst_local, 1e-10));
    report.tables.push(lattice);

    let walks = cfg.replicas.unwrap_or(1_000_000);
    let (beta, k, n) = (1.5, -3i64, 4i64);
    let mc_seed = child_seed(seed, Domain::Probe, 1);
    let runs = replicate(walks, |i| {
        let mut rng = stream::stream(mc_seed, Domain::Replica, i);
        let (mut y, mut at_zero, mut hit) = (0i64, 0.0, false);
        while y < n {
            at_zero += f64::from(u8::from(y == 0));
            hit |= y == k;
            y += z_step(beta, &mut rng);
        }
        Ok((f64::from(u8::from(hit)), at_zero))
    })?;
    let ruin = mean_se(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let local = mean_se(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    report.check(Check::z(
        format!("gambler's ruin MC (beta {beta}, k {k}, n {n}, {walks} walks)"),
        gamblers_ruin(beta, k, n)?,
        ruin.value,
        ruin.se,
    ));
    report.check(Check::z(
        format!("local time at 0 MC (beta {beta}, n {n}, {walks} walks)"),
        expected_local_time(beta, 0, n)?,
        local.value,
        local.se,
    ));

    // Generation moments.
    let gw = cfg.samples.unwrap_or(100_000);
    let depth = 6usize;
    let mut moments = Table::new("gw-moments", &["law", "n", "m", "power", "exact", "estimate", "se", "z"]);
    let named: Vec<(f64, &str, OffspringLaw)> = match &cfg.law {
        Some(_) => vec![(0.0, "configured", law.clone())],
        None => vec![(0.0, "A", laws::law_a()), (1.0, "B", laws::law_b())],
    };
    for (tag, name, l) in &named {
        let gw_seed = child_seed(seed, Domain::Tree, 1 + *tag as u64);
        let z = replicate(gw, |i| {
            let t = sample_gw_tree(l, &mut stream::stream(gw_seed, Domain::Tree, i), DEFAULT_SIZE_CAP)?;
            let mut g: Vec<f64> = t.generation_sizes().into_iter().map(|x| x as f64).collect();
            g.resize(depth + 1, 0.0);
            Ok(g)
        })?;
        let mut worst = 0.0f64;
        let mut add = |n: u32, m: u32, power: u32, exact: f64, xs: Vec<f64>| {
            let c = McCheck::new(mean_se(&xs), exact);
            worst = worst.max(c.z.abs());
            moments.push(vec![*tag, n as f64, m as f64, power as f64, exact, c.estimate, c.se, c.z]);
        };
        for n in 1..=depth as u32 {
            let col = |p: i32| z.iter().map(|g| g[n as usize].powi(p)).collect::<Vec<f64>>();
            add(n, n, 1, mean_zn(l, n), col(1));
            add(n, n, 2, second_moment_zn(l, n), col(2));
            add(n, n, 3, third_moment_zn(l, n), col(3));
            for m in n + 1..=depth as u32 {
                let cross = z.iter().map(|g| g[n as usize] * g[m as usize]).collect();
                add(n, m, 2, cross_moment_zn_zm(l, n, m)?, cross);
            }
        }
        report.check(Check::new(
            format!("GW moments law {name}, n,m <= {depth}, {gw} trees"),
            "all |z| <= 4",
            format!("max |z| {worst:.2}"),
            "|z| <= 4",
            worst <= trapwalk::harness::Z_TOLERANCE,
        ));
        let ratios: Vec<f64> = (1..=100).map(|n| survival_ratio(l, n)).collect();
        let bad = ratios.windows(2).filter(|w| w[1] > w[0]).count();
        report.check(Check::new(
            format!("survival ratio law {name} non-increasing, n <= 100"),
            "0 increases",
            format!("{bad} increases, ratio(100) {}", num(ratios[99])),
            "exact",
            bad == 0,
        ));
    }
    report.tables.push(moments);
    Ok(report)
}

// ---- speed ----

fn speed(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Speed);
    let law = cfg.law_or_default()?;
    let beta = beta_or(cfg, 1.1);
    require_tree_regime(&law, beta)?;
    let horizon = cfg.horizon.unwrap_or(1e6);
    let seed = cfg.seed;
    let nu = tree_speed(&law, beta)?;
    let eta = expected_eta0(&law, beta)?.ok_or_else(|| CliError::Config("E[eta_0] is infinite".into()))?;

    if cfg.law.is_none() && cfg.beta.is_none() {
        report.check(Check::within("nu_beta closed form, law A, beta 1.1", 0.0048940, nu, 5e-8));
        report.check(Check::within("E[eta_0] closed form, law A, beta 1.1", 9.7302, eta, 5e-5));
    }
    report.check(Check::relative("bridge identity (beta-1)/((beta+1) E[eta_0])", nu, speed_formula(beta, eta)?, 1e-12));

    // One long walk; its own regeneration blocks give the scale.
    let model = TrapModel::TreeExcursion { law: law.clone(), beta };
    let env = Environment::new(model, child_seed(seed, Domain::Environment, 0), 0, -1)?;
    let run = run_rtrw(&env, beta, horizon, &mut stream::stream(seed, Domain::Replica, 0), &Record::with_regenerations())?;
    let sigma = sigma_sq_blocks(&run.blocks(), eta, nu, child_seed(seed, Domain::Bootstrap, 0))?;
    let tol = 4.0 * sigma.value.sqrt() / horizon.sqrt();
    let rtrw_speed = run.position as f64 / horizon;
    report.check(Check::within(format!("RTRW speed X_T/T, T = {horizon}"), nu, rtrw_speed, tol));

    let window = KestenWindow::new(&law, 1024, child_seed(seed, Domain::Tree, 0))?;
    let steps = horizon.round() as u64;
    let (walk, _) =
        simulate_tree_walk_owned(window, beta, steps, &mut stream::stream(seed, Domain::Tree, 1), &TreeWalkRecord::default())?;
    let tree_speed_est = walk.distance as f64 / steps as f64;
    report.check(Check::within(format!("tree walk speed |X_n|/n, n = {steps}"), nu, tree_speed_est, tol));

    let samples = cfg.samples.unwrap_or(1_000_000);
    let probe = child_seed(seed, Domain::Probe, 0);
    let eta_draws = replicate(samples, |i| {
        let mut rng = stream::stream(probe, Domain::Probe, i);
        let b = sample_branch_tree(&law, &mut rng)?;
        Ok(simulate_excursion(&b, beta, &mut rng)? as f64)
    })?;
    let e = mean_se(&eta_draws);
    report.check(Check::z(format!("E[eta_0] MC over {samples} traps"), eta, e.value, e.se));

    let mut t = Table::new("speed", &["beta", "nu", "e_eta0", "rtrw_speed", "tree_speed", "sigma_sq", "sigma_sq_se", "blocks"]);
    t.push(vec![beta, nu, eta, rtrw_speed, tree_speed_est, sigma.value, sigma.se, sigma.blocks as f64]);
    report.tables.push(t);
    Ok(report)
}

// ---- CLT suites ----

fn default_models(cfg: &ExperimentConfig, defaults: Vec<(TrapModel, f64)>) -> Res<Vec<(TrapModel, f64)>> {
    Ok(match (&cfg.model, &cfg.law) {
        (Some(m), _) => vec![(m.clone(), beta_or(cfg, 1.5))],
        (None, Some(_)) => {
            let law = cfg.law_or_default()?;
            let beta = beta_or(cfg, 1.1);
            require_tree_regime(&law, beta)?;
            vec![(TrapModel::TreeExcursion { law, beta }, beta)]
        }
        (None, None) => defaults,
    })
}

fn model_label(m: &TrapModel, beta: f64) -> String {
    let kind = match m {
        TrapModel::UnitDeterministic => "unit".to_string(),
        TrapModel::TwoPointDeterministic { m1, m2, p } => format!("two-point({m1},{m2},{p})"),
        TrapModel::ExponentialMean { .. } => "exponential-mean".to_string(),
        TrapModel::TreeExcursion { .. } => "tree".to_string(),
    };
    format!("{kind} beta {beta}")
}

fn two_point() -> TrapModel {
    TrapModel::TwoPointDeterministic { m1: 1.0, m2: 3.0, p: 0.5 }
}

fn clt_config(cfg: &ExperimentConfig, mode: CltMode, model: &TrapModel, beta: f64, seed: u64) -> CltConfig {
    let mut c = CltConfig::new(mode, model.clone(), beta, cfg.horizon.unwrap_or(1e4), cfg.replicas.unwrap_or(2000), seed);
    c.calibration_horizon = cfg.calibration_horizon;
    c.threshold = DEFAULT_THRESHOLD;
    c
}

fn outcome_row(m: usize, seed: u64, o: &CltOutcome) -> Vec<f64> {
    vec![
        m as f64,
        seed as f64,
        o.report.statistic,
        o.report.p_value,
        o.centre,
        o.scale,
        o.sigma_blocks.map_or(f64::NAN, |s| s.value),
        o.sigma_blocks.map_or(f64::NAN, |s| s.se),
        o.sigma_hit_sq.map_or(f64::NAN, |s| s.value),
        o.correction_j.unwrap_or(f64::NAN),
    ]
}

const OUTCOME_COLUMNS: [&str; 10] =
    ["model", "seed", "ks_d", "p_value", "centre", "scale", "sigma_sq", "sigma_sq_se", "sigma_hit_sq", "j"];

fn annealed_clt(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    let mut report = SuiteReport::new(Suite::AnnealedClt);
    let models = default_models(
        cfg,
        vec![
            (TrapModel::UnitDeterministic, 2.0),
            (two_point(), 1.5),
            (TrapModel::TreeExcursion { law: laws::law_a(), beta: 1.1 }, 1.1),
        ],
    )?;
    let seeds = repeat_seeds(cfg);
    let mut table = Table::new("runs", &OUTCOME_COLUMNS);
    for (m, (model, beta)) in models.iter().enumerate() {
        let outcomes = seeds
            .iter()
            .map(|&s| clt_experiment(&clt_config(cfg, CltMode::AnnealedPosition, model, *beta, s)))
            .collect::<Result<Vec<_>, _>>()?;
        for (o, &s) in outcomes.iter().zip(&seeds) {
            table.push(outcome_row(m, s, o));
        }
        let reports: Vec<TestReport> = outcomes.iter().map(|o| o.report).collect();
        let need = majority(reports.len());
        let passed = reports.iter().filter(|r| r.pass).count();
        report.check(Check::new(
            format!("annealed KS vs Phi, {}", model_label(model, *beta)),
            format!("p > {DEFAULT_THRESHOLD} on >= {need} of {}", reports.len()),
            format!("p = {}", p_values(&reports)),
            format!("{passed} passed"),
            passed >= need,
        ));
        if *model == TrapModel::UnitDeterministic {
            // Steps are i.i.d. with unit holding: the step variance.
            let exact = 4.0 * beta / ((beta + 1.0) * (beta + 1.0));
            let s = outcomes[0].sigma_blocks.expect("annealed mode calibrates");
            report.check(Check::within(
                format!("block variance for unit traps, beta {beta}"),
                exact,
                s.value,
                trapwalk::harness::Z_TOLERANCE * s.se,
            ));
        }
    }
    report.tables.push(table);
    Ok(report)
}

fn quenched_clt(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    let mut report = SuiteReport::new(Suite::QuenchedClt);
    let (model, beta) = default_models(cfg, vec![(two_point(), 1.5)])?.remove(0);
    let seeds = repeat_seeds(cfg);
    let mut table = Table::new("runs", &["seed", "centring", "environment", "ks_d", "p_value", "centre", "scale", "j"]);
    let mut exact = Vec::new();
    let mut det = Vec::new();
    for &s in &seeds {
        for (tag, centring) in [(0.0, Centring::Exact), (1.0, Centring::Deterministic)] {
            let mut c = clt_config(cfg, CltMode::QuenchedPosition, &model, beta, s);
            c.prescreen = true;
            c.centring = centring;
            let o = clt_experiment(&c)?;
            table.push(vec![
                s as f64,
                tag,
                o.environment_index.unwrap_or(0) as f64,
                o.report.statistic,
                o.report.p_value,
                o.centre,
                o.scale,
                o.correction_j.unwrap_or(f64::NAN),
            ]);
            if centring == Centring::Exact { exact.push(o.report) } else { det.push(o.report) }
        }
    }
    let need = majority(seeds.len());
    let passed = exact.iter().filter(|r| r.pass).count();
    report.check(Check::new(
        format!("quenched KS vs Phi, exact centring, {}", model_label(&model, beta)),
        format!("p > {DEFAULT_THRESHOLD} on >= {need} of {}", seeds.len()),
        format!("p = {}", p_values(&exact)),
        format!("{passed} passed"),
        passed >= need,
    ));
    let rejected = det.iter().filter(|r| !r.pass).count();
    report.check(Check::new(
        format!("quenched KS vs Phi, deterministic centring, {}", model_label(&model, beta)),
        format!("p < {DEFAULT_THRESHOLD} on >= {need} of {}", seeds.len()),
        format!("p = {}", p_values(&det)),
        format!("{rejected} rejected"),
        rejected >= need,
    ));
    report.tables.push(table);
    Ok(report)
}

fn quenched_hitting(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    let mut report = SuiteReport::new(Suite::QuenchedHitting);
    let (model, beta) = default_models(cfg, vec![(two_point(), 1.5)])?.remove(0);
    let seeds = repeat_seeds(cfg);
    let mut table = Table::new("runs", &OUTCOME_COLUMNS);
    let mut reports = Vec::new();
    for &s in &seeds {
        let o = clt_experiment(&clt_config(cfg, CltMode::QuenchedHitting, &model, beta, s))?;
        table.push(outcome_row(0, s, &o));
        reports.push(o.report);
    }
    let need = majority(seeds.len());
    let passed = reports.iter().filter(|r| r.pass).count();
    report.check(Check::new(
        format!("hitting time KS vs Phi, {}", model_label(&model, beta)),
        format!("p > {DEFAULT_THRESHOLD} on >= {need} of {}", seeds.len()),
        format!("p = {}", p_values(&reports)),
        format!("{passed} passed"),
        passed >= need,
    ));
    report.tables.push(table);

    if let Ok(closed) = annealed_hitting_variance(&model, beta) {
        let c = clt_config(cfg, CltMode::QuenchedHitting, &model, beta, cfg.seed);
        let est = nested_hitting_variance(&model, beta, c.nested_outer, c.nested_inner, c.calibration_seed)?;
        report.check(Check::z("nested MC hitting variance vs closed form", closed, est.value, est.se));
    }

    // E|H~ - H| / sqrt(n) over a dyadic grid; a single environment's gap
    // is O(1) but jumps around, so it is averaged.
    let top = cfg.horizon.unwrap_or(1e4).round() as i64;
    let grid: Vec<i64> = (4..).map(|j| 1i64 << j).take_while(|&n| n <= top.max(16)).collect();
    let last = *grid.last().expect("grid is non-empty");
    let envs = cfg.samples.unwrap_or(200);
    let env_seed = child_seed(cfg.seed, Domain::Probe, 4);
    let per_env = replicate(envs, |e| {
        let env = Environment::new(
            model.clone(),
            child_seed(env_seed, Domain::Environment, e),
            -negative_truncation(beta),
            last,
        )?;
        grid.iter()
            .map(|&n| hitting_centrings(&env, beta, n).map(|(h, ht)| (ht - h).abs()))
            .collect::<Result<Vec<f64>, _>>()
    })?;
    let mut gaps = Table::new("centring-gap", &["n", "mean_abs_gap", "se", "scaled_gap"]);
    let mut scaled = Vec::with_capacity(grid.len());
    for (j, &n) in grid.iter().enumerate() {
        let g = mean_se(&per_env.iter().map(|v| v[j]).collect::<Vec<_>>());
        let sg = g.value / (n as f64).sqrt();
        scaled.push(sg);
        gaps.push(vec![n as f64, g.value, g.se, sg]);
    }
    let ups = scaled.windows(2).filter(|w| w[1] >= w[0]).count();
    report.check(Check::new(
        format!("E|H~ - H|/sqrt(n) decreasing over n = 16..{last}, {envs} environments"),
        "0 increases",
        format!("{ups} increases, first {} last {}", num(scaled[0]), num(*scaled.last().expect("non-empty"))),
        "exact",
        ups == 0,
    ));
    report.tables.push(gaps);
    Ok(report)
}

// ---- einstein ----

fn einstein(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Einstein);
    let law = cfg.law_or_default()?;
    let betas = cfg.betas.clone().unwrap_or_else(|| vec![1.02, 1.05, 1.1]);
    let limit = einstein_limit(&law)?;
    let rows = einstein_sweep(&law, &betas, cfg.samples.unwrap_or(100), cfg.horizon.unwrap_or(1e6), cfg.seed)?;
    let mut table = Table::new("sweep", &["beta", "closed_form", "estimate", "se", "limit", "z"]);
    for r in &rows {
        table.push(vec![r.beta, r.closed_form, r.estimate, r.se, r.limit, r.z]);
        report.check(Check::z(format!("nu_beta/(beta-1) MC at beta {}", r.beta), r.closed_form, r.estimate, r.se));
    }
    report.tables.push(table);
    if let Some(first) = rows.iter().min_by(|a, b| a.beta.total_cmp(&b.beta)) {
        report.check(Check::relative(
            format!("closed form nu_beta/(beta-1) at beta {} vs limit", first.beta),
            limit,
            first.closed_form,
            0.05,
        ));
    }
    report.check(Check::new(
        "closed form approaches the limit as beta decreases",
        "monotone",
        if einstein_monotone(&rows) { "monotone" } else { "not monotone" },
        "exact",
        einstein_monotone(&rows),
    ));

    // Unbiased walk: |X_n| / sqrt(n) against the half-normal law.
    let n = cfg.steps.unwrap_or(10_000);
    let walks = cfg.replicas.unwrap_or(2000);
    let ups = 1.0 / expected_eta0(&law, 1.0)?.ok_or_else(|| CliError::Config("E[eta_0] is infinite at beta 1".into()))?;
    let seeds = repeat_seeds(cfg);
    let mut dist_reports = Vec::new();
    let mut proj_reports = Vec::new();
    let mut walk_table = Table::new("unbiased", &["seed", "ks_d_distance", "p_distance", "ks_d_projection", "p_projection", "mean_sq_over_n"]);
    let root_n = (n as f64).sqrt();
    for &s in &seeds {
        let base = child_seed(s, Domain::Probe, 9);
        let runs = replicate(walks, |i| {
            let w = KestenWindow::new(&law, 64, child_seed(base, Domain::Tree, i))?;
            let (r, _) =
                simulate_tree_walk_owned(w, 1.0, n, &mut stream::stream(base, Domain::Replica, i), &TreeWalkRecord::default())?;
            Ok((r.distance, r.projection))
        })?;
        let dist: Vec<u64> = runs.iter().map(|r| r.0).collect();
        let proj: Vec<u64> = runs.iter().map(|r| r.1).collect();
        let mut jit = stream::stream(base, Domain::Probe, 0);
        let d: Vec<f64> = parity_jitter(&dist, &mut jit).iter().map(|x| x / root_n).collect();
        let p: Vec<f64> = proj.iter().map(|&x| x as f64 / root_n).collect();
        let rd = ks_test_with(&d, |x| half_normal_cdf(x, ups), DEFAULT_THRESHOLD)?;
        let rp = ks_test_with(&p, |x| half_normal_cdf(x, ups), DEFAULT_THRESHOLD)?;
        let msq = dist.iter().map(|&x| (x * x) as f64).sum::<f64>() / walks as f64 / n as f64;
        walk_table.push(vec![s as f64, rd.statistic, rd.p_value, rp.statistic, rp.p_value, msq]);
        dist_reports.push(rd);
        proj_reports.push(rp);
    }
    let need = majority(seeds.len());
    for (what, reps) in [("|X_n|", &dist_reports), ("|X~_n|", &proj_reports)] {
        let passed = reps.iter().filter(|r| r.pass).count();
        report.check(Check::new(
            format!("unbiased {what}/sqrt(n) KS vs half-normal(Upsilon {:.6}), n = {n}", ups),
            format!("p > {DEFAULT_THRESHOLD} on >= {need} of {}", reps.len()),
            format!("p = {}", p_values(reps)),
            format!("{passed} passed"),
            passed >= need,
        ));
    }
    report.tables.push(walk_table);
    Ok(report)
}

// ---- coupling ----

/// `max D(n)/ln n` over dyadic `n` may not exceed this.
const COUPLING_RATIO_BOUND: f64 = 10.0;

fn coupling(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Coupling);
    let law = cfg.law_or_default()?;
    let beta = beta_or(cfg, 1.1);
    require_tree_regime(&law, beta)?;
    let top = cfg.steps.unwrap_or(1_000_000);
    let mut times: Vec<u64> = (1..64).map(|j| 1u64 << j).take_while(|&n| n <= top).collect();
    if times.last() != Some(&top) {
        times.push(top);
    }
    let window = KestenWindow::new(&law, 1024, child_seed(cfg.seed, Domain::Tree, 0))?;
    let record = TreeWalkRecord { times: times.clone(), path: false };
    let (run, _) = simulate_tree_walk_owned(window, beta, top, &mut stream::stream(cfg.seed, Domain::Tree, 1), &record)?;
    let mut dev = Table::new("deviation", &["n", "max_deviation", "ratio"]);
    let mut worst = 0.0f64;
    for (&t, &d) in times.iter().zip(&run.max_deviation) {
        let ratio = d as f64 / (t as f64).ln();
        worst = worst.max(ratio);
        dev.push(vec![t as f64, d as f64, ratio]);
    }
    report.check(Check::new(
        format!("max deviation / ln n over dyadic n <= {top}"),
        format!("<= {COUPLING_RATIO_BOUND}"),
        format!("max ratio {worst:.4}"),
        "bounded",
        worst <= COUPLING_RATIO_BOUND,
    ));
    report.tables.push(dev);

    let horizon = cfg.horizon.unwrap_or(1e4);
    let walks = cfg.replicas.unwrap_or(2000);
    let model = TrapModel::TreeExcursion { law: law.clone(), beta };
    let seeds = repeat_seeds(cfg);
    let mut reports = Vec::new();
    let mut ks = Table::new("two-sample", &["seed", "ks_d", "p_value", "mean_tree", "mean_rtrw"]);
    for &s in &seeds {
        let base = child_seed(s, Domain::Probe, 11);
        let tree = replicate(walks, |i| {
            let w = KestenWindow::new(&law, 64, child_seed(base, Domain::Tree, i))?;
            let rec = TreeWalkRecord::default();
            let (r, _) = simulate_tree_walk_owned(w, beta, horizon.round() as u64, &mut stream::stream(base, Domain::Tree, i), &rec)?;
            Ok(r.projection as f64)
        })?;
        let rtrw = replicate(walks, |i| {
            let env = Environment::new(model.clone(), child_seed(base, Domain::Environment, i), 0, -1)?;
            Ok(run_rtrw(&env, beta, horizon, &mut stream::stream(base, Domain::Replica, i), &Record::none())?.position as f64)
        })?;
        let r = ks_two_sample(&tree, &rtrw, DEFAULT_THRESHOLD)?;
        ks.push(vec![s as f64, r.statistic, r.p_value, mean_se(&tree).value, mean_se(&rtrw).value]);
        reports.push(r);
    }
    let need = majority(seeds.len());
    let passed = reports.iter().filter(|r| r.pass).count();
    report.check(Check::new(
        format!("two-sample KS, tree projection vs RTRW at T = {horizon}"),
        format!("p > {DEFAULT_THRESHOLD} on >= {need} of {}", seeds.len()),
        format!("p = {}", p_values(&reports)),
        format!("{passed} passed"),
        passed >= need,
    ));
    report.tables.push(ks);
    Ok(report)
}

// ---- necessity ----

fn necessity(cfg: &ExperimentConfig) -> Res<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Necessity);
    let law = cfg.law_or_default()?;
    let beta = beta_or(cfg, 1.15);
    let control = cfg.control_beta.unwrap_or(1.1);
    let sizes = cfg.sizes.clone().unwrap_or_else(|| vec![10_000, 100_000, 1_000_000]);
    let seeds = repeat_seeds(cfg);
    let need = majority(seeds.len());
    let mut table = Table::new("second-moments", &["beta", "seed", "size", "second_moment"]);
    let mut growing = 0;
    let mut stable = 0;
    let mut grow_obs = Vec::new();
    let mut stable_obs = Vec::new();
    for &s in &seeds {
        let hot = divergence_probe(&law, beta, &sizes, child_seed(s, Domain::Probe, 2))?;
        let cold = divergence_probe(&law, control, &sizes, child_seed(s, Domain::Probe, 3))?;
        for (b, r) in [(beta, &hot), (control, &cold)] {
            for (&n, &m) in r.sizes.iter().zip(&r.second_moments) {
                table.push(vec![b, s as f64, n as f64, m]);
            }
        }
        growing += usize::from(hot.strictly_increasing);
        stable += usize::from(cold.stable);
        grow_obs.push(if hot.strictly_increasing { "increasing" } else { "not increasing" });
        stable_obs.push(format!("{:.3}", cold.relative_changes.last().copied().unwrap_or(0.0)));
    }
    report.check(Check::new(
        format!("second moment of eta grows across sizes, beta {beta} (beta^2 mu = {:.4})", beta * beta * law.mean()),
        format!("strictly increasing on >= {need} of {}", seeds.len()),
        grow_obs.join(" "),
        format!("{growing} increasing"),
        growing >= need,
    ));
    report.check(Check::new(
        format!("second moment of eta stabilizes, beta {control} (beta^2 mu = {:.4})", control * control * law.mean()),
        format!("last relative change < 0.1 on >= {need} of {}", seeds.len()),
        format!("changes {}", stable_obs.join(" ")),
        format!("{stable} stable"),
        stable >= need,
    ));
    report.tables.push(table);
    Ok(report)
}
