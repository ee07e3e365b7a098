use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trapwalk::bridge::{regime, DEFAULT_DELTA};
use trapwalk_cli::report::write_outputs;
use trapwalk_cli::{execute, CliError, ExperimentConfig, LawSpec, Suite, Threads};

#[derive(Parser)]
#[command(name = "trapwalk", version, about = "Trapped random walk experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed. Required unless the config sets one.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, or "auto".
    #[arg(long)]
    threads: Option<String>,
    /// Directory for CSV and JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Offspring law: "A", "B", a pmf list such as "[0.6, 0, 0.4]" or
    /// a JSON object such as '{"pmf": {"0": 0.6, "2": 0.4}}'.
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    replicas: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CltKind {
    Annealed,
    Quenched,
    Hitting,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite named in the config.
    Run(Common),
    /// Exact oracles against closed forms and Monte Carlo.
    VerifyAnalytics(Common),
    /// Speed of the trapped walk and the tree walk.
    Speed(Common),
    /// Annealed, quenched or hitting-time central limit theorem.
    Clt {
        #[arg(long, value_enum, default_value = "annealed")]
        kind: CltKind,
        #[command(flatten)]
        common: Common,
    },
    /// Speed per unit bias near beta = 1 and the unbiased walk.
    Einstein(Common),
    /// Distance between the tree walk and its backbone projection.
    Coupling(Common),
    /// Growth of the sampled second moment of the excursion time.
    Necessity(Common),
    /// Print which regime a law and bias fall in.
    PrintRegime {
        #[arg(long, default_value = "A")]
        law: String,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
    },
}

fn parse_law(text: &str) -> Result<LawSpec, CliError> {
    let t = text.trim_start();
    let law = if t.starts_with('[') {
        let pmf: Vec<f64> = serde_json::from_str(t).map_err(|e| CliError::Config(format!("--law: {e}")))?;
        trapwalk::OffspringLaw::new(pmf)
    } else if t.starts_with('{') {
        trapwalk::OffspringLaw::from_json(t)
    } else {
        return Ok(LawSpec::Named(text.to_string()));
    };
    law.map(LawSpec::Explicit).map_err(|e| CliError::Config(format!("--law: {e}")))
}

fn parse_threads(text: &str) -> Result<Threads, CliError> {
    if text == "auto" {
        return Ok(Threads::Auto);
    }
    match text.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Threads::Count(n)),
        _ => Err(CliError::Config(format!("--threads must be a positive integer or \"auto\", got {text:?}"))),
    }
}

fn build_config(common: &Common, suite: Option<Suite>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&common.config, suite) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut value: toml::Table =
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if let Some(s) = suite {
                value.insert("suite".into(), toml::Value::String(s.name().into()));
            }
            if let Some(seed) = common.seed {
                value.insert("seed".into(), toml::Value::Integer(seed as i64));
            }
            ExperimentConfig::from_toml(&toml::to_string(&value).expect("table serializes"))
                .map_err(|e| match e {
                    CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
                    other => other,
                })?
        }
        (None, Some(s)) => {
            let seed = common.seed.ok_or_else(|| CliError::Config("--seed is required".into()))?;
            ExperimentConfig::new(s, seed)
        }
        (None, None) => return Err(CliError::Config("run needs --config".into())),
    };
    if let Some(l) = &common.law {
        cfg.law = Some(parse_law(l)?);
    }
    if let Some(t) = &common.threads {
        cfg.threads = parse_threads(t)?;
    }
    if common.out.is_some() {
        cfg.output.clone_from(&common.out);
    }
    cfg.beta = common.beta.or(cfg.beta);
    cfg.horizon = common.horizon.or(cfg.horizon);
    cfg.replicas = common.replicas.or(cfg.replicas);
    cfg.validate()?;
    Ok(cfg)
}

fn run(common: &Common, suite: Option<Suite>) -> Result<bool, CliError> {
    let cfg = build_config(common, suite)?;
    let report = execute(&cfg)?;
    print!("{}", report.summary());
    if let Some(dir) = &cfg.output {
        for p in write_outputs(dir, &cfg, &report)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c, None),
        Command::VerifyAnalytics(c) => run(c, Some(Suite::VerifyAnalytics)),
        Command::Speed(c) => run(c, Some(Suite::Speed)),
        Command::Clt { kind, common } => {
            let suite = match kind {
                CltKind::Annealed => Suite::AnnealedClt,
                CltKind::Quenched => Suite::QuenchedClt,
                CltKind::Hitting => Suite::QuenchedHitting,
            };
            run(common, Some(suite))
        }
        Command::Einstein(c) => run(c, Some(Suite::Einstein)),
        Command::Coupling(c) => run(c, Some(Suite::Coupling)),
        Command::Necessity(c) => run(c, Some(Suite::Necessity)),
        Command::PrintRegime { law, beta, delta } => parse_law(law)
            .and_then(|spec| spec.resolve())
            .map(|l| {
                println!("{}", regime(&l, *beta, *delta));
                true
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
