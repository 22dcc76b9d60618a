//! `cortexsom` command-line runner.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cortexsom::experiment::{calibrate_with, CALIBRATION_SEEDS, CALIBRATION_TARGET};
use cortexsom::network::SingleMapSpec;
use cortexsom::{
    calibrate_activation, run_experiment, ExperimentKind, ExperimentResult,
    ExperimentSpec, PairingMode, ProjectionId, RenderFormat, SomError,
};
use serde::Serialize;

use crate::config::ConfigFile;

#[derive(Parser, Debug)]
#[command(name = "cortexsom", version, about = "Develop and analyze cortical feature map networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Three-level network without pathology.
    Normal(RunArgs),
    /// Single map with over-strengthened neighbor updates (default Ω = 5).
    SingleMapOmega(RunArgs),
    /// Single map with the increase factor (default C = 1.1).
    SingleMapXi(RunArgs),
    /// Single map over a list of neighborhood widths.
    SigmaSweep(RunArgs),
    /// Imbalanced primary maps feeding the association map; no frontal map.
    TwoLevelImpairment(RunArgs),
    /// Weakened projections (default A) without local imbalance.
    Disruption(RunArgs),
    /// Disruption case × the eleven imbalance combinations.
    CaseMatrix(RunArgs),
    /// The network as described by --config, unchanged.
    Custom(RunArgs),
    /// Fit the activation width on the reference maps and print it.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Single master seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed list: `0..50`, `3,5,8` or a mix such as `0..10,42`.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory for reports and renderings.
    #[arg(long, env = "CORTEXSOM_OUT")]
    out: Option<PathBuf>,
    /// Render every developed map (pgm, svg).
    #[arg(long, value_delimiter = ',')]
    render: Vec<RenderFormat>,
    /// Also write trained weights.
    #[arg(long)]
    save_maps: bool,
    /// Over-strengthening factor Ω for the pathological maps.
    #[arg(long)]
    omega: Option<f64>,
    /// Scale the winner's own update by Ω too.
    #[arg(long)]
    omega_includes_winner: bool,
    /// Increase-factor constant C.
    #[arg(long = "c")]
    c: Option<f64>,
    /// Neighborhood width; a list for sigma-sweep.
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// Encoder activation threshold Θ.
    #[arg(long)]
    theta: Option<f64>,
    /// Activation width used by encoder detection.
    #[arg(long)]
    sigma_act: Option<f64>,
    /// Disruption case (1: A, 2: B, 3: A and B).
    #[arg(long)]
    case: Option<u8>,
    /// Imbalance combination row, 1-11.
    #[arg(long)]
    combo: Option<usize>,
    /// Disrupted projections for `disruption` (A, P2, B).
    #[arg(long, value_delimiter = ',')]
    disrupt: Vec<ProjectionId>,
    /// Upstream pairing for derived inputs (by-class, uniform).
    #[arg(long)]
    pairing: Option<PairingMode>,
    /// Calibrate the activation width before running.
    #[arg(long)]
    calibrate: bool,
    /// TOML file overriding the reference parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the full JSON document instead of the summary table.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Reference seeds (default 0..20).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    /// TOML file overriding the reference parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                if b <= a {
                    bail!("empty seed range {part}");
                }
                out.extend(a..b);
            }
            None => out.push(part.parse().with_context(|| format!("bad seed {part:?}"))?),
        }
    }
    if out.is_empty() {
        bail!("no seeds in {text:?}");
    }
    Ok(out)
}

fn build_spec(kind: ExperimentKind, a: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(kind);
    if let Some(path) = &a.config {
        let cfg = ConfigFile::load(path)?;
        cfg.apply(&mut spec.base)?;
        if let Some(seeds) = &cfg.seeds {
            spec.seeds = seeds.clone();
        }
    }
    if let Some(s) = a.seed {
        spec.seeds = vec![s];
    } else if let Some(s) = &a.seeds {
        spec.seeds = parse_seeds(s)?;
    }
    let p = &mut spec.params;
    if a.omega.is_some() {
        p.omega = a.omega;
        if kind == ExperimentKind::TwoLevelImpairment {
            p.c = None;
        }
    }
    p.omega_includes_winner = a.omega_includes_winner;
    if a.c.is_some() {
        p.c = a.c;
    }
    p.case = a.case.or(p.case);
    p.combo = a.combo.or(p.combo);
    if !a.disrupt.is_empty() {
        p.disrupted = a.disrupt.clone();
    }
    if kind == ExperimentKind::SigmaSweep {
        if !a.sigma.is_empty() {
            spec.params.sigmas = a.sigma.clone();
        }
    } else if let [s] = a.sigma[..] {
        for id in cortexsom::MapId::ALL {
            spec.base.settings_mut(id).training.sigma = s;
        }
    } else if !a.sigma.is_empty() {
        bail!("--sigma takes a list only for sigma-sweep");
    }
    if let Some(t) = a.theta {
        spec.base.analysis.theta = t;
    }
    if let Some(s) = a.sigma_act {
        spec.base.analysis.sigma_act = s;
    }
    if let Some(p) = a.pairing {
        spec.base.pairing = p;
    }
    spec.calibrate = a.calibrate;
    spec.render = a.render.clone();
    spec.save_maps = a.save_maps;
    spec.out_dir = a.out.clone();
    Ok(spec)
}

fn print_summary(result: &ExperimentResult, out: Option<&std::path::Path>) {
    println!(
        "{} ({} seeds, sigma_act {}, spec {})",
        result.spec.name,
        result.spec.seeds.len(),
        result.provenance.sigma_act,
        &result.provenance.spec_hash[..12]
    );
    println!(
        "{:<28} {:<6} {:<30} {:>6} {:>9} {:>7}",
        "group", "map", "modal", "share", "encoders", "stable"
    );
    for g in &result.groups {
        for m in &g.maps {
            println!(
                "{:<28} {:<6} {:<30} {:>6.2} {:>9.1} {:>7.2}",
                g.label,
                m.map.name(),
                m.modal,
                m.modal_fraction,
                m.mean_encoders,
                m.stable_fraction
            );
        }
    }
    for t in &result.case_tables {
        println!(
            "case {}: SingleEncoder Assoc {}, single-cluster Front {}, both {}",
            t.case,
            t.linkage.assoc_single_encoder,
            t.linkage.front_single_cluster,
            t.linkage.front_single_cluster_after_single_encoder
        );
    }
    if let Some(dir) = out {
        println!("report written to {}", dir.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = match cli.command {
        Command::Normal(a) => (ExperimentKind::Normal, a),
        Command::SingleMapOmega(a) => (ExperimentKind::SingleMapOmega, a),
        Command::SingleMapXi(a) => (ExperimentKind::SingleMapXi, a),
        Command::SigmaSweep(a) => (ExperimentKind::SigmaSweep, a),
        Command::TwoLevelImpairment(a) => (ExperimentKind::TwoLevelImpairment, a),
        Command::Disruption(a) => (ExperimentKind::Disruption, a),
        Command::CaseMatrix(a) => (ExperimentKind::CaseMatrix, a),
        Command::Custom(a) => {
            if a.config.is_none() {
                bail!(SomError::Config("custom needs --config".into()));
            }
            (ExperimentKind::Custom, a)
        }
        Command::Calibrate(a) => return calibrate(a),
    };
    let spec = build_spec(kind, &args)?;
    let result = run_experiment(&spec)?;
    for e in &result.artifact_errors {
        eprintln!("{}", error_json("io", e));
    }
    if args.json {
        print!("{}", cortexsom::report::to_json(&result)?);
    } else {
        print_summary(&result, spec.out_dir.as_deref());
    }
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let seeds = match &a.seeds {
        Some(s) => parse_seeds(s)?,
        None => (0..CALIBRATION_SEEDS).collect(),
    };
    let cal = match &a.config {
        None => calibrate_activation(
            &seeds,
            a.theta.unwrap_or(cortexsom::AnalysisConfig::default().theta),
            CALIBRATION_TARGET,
        )?,
        Some(path) => {
            let mut net = cortexsom::NetworkSpec::default();
            ConfigFile::load(path)?.apply(&mut net)?;
            if let Some(t) = a.theta {
                net.analysis.theta = t;
            }
            let template = SingleMapSpec {
                settings: net.prim1.clone(),
                map_side: net.map_side,
                analysis: net.analysis.clone(),
                seed: 0,
            };
            calibrate_with(&template, &seeds, CALIBRATION_TARGET)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&cal)?);
    Ok(())
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: ErrorBody<'a>,
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::to_string(&ErrorDoc {
        error: ErrorBody { kind, message },
    })
    .expect("strings always serialize")
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<SomError>() {
            return e.kind();
        }
        if cause.is::<toml::de::Error>() || cause.is::<std::num::ParseIntError>() {
            return "config";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "config"
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = error_kind(&e);
            eprintln!("{}", error_json(kind, &format!("{e:#}")));
            ExitCode::from(if kind == "config" || kind == "contract" { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_parse() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5, 7,0..2").unwrap(), vec![5, 7, 0, 1]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn flags_shape_the_spec() {
        let cli = Cli::try_parse_from([
            "cortexsom", "sigma-sweep", "--seeds", "0..4", "--sigma", "1,2,6", "--theta", "0.99",
        ])
        .unwrap();
        let Command::SigmaSweep(a) = cli.command else { panic!() };
        let spec = build_spec(ExperimentKind::SigmaSweep, &a).unwrap();
        assert_eq!(spec.seeds, vec![0, 1, 2, 3]);
        assert_eq!(spec.params.sigmas, vec![1.0, 2.0, 6.0]);
        assert_eq!(spec.base.analysis.theta, 0.99);
    }

    #[test]
    fn omega_switches_two_level_to_over_strengthening() {
        let cli = Cli::try_parse_from(["cortexsom", "two-level-impairment", "--omega", "3"]).unwrap();
        let Command::TwoLevelImpairment(a) = cli.command else { panic!() };
        let spec = build_spec(ExperimentKind::TwoLevelImpairment, &a).unwrap();
        assert_eq!((spec.params.omega, spec.params.c), (Some(3.0), None));
    }
}
