//! carve-sim: runs carving experiments described by a JSON config.
//!
//! All frequencies in configs are in MHz (the 2 pi is applied internally) and
//! all times in microseconds.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use carve_core::experiment::{
    run_dicke_carve, run_ghz_curve, run_phase_plan, run_spectrum, run_sweep, ExperimentConfig, ExperimentKind,
};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "carve-sim", version, about = "Counter-factual carving experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Parallel workers for sweeps.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for randomly drawn targets.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Carve the CSS onto chosen Dicke levels.
    Dicke(Common),
    /// Infidelity against C/N.
    Sweep(Common),
    /// GHZ infidelity curves from the ladder sums.
    Ghz(Common),
    /// Iterative phase and amplitude correction schedule.
    PhasePlan(Common),
    /// Per-level decay and transmission spectra.
    Spectrum(Common),
}

impl Command {
    fn parts(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::Dicke(c) => (ExperimentKind::DickeCarve, c),
            Command::Sweep(c) => (ExperimentKind::Sweep, c),
            Command::Ghz(c) => (ExperimentKind::GhzCurve, c),
            Command::PhasePlan(c) => (ExperimentKind::PhasePlan, c),
            Command::Spectrum(c) => (ExperimentKind::Spectrum, c),
        }
    }
}

fn load(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    if cfg.kind != kind {
        bail!("config kind {:?} does not match subcommand {:?}", cfg.kind, kind);
    }
    if args.out_dir.is_some() {
        cfg.output_dir = args.out_dir.clone();
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from("."));
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = cli.command.parts();
    let cfg = load(kind, args)?;
    let dir = cfg.output_dir();
    log::info!("running {kind:?}, writing to {}", dir.display());
    let started = std::time::Instant::now();
    let summary = match kind {
        ExperimentKind::DickeCarve => {
            let r = run_dicke_carve(&cfg)?;
            for w in &r.warnings {
                log::warn!("{w}");
            }
            serde_json::json!({
                "epsilon": r.epsilon,
                "success_prob": r.success_prob,
                "t_1e": r.t_1e,
                "predicted_epsilon": r.predicted_epsilon,
            })
        }
        ExperimentKind::Sweep => {
            let r = run_sweep(&cfg)?;
            for x in &r.excluded {
                log::warn!("point C/N = {x} did not converge and was left out of the fit");
            }
            serde_json::json!({
                "points": r.points.len(),
                "slope": r.fit.map(|f| f.slope),
                "prefactor": r.fit.map(|f| f.prefactor),
                "r_squared": r.fit.map(|f| f.r_squared),
            })
        }
        ExperimentKind::GhzCurve => serde_json::json!({ "rows": run_ghz_curve(&cfg)?.len() }),
        ExperimentKind::PhasePlan => {
            let r = run_phase_plan(&cfg)?;
            serde_json::json!({
                "two_x": r.two_x,
                "rounds": r.rounds,
                "pulses": r.n_pulses,
                "residual": r.residual,
                "success_bound": r.success_bound.limit,
                "verified_phase_residual": r.verification.as_ref()
                    .and_then(|v| v.final_residual()).map(|f| f.max_phase),
            })
        }
        ExperimentKind::Spectrum => serde_json::json!({ "rows": run_spectrum(&cfg)?.len() }),
    };
    log::info!("finished in {:.1} s", started.elapsed().as_secs_f64());
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run(Cli::parse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommands_map_to_kinds() {
        let cli = Cli::try_parse_from(["carve-sim", "phase-plan", "--config", "x.json", "--seed", "4"]).unwrap();
        let (kind, args) = cli.command.parts();
        assert_eq!(kind, ExperimentKind::PhasePlan);
        assert_eq!(args.seed, Some(4));
        assert!(Cli::try_parse_from(["carve-sim", "ghz"]).is_err());
    }

    #[test]
    fn overrides_replace_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        std::fs::write(&path, r#"{ "kind": "ghz_curve", "n_qubits": 4, "ghz": { "c_over_n": [1] }, "workers": 2 }"#)
            .unwrap();
        let args = Common { config: path, out_dir: Some("elsewhere".into()), workers: Some(3), seed: None };
        let cfg = load(ExperimentKind::GhzCurve, &args).unwrap();
        assert_eq!(cfg.workers, Some(3));
        assert_eq!(cfg.output_dir(), PathBuf::from("elsewhere"));
        assert!(load(ExperimentKind::Spectrum, &args).is_err());
    }
}
