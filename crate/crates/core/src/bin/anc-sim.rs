use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use proactive_anc::harness::{compare, load_scenario, run_scenario, Scenario, Seeds};
use proactive_anc::plant::{load_paths, save_paths, synth_paths};
use proactive_anc::{AncError, Result};

/// Distributed active noise control simulator.
#[derive(Parser)]
#[command(name = "anc-sim", version)]
struct Cli {
    /// Replace the scenario's seeds: paths use N, noise uses N+1.
    #[arg(long, global = true, value_name = "N")]
    seed_override: Option<u64>,

    /// Output root for `run` (default `out`), or bundle file for `paths synth`.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm of a scenario and write the CSV bundle.
    Run { config: PathBuf },
    /// Check a scenario file without running it.
    Validate { config: PathBuf },
    /// Create or inspect plant path bundles.
    Paths {
        #[command(subcommand)]
        action: PathsAction,
    },
    /// Tabulate steady-state ANSE across output directories.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PathsAction {
    /// Synthesize the plant a scenario would use.
    Synth { config: PathBuf },
    /// Validate a bundle and print its shape.
    Load { bundle: PathBuf },
}

fn scenario(cli: &Cli, config: &Path) -> Result<Scenario> {
    let mut s = load_scenario(config)?;
    if let Some(n) = cli.seed_override {
        s.seeds = Seeds {
            paths: n,
            noise: n.wrapping_add(1),
        };
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let s = scenario(cli, config)?;
            let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let result = run_scenario(&s, Some(&root))?;
            if !cli.quiet {
                println!("{}: {} samples, K={}", s.name, s.ticks(), s.nodes);
                for x in &result.summaries {
                    println!(
                        "  {:<14} steady-state ANSE {:>8.2} dB  rounds {:>6}  reduction {:.4}",
                        x.algorithm.as_str(),
                        x.steady_state_anse_db,
                        x.comm.rounds,
                        x.comm.reduction_vs_per_sample
                    );
                }
                println!("wrote {}", root.join(&s.name).display());
            }
        }
        Command::Validate { config } => {
            let s = scenario(cli, config)?;
            if !cli.quiet {
                let algs: Vec<&str> = s.algorithms.iter().map(|a| a.as_str()).collect();
                println!(
                    "ok: {} (K={}, N={}, {} samples, frame {} samples, algorithms {})",
                    s.name,
                    s.nodes,
                    s.taps,
                    s.ticks(),
                    s.frame_len(),
                    algs.join(",")
                );
            }
        }
        Command::Paths { action: PathsAction::Synth { config } } => {
            let s = scenario(cli, config)?;
            let paths = synth_paths(s.nodes, s.primary_taps, s.secondary_taps, s.seeds.paths, s.cross_gain)?;
            match &cli.out {
                Some(file) => {
                    save_paths(&paths, file)?;
                    if !cli.quiet {
                        println!("wrote {}", file.display());
                    }
                }
                None => print!("{}", paths.to_bundle_string()),
            }
        }
        Command::Paths { action: PathsAction::Load { bundle } } => {
            let paths = load_paths(bundle)?;
            if !cli.quiet {
                println!(
                    "K={} L_p={} L_s={}",
                    paths.num_nodes(),
                    paths.primary_len(),
                    paths.secondary_len()
                );
                for k in 0..paths.num_nodes() {
                    let cross: Vec<String> = (0..paths.num_nodes())
                        .map(|m| format!("{:.3}", paths.secondary(k, m).norm()))
                        .collect();
                    println!(
                        "  node {k}: |p|={:.3} |s_k.|=[{}]",
                        paths.primary(k).norm(),
                        cross.join(" ")
                    );
                }
            }
        }
        Command::Compare { dirs } => {
            let table = compare(dirs)?;
            if !cli.quiet {
                print!("{table}");
            }
        }
    }
    Ok(())
}

fn exit_code(err: &AncError) -> u8 {
    match err.class() {
        "config" => 2,
        "protocol" => 3,
        "numerical" => 4,
        "path-bundle" => 5,
        "audio" => 6,
        "metric" => 7,
        _ => 8,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.class());
            ExitCode::from(exit_code(&err))
        }
    }
}
