use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hapticrl::agent::DdpgAgent;
use hapticrl::harness::{
    aggregate_runs, build_simulator, emit_plot, encode_aggregate, evaluate, read_metrics,
    run_training, velocity_threshold, write_metrics, EpochMetrics, ExperimentConfig, RunSeeds,
};
use hapticrl::reward::RewardParams;
use hapticrl::simworld::{generate_demos, save_demos};
use hapticrl::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hapticrl",
    version,
    about = "Assistive-force learning in a simulated teleoperation loop"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration file; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed [default: 0; demo-gen uses demo_seed].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic demonstration dataset to DIR/demos.csv.
    DemoGen(Common),
    /// Compute the reward velocity threshold for a seed.
    Calibrate(Common),
    /// Train over several seeds; writes metrics, reward parameters, checkpoints and a plot.
    Train {
        #[command(flatten)]
        common: Common,
        /// Number of seeded runs (overrides n_seeds).
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Run noise-free test epochs with a saved checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file; defaults to DIR/checkpoint_seed<SEED>.txt.
        checkpoint: Option<PathBuf>,
    },
    /// Plot metrics files (or directories of metrics_seed*.csv) as SVG.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn print_row(seed: u64, m: &EpochMetrics) {
    eprintln!(
        "seed {seed} epoch {:>3} {:<5} reward {:>10.3} time/epoch {:>6.2}s successes {} updates {}",
        m.epoch, m.phase, m.mean_reward, m.mean_time_per_epoch, m.successes, m.updates
    );
}

impl Common {
    fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn demo_gen(c: &Common) -> Result<()> {
    let cfg = load_config(c.config.as_deref())?;
    let (params, demo_seed) = cfg.demo_params().ok_or_else(|| {
        Error::Config("config reads demonstrations from a file; nothing to generate".into())
    })?;
    let seed = c.seed.unwrap_or(demo_seed);
    let demos = generate_demos(&params, seed)?;
    ensure_dir(&c.out)?;
    let path = c.out.join("demos.csv");
    save_demos(&demos, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn calibrate(c: &Common) -> Result<()> {
    let cfg = load_config(c.config.as_deref())?;
    let sim = build_simulator(&cfg)?;
    let x = velocity_threshold(
        &ExperimentConfig {
            velocity_threshold: None,
            ..cfg
        },
        &sim,
        c.base_seed(),
    )?;
    println!("{x:?}");
    Ok(())
}

fn train(c: &Common, seeds: Option<usize>) -> Result<()> {
    let mut cfg = load_config(c.config.as_deref())?;
    if let Some(n) = seeds {
        cfg.n_seeds = n;
    }
    cfg.validate()?;
    ensure_dir(&c.out)?;
    write_text(&c.out.join("config.cfg"), &cfg.to_text())?;
    let mut runs = Vec::new();
    for k in 0..cfg.n_seeds as u64 {
        let seed = c.base_seed() + k;
        let run = run_training(&cfg, seed, &mut |m| print_row(seed, m))?;
        if run.metrics.is_empty() {
            continue;
        }
        write_metrics(&run.metrics, &c.out.join(format!("metrics_seed{seed}.csv")))?;
        run.agent
            .save(&c.out.join(format!("checkpoint_seed{seed}.txt")))?;
        let reward = RewardParams::from_limits(run.velocity_threshold, &cfg.agent.force_limits)?;
        write_text(
            &c.out.join(format!("reward_seed{seed}.txt")),
            &format!(
                "velocity_threshold = {:?}\nc = {:?}\n",
                reward.velocity_threshold, reward.c
            ),
        )?;
        eprintln!(
            "seed {seed}: velocity threshold {:.6} m/s",
            run.velocity_threshold
        );
        runs.push(run.metrics);
    }
    if runs.is_empty() {
        eprintln!("no epochs configured; nothing written");
        return Ok(());
    }
    let agg = aggregate_runs(&runs)?;
    write_text(&c.out.join("metrics_mean.csv"), &encode_aggregate(&agg))?;
    emit_plot(&agg, &c.out.join("learning_curves.svg"))?;
    if let Some(last) = agg
        .iter()
        .rev()
        .find(|r| r.phase == hapticrl::harness::Phase::Test)
    {
        println!(
            "final test epoch {}: reward {:.3} ± {:.3}, time per epoch {:.3} s",
            last.epoch, last.reward.mean, last.reward.half_width, last.time_per_epoch.mean
        );
    }
    Ok(())
}

fn eval(c: &Common, checkpoint: Option<&Path>) -> Result<()> {
    let cfg = load_config(c.config.as_deref())?;
    let seed = c.base_seed();
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| c.out.join(format!("checkpoint_seed{seed}.txt")));
    let agent = DdpgAgent::load(cfg.agent.clone(), RunSeeds::derive(seed).agent, &path)?;
    let rows = evaluate(&cfg, seed, &agent, cfg.eval_epochs)?;
    for m in &rows {
        print_row(seed, m);
    }
    if rows.is_empty() {
        return Ok(());
    }
    ensure_dir(&c.out)?;
    write_metrics(&rows, &c.out.join(format!("eval_seed{seed}.csv")))?;
    let n = rows.len() as f64;
    println!(
        "mean reward {:.3}, mean time per epoch {:.3} s, successes {}/{}",
        rows.iter().map(|m| m.mean_reward).sum::<f64>() / n,
        rows.iter().map(|m| m.mean_time_per_epoch).sum::<f64>() / n,
        rows.iter().map(|m| m.successes).sum::<usize>(),
        2 * rows.len()
    );
    Ok(())
}

fn metrics_files(input: &Path) -> Result<Vec<PathBuf>> {
    if !input.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = std::fs::read_dir(input).map_err(|e| Error::Io {
        path: input.into(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("metrics_seed") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn plot(c: &Common, inputs: &[PathBuf]) -> Result<()> {
    let mut runs = Vec::new();
    for input in inputs {
        for f in metrics_files(input)? {
            runs.push(read_metrics(&f)?);
        }
    }
    let agg = aggregate_runs(&runs)?;
    ensure_dir(&c.out)?;
    let path = c.out.join("learning_curves.svg");
    emit_plot(&agg, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::DemoGen(c) => demo_gen(c),
        Command::Calibrate(c) => calibrate(c),
        Command::Train { common, seeds } => train(common, *seeds),
        Command::Eval { common, checkpoint } => eval(common, checkpoint.as_deref()),
        Command::Plot { common, inputs } => plot(common, inputs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
