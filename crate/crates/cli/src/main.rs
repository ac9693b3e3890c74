use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use depscale_cli::{
    cmd_compare, cmd_profile, cmd_run, cmd_setpoints, cmd_synth, cmd_validate, diagnostic, exit_code, Format,
    GlobalOpts, ModeSelection,
};
use depscale_core::config::{PROFILE_SAMPLES, PROFILE_WARMUP};
use depscale_core::sim::SimMode;
use depscale_core::synth::SynthParams;

#[derive(Parser)]
#[command(name = "depscale", version, about = "Dependency-aware autoscaling simulator")]
struct Cli {
    /// Override the experiment's master seed (synth: the generator seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replications run in parallel; 0 uses every CPU.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory (overrides DEPSCALE_OUT and the experiment file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    DependencyAware,
    Baseline,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Check an application file.
    Validate { app: PathBuf },
    /// Print per-function set points.
    Setpoints {
        app: PathBuf,
        /// Nominal profile; measured by simulation when omitted.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Run an experiment and write per-window series and summaries.
    Run {
        experiment: PathBuf,
        /// Defaults to the mode named in the experiment file.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Leave windows ending before this time out of the summaries.
        #[arg(long, default_value_t = 0.0)]
        skip_warmup_s: f64,
    },
    /// Run both modes and report the paired differences.
    Compare {
        experiment: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        skip_warmup_s: f64,
    },
    /// Measure nominal local response times.
    Profile {
        app: PathBuf,
        #[arg(long, default_value_t = PROFILE_WARMUP)]
        warmup: usize,
        #[arg(long, default_value_t = PROFILE_SAMPLES)]
        samples: usize,
    },
    /// Generate a random application with an experiment template.
    Synth {
        #[arg(long, default_value_t = 25)]
        functions: usize,
        #[arg(long, default_value_t = 6)]
        entrypoints: usize,
        #[arg(long, default_value_t = 2.0)]
        out_degree: f64,
        #[arg(long, default_value_t = 0.5)]
        parallel_fraction: f64,
        #[arg(long, default_value_t = 10.0)]
        nlrt_min_ms: f64,
        #[arg(long, default_value_t = 40.0)]
        nlrt_max_ms: f64,
        /// Give the deepest interior entrypoint a high-rate step workload.
        #[arg(long)]
        bottleneck: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = GlobalOpts {
        seed: cli.seed,
        jobs: cli.jobs,
        out: cli.out,
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Table => Format::Table,
            FormatArg::Json => Format::Json,
        },
    };
    let result = match cli.command {
        Command::Validate { app } => cmd_validate(&app, &g),
        Command::Setpoints { app, profile, alpha } => cmd_setpoints(&app, profile.as_deref(), alpha, &g),
        Command::Run {
            experiment,
            mode,
            skip_warmup_s,
        } => {
            let modes = match mode {
                None => ModeSelection::FromFile,
                Some(ModeArg::DependencyAware) => ModeSelection::Only(SimMode::DependencyAware),
                Some(ModeArg::Baseline) => ModeSelection::Only(SimMode::Baseline),
                Some(ModeArg::Both) => ModeSelection::Both,
            };
            cmd_run(&experiment, modes, skip_warmup_s, &g)
        }
        Command::Compare {
            experiment,
            skip_warmup_s,
        } => cmd_compare(&experiment, skip_warmup_s, &g).map(|(text, _)| text),
        Command::Profile { app, warmup, samples } => cmd_profile(&app, warmup, samples, &g),
        Command::Synth {
            functions,
            entrypoints,
            out_degree,
            parallel_fraction,
            nlrt_min_ms,
            nlrt_max_ms,
            bottleneck,
        } => {
            let params = SynthParams {
                nlrt_min_ms,
                nlrt_max_ms,
                ..SynthParams::new(functions, entrypoints, out_degree, parallel_fraction, g.seed.unwrap_or(0))
            };
            cmd_synth(&params, bottleneck, &g)
        }
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
