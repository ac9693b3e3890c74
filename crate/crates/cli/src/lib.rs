//! Subcommand implementations behind the `depscale` binary.
//!
//! Each `cmd_*` returns the text destined for standard output and writes any
//! files itself, so the commands can be driven from tests without a process.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use depscale_core::config::{self, AppFile, ExperimentFile, ProfileEntry, ProfileFile};
use depscale_core::metrics::{
    aggregate, compare, render_comparison, render_summary_table, summarize_from, write_series_csv, write_summary_csv,
    AggregateRow, Comparison, RunSummary,
};
use depscale_core::profile::profile_via_simulation;
use depscale_core::sim::{run_replications, SimMode};
use depscale_core::synth::{experiment_template, synthesize, SynthParams};
use depscale_core::{Error, Result};

/// Environment variable that redirects every output directory.
pub const OUT_ENV: &str = "DEPSCALE_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Csv,
    #[default]
    Table,
    Json,
}

#[derive(Debug, Clone, Default)]
pub struct GlobalOpts {
    /// Replaces the experiment's master seed.
    pub seed: Option<u64>,
    /// Worker threads for replications; 0 means one per CPU.
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl GlobalOpts {
    fn jobs(&self) -> usize {
        if self.jobs == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.jobs
        }
    }

    /// `--out`, then the environment override, then the fallback.
    pub fn output_dir(&self, fallback: &Path) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => fallback.to_path_buf(),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_text<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn cmd_validate(app_file: &Path, g: &GlobalOpts) -> Result<String> {
    let app: AppFile = config::read_json(app_file)?;
    let graph = app.graph()?;
    let entry = graph.functions().iter().filter(|f| f.is_entrypoint).count();
    Ok(match g.format {
        Format::Json => json_text(&serde_json::json!({
            "status": "ok",
            "functions": graph.len(),
            "edges": graph.edges().len(),
            "entrypoints": entry,
        }))?,
        _ => format!(
            "OK: {} functions, {} edges, {} entrypoints\n",
            graph.len(),
            graph.edges().len(),
            entry
        ),
    })
}

pub fn cmd_setpoints(app_file: &Path, profile_file: Option<&Path>, alpha: f64, g: &GlobalOpts) -> Result<String> {
    let app: AppFile = config::read_json(app_file)?;
    let profile: Option<ProfileFile> = profile_file.map(config::read_json).transpose()?;
    let (graph, nominal, table) = config::setpoints_for(&app, profile.as_ref(), alpha)?;
    let mut out = String::new();
    match g.format {
        Format::Json => {
            let rows: Vec<_> = table
                .iter()
                .enumerate()
                .map(|(i, (name, sp))| {
                    serde_json::json!({
                        "function": name,
                        "nlrt_ms": nominal.nlrt(i),
                        "nrt_ms": nominal.nrt(i),
                        "sp_ms": sp.sp_ms,
                        "lsp_ms": sp.lsp_ms,
                        "source": sp.source.as_str(),
                    })
                })
                .collect();
            out = json_text(&serde_json::json!({ "alpha": alpha, "set_points": rows }))?;
        }
        Format::Csv => {
            out.push_str("function,nlrt_ms,nrt_ms,sp_ms,lsp_ms,source\n");
            for (i, (name, sp)) in table.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{name},{},{},{},{},{}",
                    nominal.nlrt(i),
                    nominal.nrt(i),
                    sp.sp_ms,
                    sp.lsp_ms,
                    sp.source.as_str()
                );
            }
        }
        Format::Table => {
            let w = graph.functions().iter().map(|f| f.name.len()).max().unwrap_or(0).max(8);
            let _ = writeln!(
                out,
                "{:w$}  {:>10}  {:>10}  {:>10}  {:>10}  source",
                "function", "nlrt (ms)", "nrt (ms)", "sp (ms)", "lsp (ms)"
            );
            for (i, (name, sp)) in table.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{name:w$}  {:>10.3}  {:>10.3}  {:>10.3}  {:>10.3}  {}",
                    nominal.nlrt(i),
                    nominal.nrt(i),
                    sp.sp_ms,
                    sp.lsp_ms,
                    sp.source
                );
            }
        }
    }
    Ok(out)
}

/// Which modes `run` executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    FromFile,
    Only(SimMode),
    Both,
}

struct ModeOutcome {
    mode: SimMode,
    summaries: Vec<RunSummary>,
    rows: Vec<AggregateRow>,
}

fn load_experiment(path: &Path, g: &GlobalOpts) -> Result<(config::Experiment, PathBuf)> {
    let mut exp = ExperimentFile::load(path)?;
    if let Some(seed) = g.seed {
        exp.scenario.sim.master_seed = seed;
    }
    let dir = g.output_dir(&exp.output_dir);
    Ok((exp, dir))
}

fn run_mode(exp: &config::Experiment, mode: SimMode, dir: &Path, skip_warmup_s: f64, g: &GlobalOpts) -> Result<ModeOutcome> {
    eprintln!(
        "[{}] {}: {} replication(s) of {} s",
        exp.name, mode, exp.scenario.sim.replications, exp.scenario.sim.duration_s
    );
    let results = run_replications(&exp.scenario, mode, g.jobs())?;
    let mode_dir = dir.join(mode.as_str());
    create_dir(&mode_dir)?;
    let slas: Vec<Option<f64>> = exp.scenario.graph.functions().iter().map(|f| f.sla_ms).collect();
    let mut summaries = Vec::with_capacity(results.len());
    for r in &results {
        let mut buf = Vec::new();
        write_series_csv(&r.windows, &mut buf)?;
        write_file(&mode_dir.join(format!("windows_rep{:02}.csv", r.replication)), &buf)?;
        if let Some(ticks) = &r.ticks {
            let mut buf = Vec::new();
            write_series_csv(ticks, &mut buf)?;
            write_file(&mode_dir.join(format!("ticks_rep{:02}.csv", r.replication)), &buf)?;
        }
        let mut summary = r.summary.clone();
        if skip_warmup_s > 0.0 {
            summary.functions = summarize_from(&r.windows, &slas, skip_warmup_s)?;
        }
        summaries.push(summary);
    }
    let rows = aggregate(&summaries)?;
    let mut buf = Vec::new();
    write_summary_csv(&rows, &mut buf)?;
    write_file(&dir.join(format!("summary_{}.csv", mode.as_str())), &buf)?;
    Ok(ModeOutcome { mode, summaries, rows })
}

fn summary_output(outcomes: &[ModeOutcome], format: Format) -> Result<String> {
    Ok(match format {
        Format::Table => outcomes.iter().map(|o| render_summary_table(&o.rows)).collect::<Vec<_>>().join("\n"),
        Format::Csv => {
            let rows: Vec<AggregateRow> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
            let mut buf = Vec::new();
            write_summary_csv(&rows, &mut buf)?;
            String::from_utf8(buf).expect("csv output is utf-8")
        }
        Format::Json => {
            let by_mode: serde_json::Map<String, serde_json::Value> = outcomes
                .iter()
                .map(|o| Ok((o.mode.as_str().to_string(), serde_json::to_value(&o.rows)?)))
                .collect::<Result<_>>()?;
            json_text(&by_mode)?
        }
    })
}

pub fn cmd_run(experiment: &Path, modes: ModeSelection, skip_warmup_s: f64, g: &GlobalOpts) -> Result<String> {
    let (exp, dir) = load_experiment(experiment, g)?;
    create_dir(&dir)?;
    let modes = match modes {
        ModeSelection::FromFile => vec![exp.scenario.sim.mode],
        ModeSelection::Only(m) => vec![m],
        ModeSelection::Both => vec![SimMode::DependencyAware, SimMode::Baseline],
    };
    let outcomes = modes
        .into_iter()
        .map(|m| run_mode(&exp, m, &dir, skip_warmup_s, g))
        .collect::<Result<Vec<_>>>()?;
    summary_output(&outcomes, g.format)
}

/// Both modes side by side in one row per function.
pub fn render_side_by_side(a: &[AggregateRow], b: &[AggregateRow]) -> String {
    let mut cells: Vec<Vec<String>> = vec![vec![
        "function".into(),
        "SLA".into(),
        format!("RT {}", a.first().map_or("", |r| r.mode.as_str())),
        format!("RT {}", b.first().map_or("", |r| r.mode.as_str())),
        "V a (%)".into(),
        "V b (%)".into(),
        "C a (m)".into(),
        "C b (m)".into(),
    ]];
    for (ra, rb) in a.iter().zip(b) {
        let v = |r: &AggregateRow| {
            if r.sla_ms.is_none() && r.function != depscale_core::metrics::OVERALL {
                "no-sla".to_string()
            } else {
                format!("{:.1} ± {:.1}", r.v_mu, r.v_sigma)
            }
        };
        cells.push(vec![
            ra.function.clone(),
            ra.sla_ms.map_or_else(|| "-".into(), |s| s.to_string()),
            format!("{:.1} ± {:.1}", ra.rt_mu, ra.rt_sigma),
            format!("{:.1} ± {:.1}", rb.rt_mu, rb.rt_sigma),
            v(ra),
            v(rb),
            format!("{:.0} ± {:.0}", ra.c_mu, ra.c_sigma),
            format!("{:.0} ± {:.0}", rb.c_mu, rb.c_sigma),
        ]);
    }
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

pub fn cmd_compare(experiment: &Path, skip_warmup_s: f64, g: &GlobalOpts) -> Result<(String, Comparison)> {
    let (exp, dir) = load_experiment(experiment, g)?;
    create_dir(&dir)?;
    let a = run_mode(&exp, SimMode::DependencyAware, &dir, skip_warmup_s, g)?;
    let b = run_mode(&exp, SimMode::Baseline, &dir, skip_warmup_s, g)?;
    let report = compare(&a.summaries, &b.summaries)?;
    let table = render_side_by_side(&a.rows, &b.rows);
    write_file(&dir.join("comparison.json"), json_text(&report)?.as_bytes())?;
    write_file(&dir.join("table.txt"), table.as_bytes())?;
    let text = match g.format {
        Format::Table => format!("{table}\n{}", render_comparison(&report)),
        Format::Json => json_text(&report)?,
        Format::Csv => summary_output(&[a, b], Format::Csv)?,
    };
    Ok((text, report))
}

pub fn cmd_profile(app_file: &Path, warmup: usize, samples: usize, g: &GlobalOpts) -> Result<String> {
    let app: AppFile = config::read_json(app_file)?;
    let graph = app.graph()?;
    let nlrt = profile_via_simulation(&graph, &app.perf(None)?, warmup, samples)?;
    Ok(match g.format {
        Format::Json => {
            let p: ProfileFile = nlrt
                .into_iter()
                .map(|(k, v)| (k, ProfileEntry { nlrt_ms: v }))
                .collect();
            json_text(&p)?
        }
        Format::Csv => {
            let mut s = String::from("function,nlrt_ms\n");
            for (k, v) in &nlrt {
                let _ = writeln!(s, "{k},{v}");
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for (k, v) in &nlrt {
                let _ = writeln!(s, "{k:20} {v:>10.3} ms");
            }
            s
        }
    })
}

pub fn cmd_synth(params: &SynthParams, bottleneck: bool, g: &GlobalOpts) -> Result<String> {
    let s = synthesize(params)?;
    let dir = g.output_dir(Path::new(&format!("out/synth-{}", params.seed)));
    create_dir(&dir)?;
    let exp = experiment_template("app.json", "profile.json", &s.app, bottleneck, params.seed)?;
    write_file(&dir.join("app.json"), json_text(&s.app)?.as_bytes())?;
    write_file(&dir.join("profile.json"), json_text(&s.profile)?.as_bytes())?;
    write_file(&dir.join("experiment.json"), json_text(&exp)?.as_bytes())?;
    Ok(match g.format {
        Format::Json => json_text(&serde_json::json!({ "dir": dir, "stats": s.stats }))?,
        _ => format!(
            "wrote {}: {} functions, {} entrypoints, mean out-degree {:.2}, parallel fraction {:.2}\n",
            dir.display(),
            s.stats.functions,
            s.stats.entrypoints,
            s.stats.avg_out_degree,
            s.stats.parallel_fraction
        ),
    })
}

/// Process exit code for an error: 1 for invalid input, 2 for runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// One-line machine-readable diagnostic.
pub fn diagnostic(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}
