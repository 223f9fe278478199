//! Command-line front end: trace synthesis, network construction and
//! variants, simulation, metrics, sweeps and sweep comparison.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use spdt::config::{parse_with_overrides, ExperimentPlan};
use spdt::epidemic::{run_simulation, write_daily_csv};
use spdt::exposure::{emit_concentration_curve, write_curve_csv, EnvironmentParams};
use spdt::metrics::{
    clustering_distribution, clustering_histogram, daily_network_metrics, degree_distribution, static_graph,
    summarize, write_daily_metrics_csv, write_histogram_csv, write_reproduction_csv, write_summary_csv,
    EDGE_THRESHOLD,
};
use spdt::network::{build_network, densify, load_network, make_ldt_lst, project_spst, save_network, LdtShift};
use spdt::runner::{
    comparison_csv, load_report, reconstruct_compare, rerun_manifest, run_plan, with_workers, workers_from_env,
    Manifest,
};
use spdt::synth::{generate_trace, SynthConfig};
use spdt::trace::{write_trace, TraceFormat};

#[derive(Parser)]
#[command(name = "spdt", version, about = "Diffusion over dynamic contact networks with delayed indirect links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// A TOML config file plus `key=value` overrides.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Flat TOML config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set runs=50 --set r_t=[10,60]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn text(&self) -> Result<String> {
        match &self.config {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
            None => Ok(String::new()),
        }
    }

    fn plan(&self) -> Result<ExperimentPlan> {
        Ok(ExperimentPlan::parse(&self.text()?, &self.overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic location-update trace.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the delayed-transmission (SDT) network from a trace.
    Build {
        #[arg(long)]
        trace: PathBuf,
        /// The trace has `lat,lon` columns; project them to metres.
        #[arg(long)]
        project_latlon: bool,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep only the concurrent-presence part of every link.
    ProjectSpst {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Copy links from active days onto each host's missing days.
    Densify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the density-controlled LDT/LST pair from a densified network.
    MakeLdtLst {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 200)]
        indirect_window: i64,
        /// Keep the neighbour's departure instead of its stay duration.
        #[arg(long)]
        keep_departure: bool,
        #[arg(long)]
        ldt_out: PathBuf,
        #[arg(long)]
        lst_out: PathBuf,
    },
    /// Simulate the first cell of a plan on a network file.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Daily and static degree and clustering metrics of a network.
    Metrics {
        #[arg(long)]
        network: PathBuf,
        /// Network whose daily active users form the averaging population;
        /// defaults to `--network`.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "SDT")]
        variant: String,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0])]
        r_t: Vec<f64>,
        /// Removal median for the whole-horizon static graph.
        #[arg(long, default_value_t = 60.0)]
        static_r_t: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every cell of an experiment plan.
    Sweep {
        #[arg(long, required_unless_present = "manifest")]
        trace: Option<PathBuf>,
        #[arg(long)]
        project_latlon: bool,
        #[command(flatten)]
        config: ConfigArgs,
        /// Use the full grid: r_t 10..60 step 5, 1000 runs, 32 days.
        #[arg(long)]
        full: bool,
        /// Re-run the plan and trace recorded in a manifest.
        #[arg(long, conflicts_with_all = ["trace", "config", "full"])]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare outbreak-size curves of two sweep outputs over the same trace.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Concentration curve around one host visit.
    Curve {
        #[arg(long, default_value_t = 60.0)]
        r_t: f64,
        #[arg(long, default_value_t = 0.0)]
        t_s: f64,
        #[arg(long, default_value_t = 200.0)]
        t_l: f64,
        #[arg(long, default_value_t = 600.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Writes a file through a buffered writer, creating parent directories and
/// surfacing flush errors.
fn write_to<E>(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>) -> Result<()>
where
    anyhow::Error: From<E>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn trace_format(latlon: bool) -> TraceFormat {
    if latlon {
        TraceFormat::LatLon
    } else {
        TraceFormat::Planar
    }
}

fn load(path: &Path) -> Result<spdt::network::DynamicContactNetwork> {
    load_network(path).with_context(|| format!("loading {}", path.display()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { config, out } => {
            let cfg: SynthConfig = parse_with_overrides(&config.text()?, &config.overrides)?;
            let trace = generate_trace(&cfg)?;
            write_to(&out, |w| write_trace(w, &trace))?;
            eprintln!("{} updates from {} users", trace.len(), cfg.n_users);
        }
        Command::Build {
            trace,
            project_latlon,
            config,
            out,
        } => {
            let plan = config.plan()?;
            let (updates, _) = spdt::runner::read_trace(&trace, trace_format(project_latlon))?;
            let net = build_network(&updates, &plan.builder())?;
            save_network(&net, &out)?;
            eprintln!("{} users, {} links", net.user_count(), net.link_count());
        }
        Command::ProjectSpst { input, out } => save_network(&project_spst(&load(&input)?), &out)?,
        Command::Densify { input, seed, out } => save_network(&densify(&load(&input)?, seed), &out)?,
        Command::MakeLdtLst {
            input,
            indirect_window,
            keep_departure,
            ldt_out,
            lst_out,
        } => {
            let shift = if keep_departure {
                LdtShift::KeepDeparture
            } else {
                LdtShift::KeepDuration
            };
            let (ldt, lst) = make_ldt_lst(&load(&input)?, indirect_window, shift);
            save_network(&ldt, &ldt_out)?;
            save_network(&lst, &lst_out)?;
        }
        Command::Simulate { network, config, out } => {
            let plan = config.plan()?;
            let cell = plan.cells()[0];
            let net = load(&network)?;
            let runs = run_simulation(&net, &plan.simulation(&cell))?;
            let summaries: Vec<_> = runs.iter().map(summarize).collect();
            fs::create_dir_all(&out)?;
            write_to(&out.join("daily.csv"), |w| write_daily_csv(w, &runs))?;
            write_to(&out.join("summary.csv"), |w| write_summary_csv(w, &summaries))?;
            write_to(&out.join("reproduction.csv"), |w| write_reproduction_csv(w, &summaries))?;
        }
        Command::Metrics {
            network,
            reference,
            variant,
            r_t,
            static_r_t,
            out,
        } => {
            let net = load(&network)?;
            let reference = match reference {
                Some(p) => load(&p)?,
                None => net.clone(),
            };
            let env = EnvironmentParams::influenza(1.0 / static_r_t)?;
            fs::create_dir_all(&out)?;
            let rows: Vec<_> = daily_network_metrics(&net, &reference, &r_t, &env, EDGE_THRESHOLD)
                .into_iter()
                .map(|m| (variant.clone(), m))
                .collect();
            write_to(&out.join("daily_metrics.csv"), |w| write_daily_metrics_csv(w, &rows))?;
            let g = static_graph(&net, static_r_t, &env, EDGE_THRESHOLD);
            write_to(&out.join("degree_hist.csv"), |w| write_histogram_csv(w, degree_distribution(&g)))?;
            let clustering = clustering_histogram(&clustering_distribution(&g));
            write_to(&out.join("clustering_hist.csv"), |w| write_histogram_csv(w, clustering))?;
        }
        Command::Sweep {
            trace,
            project_latlon,
            config,
            full,
            manifest,
            out,
        } => {
            let written = match manifest {
                Some(m) => rerun_manifest(&Manifest::load(&m)?, &out)?,
                None => {
                    let mut plan = config.plan()?;
                    if full {
                        plan = ExperimentPlan::parse(&plan.full().to_toml(), &config.overrides)?;
                    }
                    let trace = trace.expect("clap requires --trace without --manifest");
                    run_plan(&plan, &trace, trace_format(project_latlon), &out)?
                }
            };
            for f in &written.failed_cells {
                eprintln!("cell {} failed: {}", f.cell, f.error);
            }
            eprintln!("{} files written to {}", written.files.len() + 1, out.display());
        }
        Command::Compare { a, b, out } => {
            let rows = reconstruct_compare(&load_report(&a)?, &load_report(&b)?)?;
            if rows.is_empty() {
                bail!("the two sweeps share no r_t value with results");
            }
            write_to(&out, |w| w.write_all(comparison_csv(&rows).as_bytes()))?;
        }
        Command::Curve {
            r_t,
            t_s,
            t_l,
            horizon,
            step,
            out,
        } => {
            let env = EnvironmentParams::influenza(1.0 / r_t)?;
            let curve = emit_concentration_curve(&env, t_s, t_l, horizon, step)?;
            write_to(&out, |w| write_curve_csv(w, &curve))?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let workers = workers_from_env()?;
    with_workers(workers, || run(cli.command))?
}
