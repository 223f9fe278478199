//! Sweep execution, report files and plan comparison.
//!
//! A plan is run against one trace: the requested network variants are built
//! once, then every cell of the sweep grid is simulated. Cells run
//! concurrently and keep their results in memory; files are written in cell
//! order at the end, so outputs are byte-identical for any worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Cell, ExperimentPlan, Variant};
use crate::epidemic::{run_simulation, RunResult, SimulationConfig};
use crate::error::{Error, Result};
use crate::metrics::{fmt_opt, summarize, RunSummary};
use crate::network::{build_network, densify, make_ldt_lst, project_spst, DynamicContactNetwork};
use crate::stats::Sample;
use crate::trace::{parse_trace, LocationUpdate, TraceFormat};

/// Environment variable holding the worker limit.
pub const WORKERS_ENV: &str = "SPDT_WORKERS";

pub const SUMMARY_FILE: &str = "summary.csv";
pub const AMPLIFICATION_FILE: &str = "amplification.csv";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CURVES_DIR: &str = "curves";

/// Runs `f` on a pool of `workers` threads, or on the global pool if `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::param("workers", "must be >= 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Worker limit from `SPDT_WORKERS`, if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Builds every network the plan's variants need.
pub fn build_variants(
    trace: &[LocationUpdate],
    plan: &ExperimentPlan,
) -> Result<BTreeMap<Variant, DynamicContactNetwork>> {
    let wants = |vs: &[Variant]| plan.variants.iter().any(|v| vs.contains(v));
    let mut out = BTreeMap::new();
    let sdt = build_network(trace, &plan.builder())?;
    if wants(&[Variant::SST]) {
        out.insert(Variant::SST, project_spst(&sdt));
    }
    if wants(&[Variant::DDT, Variant::DST, Variant::LDT, Variant::LST]) {
        let ddt = densify(&sdt, plan.densify_seed);
        if wants(&[Variant::DST]) {
            out.insert(Variant::DST, project_spst(&ddt));
        }
        if wants(&[Variant::LDT, Variant::LST]) {
            let (ldt, lst) = make_ldt_lst(&ddt, plan.indirect_window, plan.ldt_shift);
            out.insert(Variant::LDT, ldt);
            out.insert(Variant::LST, lst);
        }
        out.insert(Variant::DDT, ddt);
    }
    out.insert(Variant::SDT, sdt);
    out.retain(|v, _| plan.variants.contains(v));
    Ok(out)
}

/// Mean daily counts across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub day: u32,
    pub new_infections: f64,
    pub new_recoveries: f64,
    pub prevalence: f64,
}

pub fn mean_curve(runs: &[RunResult]) -> Vec<CurvePoint> {
    let days = runs.iter().map(|r| r.daily.len()).max().unwrap_or(0);
    let n = runs.len() as f64;
    (0..days)
        .map(|d| {
            let mut p = CurvePoint {
                day: d as u32,
                new_infections: 0.0,
                new_recoveries: 0.0,
                prevalence: 0.0,
            };
            for s in runs.iter().filter_map(|r| r.daily.get(d)) {
                p.new_infections += s.new_infections as f64 / n;
                p.new_recoveries += s.new_recoveries as f64 / n;
                p.prevalence += s.prevalence as f64 / n;
            }
            p
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: Cell,
    /// Why the cell failed; a failed cell has no runs.
    pub error: Option<String>,
    pub runs: Vec<RunSummary>,
    pub curve: Vec<CurvePoint>,
}

impl CellReport {
    pub fn outbreak_sizes(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.outbreak_size as f64).collect()
    }

    pub fn outbreak(&self) -> Sample {
        Sample::of(&self.outbreak_sizes())
    }

    /// Mean outbreak size, `None` for a failed cell.
    pub fn mean_outbreak(&self) -> Option<f64> {
        (self.error.is_none() && !self.runs.is_empty()).then(|| self.outbreak().mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationRow {
    pub spdt: Variant,
    pub spst: Variant,
    pub r_t: f64,
    pub sigma: f64,
    pub tau: u32,
    pub mean_spdt: f64,
    pub mean_spst: f64,
    /// `mean_spdt / mean_spst`; `None` when the projection has no outbreak.
    pub amplification: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub trace_digest: String,
    pub plan: ExperimentPlan,
    pub cells: Vec<CellReport>,
}

impl PlanReport {
    pub fn cell(&self, variant: Variant, r_t: f64, sigma: f64, tau: u32) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.cell == Cell { variant, r_t, sigma, tau })
    }

    pub fn failed(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    /// Delayed-transmission over concurrent-only outbreak size for every
    /// cell whose pair of networks are both in the plan.
    pub fn amplification(&self) -> Vec<AmplificationRow> {
        self.cells
            .iter()
            .filter_map(|spst| {
                let c = spst.cell;
                let spdt_variant = c.variant.spdt_counterpart()?;
                let spdt = self.cell(spdt_variant, c.r_t, c.sigma, c.tau)?;
                let (mean_spdt, mean_spst) = (spdt.mean_outbreak()?, spst.mean_outbreak()?);
                Some(AmplificationRow {
                    spdt: spdt_variant,
                    spst: c.variant,
                    r_t: c.r_t,
                    sigma: c.sigma,
                    tau: c.tau,
                    mean_spdt,
                    mean_spst,
                    amplification: (mean_spst > 0.0).then(|| mean_spdt / mean_spst),
                })
            })
            .collect()
    }
}

/// Simulates every cell of `plan` on networks built from `trace`. A cell that
/// cannot run is recorded with its error; the others are unaffected.
pub fn execute_plan(plan: &ExperimentPlan, trace: &[LocationUpdate], trace_digest: &str) -> Result<PlanReport> {
    plan.validate()?;
    let networks = build_variants(trace, plan)?;
    let cells: Vec<CellReport> = plan
        .cells()
        .into_par_iter()
        .map(|cell| {
            let cfg = plan.simulation(&cell);
            match run_simulation(&networks[&cell.variant], &cfg) {
                Ok(runs) => CellReport {
                    cell,
                    error: None,
                    runs: runs.iter().map(summarize).collect(),
                    curve: mean_curve(&runs),
                },
                Err(e) => CellReport {
                    cell,
                    error: Some(e.to_string()),
                    runs: Vec::new(),
                    curve: Vec::new(),
                },
            }
        })
        .collect();
    Ok(PlanReport {
        trace_digest: trace_digest.to_string(),
        plan: plan.clone(),
        cells,
    })
}

/// `variant,r_t,sigma,tau,run,outbreak_size,R_e,initial_R_t`
pub fn summary_csv(report: &PlanReport) -> String {
    let mut s = String::from("variant,r_t,sigma,tau,run,outbreak_size,R_e,initial_R_t\n");
    for c in &report.cells {
        let k = c.cell;
        for r in &c.runs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                k.variant,
                k.r_t,
                k.sigma,
                k.tau,
                r.run,
                r.outbreak_size,
                fmt_opt(r.effective_r),
                fmt_opt(r.initial_r)
            );
        }
    }
    s
}

/// `day,I_n,I_r,I_p` averaged over runs.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("day,I_n,I_r,I_p\n");
    for p in curve {
        let _ = writeln!(s, "{},{},{},{}", p.day, p.new_infections, p.new_recoveries, p.prevalence);
    }
    s
}

/// `spdt,spst,r_t,sigma,tau,mean_spdt,mean_spst,amplification`
pub fn amplification_csv(rows: &[AmplificationRow]) -> String {
    let mut s = String::from("spdt,spst,r_t,sigma,tau,mean_spdt,mean_spst,amplification\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.spdt,
            r.spst,
            r.r_t,
            r.sigma,
            r.tau,
            r.mean_spdt,
            r.mean_spst,
            fmt_opt(r.amplification)
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedCell {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub trace_path: PathBuf,
    pub trace_format: TraceFormat,
    pub trace_digest: String,
    pub plan: ExperimentPlan,
    pub files: Vec<FileDigest>,
    pub failed_cells: Vec<FailedCell>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Reads a trace file and returns it with the digest of its bytes.
pub fn read_trace(path: &Path, format: TraceFormat) -> Result<(Vec<LocationUpdate>, String)> {
    let bytes = fs::read(path)?;
    let digest = sha256_hex(&bytes);
    Ok((parse_trace(bytes.as_slice(), format)?.updates, digest))
}

/// Runs `plan` on the trace at `trace_path` and writes the summary,
/// per-cell curves, amplification table, JSON report and manifest into
/// `out_dir`.
pub fn run_plan(plan: &ExperimentPlan, trace_path: &Path, format: TraceFormat, out_dir: &Path) -> Result<Manifest> {
    let (trace, digest) = read_trace(trace_path, format)?;
    let report = execute_plan(plan, &trace, &digest)?;
    write_report(&report, trace_path, format, out_dir)
}

/// Re-runs the plan recorded in a manifest into `out_dir`, refusing if the
/// trace has changed since.
pub fn rerun_manifest(manifest: &Manifest, out_dir: &Path) -> Result<Manifest> {
    let (trace, digest) = read_trace(&manifest.trace_path, manifest.trace_format)?;
    if digest != manifest.trace_digest {
        return Err(Error::TraceMismatch(manifest.trace_digest.clone(), digest));
    }
    let report = execute_plan(&manifest.plan, &trace, &digest)?;
    write_report(&report, &manifest.trace_path, manifest.trace_format, out_dir)
}

pub fn write_report(report: &PlanReport, trace_path: &Path, format: TraceFormat, out_dir: &Path) -> Result<Manifest> {
    let mut files: Vec<(String, Vec<u8>)> = vec![
        (SUMMARY_FILE.into(), summary_csv(report).into_bytes()),
        (AMPLIFICATION_FILE.into(), amplification_csv(&report.amplification()).into_bytes()),
        (REPORT_FILE.into(), serde_json::to_vec_pretty(report)?),
    ];
    for c in report.cells.iter().filter(|c| c.error.is_none()) {
        files.push((format!("{CURVES_DIR}/{}.csv", c.cell.id()), curve_csv(&c.curve).into_bytes()));
    }

    fs::create_dir_all(out_dir.join(CURVES_DIR))?;
    let mut digests = Vec::with_capacity(files.len());
    for (rel, bytes) in &files {
        fs::write(out_dir.join(rel), bytes)?;
        digests.push(FileDigest {
            path: rel.clone(),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = Manifest {
        trace_path: trace_path.to_path_buf(),
        trace_format: format,
        trace_digest: report.trace_digest.clone(),
        plan: report.plan.clone(),
        files: digests,
        failed_cells: report
            .failed()
            .map(|c| FailedCell {
                cell: c.cell.id(),
                error: c.error.clone().unwrap_or_default(),
            })
            .collect(),
    };
    fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_report(dir: &Path) -> Result<PlanReport> {
    Ok(serde_json::from_slice(&fs::read(dir.join(REPORT_FILE))?)?)
}

/// A curve of outbreak size against `r_t`: one variant at fixed `sigma`
/// and `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub variant: Variant,
    pub sigma: f64,
    pub tau: u32,
}

impl std::fmt::Display for Series {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}_s{}_tau{}", self.variant, self.sigma, self.tau)
    }
}

fn series_of(report: &PlanReport) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for c in &report.cells {
        let s = Series {
            variant: c.cell.variant,
            sigma: c.cell.sigma,
            tau: c.cell.tau,
        };
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub r_t: f64,
    pub series_a: Series,
    pub mean_a: f64,
    pub series_b: Series,
    pub mean_b: f64,
    /// `mean_b - mean_a`.
    pub difference: f64,
}

/// Outbreak-size curves of two plans over the same trace, compared at every
/// `r_t` both contain. When both plans cover the same series, each series is
/// compared with itself; otherwise every series of `a` is compared with
/// every series of `b`. Failed cells are skipped.
pub fn reconstruct_compare(a: &PlanReport, b: &PlanReport) -> Result<Vec<ComparisonRow>> {
    if a.trace_digest != b.trace_digest {
        return Err(Error::TraceMismatch(a.trace_digest.clone(), b.trace_digest.clone()));
    }
    let (sa, sb) = (series_of(a), series_of(b));
    let same = sa.len() == sb.len() && sa.iter().all(|s| sb.contains(s));
    let mut rows = Vec::new();
    for &r_t in a.plan.r_t.iter().filter(|r| b.plan.r_t.contains(r)) {
        for x in &sa {
            for y in sb.iter().filter(|y| !same || *y == x) {
                let mean = |rep: &PlanReport, s: &Series| rep.cell(s.variant, r_t, s.sigma, s.tau)?.mean_outbreak();
                if let (Some(mean_a), Some(mean_b)) = (mean(a, x), mean(b, y)) {
                    rows.push(ComparisonRow {
                        r_t,
                        series_a: *x,
                        mean_a,
                        series_b: *y,
                        mean_b,
                        difference: mean_b - mean_a,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `r_t,series_a,mean_a,series_b,mean_b,difference`
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("r_t,series_a,mean_a,series_b,mean_b,difference\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.r_t, r.series_a, r.mean_a, r.series_b, r.mean_b, r.difference
        );
    }
    s
}

/// Mean outbreak size of `cfg` on `net`.
pub fn mean_outbreak(net: &DynamicContactNetwork, cfg: &SimulationConfig) -> Result<f64> {
    let runs = run_simulation(net, cfg)?;
    Ok(runs.iter().map(|r| r.outbreak_size() as f64).sum::<f64>() / runs.len() as f64)
}

/// Finds the `sigma` in `bracket` at which the mean outbreak size of `cfg`
/// on `net` reaches `target`, by bisection. Every evaluation reuses the
/// same random streams, so the search sees a nearly monotone curve.
pub fn match_sigma(
    net: &DynamicContactNetwork,
    cfg: &SimulationConfig,
    target: f64,
    bracket: (f64, f64),
    iterations: usize,
) -> Result<f64> {
    let at = |sigma: f64| {
        let mut c = cfg.clone();
        c.disease.sigma = sigma;
        mean_outbreak(net, &c)
    };
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::param("bracket", format!("need 0 < lo < hi, got {lo}..{hi}")));
    }
    if at(hi)? < target {
        return Ok(hi);
    }
    if at(lo)? >= target {
        return Ok(lo);
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
