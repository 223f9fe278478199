//! Day-stepped stochastic SIR process over a dynamic contact network.
//!
//! Each day, recoveries are applied first; then every susceptible who
//! receives links from currently infectious hosts accumulates the dose of
//! all those links (a removal rate is drawn per link) and is infected with
//! the dose-response probability. New infections become infectious after the
//! latent period. All randomness comes from counter-based streams keyed by
//! `(run, day, individual)`, so results do not depend on thread count.

use std::io::Write;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::{dose_response, link_exposure, DiseaseParams, EnvironmentParams};
use crate::network::{DynamicContactNetwork, UserIndex};
use crate::rng::{derive_key, stream_rng, Stream};

/// How infectious periods are drawn from `tau_range`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    /// Uniform over the integer days of the range.
    #[default]
    Uniform,
    /// Every individual gets the lower bound (3 days for the default range).
    Mean3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seeds: usize,
    pub horizon_days: u32,
    /// Median particle removal time `r_t`, minutes.
    pub removal_median: f64,
    /// Bounds of the particle removal time, minutes.
    pub removal_range: (f64, f64),
    pub disease: DiseaseParams,
    pub tau_mode: TauMode,
    /// Generation rate, volume and pulmonary rate; the removal rate stored
    /// here is ignored and redrawn per link.
    pub environment: EnvironmentParams,
    pub rng_seed: u64,
    pub runs: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seeds: 500,
            horizon_days: 32,
            removal_median: 60.0,
            removal_range: (7.5, 300.0),
            disease: DiseaseParams::default(),
            tau_mode: TauMode::Uniform,
            environment: EnvironmentParams::influenza(1.0 / 60.0).expect("valid defaults"),
            rng_seed: 1,
            runs: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.removal_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::param("removal_range", format!("need 0 < lo <= hi, got {lo}..{hi}")));
        }
        if !(lo..=hi).contains(&self.removal_median) {
            return Err(Error::param(
                "removal_median",
                format!("{} outside {lo}..{hi}", self.removal_median),
            ));
        }
        if self.runs == 0 {
            return Err(Error::param("runs", "must be >= 1"));
        }
        self.disease.validate()?;
        self.environment.validate()
    }
}

/// Draws a particle removal time `b` (minutes) whose median is `median`:
/// with probability ½ uniform on `[lo, median]`, otherwise uniform on
/// `[median, hi]`.
pub fn sample_removal_time<R: Rng + ?Sized>(median: f64, range: (f64, f64), rng: &mut R) -> Result<f64> {
    let (lo, hi) = range;
    if !(lo..=hi).contains(&median) {
        return Err(Error::param("removal_median", format!("{median} outside {lo}..{hi}")));
    }
    Ok(draw_removal_time(median, range, rng))
}

fn draw_removal_time<R: Rng + ?Sized>(median: f64, (lo, hi): (f64, f64), rng: &mut R) -> f64 {
    let lower_half: bool = rng.random();
    let u: f64 = rng.random();
    if lower_half {
        lo + u * (median - lo)
    } else {
        median + u * (hi - median)
    }
}

/// Removal rate (per minute) for a removal time drawn as in
/// [`sample_removal_time`].
pub fn sample_removal_rate<R: Rng + ?Sized>(median: f64, range: (f64, f64), rng: &mut R) -> Result<f64> {
    Ok(1.0 / sample_removal_time(median, range, rng)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Susceptible,
    /// Infectious from day `since` (inclusive) for `tau` days.
    Infectious { since: u32, tau: u32 },
    Recovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DailyStats {
    pub day: u32,
    /// New infections.
    pub new_infections: usize,
    /// New recoveries.
    pub new_recoveries: usize,
    /// Currently infected, including those still latent.
    pub prevalence: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub daily: Vec<DailyStats>,
}

impl RunResult {
    /// Infections over the horizon, seeds excluded.
    pub fn outbreak_size(&self) -> usize {
        self.daily.iter().map(|d| d.new_infections).sum()
    }
}

/// Per-run simulation state.
#[derive(Debug, Clone)]
pub struct Population {
    pub states: Vec<Status>,
    run_key: u64,
}

impl Population {
    /// Everyone susceptible except `seeds`, which are infectious from day 0.
    pub fn seeded(size: usize, seeds: &[UserIndex], cfg: &SimulationConfig, run: usize) -> Self {
        let run_key = derive_key(cfg.rng_seed, Stream::RunSeed, &[run as u64]);
        let mut pop = Population {
            states: vec![Status::Susceptible; size],
            run_key,
        };
        for &s in seeds {
            let tau = pop.draw_tau(s, cfg);
            pop.states[s as usize] = Status::Infectious { since: 0, tau };
        }
        pop
    }

    fn draw_tau(&self, who: UserIndex, cfg: &SimulationConfig) -> u32 {
        let (lo, hi) = cfg.disease.tau_range;
        match cfg.tau_mode {
            TauMode::Mean3 => lo,
            TauMode::Uniform => stream_rng(self.run_key, Stream::InfectiousPeriod, &[who as u64]).random_range(lo..=hi),
        }
    }

    /// `(susceptible, infected, recovered)`.
    pub fn compartments(&self) -> (usize, usize, usize) {
        self.states.iter().fold((0, 0, 0), |(s, i, r), st| match st {
            Status::Susceptible => (s + 1, i, r),
            Status::Infectious { .. } => (s, i + 1, r),
            Status::Recovered => (s, i, r + 1),
        })
    }

    fn is_infectious_on(&self, who: UserIndex, day: u32) -> bool {
        matches!(self.states[who as usize], Status::Infectious { since, .. } if since <= day)
    }
}

/// Advances `pop` through `day`.
pub fn step_day(
    net: &DynamicContactNetwork,
    pop: &mut Population,
    day: u32,
    cfg: &SimulationConfig,
) -> Result<DailyStats> {
    cfg.validate()?;
    Ok(advance(net, pop, day, cfg))
}

fn advance(net: &DynamicContactNetwork, pop: &mut Population, day: u32, cfg: &SimulationConfig) -> DailyStats {
    let mut recovered = 0;
    for st in pop.states.iter_mut() {
        if let Status::Infectious { since, tau } = *st {
            if day >= since && day - since >= tau {
                *st = Status::Recovered;
                recovered += 1;
            }
        }
    }

    let pop_ref = &*pop;
    let infected: Vec<UserIndex> = net
        .received_on(day)
        .collect::<Vec<_>>()
        .into_par_iter()
        .filter_map(|(target, links)| {
            if pop_ref.states[target as usize] != Status::Susceptible {
                return None;
            }
            let mut removal = None;
            let mut dose = 0.0;
            for l in links.iter().filter(|l| pop_ref.is_infectious_on(l.host, day)) {
                let rng = removal.get_or_insert_with(|| {
                    stream_rng(pop_ref.run_key, Stream::RemovalTime, &[day as u64, target as u64])
                });
                let env = EnvironmentParams {
                    removal_rate: 1.0 / draw_removal_time(cfg.removal_median, cfg.removal_range, rng),
                    ..cfg.environment
                };
                dose += link_exposure(&env, &l.interval());
            }
            removal.as_ref()?;
            let p = dose_response(dose, cfg.disease.sigma);
            let u: f64 = stream_rng(pop_ref.run_key, Stream::Infection, &[day as u64, target as u64]).random();
            (u < p).then_some(target)
        })
        .collect();

    let since = day + cfg.disease.latent_days;
    for &who in &infected {
        let tau = pop.draw_tau(who, cfg);
        pop.states[who as usize] = Status::Infectious { since, tau };
    }

    DailyStats {
        day,
        new_infections: infected.len(),
        new_recoveries: recovered,
        prevalence: pop.compartments().1,
    }
}

/// Picks this run's seed individuals uniformly without replacement.
pub fn choose_seeds(population: usize, cfg: &SimulationConfig, run: usize) -> Result<Vec<UserIndex>> {
    if cfg.seeds > population {
        return Err(Error::TooManySeeds {
            seeds: cfg.seeds,
            population,
        });
    }
    let mut rng = stream_rng(cfg.rng_seed, Stream::SeedSelection, &[run as u64]);
    let mut seeds: Vec<UserIndex> = index::sample(&mut rng, population, cfg.seeds)
        .into_iter()
        .map(|i| i as UserIndex)
        .collect();
    seeds.sort_unstable();
    Ok(seeds)
}

/// Runs one Monte-Carlo repetition.
pub fn run_once(net: &DynamicContactNetwork, cfg: &SimulationConfig, run: usize) -> Result<RunResult> {
    cfg.validate()?;
    let seeds = choose_seeds(net.user_count(), cfg, run)?;
    let mut pop = Population::seeded(net.user_count(), &seeds, cfg, run);
    let daily = (0..cfg.horizon_days)
        .map(|day| advance(net, &mut pop, day, cfg))
        .collect();
    Ok(RunResult { run, daily })
}

/// Runs `cfg.runs` independent repetitions in parallel; results are in run
/// order.
pub fn run_simulation(net: &DynamicContactNetwork, cfg: &SimulationConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    if cfg.seeds > net.user_count() {
        return Err(Error::TooManySeeds {
            seeds: cfg.seeds,
            population: net.user_count(),
        });
    }
    (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(net, cfg, run))
        .collect()
}

pub fn write_daily_csv<W: Write>(mut out: W, runs: &[RunResult]) -> std::io::Result<()> {
    writeln!(out, "run,day,I_n,I_r,I_p")?;
    for r in runs {
        for d in &r.daily {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.run, d.day, d.new_infections, d.new_recoveries, d.prevalence
            )?;
        }
    }
    Ok(())
}
