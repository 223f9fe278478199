//! Synthetic city-scale location-update traces.
//!
//! Users appear on a sparse random subset of days. On an active day they
//! make a few visits to locations chosen with Zipf-distributed popularity,
//! emitting an update roughly every 15 minutes while there.

use rand::Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::MINUTES_PER_DAY;
use crate::rng::{stream_rng, Stream};
use crate::trace::LocationUpdate;

/// Average number of active days per user in the sparse profile.
pub const SPARSE_ACTIVE_DAYS: f64 = 3.5;

/// Minimum gap between consecutive visits; longer than the visit gap rule so
/// that back-to-back visits to the same place stay separate.
const MIN_TRAVEL: i64 = 31;
const MAX_TRAVEL: i64 = 120;
/// Updates scatter this far (metres) around the location point.
const POSITION_JITTER: f64 = 5.0;
const UPDATE_JITTER: i64 = 3;
const DAY_START: i64 = 7 * 60;
const FIRST_VISIT_WINDOW: i64 = 4 * 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_locations: usize,
    /// Width and height of the bounding box anchored at the origin, metres.
    pub area: (f64, f64),
    pub days: u32,
    /// Inclusive range of updates per visit.
    pub updates_per_visit: (u32, u32),
    /// Inclusive range of visits per active day.
    pub visits_per_active_day: (u32, u32),
    pub active_day_probability: f64,
    pub zipf_exponent: f64,
    /// Nominal minutes between updates during a visit.
    pub update_interval: i64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::sparse(2000, 14)
    }
}

impl SynthConfig {
    /// Sparse profile: on average 3.5 active days per user.
    pub fn sparse(n_users: usize, days: u32) -> Self {
        SynthConfig {
            n_users,
            n_locations: 150,
            area: (3000.0, 3000.0),
            days,
            updates_per_visit: (2, 8),
            visits_per_active_day: (1, 3),
            active_day_probability: (SPARSE_ACTIVE_DAYS / days.max(1) as f64).min(1.0),
            zipf_exponent: 1.0,
            update_interval: 15,
            rng_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_locations == 0 {
            return Err(Error::param("n_locations", "must be > 0"));
        }
        if self.days == 0 {
            return Err(Error::param("days", "must be > 0"));
        }
        if !(self.area.0 > 2.0 * POSITION_JITTER && self.area.1 > 2.0 * POSITION_JITTER) {
            return Err(Error::param("area", format!("too small: {:?}", self.area)));
        }
        let range_ok = |(lo, hi): (u32, u32)| lo >= 1 && lo <= hi;
        if !range_ok(self.updates_per_visit) {
            return Err(Error::param("updates_per_visit", "need 1 <= lo <= hi"));
        }
        if !range_ok(self.visits_per_active_day) {
            return Err(Error::param("visits_per_active_day", "need 1 <= lo <= hi"));
        }
        if !(0.0..=1.0).contains(&self.active_day_probability) {
            return Err(Error::param("active_day_probability", "must be in [0, 1]"));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return Err(Error::param("zipf_exponent", "must be >= 0"));
        }
        if self.update_interval <= 2 * UPDATE_JITTER {
            return Err(Error::param("update_interval", "must exceed twice the jitter"));
        }
        Ok(())
    }

    fn locations(&self) -> Vec<(f64, f64)> {
        let mut rng = stream_rng(self.rng_seed, Stream::Synth, &[u64::MAX]);
        let m = POSITION_JITTER;
        (0..self.n_locations)
            .map(|_| {
                (
                    rng.random_range(m..self.area.0 - m),
                    rng.random_range(m..self.area.1 - m),
                )
            })
            .collect()
    }
}

pub fn user_name(index: usize) -> String {
    format!("u{index:06}")
}

/// Generates a trace sorted by user, then time.
pub fn generate_trace(cfg: &SynthConfig) -> Result<Vec<LocationUpdate>> {
    cfg.validate()?;
    let locations = cfg.locations();
    let popularity = Zipf::new(cfg.n_locations as f64, cfg.zipf_exponent)
        .map_err(|e| Error::param("zipf_exponent", e.to_string()))?;

    let per_user: Vec<Vec<LocationUpdate>> = (0..cfg.n_users)
        .into_par_iter()
        .map(|u| user_trace(cfg, u, &locations, &popularity))
        .collect();
    Ok(per_user.into_iter().flatten().collect())
}

fn user_trace(cfg: &SynthConfig, index: usize, locations: &[(f64, f64)], popularity: &Zipf<f64>) -> Vec<LocationUpdate> {
    let mut rng = stream_rng(cfg.rng_seed, Stream::Synth, &[index as u64]);
    let name = user_name(index);

    let mut active: Vec<u32> = (0..cfg.days)
        .filter(|_| rng.random_bool(cfg.active_day_probability))
        .collect();
    if active.is_empty() {
        active.push(rng.random_range(0..cfg.days));
    }

    let mut out = Vec::new();
    for day in active {
        let day_end = (day as i64 + 1) * MINUTES_PER_DAY - 1;
        let mut t = day as i64 * MINUTES_PER_DAY + DAY_START + rng.random_range(0..FIRST_VISIT_WINDOW);
        let visits = rng.random_range(cfg.visits_per_active_day.0..=cfg.visits_per_active_day.1);
        for _ in 0..visits {
            let loc = popularity.sample(&mut rng) as usize - 1;
            let (lx, ly) = locations[loc.min(locations.len() - 1)];
            let n = rng.random_range(cfg.updates_per_visit.0..=cfg.updates_per_visit.1);
            for k in 0..n {
                let jitter = if k == 0 { 0 } else { rng.random_range(-UPDATE_JITTER..=UPDATE_JITTER) };
                let ut = t + k as i64 * cfg.update_interval + jitter;
                if ut > day_end {
                    break;
                }
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let radius = POSITION_JITTER * rng.random::<f64>().sqrt();
                out.push(LocationUpdate {
                    user: name.clone(),
                    t: ut,
                    x: (lx + radius * angle.cos()).clamp(0.0, cfg.area.0),
                    y: (ly + radius * angle.sin()).clamp(0.0, cfg.area.1),
                });
            }
            t += (n as i64 - 1) * cfg.update_interval + UPDATE_JITTER + rng.random_range(MIN_TRAVEL..=MAX_TRAVEL);
            if t > day_end {
                break;
            }
        }
    }
    out.sort_by_key(|u| u.t);
    out
}
