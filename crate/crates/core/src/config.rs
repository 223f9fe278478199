//! Experiment plans loaded from flat TOML files with `key=value` overrides.
//!
//! Every key is optional; missing keys take the desk-scale defaults.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `variants` | networks to simulate, any of `SDT SST DDT DST LDT LST` | `["SDT", "SST"]` |
//! | `r_t` | median particle removal times, minutes | `[10, 35, 60]` |
//! | `sigma` | infectiousness values | `[0.33, 0.4, 0.5]` |
//! | `tau` | mean infectious periods, days | `[3, 4, 5]` |
//! | `runs` | Monte-Carlo runs per cell | `200` |
//! | `seeds` | initially infectious users per run | `20` |
//! | `horizon_days` | simulated and extracted days | `14` |
//! | `rng_seed` | root seed of every random stream | `1` |
//! | `densify_seed` | seed for DDT day copies | `1` |
//! | `ldt_shift` | `keep-duration` or `keep-departure` | `keep-duration` |
//! | `tau_mode` | `uniform` or `mean3` | `uniform` |
//! | `latent_days` | days between infection and infectiousness | `1` |
//! | `removal_min`, `removal_max` | removal time bounds, minutes | `7.5`, `300` |
//! | `generation_rate` | PFU/min | `18.24` |
//! | `air_volume` | m³ | `2512` |
//! | `pulmonary_rate` | m³/min | `0.0075` |
//! | `radius` | co-location radius, metres | `20` |
//! | `indirect_window` | minutes after departure | `200` |
//! | `visit_gap` | minutes | `30` |
//!
//! A mean infectious period `m` is drawn uniformly from the integer days
//! `m-1..=m+1`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::epidemic::{SimulationConfig, TauMode};
use crate::error::{Error, Result};
use crate::exposure::{
    DiseaseParams, EnvironmentParams, INFLUENZA_GENERATION_RATE, PROXIMITY_VOLUME, PULMONARY_RATE,
};
use crate::network::{BuilderConfig, LdtShift};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    SDT,
    SST,
    DDT,
    DST,
    LDT,
    LST,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::SDT,
        Variant::SST,
        Variant::DDT,
        Variant::DST,
        Variant::LDT,
        Variant::LST,
    ];

    /// The delayed-transmission network a concurrent-only variant projects.
    pub fn spdt_counterpart(self) -> Option<Variant> {
        match self {
            Variant::SST => Some(Variant::SDT),
            Variant::DST => Some(Variant::DDT),
            Variant::LST => Some(Variant::LDT),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown network variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub variants: Vec<Variant>,
    pub r_t: Vec<f64>,
    pub sigma: Vec<f64>,
    pub tau: Vec<u32>,
    pub runs: usize,
    pub seeds: usize,
    pub horizon_days: u32,
    pub rng_seed: u64,
    pub densify_seed: u64,
    pub ldt_shift: LdtShift,
    pub tau_mode: TauMode,
    pub latent_days: u32,
    pub removal_min: f64,
    pub removal_max: f64,
    pub generation_rate: f64,
    pub air_volume: f64,
    pub pulmonary_rate: f64,
    pub radius: f64,
    pub indirect_window: i64,
    pub visit_gap: i64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            variants: vec![Variant::SDT, Variant::SST],
            r_t: vec![10.0, 35.0, 60.0],
            sigma: vec![0.33, 0.4, 0.5],
            tau: vec![3, 4, 5],
            runs: 200,
            seeds: 20,
            horizon_days: 14,
            rng_seed: 1,
            densify_seed: 1,
            ldt_shift: LdtShift::default(),
            tau_mode: TauMode::default(),
            latent_days: 1,
            removal_min: 7.5,
            removal_max: 300.0,
            generation_rate: INFLUENZA_GENERATION_RATE,
            air_volume: PROXIMITY_VOLUME,
            pulmonary_rate: PULMONARY_RATE,
            radius: 20.0,
            indirect_window: 200,
            visit_gap: 30,
        }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variant: Variant,
    pub r_t: f64,
    pub sigma: f64,
    pub tau: u32,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("{}_rt{}_s{}_tau{}", self.variant, self.r_t, self.sigma, self.tau)
    }
}

impl ExperimentPlan {
    /// Switches to the full grid: `r_t` from 10 to 60 in steps of 5, 1000
    /// runs per cell and a 32-day horizon.
    pub fn full(mut self) -> Self {
        self.r_t = (2..=12).map(|k| 5.0 * k as f64).collect();
        self.runs = 1000;
        self.horizon_days = 32;
        self
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, overrides)
    }

    /// Parses TOML `text`, then applies each `key=value` override.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let plan: ExperimentPlan = parse_with_overrides(text, overrides)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("variants", self.variants.is_empty()),
            ("r_t", self.r_t.is_empty()),
            ("sigma", self.sigma.is_empty()),
            ("tau", self.tau.is_empty()),
        ] {
            if empty {
                return Err(Error::param(name, "sweep must not be empty"));
            }
        }
        if let Some(m) = self.tau.iter().find(|&&m| m < 2) {
            return Err(Error::param("tau", format!("mean infectious period must be >= 2, got {m}")));
        }
        if self.seeds == 0 {
            return Err(Error::param("seeds", "must be >= 1"));
        }
        self.builder().validate()?;
        for cell in self.cells() {
            self.simulation(&cell).validate()?;
        }
        Ok(())
    }

    pub fn builder(&self) -> BuilderConfig {
        BuilderConfig {
            radius: self.radius,
            indirect_window: self.indirect_window,
            visit_gap: self.visit_gap,
            horizon_days: self.horizon_days,
        }
    }

    /// Cells in output order: variant, then `r_t`, `sigma`, `tau`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &r_t in &self.r_t {
                for &sigma in &self.sigma {
                    for &tau in &self.tau {
                        out.push(Cell { variant, r_t, sigma, tau });
                    }
                }
            }
        }
        out
    }

    pub fn simulation(&self, cell: &Cell) -> SimulationConfig {
        SimulationConfig {
            seeds: self.seeds,
            horizon_days: self.horizon_days,
            removal_median: cell.r_t,
            removal_range: (self.removal_min, self.removal_max),
            disease: DiseaseParams {
                sigma: cell.sigma,
                tau_range: (cell.tau.saturating_sub(1), cell.tau + 1),
                latent_days: self.latent_days,
            },
            tau_mode: self.tau_mode,
            environment: EnvironmentParams {
                generation_rate: self.generation_rate,
                air_volume: self.air_volume,
                pulmonary_rate: self.pulmonary_rate,
                removal_rate: 1.0 / cell.r_t,
            },
            rng_seed: self.rng_seed,
            runs: self.runs,
        }
    }
}

/// Deserializes flat TOML `text` after applying `key=value` overrides.
/// Override values are read as TOML; anything that does not parse is taken
/// as a string.
pub fn parse_with_overrides<T: DeserializeOwned>(text: &str, overrides: &[String]) -> Result<T> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
        table.insert(key.trim().to_string(), parse_value(value.trim()));
    }
    table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
