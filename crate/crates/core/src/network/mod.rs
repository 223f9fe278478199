//! Dynamic contact networks of directed host→neighbour transmission links.

mod extract;
mod grid;
mod io;
mod variants;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::LinkInterval;
use crate::trace::UserId;

pub use extract::{build_network, extract_spdt_links};
pub use grid::SpatialGrid;
pub use io::{load_network, read_network, save_network, write_network, FORMAT_TAG};
pub use variants::{densify, make_ldt_lst, project_spst, LdtShift};

pub const MINUTES_PER_DAY: i64 = 1440;

/// Index into [`DynamicContactNetwork::users`].
pub type UserIndex = u32;

/// One directed transmission opportunity from `host` to `neighbour`.
/// Times are whole minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpdtLink {
    pub day: u32,
    pub neighbour: UserIndex,
    pub host: UserIndex,
    pub t_s: i64,
    pub t_l: i64,
    pub t_s_n: i64,
    pub t_l_n: i64,
}

impl SpdtLink {
    pub fn interval(&self) -> LinkInterval {
        LinkInterval {
            host_arrival: self.t_s as f64,
            host_departure: self.t_l as f64,
            neighbour_arrival: self.t_s_n as f64,
            neighbour_departure: self.t_l_n as f64,
        }
    }

    /// True when the neighbour overlaps the host's presence.
    pub fn has_direct_component(&self) -> bool {
        self.t_s_n < self.t_l
    }

    pub fn shifted(&self, days: i64) -> SpdtLink {
        let dt = days * MINUTES_PER_DAY;
        SpdtLink {
            day: (self.day as i64 + days) as u32,
            t_s: self.t_s + dt,
            t_l: self.t_l + dt,
            t_s_n: self.t_s_n + dt,
            t_l_n: self.t_l_n + dt,
            ..*self
        }
    }
}

/// Link-extraction thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuilderConfig {
    /// Co-location radius, metres.
    pub radius: f64,
    /// How long after the host's departure a neighbour can still be linked,
    /// minutes.
    pub indirect_window: i64,
    /// Update gap that closes a visit, minutes.
    pub visit_gap: i64,
    pub horizon_days: u32,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        BuilderConfig {
            radius: 20.0,
            indirect_window: 200,
            visit_gap: 30,
            horizon_days: 32,
        }
    }
}

impl BuilderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::param("radius", "must be > 0"));
        }
        if self.indirect_window <= 0 {
            return Err(Error::param("indirect_window", "must be > 0"));
        }
        if self.visit_gap <= 0 {
            return Err(Error::param("visit_gap", "must be > 0"));
        }
        if self.horizon_days == 0 {
            return Err(Error::param("horizon_days", "must be > 0"));
        }
        Ok(())
    }
}

/// All links of one network variant, grouped by day and, within a day, by
/// receiving neighbour. Users without any link are not part of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicContactNetwork {
    users: Vec<UserId>,
    horizon: u32,
    days: Vec<Vec<SpdtLink>>,
}

impl DynamicContactNetwork {
    pub fn empty(horizon: u32) -> Self {
        DynamicContactNetwork {
            users: Vec::new(),
            horizon,
            days: vec![Vec::new(); horizon as usize],
        }
    }

    /// Builds a network from links whose indices refer to `names`. Links
    /// outside `[0, horizon)` are dropped, users left without links are
    /// removed, and the remaining users are re-indexed in name order.
    pub fn from_links(names: &[UserId], horizon: u32, links: impl IntoIterator<Item = SpdtLink>) -> Self {
        let links: Vec<SpdtLink> = links.into_iter().filter(|l| l.day < horizon).collect();

        let used: BTreeSet<&str> = links
            .iter()
            .flat_map(|l| [names[l.host as usize].as_str(), names[l.neighbour as usize].as_str()])
            .collect();
        let users: Vec<UserId> = used.into_iter().map(str::to_owned).collect();
        let index_of = |name: &str| users.binary_search_by(|u| u.as_str().cmp(name)).unwrap() as UserIndex;

        let mut days = vec![Vec::new(); horizon as usize];
        for l in links {
            let remapped = SpdtLink {
                host: index_of(&names[l.host as usize]),
                neighbour: index_of(&names[l.neighbour as usize]),
                ..l
            };
            days[l.day as usize].push(remapped);
        }
        for d in &mut days {
            d.sort_unstable();
            d.dedup();
        }
        DynamicContactNetwork { users, horizon, days }
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn user_name(&self, index: UserIndex) -> &str {
        &self.users[index as usize]
    }

    pub fn user_index(&self, name: &str) -> Option<UserIndex> {
        self.users
            .binary_search_by(|u| u.as_str().cmp(name))
            .ok()
            .map(|i| i as UserIndex)
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Links of one day, sorted by neighbour, then host, then time.
    pub fn links_on(&self, day: u32) -> &[SpdtLink] {
        self.days.get(day as usize).map_or(&[], Vec::as_slice)
    }

    /// The day's links grouped by receiving neighbour.
    pub fn received_on(&self, day: u32) -> impl Iterator<Item = (UserIndex, &[SpdtLink])> {
        self.links_on(day)
            .chunk_by(|a, b| a.neighbour == b.neighbour)
            .map(|run| (run[0].neighbour, run))
    }

    pub fn links(&self) -> impl Iterator<Item = &SpdtLink> {
        self.days.iter().flatten()
    }

    pub fn link_count(&self) -> usize {
        self.days.iter().map(Vec::len).sum()
    }

    pub fn daily_link_counts(&self) -> Vec<usize> {
        self.days.iter().map(Vec::len).collect()
    }

    /// Rebuilds from this network's user table with a new link set.
    pub(crate) fn with_links(&self, links: impl IntoIterator<Item = SpdtLink>) -> Self {
        Self::from_links(&self.users, self.horizon, links)
    }
}
