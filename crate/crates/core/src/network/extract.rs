use std::collections::BTreeMap;

use rayon::prelude::*;

use super::grid::{GridPoint, SpatialGrid};
use super::{BuilderConfig, DynamicContactNetwork, SpdtLink, UserIndex, MINUTES_PER_DAY};
use crate::error::Result;
use crate::trace::{segment_visits, LocationUpdate, SegmentRules, UserId, Visit};

/// Segments a user-sorted trace into visits and extracts its SPDT network.
pub fn build_network(updates: &[LocationUpdate], cfg: &BuilderConfig) -> Result<DynamicContactNetwork> {
    cfg.validate()?;
    let rules = SegmentRules {
        radius: cfg.radius,
        max_gap: cfg.visit_gap,
    };
    let visits = segment_visits(updates, rules);
    extract_spdt_links(updates, &visits, cfg)
}

/// For every host visit and every other user with updates within `radius`
/// of the visit anchor during `[t_start, t_end + indirect_window]`, emits
/// one link spanning that user's first and last qualifying updates.
///
/// Links whose neighbour window is empty (ends at or before the host's
/// arrival) or starts at the end of the indirect window are not emitted.
pub fn extract_spdt_links(
    updates: &[LocationUpdate],
    visits: &[Visit],
    cfg: &BuilderConfig,
) -> Result<DynamicContactNetwork> {
    cfg.validate()?;
    let mut names: Vec<UserId> = updates
        .iter()
        .map(|u| u.user.clone())
        .chain(visits.iter().map(|v| v.user.clone()))
        .collect();
    names.sort_unstable();
    names.dedup();
    let index_of = |name: &str| names.binary_search_by(|u| u.as_str().cmp(name)).unwrap() as UserIndex;

    let grid = SpatialGrid::new(
        cfg.radius,
        updates.iter().map(|u| GridPoint {
            t: u.t,
            owner: index_of(&u.user),
            x: u.x,
            y: u.y,
        }),
    );

    let delta = cfg.indirect_window;
    let mut links: Vec<SpdtLink> = visits
        .par_iter()
        .flat_map_iter(|visit| {
            let host = index_of(&visit.user);
            let cutoff = visit.t_end + delta;
            let mut seen: BTreeMap<UserIndex, (i64, i64)> = BTreeMap::new();
            grid.for_each_within(visit.anchor.0, visit.anchor.1, cfg.radius, visit.t_start, cutoff, |p| {
                if p.owner == host {
                    return;
                }
                seen.entry(p.owner)
                    .and_modify(|(first, last)| {
                        *first = (*first).min(p.t);
                        *last = (*last).max(p.t);
                    })
                    .or_insert((p.t, p.t));
            });
            let day = visit.t_start.div_euclid(MINUTES_PER_DAY);
            seen.into_iter().filter_map(move |(neighbour, (first, last))| {
                let t_l_n = last.min(cutoff);
                if day < 0 || first >= cutoff || t_l_n <= visit.t_start {
                    return None;
                }
                Some(SpdtLink {
                    day: day as u32,
                    neighbour,
                    host,
                    t_s: visit.t_start,
                    t_l: visit.t_end,
                    t_s_n: first,
                    t_l_n,
                })
            })
        })
        .collect();
    links.par_sort_unstable();

    Ok(DynamicContactNetwork::from_links(&names, cfg.horizon_days, links))
}
