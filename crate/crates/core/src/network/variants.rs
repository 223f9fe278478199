//! Derived networks: the concurrent-presence projection, the densified
//! network and the density-controlled pair.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DynamicContactNetwork, SpdtLink, UserIndex};
use crate::rng::{name_hash, stream_rng, Stream};

/// Truncates every link at the host's departure and drops links whose
/// neighbour only arrives after the host left.
pub fn project_spst(net: &DynamicContactNetwork) -> DynamicContactNetwork {
    net.with_links(net.links().filter(|l| l.has_direct_component()).map(|l| SpdtLink {
        t_l_n: l.t_l_n.min(l.t_l),
        ..*l
    }))
}

/// Fills every day on which a host has no outgoing links with a time-shifted
/// copy of the links from one of the host's active days, drawn uniformly
/// per missing day. Links on active days are untouched.
pub fn densify(net: &DynamicContactNetwork, seed: u64) -> DynamicContactNetwork {
    let mut by_host: BTreeMap<UserIndex, BTreeMap<u32, Vec<SpdtLink>>> = BTreeMap::new();
    for l in net.links() {
        by_host.entry(l.host).or_default().entry(l.day).or_default().push(*l);
    }

    let mut out: Vec<SpdtLink> = Vec::with_capacity(net.link_count());
    for (host, days) in &by_host {
        let active: Vec<u32> = days.keys().copied().collect();
        let mut rng = stream_rng(seed, Stream::Densify, &[name_hash(net.user_name(*host))]);
        for day in 0..net.horizon() {
            match days.get(&day) {
                Some(links) => out.extend_from_slice(links),
                None => {
                    let source = active[rng.random_range(0..active.len())];
                    let offset = day as i64 - source as i64;
                    out.extend(days[&source].iter().map(|l| l.shifted(offset)));
                }
            }
        }
    }
    net.with_links(out)
}

/// How an indirect-only link's neighbour window is moved onto the host's
/// arrival in the density-controlled network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LdtShift {
    /// Keep the neighbour's presence duration.
    #[default]
    KeepDuration,
    /// Keep the neighbour's departure time.
    KeepDeparture,
}

/// Returns `(LDT, LST)`. In LDT every link whose neighbour arrives at or
/// after the host's departure gets its arrival moved to the host's arrival;
/// LST is the concurrent-presence projection of LDT, so both share users
/// and per-day link counts.
///
/// Links that cannot carry a direct component after the shift (zero-length
/// host visits, or zero-length windows) are dropped from both.
pub fn make_ldt_lst(
    ddt: &DynamicContactNetwork,
    indirect_window: i64,
    shift: LdtShift,
) -> (DynamicContactNetwork, DynamicContactNetwork) {
    let ldt_links = ddt.links().filter_map(|l| {
        let mut l = *l;
        if !l.has_direct_component() {
            let duration = l.t_l_n - l.t_s_n;
            l.t_s_n = l.t_s;
            if shift == LdtShift::KeepDuration {
                l.t_l_n = (l.t_s + duration).min(l.t_l + indirect_window);
            }
        }
        (l.has_direct_component() && l.t_l_n > l.t_s).then_some(l)
    });
    let ldt = ddt.with_links(ldt_links);
    let lst = project_spst(&ldt);
    (ldt, lst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::UserId;

    fn names() -> Vec<UserId> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    fn link(day: u32, host: u32, neighbour: u32, t: [i64; 4]) -> SpdtLink {
        let o = day as i64 * 1440;
        SpdtLink {
            day,
            host,
            neighbour,
            t_s: t[0] + o,
            t_l: t[1] + o,
            t_s_n: t[2] + o,
            t_l_n: t[3] + o,
        }
    }

    fn times(l: &SpdtLink) -> [i64; 4] {
        let o = l.day as i64 * 1440;
        [l.t_s - o, l.t_l - o, l.t_s_n - o, l.t_l_n - o]
    }

    #[test]
    fn projection_truncates_and_drops() {
        let net = DynamicContactNetwork::from_links(
            &names(),
            1,
            [link(0, 0, 1, [0, 30, 10, 100]), link(0, 0, 2, [0, 30, 100, 150])],
        );
        let spst = project_spst(&net);
        let got: Vec<_> = spst.links().map(times).collect();
        assert_eq!(got, vec![[0, 30, 10, 30]]);
        assert_eq!(spst.users(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn densify_fills_every_day_from_single_active_day() {
        let l = link(3, 0, 1, [600, 630, 640, 700]);
        let net = DynamicContactNetwork::from_links(&names(), 32, [l]);
        let ddt = densify(&net, 9);
        assert_eq!(ddt.daily_link_counts(), vec![1; 32]);
        for day in 0..32 {
            assert_eq!(times(&ddt.links_on(day)[0]), [600, 630, 640, 700]);
        }
        assert_eq!(ddt.links_on(3)[0], net.links_on(3)[0]);
    }

    #[test]
    fn densify_noop_when_host_always_active() {
        let links: Vec<_> = (0..4).map(|d| link(d, 0, 1, [0, 10, 5, 8])).collect();
        let net = DynamicContactNetwork::from_links(&names(), 4, links);
        assert_eq!(densify(&net, 1), net);
    }

    #[test]
    fn densify_is_seeded() {
        let net = DynamicContactNetwork::from_links(
            &names(),
            10,
            [link(1, 0, 1, [0, 10, 5, 8]), link(6, 0, 2, [0, 10, 5, 9])],
        );
        assert_eq!(densify(&net, 4), densify(&net, 4));
    }

    #[test]
    fn ldt_shifts_indirect_only_links() {
        let net = DynamicContactNetwork::from_links(
            &names(),
            1,
            [link(0, 0, 1, [0, 30, 100, 150]), link(0, 0, 2, [0, 30, 10, 100])],
        );
        let (ldt, lst) = make_ldt_lst(&net, 200, LdtShift::KeepDuration);
        let got: Vec<_> = ldt.links().map(times).collect();
        assert_eq!(got, vec![[0, 30, 0, 50], [0, 30, 10, 100]]);
        assert_eq!(ldt.users(), lst.users());
        assert_eq!(ldt.daily_link_counts(), lst.daily_link_counts());

        let (keep_dep, _) = make_ldt_lst(&net, 200, LdtShift::KeepDeparture);
        let got: Vec<_> = keep_dep.links().map(times).collect();
        assert_eq!(got[0], [0, 30, 0, 150]);
    }

    #[test]
    fn ldt_drops_links_that_cannot_be_direct() {
        let net = DynamicContactNetwork::from_links(
            &names(),
            1,
            [link(0, 0, 1, [5, 5, 50, 60]), link(0, 0, 2, [0, 30, 40, 40])],
        );
        let (ldt, lst) = make_ldt_lst(&net, 200, LdtShift::KeepDuration);
        assert_eq!(ldt.link_count(), 0);
        assert_eq!(lst.link_count(), 0);
    }
}
