//! Reproduction numbers and network structure metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::epidemic::{DailyStats, RunResult};
use crate::exposure::{link_exposure, EnvironmentParams};
use crate::network::{DynamicContactNetwork, SpdtLink};
use crate::trace::UserId;

/// Minimum per-link dose for an edge in the aggregated graphs.
pub const EDGE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionSeries {
    /// `I_n / I_r` per day; `None` where nobody recovered.
    pub daily: Vec<Option<f64>>,
    /// Mean of the defined daily values; `None` if there are none.
    pub effective: Option<f64>,
}

impl ReproductionSeries {
    /// The first defined daily value.
    pub fn initial(&self) -> Option<f64> {
        self.daily.iter().flatten().next().copied()
    }
}

pub fn reproduction_series(stats: &[DailyStats]) -> ReproductionSeries {
    let daily: Vec<Option<f64>> = stats
        .iter()
        .map(|d| (d.new_recoveries > 0).then(|| d.new_infections as f64 / d.new_recoveries as f64))
        .collect();
    let defined: Vec<f64> = daily.iter().flatten().copied().collect();
    let effective = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    ReproductionSeries { daily, effective }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub outbreak_size: usize,
    pub effective_r: Option<f64>,
    pub initial_r: Option<f64>,
}

pub fn summarize(run: &RunResult) -> RunSummary {
    let series = reproduction_series(&run.daily);
    RunSummary {
        run: run.run,
        outbreak_size: run.outbreak_size(),
        effective_r: series.effective,
        initial_r: series.initial(),
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// `run,outbreak_size,R_e`
pub fn write_summary_csv<W: Write>(mut out: W, runs: &[RunSummary]) -> std::io::Result<()> {
    writeln!(out, "run,outbreak_size,R_e")?;
    for s in runs {
        writeln!(out, "{},{},{}", s.run, s.outbreak_size, fmt_opt(s.effective_r))?;
    }
    Ok(())
}

/// `run,R_e,outbreak_size`
pub fn write_reproduction_csv<W: Write>(mut out: W, runs: &[RunSummary]) -> std::io::Result<()> {
    writeln!(out, "run,R_e,outbreak_size")?;
    for s in runs {
        writeln!(out, "{},{},{}", s.run, fmt_opt(s.effective_r), s.outbreak_size)?;
    }
    Ok(())
}

/// Undirected, unweighted graph over a fixed node universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticGraph {
    nodes: Vec<UserId>,
    adjacency: Vec<Vec<u32>>,
}

impl StaticGraph {
    /// `nodes` must be sorted and unique; edges refer to node positions.
    pub fn new(nodes: Vec<UserId>, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (a, b) in edges {
            if a != b {
                adjacency[a as usize].push(b);
                adjacency[b as usize].push(a);
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        StaticGraph { nodes, adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[UserId] {
        &self.nodes
    }

    pub fn neighbours(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as name pairs, smaller name first.
    pub fn edge_set(&self) -> BTreeSet<(&str, &str)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, adj)| {
                adj.iter()
                    .filter(move |&&b| (a as u32) < b)
                    .map(move |&b| (self.nodes[a].as_str(), self.nodes[b as usize].as_str()))
            })
            .collect()
    }

    /// Nodes with at least one edge.
    pub fn connected_nodes(&self) -> BTreeSet<&str> {
        (0..self.nodes.len())
            .filter(|&v| !self.adjacency[v].is_empty())
            .map(|v| self.nodes[v].as_str())
            .collect()
    }

    /// Triangles through `v`.
    pub fn triangles_at(&self, v: u32) -> usize {
        let adj = self.neighbours(v);
        let mut t = 0;
        for (i, &a) in adj.iter().enumerate() {
            let na = self.neighbours(a);
            t += adj[i + 1..].iter().filter(|b| na.binary_search(b).is_ok()).count();
        }
        t
    }
}

/// Local clustering from a triangle count and a degree.
pub fn local_clustering(triangles: usize, degree: usize) -> f64 {
    if degree < 2 {
        0.0
    } else {
        2.0 * triangles as f64 / (degree * (degree - 1)) as f64
    }
}

fn qualifying_edges<'a>(
    links: impl Iterator<Item = &'a SpdtLink> + 'a,
    env: EnvironmentParams,
    threshold: f64,
) -> impl Iterator<Item = (u32, u32)> + 'a {
    links
        .filter(move |l| link_exposure(&env, &l.interval()) >= threshold)
        .map(|l| (l.host, l.neighbour))
}

/// Environment with the removal rate fixed at `1 / removal_median`.
fn evaluation_env(env: &EnvironmentParams, removal_median: f64) -> EnvironmentParams {
    EnvironmentParams {
        removal_rate: 1.0 / removal_median,
        ..*env
    }
}

/// Remaps network user indices into `universe` (sorted). Users missing from
/// the universe are dropped together with their edges.
fn into_universe(
    net: &DynamicContactNetwork,
    universe: &[UserId],
    edges: impl Iterator<Item = (u32, u32)>,
) -> StaticGraph {
    let map: Vec<Option<u32>> = net
        .users()
        .iter()
        .map(|u| universe.binary_search(u).ok().map(|i| i as u32))
        .collect();
    let edges: Vec<(u32, u32)> = edges
        .filter_map(|(a, b)| Some((map[a as usize]?, map[b as usize]?)))
        .collect();
    StaticGraph::new(universe.to_vec(), edges)
}

/// Aggregates the whole horizon: an edge joins two users if any link
/// between them, evaluated at removal rate `1 / removal_median`, delivers at
/// least `threshold` PFU. Nodes are the network's users.
pub fn static_graph(
    net: &DynamicContactNetwork,
    removal_median: f64,
    env: &EnvironmentParams,
    threshold: f64,
) -> StaticGraph {
    static_graph_over(net, net.users(), removal_median, env, threshold)
}

/// [`static_graph`] over an explicit node universe.
pub fn static_graph_over(
    net: &DynamicContactNetwork,
    universe: &[UserId],
    removal_median: f64,
    env: &EnvironmentParams,
    threshold: f64,
) -> StaticGraph {
    let env = evaluation_env(env, removal_median);
    into_universe(net, universe, qualifying_edges(net.links(), env, threshold))
}

/// The same edge rule restricted to one day's links.
pub fn daily_graph(
    net: &DynamicContactNetwork,
    day: u32,
    universe: &[UserId],
    removal_median: f64,
    env: &EnvironmentParams,
    threshold: f64,
) -> StaticGraph {
    let env = evaluation_env(env, removal_median);
    into_universe(net, universe, qualifying_edges(net.links_on(day).iter(), env, threshold))
}

/// Degree → number of nodes.
pub fn degree_distribution(g: &StaticGraph) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for v in 0..g.node_count() as u32 {
        *hist.entry(g.degree(v)).or_insert(0) += 1;
    }
    hist
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringDistribution {
    pub coefficients: Vec<f64>,
    pub mean: f64,
}

/// Local clustering coefficient of every node and their mean (0 for an
/// empty graph).
pub fn clustering_distribution(g: &StaticGraph) -> ClusteringDistribution {
    let coefficients: Vec<f64> = (0..g.node_count() as u32)
        .map(|v| local_clustering(g.triangles_at(v), g.degree(v)))
        .collect();
    let mean = mean(&coefficients);
    ClusteringDistribution { coefficients, mean }
}

pub fn mean_degree(g: &StaticGraph) -> f64 {
    if g.node_count() == 0 {
        0.0
    } else {
        2.0 * g.edge_count() as f64 / g.node_count() as f64
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyNetworkMetrics {
    pub day: u32,
    pub removal_median: f64,
    pub mean_degree: f64,
    pub mean_clustering: f64,
}

/// Users with at least one link on `day`.
pub fn day_users(net: &DynamicContactNetwork, day: u32) -> Vec<UserId> {
    let set: BTreeSet<&str> = net
        .links_on(day)
        .iter()
        .flat_map(|l| [net.user_name(l.host), net.user_name(l.neighbour)])
        .collect();
    set.into_iter().map(str::to_owned).collect()
}

/// Per-day mean degree and clustering of the day-aggregated graph for every
/// removal median. Means run over the users active that day in `reference`
/// (pass `net` itself for self-referenced metrics, or the SPDT network when
/// comparing a projection against it).
pub fn daily_network_metrics(
    net: &DynamicContactNetwork,
    reference: &DynamicContactNetwork,
    removal_medians: &[f64],
    env: &EnvironmentParams,
    threshold: f64,
) -> Vec<DailyNetworkMetrics> {
    let mut out = Vec::new();
    for day in 0..net.horizon().min(reference.horizon()) {
        let universe = day_users(reference, day);
        for &rt in removal_medians {
            let g = daily_graph(net, day, &universe, rt, env, threshold);
            out.push(DailyNetworkMetrics {
                day,
                removal_median: rt,
                mean_degree: mean_degree(&g),
                mean_clustering: clustering_distribution(&g).mean,
            });
        }
    }
    out
}

/// `day,mean_degree,mean_clustering,r_t,variant`
pub fn write_daily_metrics_csv<W: Write>(
    mut out: W,
    rows: &[(String, DailyNetworkMetrics)],
) -> std::io::Result<()> {
    writeln!(out, "day,mean_degree,mean_clustering,r_t,variant")?;
    for (variant, m) in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            m.day, m.mean_degree, m.mean_clustering, m.removal_median, variant
        )?;
    }
    Ok(())
}

/// `value,count` rows.
pub fn write_histogram_csv<W: Write, K: std::fmt::Display>(
    mut out: W,
    hist: impl IntoIterator<Item = (K, usize)>,
) -> std::io::Result<()> {
    writeln!(out, "value,count")?;
    for (k, c) in hist {
        writeln!(out, "{k},{c}")?;
    }
    Ok(())
}

/// Clustering coefficients binned to two decimals.
pub fn clustering_histogram(dist: &ClusteringDistribution) -> BTreeMap<String, usize> {
    let mut bins: BTreeMap<u32, usize> = BTreeMap::new();
    for c in &dist.coefficients {
        *bins.entry((c * 100.0).round() as u32).or_insert(0) += 1;
    }
    bins.into_iter()
        .map(|(k, n)| (format!("{:.2}", k as f64 / 100.0), n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(u32, u32)]) -> StaticGraph {
        let nodes = (0..n).map(|i| format!("{i:03}")).collect();
        StaticGraph::new(nodes, edges.iter().copied())
    }

    fn stats(v: &[(usize, usize)]) -> Vec<DailyStats> {
        v.iter()
            .enumerate()
            .map(|(d, &(n, r))| DailyStats {
                day: d as u32,
                new_infections: n,
                new_recoveries: r,
                prevalence: 0,
            })
            .collect()
    }

    #[test]
    fn reproduction_ratio() {
        let s = reproduction_series(&stats(&[(10, 5)]));
        assert_eq!(s.daily, vec![Some(2.0)]);
        assert_eq!(s.effective, Some(2.0));
    }

    #[test]
    fn undefined_days_excluded() {
        let s = reproduction_series(&stats(&[(4, 0), (3, 1), (1, 1)]));
        assert_eq!(s.daily, vec![None, Some(3.0), Some(1.0)]);
        assert_eq!(s.effective, Some(2.0));
        assert_eq!(s.initial(), Some(3.0));
    }

    #[test]
    fn all_undefined_is_none_not_zero() {
        let s = reproduction_series(&stats(&[(4, 0), (0, 0)]));
        assert_eq!(s.effective, None);
        let mut buf = Vec::new();
        let run = RunResult { run: 0, daily: stats(&[(4, 0)]) };
        write_summary_csv(&mut buf, &[summarize(&run)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "run,outbreak_size,R_e\n0,4,NA\n");
    }

    #[test]
    fn constant_balance_gives_one() {
        let s = reproduction_series(&stats(&[(3, 3); 6]));
        assert_eq!(s.effective, Some(1.0));
    }

    #[test]
    fn triangle_degrees() {
        let g = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(degree_distribution(&g), BTreeMap::from([(2, 3)]));
        assert!(clustering_distribution(&g).coefficients.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn empty_graph() {
        let g = graph(0, &[]);
        assert!(degree_distribution(&g).is_empty());
        assert_eq!(clustering_distribution(&g).mean, 0.0);
        assert_eq!(mean_degree(&g), 0.0);
    }

    #[test]
    fn star_graph() {
        let n = 6;
        let edges: Vec<_> = (1..n as u32).map(|i| (0, i)).collect();
        let g = graph(n, &edges);
        assert_eq!(degree_distribution(&g), BTreeMap::from([(1, 5), (5, 1)]));
        let c = clustering_distribution(&g);
        assert!(c.coefficients.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn complete_k4() {
        let g = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(clustering_distribution(&g).mean, 1.0);
    }

    #[test]
    fn four_cycle_with_chord() {
        // 0-1-2-3-0 plus chord 0-2: triangles {0,1,2} and {0,2,3}.
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let c = clustering_distribution(&g).coefficients;
        assert_eq!(c, vec![2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn duplicate_and_self_edges_ignored() {
        let g = graph(2, &[(0, 1), (1, 0), (0, 0)]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn histogram_csv() {
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, BTreeMap::from([(1usize, 5usize), (5, 1)])).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "value,count\n1,5\n5,1\n");
        let dist = ClusteringDistribution {
            coefficients: vec![0.0, 1.0, 2.0 / 3.0, 2.0 / 3.0],
            mean: 0.0,
        };
        let h = clustering_histogram(&dist);
        assert_eq!(h.get("0.67"), Some(&2));
    }
}
