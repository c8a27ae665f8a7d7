//! Structural certificates for first-stage codes.
//!
//! An `(s, L, k)`-bad configuration is a sunflower of `L` edges of a candidate
//! hypergraph whose pairwise intersections all equal one core of size `k`. A
//! code is `(s, L, K)`-good when no candidate hypergraph contains such a
//! configuration for any `k` in `K`; candidate hypergraphs of good codes stay
//! bounded in size independently of `t`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitVec;
use crate::decoder::CandidateHypergraph;
use crate::design::TestMatrix;
use crate::error::{Error, Result};
use crate::pooling::OutcomeVector;
use itertools::Itertools;

use crate::subsets::binomial;

/// Default limit on the number of `s`-subsets [`is_good_code`] will enumerate.
pub const DEFAULT_SUBSET_CAP: u128 = 20_000_000;

/// `L` edges whose pairwise intersections all equal `core`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadConfiguration {
    pub k: usize,
    pub core: Vec<usize>,
    pub edges: Vec<Vec<usize>>,
}

impl BadConfiguration {
    /// Re-checks the configuration by scanning every pair of edges.
    pub fn verify(&self) -> bool {
        if self.core.len() != self.k {
            return false;
        }
        for (i, a) in self.edges.iter().enumerate() {
            for b in &self.edges[i + 1..] {
                let common: Vec<usize> = a.iter().copied().filter(|v| b.contains(v)).collect();
                if common != self.core {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub outcome: OutcomeVector,
    pub configuration: BadConfiguration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodCodeReport {
    pub is_good: bool,
    pub s: usize,
    pub l: usize,
    pub k_set: Vec<usize>,
    pub witness: Option<Witness>,
    /// Attainable outcomes examined, in outcome-string order, before stopping.
    pub outcomes_checked: usize,
}

#[derive(Serialize)]
struct WitnessJson {
    outcome: String,
    k: usize,
    core: Vec<usize>,
    edges: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct ReportJson {
    is_good: bool,
    s: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "K")]
    k_set: Vec<usize>,
    witness: Option<WitnessJson>,
    outcomes_checked: usize,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|x| x + 1).collect()
}

impl GoodCodeReport {
    /// JSON report with 1-based item indices.
    pub fn to_json(&self) -> String {
        let report = ReportJson {
            is_good: self.is_good,
            s: self.s,
            l: self.l,
            k_set: self.k_set.clone(),
            witness: self.witness.as_ref().map(|w| WitnessJson {
                outcome: w.outcome.to_string(),
                k: w.configuration.k,
                core: one_based(&w.configuration.core),
                edges: w.configuration.edges.iter().map(|e| one_based(e)).collect(),
            }),
            outcomes_checked: self.outcomes_checked,
        };
        serde_json::to_string_pretty(&report).expect("report serializes")
    }
}

/// Largest vertex degree and the smallest vertex attaining it.
pub fn max_degree(h: &CandidateHypergraph) -> (usize, Option<usize>) {
    let mut degree = vec![0usize; h.t];
    for &v in h.edges.iter().flatten() {
        degree[v] += 1;
    }
    let mut best = (0, None);
    for (v, &d) in degree.iter().enumerate() {
        if d > best.0 {
            best = (d, Some(v));
        }
    }
    best
}

fn require_graph(g: &CandidateHypergraph) -> Result<()> {
    if g.s != 2 {
        return Err(Error::param(format!("expected a graph (s = 2), got s = {}", g.s)));
    }
    Ok(())
}

/// Exact maximum matching size of a graph.
///
/// Branch and bound: branch on a minimum-degree vertex (matched to each of its
/// neighbours, or left unmatched), bounded by `min(edges, active vertices / 2)`
/// and seeded with a greedy matching.
pub fn max_matching_size(g: &CandidateHypergraph) -> Result<usize> {
    require_graph(g)?;
    let mut index = HashMap::new();
    for &v in g.edges.iter().flatten() {
        let next = index.len();
        index.entry(v).or_insert(next);
    }
    let n = index.len();
    let mut adj = vec![Vec::new(); n];
    for e in &g.edges {
        let (a, b) = (index[&e[0]], index[&e[1]]);
        adj[a].push(b);
        adj[b].push(a);
    }

    let mut covered = vec![false; n];
    let mut greedy = 0;
    for e in &g.edges {
        let (a, b) = (index[&e[0]], index[&e[1]]);
        if !covered[a] && !covered[b] {
            covered[a] = true;
            covered[b] = true;
            greedy += 1;
        }
    }

    let mut m = Matcher {
        adj,
        alive: vec![true; n],
        best: greedy,
    };
    m.branch(0);
    Ok(m.best)
}

struct Matcher {
    adj: Vec<Vec<usize>>,
    alive: Vec<bool>,
    best: usize,
}

impl Matcher {
    fn degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&u| self.alive[u]).count()
    }

    fn branch(&mut self, current: usize) {
        let mut active = 0;
        let mut edge_ends = 0;
        let mut pick: Option<(usize, usize)> = None;
        for v in 0..self.adj.len() {
            if !self.alive[v] {
                continue;
            }
            let d = self.degree(v);
            if d == 0 {
                continue;
            }
            active += 1;
            edge_ends += d;
            if pick.is_none_or(|(_, pd)| d < pd) {
                pick = Some((v, d));
            }
        }
        let Some((v, d)) = pick else {
            self.best = self.best.max(current);
            return;
        };
        let bound = (edge_ends / 2).min(active / 2);
        if current + bound <= self.best {
            return;
        }

        self.alive[v] = false;
        let neighbours: Vec<usize> = self.adj[v].iter().copied().filter(|&u| self.alive[u]).collect();
        for u in neighbours {
            self.alive[u] = false;
            self.branch(current + 1);
            self.alive[u] = true;
        }
        // A degree-1 vertex is always matched in some maximum matching.
        if d > 1 {
            self.branch(current);
        }
        self.alive[v] = true;
    }
}

/// Searches for `L` edges pairwise intersecting in exactly one `k`-set.
///
/// Every `k`-subset of every edge is a candidate core; a core contained in at
/// least `L` edges is accepted if `L` of those edges have pairwise disjoint
/// petals (edge minus core). Cores are tried in lexicographic order, so the
/// witness is deterministic.
pub fn find_bad_configuration(h: &CandidateHypergraph, l: usize, k: usize) -> Result<Option<BadConfiguration>> {
    if l < 2 {
        return Err(Error::param(format!("L must be at least 2, got {l}")));
    }
    if k >= h.s {
        return Err(Error::param(format!("k must be below s = {}, got {k}", h.s)));
    }
    if h.edges.len() < l {
        return Ok(None);
    }
    let mut cores: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (idx, e) in h.edges.iter().enumerate() {
        for core in e.iter().copied().combinations(k) {
            cores.entry(core).or_default().push(idx);
        }
    }
    for (core, members) in cores {
        if members.len() < l {
            continue;
        }
        let petals: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| h.edges[i].iter().copied().filter(|v| !core.contains(v)).collect())
            .collect();
        let mut chosen = Vec::with_capacity(l);
        let mut used = vec![false; h.t];
        if pack_disjoint(&petals, l, 0, &mut chosen, &mut used) {
            let edges = chosen.iter().map(|&p| h.edges[members[p]].clone()).collect();
            return Ok(Some(BadConfiguration { k, core, edges }));
        }
    }
    Ok(None)
}

/// Backtracking search for `want` pairwise disjoint sets among `petals[start..]`.
fn pack_disjoint(petals: &[Vec<usize>], want: usize, start: usize, chosen: &mut Vec<usize>, used: &mut [bool]) -> bool {
    if chosen.len() == want {
        return true;
    }
    for i in start..petals.len() {
        if chosen.len() + (petals.len() - i) < want {
            return false;
        }
        if petals[i].iter().any(|&v| used[v]) {
            continue;
        }
        for &v in &petals[i] {
            used[v] = true;
        }
        chosen.push(i);
        if pack_disjoint(petals, want, i + 1, chosen, used) {
            return true;
        }
        chosen.pop();
        for &v in &petals[i] {
            used[v] = false;
        }
    }
    false
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Maximum number of `s`-subsets of columns to enumerate.
    pub subset_cap: u128,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            subset_cap: DEFAULT_SUBSET_CAP,
        }
    }
}

/// Every attainable candidate hypergraph of `x`, keyed by outcome and listed in
/// outcome-string order.
///
/// Unattainable outcomes have empty hypergraphs and cannot hold a bad
/// configuration, so this covers every outcome vector.
pub fn attainable_hypergraphs(x: &TestMatrix, s: usize, opts: CertifyOptions) -> Result<Vec<CandidateHypergraph>> {
    if s == 0 || s > x.cols() {
        return Err(Error::param(format!("s must lie in 1..={}, got {s}", x.cols())));
    }
    let count = binomial(x.cols() as u64, s as u64);
    if count > opts.subset_cap {
        return Err(Error::Capacity(format!(
            "C({}, {s}) = {count} subsets exceeds the cap of {}",
            x.cols(),
            opts.subset_cap
        )));
    }
    let columns = x.columns();
    let mut groups: HashMap<BitVec, Vec<Vec<usize>>> = HashMap::new();
    for set in (0..x.cols()).combinations(s) {
        let mut y = BitVec::zeros(x.rows());
        for &j in &set {
            y.or_assign(&columns[j]);
        }
        groups.entry(y).or_default().push(set);
    }
    let mut graphs: Vec<CandidateHypergraph> = groups
        .into_iter()
        .map(|(y, edges)| CandidateHypergraph {
            t: x.cols(),
            s,
            y: OutcomeVector::new(y),
            edges,
        })
        .collect();
    graphs.sort_by_cached_key(|h| h.y.to_string());
    Ok(graphs)
}

pub fn is_good_code(x: &TestMatrix, s: usize, l: usize, k_set: &[usize]) -> Result<GoodCodeReport> {
    is_good_code_with(x, s, l, k_set, CertifyOptions::default())
}

/// Checks whether `x` is an `(s, L, K)`-good code.
pub fn is_good_code_with(
    x: &TestMatrix,
    s: usize,
    l: usize,
    k_set: &[usize],
    opts: CertifyOptions,
) -> Result<GoodCodeReport> {
    if l < 2 {
        return Err(Error::param(format!("L must be at least 2, got {l}")));
    }
    let mut ks = k_set.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if let Some(&k) = ks.iter().find(|&&k| k >= s) {
        return Err(Error::param(format!("k = {k} is not below s = {s}")));
    }
    let graphs = attainable_hypergraphs(x, s, opts)?;
    let hit = graphs.par_iter().enumerate().find_map_first(|(pos, h)| {
        ks.iter().find_map(|&k| {
            find_bad_configuration(h, l, k)
                .expect("parameters validated above")
                .map(|c| {
                    (
                        pos,
                        Witness {
                            outcome: h.y.clone(),
                            configuration: c,
                        },
                    )
                })
        })
    });
    let (outcomes_checked, witness) = match hit {
        Some((pos, w)) => (pos + 1, Some(w)),
        None => (graphs.len(), None),
    };
    Ok(GoodCodeReport {
        is_good: witness.is_none(),
        s,
        l,
        k_set: ks,
        witness,
        outcomes_checked,
    })
}

/// Checks the edge bound on one graph: if both the maximum degree and the
/// maximum matching are below `L`, the graph has fewer than `2 L^2` edges.
///
/// Returns `false` only on a counterexample, which must never happen.
pub fn edge_bound_check(g: &CandidateHypergraph, l: usize) -> Result<bool> {
    require_graph(g)?;
    let (degree, _) = max_degree(g);
    if degree >= l {
        return Ok(true);
    }
    if max_matching_size(g)? >= l {
        return Ok(true);
    }
    Ok(g.edges.len() < 2 * l * l)
}
