//! Candidate hypergraph construction.
//!
//! Given the first-stage outcome `y`, the candidate hypergraph has one edge per
//! `s`-subset `S` of items whose columns OR to exactly `y`. The true defective
//! set is always among the edges.

use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::design::TestMatrix;
use crate::error::{Error, Result};
use crate::pooling::OutcomeVector;

pub const DEFAULT_EDGE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct DecoderOptions {
    /// Enumeration aborts with [`Error::EdgeCapExceeded`] past this many edges.
    pub edge_cap: usize,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        DecoderOptions {
            edge_cap: DEFAULT_EDGE_CAP,
        }
    }
}

/// `s`-uniform hypergraph on `[t]` of the defective sets consistent with `y`.
///
/// Edges are sorted ascending internally and listed in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateHypergraph {
    pub t: usize,
    pub s: usize,
    pub y: OutcomeVector,
    pub edges: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct HypergraphDump {
    t: usize,
    s: usize,
    y: String,
    edges: Vec<Vec<usize>>,
}

impl CandidateHypergraph {
    /// Builds a hypergraph from raw edges, sorting and deduplicating them.
    /// The outcome is not checked against the edges.
    pub fn from_edges(t: usize, s: usize, y: OutcomeVector, edges: Vec<Vec<usize>>) -> Result<Self> {
        let mut edges: Vec<Vec<usize>> = edges
            .into_iter()
            .map(|mut e| {
                e.sort_unstable();
                e
            })
            .collect();
        for e in &edges {
            if e.len() != s {
                return Err(Error::param(format!("edge {e:?} does not have {s} vertices")));
            }
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::param(format!("edge {e:?} repeats a vertex")));
            }
            if e.last().is_some_and(|&v| v >= t) {
                return Err(Error::param(format!("edge {e:?} leaves the vertex set [{t}]")));
            }
        }
        edges.sort();
        edges.dedup();
        Ok(CandidateHypergraph { t, s, y, edges })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// JSON dump with 1-based vertex indices.
    pub fn to_json(&self) -> String {
        let dump = HypergraphDump {
            t: self.t,
            s: self.s,
            y: self.y.to_string(),
            edges: self.edges.iter().map(|e| e.iter().map(|v| v + 1).collect()).collect(),
        };
        serde_json::to_string_pretty(&dump).expect("hypergraph dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: HypergraphDump = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let y = OutcomeVector::parse(&dump.y).ok_or_else(|| Error::param("outcome must be a 0/1 string"))?;
        let edges = dump
            .edges
            .into_iter()
            .map(|e| {
                e.into_iter()
                    .map(|v| {
                        v.checked_sub(1)
                            .ok_or_else(|| Error::param("vertex indices are 1-based"))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        CandidateHypergraph::from_edges(dump.t, dump.s, y, edges)
    }
}

fn check_lengths(x: &TestMatrix, y: &OutcomeVector) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::param(format!(
            "outcome has length {} but the matrix has {} rows",
            y.len(),
            x.rows()
        )));
    }
    Ok(())
}

/// Items whose column is covered by `y`; every edge lies inside this set.
pub fn compatible_columns(x: &TestMatrix, y: &OutcomeVector) -> Result<Vec<usize>> {
    check_lengths(x, y)?;
    let cols = x.columns();
    Ok((0..x.cols()).filter(|&j| cols[j].is_subset_of(y.bits())).collect())
}

pub fn candidate_edges(x: &TestMatrix, s: usize, y: &OutcomeVector) -> Result<CandidateHypergraph> {
    candidate_edges_with(x, s, y, DecoderOptions::default())
}

/// Enumerates every `s`-subset of items whose columns OR to exactly `y`.
///
/// Depth-first search over the compatible columns, carrying the running OR and
/// pruning a branch once the remaining columns can no longer cover `y`.
pub fn candidate_edges_with(
    x: &TestMatrix,
    s: usize,
    y: &OutcomeVector,
    opts: DecoderOptions,
) -> Result<CandidateHypergraph> {
    if s == 0 {
        return Err(Error::param("s must be at least 1"));
    }
    let compatible = compatible_columns(x, y)?;
    let columns: Vec<BitVec> = compatible.iter().map(|&j| x.column(j)).collect();

    // reach[i] = OR of columns[i..]
    let mut reach = vec![BitVec::zeros(x.rows()); columns.len() + 1];
    for i in (0..columns.len()).rev() {
        reach[i] = reach[i + 1].or(&columns[i]);
    }

    let mut search = Search {
        target: y.bits(),
        columns: &columns,
        reach: &reach,
        s,
        cap: opts.edge_cap,
        stack: Vec::with_capacity(s),
        edges: Vec::new(),
    };
    if columns.len() >= s {
        search.descend(0, &BitVec::zeros(x.rows()))?;
    }

    let edges = search
        .edges
        .into_iter()
        .map(|e| e.into_iter().map(|i| compatible[i]).collect())
        .collect();
    Ok(CandidateHypergraph {
        t: x.cols(),
        s,
        y: y.clone(),
        edges,
    })
}

struct Search<'a> {
    target: &'a BitVec,
    columns: &'a [BitVec],
    reach: &'a [BitVec],
    s: usize,
    cap: usize,
    stack: Vec<usize>,
    edges: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn descend(&mut self, start: usize, acc: &BitVec) -> Result<()> {
        if self.stack.len() == self.s {
            if acc == self.target {
                if self.edges.len() == self.cap {
                    return Err(Error::EdgeCapExceeded { cap: self.cap });
                }
                self.edges.push(self.stack.clone());
            }
            return Ok(());
        }
        let remaining = self.s - self.stack.len();
        for i in start..=self.columns.len() - remaining {
            // reach[] shrinks as i grows, so once coverage fails it fails for good.
            if &acc.or(&self.reach[i]) != self.target {
                break;
            }
            self.stack.push(i);
            self.descend(i + 1, &acc.or(&self.columns[i]))?;
            self.stack.pop();
        }
        Ok(())
    }
}

/// Union of all edges, ascending.
pub fn non_isolated_vertices(h: &CandidateHypergraph) -> Vec<usize> {
    let mut seen = vec![false; h.t];
    for &v in h.edges.iter().flatten() {
        seen[v] = true;
    }
    (0..h.t).filter(|&v| seen[v]).collect()
}
