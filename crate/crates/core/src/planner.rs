//! The two-stage search: pool with `X`, decode the candidate hypergraph, then
//! test its non-isolated vertices individually.

use serde::Serialize;

use crate::decoder::{candidate_edges_with, non_isolated_vertices, CandidateHypergraph, DecoderOptions};
use crate::design::{Mode, TestMatrix};
use crate::error::{Error, Result};
use crate::pooling::DefectiveOracle;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoStageResult {
    pub mode: Mode,
    pub t: usize,
    pub s: usize,
    /// Defectives identified by the second stage, ascending.
    pub found: Vec<usize>,
    pub stage1_tests: usize,
    pub stage2_tests: usize,
    pub candidate_edge_count: usize,
}

#[derive(Serialize)]
struct ResultJson {
    mode: Mode,
    t: usize,
    s: usize,
    #[serde(rename = "N")]
    n: usize,
    found: Vec<usize>,
    stage1_tests: usize,
    stage2_tests: usize,
    candidate_edges: usize,
}

impl TwoStageResult {
    pub fn total_tests(&self) -> usize {
        self.stage1_tests + self.stage2_tests
    }

    /// Result JSON with 1-based item indices.
    pub fn to_json(&self) -> String {
        let json = ResultJson {
            mode: self.mode,
            t: self.t,
            s: self.s,
            n: self.stage1_tests,
            found: self.found.iter().map(|v| v + 1).collect(),
            stage1_tests: self.stage1_tests,
            stage2_tests: self.stage2_tests,
            candidate_edges: self.candidate_edge_count,
        };
        serde_json::to_string(&json).expect("result serializes")
    }
}

/// Number of defectives partial recovery guarantees: `s/2 + 1`.
pub fn partial_target(s: usize) -> usize {
    s / 2 + 1
}

fn first_stage(
    x: &TestMatrix,
    s: usize,
    oracle: &DefectiveOracle,
    opts: DecoderOptions,
) -> Result<CandidateHypergraph> {
    if oracle.universe() != x.cols() {
        return Err(Error::param(format!(
            "oracle holds {} items but the matrix has {} columns",
            oracle.universe(),
            x.cols()
        )));
    }
    if oracle.defective_count() != s {
        return Err(Error::param(format!(
            "decoder expects {s} defectives but {} are hidden",
            oracle.defective_count()
        )));
    }
    let y = oracle.stage1(x)?;
    candidate_edges_with(x, s, &y, opts)
}

fn second_stage(oracle: &DefectiveOracle, vertices: &[usize]) -> Result<Vec<usize>> {
    let mut found = Vec::new();
    for &v in vertices {
        if oracle.individual_test(v)? {
            found.push(v);
        }
    }
    Ok(found)
}

pub fn run_two_stage(x: &TestMatrix, s: usize, oracle: &DefectiveOracle) -> Result<TwoStageResult> {
    run_two_stage_with(x, s, oracle, DecoderOptions::default())
}

/// Finds the whole defective set. Correct for every matrix: the true set is
/// always an edge, and an isolated vertex lies in no consistent set.
pub fn run_two_stage_with(
    x: &TestMatrix,
    s: usize,
    oracle: &DefectiveOracle,
    opts: DecoderOptions,
) -> Result<TwoStageResult> {
    let h = first_stage(x, s, oracle, opts)?;
    let tested = non_isolated_vertices(&h);
    let found = second_stage(oracle, &tested)?;
    Ok(TwoStageResult {
        mode: Mode::Full,
        t: x.cols(),
        s,
        found,
        stage1_tests: x.rows(),
        stage2_tests: tested.len(),
        candidate_edge_count: h.edge_count(),
    })
}

/// Greedy maximal subfamily of edges whose pairwise intersections have at
/// most `s/2` vertices, scanning edges in lexicographic order.
///
/// Every rejected edge shares at least `s/2 + 1` vertices with a kept one.
pub fn greedy_e1(h: &CandidateHypergraph, s: usize) -> Vec<Vec<usize>> {
    let limit = s / 2;
    let mut kept: Vec<&Vec<usize>> = Vec::new();
    let mut sorted: Vec<&Vec<usize>> = h.edges.iter().collect();
    sorted.sort();
    for e in sorted {
        if kept.iter().all(|f| intersection_size(e, f) <= limit) {
            kept.push(e);
        }
    }
    kept.into_iter().cloned().collect()
}

/// Size of the intersection of two ascending vertex lists.
pub fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub fn run_partial(x: &TestMatrix, s: usize, oracle: &DefectiveOracle) -> Result<TwoStageResult> {
    run_partial_with(x, s, oracle, DecoderOptions::default())
}

/// Finds at least `s/2 + 1` defectives by testing only the vertices of the
/// greedy subfamily. Untested vertices are left undetermined.
pub fn run_partial_with(
    x: &TestMatrix,
    s: usize,
    oracle: &DefectiveOracle,
    opts: DecoderOptions,
) -> Result<TwoStageResult> {
    let h = first_stage(x, s, oracle, opts)?;
    let e1 = greedy_e1(&h, s);
    let sub = CandidateHypergraph {
        t: h.t,
        s,
        y: h.y.clone(),
        edges: e1,
    };
    let tested = non_isolated_vertices(&sub);
    let found = second_stage(oracle, &tested)?;
    Ok(TwoStageResult {
        mode: Mode::Partial,
        t: x.cols(),
        s,
        found,
        stage1_tests: x.rows(),
        stage2_tests: tested.len(),
        candidate_edge_count: h.edge_count(),
    })
}

pub fn run(
    mode: Mode,
    x: &TestMatrix,
    s: usize,
    oracle: &DefectiveOracle,
    opts: DecoderOptions,
) -> Result<TwoStageResult> {
    match mode {
        Mode::Full => run_two_stage_with(x, s, oracle, opts),
        Mode::Partial => run_partial_with(x, s, oracle, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitVec;
    use crate::design::gen_matrix;
    use crate::pooling::OutcomeVector;
    use itertools::Itertools;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hypergraph(t: usize, s: usize, edges: Vec<Vec<usize>>) -> CandidateHypergraph {
        CandidateHypergraph::from_edges(t, s, OutcomeVector::new(BitVec::zeros(1)), edges).unwrap()
    }

    /// Pairwise-intersection checker for the greedy postconditions.
    fn check_e1(h: &CandidateHypergraph, e1: &[Vec<usize>], s: usize) {
        let limit = s / 2;
        for (i, a) in e1.iter().enumerate() {
            assert!(h.edges.contains(a));
            for b in &e1[i + 1..] {
                let common = a.iter().filter(|v| b.contains(v)).count();
                assert!(common <= limit, "{a:?} and {b:?} share {common}");
            }
        }
        for e in h.edges.iter().filter(|e| !e1.contains(e)) {
            let blocked = e1.iter().any(|f| e.iter().filter(|v| f.contains(v)).count() > limit);
            assert!(blocked, "{e:?} could have been added");
        }
    }

    #[test]
    fn identity_design_tests_only_defectives() {
        let x = TestMatrix::identity(10);
        let oracle = DefectiveOracle::new(10, [2, 5, 9]).unwrap();
        let r = run_two_stage(&x, 3, &oracle).unwrap();
        assert_eq!(r.found, vec![2, 5, 9]);
        assert_eq!(r.stage2_tests, 3);
        assert_eq!(r.candidate_edge_count, 1);
    }

    #[test]
    fn recovers_every_pair_exhaustively() {
        let x = gen_matrix(20, 24, 0.29289, 11).unwrap();
        let mut runs = 0;
        for pair in (0..24).combinations(2) {
            let oracle = DefectiveOracle::new(24, pair.clone()).unwrap();
            let r = run_two_stage(&x, 2, &oracle).unwrap();
            assert_eq!(r.found, pair);
            assert_eq!(oracle.total_tests() as usize, 20 + r.stage2_tests);
            runs += 1;
        }
        assert_eq!(runs, 276);
    }

    #[test]
    fn recovers_even_with_degenerate_matrices() {
        // Duplicate columns make stage 1 ambiguous; stage 2 resolves it.
        let col = BitVec::parse("101").unwrap();
        let other = BitVec::parse("011").unwrap();
        let x = TestMatrix::from_columns(&[col.clone(), col.clone(), other.clone(), col, other]).unwrap();
        for pair in (0..5).combinations(2) {
            let oracle = DefectiveOracle::new(5, pair.clone()).unwrap();
            assert_eq!(run_two_stage(&x, 2, &oracle).unwrap().found, pair);
        }
    }

    #[test]
    fn rejects_wrong_defective_count() {
        let x = TestMatrix::identity(4);
        let oracle = DefectiveOracle::new(4, [1]).unwrap();
        assert!(matches!(run_two_stage(&x, 2, &oracle), Err(Error::Parameter(_))));
    }

    #[test]
    fn greedy_keeps_everything_when_intersections_are_small() {
        let h = hypergraph(9, 3, vec![vec![0, 1, 2], vec![0, 3, 4], vec![1, 3, 5], vec![6, 7, 8]]);
        assert_eq!(greedy_e1(&h, 3), h.edges);
    }

    #[test]
    fn greedy_forced_exclusion() {
        let h = hypergraph(5, 3, vec![vec![0, 1, 2], vec![0, 1, 3]]);
        assert_eq!(greedy_e1(&h, 3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn greedy_postconditions_on_random_hypergraphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let t = rng.gen_range(4..12);
            let m = rng.gen_range(0..25);
            let edges = (0..m).map(|_| sample(&mut rng, t, 4).into_vec()).collect();
            let h = hypergraph(t, 4, edges);
            let e1 = greedy_e1(&h, 4);
            check_e1(&h, &e1, 4);
            let tested = non_isolated_vertices(&hypergraph(t, 4, e1));
            for e in &h.edges {
                assert!(e.iter().filter(|v| tested.contains(v)).count() >= 3);
            }
        }
    }

    #[test]
    fn partial_with_single_edge_finds_everything() {
        let x = TestMatrix::identity(8);
        let oracle = DefectiveOracle::new(8, [1, 4, 6, 7]).unwrap();
        let r = run_partial(&x, 4, &oracle).unwrap();
        assert_eq!(r.found, vec![1, 4, 6, 7]);
        assert_eq!(r.mode, Mode::Partial);
    }

    #[test]
    fn partial_guarantee_over_all_hidden_sets() {
        let x = gen_matrix(10, 30, 0.15, 3).unwrap();
        let mut ambiguous = 0;
        for hidden in (0..30).combinations(4) {
            let oracle = DefectiveOracle::new(30, hidden.clone()).unwrap();
            let r = run_partial(&x, 4, &oracle).unwrap();
            assert!(r.found.len() >= 3, "{hidden:?}: {:?}", r.found);
            assert!(r.found.iter().all(|v| hidden.contains(v)));
            assert_eq!(oracle.total_tests() as usize, r.total_tests());
            if r.candidate_edge_count >= 2 {
                ambiguous += 1;
            }
        }
        // N=10 is small enough that many outcomes are ambiguous.
        assert!(ambiguous > 1000, "only {ambiguous} ambiguous outcomes");
    }

    #[test]
    fn result_json_fields() {
        let x = TestMatrix::identity(3);
        let oracle = DefectiveOracle::new(3, [0, 2]).unwrap();
        let r = run_two_stage(&x, 2, &oracle).unwrap();
        assert_eq!(
            r.to_json(),
            r#"{"mode":"full","t":3,"s":2,"N":3,"found":[1,3],"stage1_tests":3,"stage2_tests":2,"candidate_edges":1}"#
        );
    }
}
