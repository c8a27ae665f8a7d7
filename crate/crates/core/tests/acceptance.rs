//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use gtlab::certify::{edge_bound_check, max_degree, max_matching_size};
use gtlab::decoder::candidate_edges;
use gtlab::design::{gen_matrix, Mode};
use gtlab::experiment::{run_experiment, ExperimentConfig};
use gtlab::pooling::{outcome_vector, OutcomeVector};
use gtlab::rates::{
    big_a, full_bound, pair_exponent_sup, partial_bound, partial_closed_form, partial_weight, qmin_check, RateGrid,
    REFERENCE_NEW, REFERENCE_OLD, REFERENCE_S,
};
use gtlab::subsets::ln_binomial;
use gtlab::{BitVec, CandidateHypergraph};
use itertools::Itertools;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W_PAIR: f64 = 1.0 - std::f64::consts::SQRT_2 / 2.0;

struct Gate {
    passed: usize,
    failed: Vec<String>,
}

impl Gate {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(name.to_string());
        }
    }
}

fn reference_values(gate: &mut Gate, grid: &RateGrid) -> Vec<(usize, f64)> {
    let started = Instant::now();
    let computed: Vec<(usize, f64)> = REFERENCE_S
        .iter()
        .map(|&s| (s, full_bound(s, grid).expect("bound").value))
        .collect();
    let elapsed = started.elapsed();
    let worst = computed
        .iter()
        .zip(REFERENCE_NEW)
        .map(|(&(_, v), t)| (v - t).abs())
        .fold(0.0, f64::max);
    let values: Vec<String> = computed.iter().map(|(s, v)| format!("s={s}:{v:.5}")).collect();
    gate.check(
        "table-reproduction",
        worst < 5e-4 && elapsed < Duration::from_secs(300),
        format!("{} max|diff|={worst:.2e} time={elapsed:.2?}", values.join(" ")),
    );
    computed
}

fn coincidence(gate: &mut Gate, computed: &[(usize, f64)]) {
    // New bound at s+1 against the old bound at s, for s = 3, 4, 5.
    let diffs: Vec<f64> = (0..3).map(|i| (computed[i + 1].1 - REFERENCE_OLD[i]).abs()).collect();
    let worst = diffs.iter().copied().fold(0.0, f64::max);
    let shown: Vec<String> = diffs.iter().map(|d| format!("{d:.2e}")).collect();
    gate.check("coincidence", worst < 5e-4, format!("diffs=[{}]", shown.join(", ")));
}

fn pair_cross_check(gate: &mut Gate, grid: &RateGrid) {
    let r = full_bound(2, grid).expect("bound");
    let ok = (r.value - 0.5).abs() < 1e-3 && (r.w_star - W_PAIR).abs() < 1e-3;
    gate.check("pair-bound", ok, format!("value={:.9} w*={:.6}", r.value, r.w_star));
}

fn pair_exponent(gate: &mut Gate, grid: &RateGrid) {
    let (q, v) = pair_exponent_sup(W_PAIR, grid).expect("exponent");
    gate.check(
        "pair-exponent",
        (v + 1.0).abs() < 1e-6,
        format!("sup={v:.10} at q={q:.6}"),
    );
}

fn partial_identity(gate: &mut Gate, grid: &RateGrid) {
    let worst_identity = (2..=12)
        .map(|s| (partial_closed_form(s) - 1.0 / s as f64).abs())
        .fold(0.0, f64::max);
    let mut worst_gap = f64::INFINITY;
    let mut details = Vec::new();
    for s in 2..=12 {
        let r = partial_bound(s, grid).expect("bound");
        let gap = r.value - 1.0 / s as f64;
        worst_gap = worst_gap.min(gap);
        details.push(format!("s={s}:{:.5}", r.value));
    }
    gate.check(
        "partial-identity",
        worst_identity < 1e-10 && worst_gap >= -1e-4,
        format!(
            "identity err={worst_identity:.1e} min(bound-1/s)={worst_gap:.2e} [{}]",
            details.join(" ")
        ),
    );
}

fn qmin(gate: &mut Gate, grid: &RateGrid) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_q, mut worst_y) = (0.0f64, 0.0f64);
    let mut count = 0;
    while count < 20 {
        let s = rng.gen_range(2..=8);
        let w: f64 = rng.gen_range(0.01..0.95);
        let Ok(c) = qmin_check(s, w, grid) else { continue };
        worst_q = worst_q.max((c.argmin_q - c.closed_form_q).abs());
        worst_y = worst_y.max((c.y_at_argmin - c.closed_form_y).abs());
        count += 1;
    }
    gate.check(
        "qmin",
        worst_q < 1e-4 && worst_y < 1e-6,
        format!("20 cases: max|q err|={worst_q:.2e} max|y err|={worst_y:.2e}"),
    );
}

fn recovery(gate: &mut Gate) {
    let started = Instant::now();
    let mut exhaustive = ExperimentConfig::new(24, 2, 20, 0.29289, Mode::Full);
    exhaustive.exhaustive = true;
    exhaustive.seed = 11;
    let a = run_experiment(&exhaustive).expect("exhaustive run");

    let mut mc = ExperimentConfig::new(1 << 10, 2, 25, W_PAIR, Mode::Full);
    mc.trials = 1000;
    mc.seed = 2024;
    let b = run_experiment(&mc).expect("monte carlo run");
    let elapsed = started.elapsed();
    let ok = a.successes == 276
        && a.config.trials == 276
        && b.successes == 1000
        && b.false_positive_trials == 0
        && elapsed < Duration::from_secs(60);
    gate.check(
        "unconditional-recovery",
        ok,
        format!(
            "exhaustive {}/{} monte-carlo {}/{} stage2={:?} time={elapsed:.2?}",
            a.successes, a.config.trials, b.successes, b.config.trials, b.stage2_histogram
        ),
    );
}

fn partial_recovery(gate: &mut Gate) {
    let mut c = ExperimentConfig::new(1 << 8, 5, 40, partial_weight(5), Mode::Partial);
    c.trials = 1000;
    c.seed = 7;
    let r = run_experiment(&c).expect("partial run");
    let ok = r.successes == 1000 && r.false_positive_trials == 0 && r.min_found().unwrap_or(0) >= 3;
    gate.check(
        "partial-recovery",
        ok,
        format!(
            "{}/{} trials found>=3, false positives in {} trials, found histogram {:?}",
            r.successes, r.config.trials, r.false_positive_trials, r.partial_found_histogram
        ),
    );
}

fn graph(n: usize, edges: Vec<Vec<usize>>) -> CandidateHypergraph {
    CandidateHypergraph::from_edges(n, 2, OutcomeVector::new(BitVec::zeros(1)), edges).unwrap()
}

/// Random graph grown edge by edge while degree and matching stay below `l`.
fn constrained_graph(rng: &mut ChaCha8Rng, l: usize) -> CandidateHypergraph {
    let n = rng.gen_range(2..=4 * l);
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let attempts = rng.gen_range(1..=4 * l * l);
    for _ in 0..attempts {
        let mut e = sample(rng, n, 2).into_vec();
        e.sort_unstable();
        if edges.contains(&e) {
            continue;
        }
        edges.push(e);
        let g = graph(n, edges.clone());
        if max_degree(&g).0 >= l || max_matching_size(&g).unwrap() >= l {
            edges.pop();
        }
    }
    graph(n, edges)
}

fn edge_bound(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    let mut largest = Vec::new();
    let mut violations = 0;
    for l in 2..=6 {
        let mut most = 0;
        for _ in 0..10_000 {
            let g = constrained_graph(&mut rng, l);
            assert!(max_degree(&g).0 < l && max_matching_size(&g).unwrap() < l);
            if !edge_bound_check(&g, l).unwrap() || g.edges.len() >= 2 * l * l {
                violations += 1;
            }
            most = most.max(g.edges.len());
            checked += 1;
        }
        // Contrapositive: dense random graphs always have a big star or matching.
        for _ in 0..1000 {
            let n = rng.gen_range(4..=6 * l);
            let all: Vec<Vec<usize>> = (0..n).combinations(2).collect();
            if all.len() < 2 * l * l {
                continue;
            }
            let m = rng.gen_range(2 * l * l..=all.len());
            let edges = sample(&mut rng, all.len(), m).iter().map(|i| all[i].clone()).collect();
            let g = graph(n, edges);
            if max_degree(&g).0 < l && max_matching_size(&g).unwrap() < l {
                violations += 1;
            }
        }
        largest.push(format!("L={l}:max|E|={most}<{}", 2 * l * l));
    }
    gate.check(
        "edge-bound",
        violations == 0,
        format!(
            "{checked} constrained graphs, {violations} violations, {}",
            largest.join(" ")
        ),
    );
}

fn decoder_equivalence(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    let mut nonempty = 0;
    for i in 0..200 {
        let t = rng.gen_range(3..=16);
        let s = rng.gen_range(1..=3usize.min(t));
        let n = rng.gen_range(3..=12);
        let w = rng.gen_range(0.1..0.6);
        let x = gen_matrix(n, t, w, rng.gen()).unwrap();
        let y = if i % 4 == 3 {
            let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            OutcomeVector::new(BitVec::from_bools(&bits))
        } else {
            outcome_vector(&x, &sample(&mut rng, t, s).into_vec()).unwrap()
        };
        let got = candidate_edges(&x, s, &y).unwrap().edges;
        let expected: Vec<Vec<usize>> = (0..t)
            .combinations(s)
            .filter(|set| outcome_vector(&x, set).unwrap() == y)
            .collect();
        if got != expected {
            mismatches += 1;
        }
        nonempty += usize::from(!expected.is_empty());
    }
    gate.check(
        "decoder-equivalence",
        mismatches == 0,
        format!("200 instances ({nonempty} with edges), {mismatches} mismatches"),
    );
}

/// `-log2 P / N` where `P` is the probability that two random weight-`wN`
/// columns have a union of weight exactly `qN`.
fn union_exponent(n: u64, w: f64, q: f64) -> f64 {
    let wn = (w * n as f64).round() as u64;
    let qn = (q * n as f64).round() as u64;
    let ln_p = ln_binomial(wn, 2 * wn - qn) + ln_binomial(n - wn, qn - wn) - ln_binomial(n, wn);
    -ln_p / std::f64::consts::LN_2 / n as f64
}

/// Fits `e(N) = a + b log2(N) / N + c / N` through three sizes, returns `a`.
fn extrapolate(ns: [u64; 3], es: [f64; 3]) -> f64 {
    let rows: Vec<[f64; 4]> = ns
        .iter()
        .zip(es)
        .map(|(&n, e)| {
            let n = n as f64;
            [1.0, n.log2() / n, 1.0 / n, e]
        })
        .collect();
    // Gaussian elimination on the 3x3 system.
    let mut m = rows;
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                let pivot_row = m[col];
                for (x, p) in m[r].iter_mut().zip(pivot_row).skip(col) {
                    *x -= f * p;
                }
            }
        }
    }
    m[0][3] / m[0][0]
}

fn exponent_cross_validation(gate: &mut Gate) {
    let ns = [200, 400, 800];
    let points = [
        (0.3, 0.45),
        (0.25, 0.4),
        (0.2, 0.3),
        (0.4, 0.7),
        (0.1, 0.15),
        (0.35, 0.5),
    ];
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for &(w, q) in &points {
        let es = ns.map(|n| union_exponent(n, w, q));
        let limit = extrapolate(ns, es);
        let a = big_a(2, w, q).unwrap();
        worst = worst.max((a - limit).abs());
        details.push(format!("A(2,{w},{q})={a:.5}~{limit:.5}"));
    }
    gate.check(
        "exponent-cross-validation",
        worst < 2e-2,
        format!("max diff {worst:.2e}: {}", details.join(" ")),
    );
}

fn main() {
    let grid = RateGrid::default();
    let mut gate = Gate {
        passed: 0,
        failed: Vec::new(),
    };
    let computed = reference_values(&mut gate, &grid);
    coincidence(&mut gate, &computed);
    pair_cross_check(&mut gate, &grid);
    pair_exponent(&mut gate, &grid);
    partial_identity(&mut gate, &grid);
    qmin(&mut gate, &grid);
    recovery(&mut gate);
    partial_recovery(&mut gate);
    edge_bound(&mut gate);
    decoder_equivalence(&mut gate);
    exponent_cross_validation(&mut gate);
    println!("acceptance: {} passed, {} failed", gate.passed, gate.failed.len());
    if !gate.failed.is_empty() {
        println!("failed: {}", gate.failed.join(", "));
        std::process::exit(1);
    }
}
