//! Reproducible Monte Carlo harness for the two-stage algorithm.
//!
//! One design matrix is fixed per experiment; trials vary the hidden set.
//! Trial `i` draws its hidden set from seed `derive_seed(master, i)`, so any
//! trial can be replayed alone and parallel execution gives identical reports.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::decoder::DecoderOptions;
use crate::design::{gen_matrix, Mode, TestMatrix};
use crate::error::{Error, Result};
use crate::numerics::round_significant;
use crate::planner::{partial_target, run};
use crate::pooling::DefectiveOracle;
use crate::seed::derive_seed;
use itertools::Itertools;

use crate::subsets::binomial;

/// Largest number of hidden sets an exhaustive run will enumerate.
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub t: usize,
    pub s: usize,
    pub n: usize,
    pub w: f64,
    pub mode: Mode,
    /// Ignored when `exhaustive` is set.
    pub trials: usize,
    pub seed: u64,
    /// Iterate every `s`-subset of `[t]` instead of sampling.
    pub exhaustive: bool,
    pub decoder: DecoderOptions,
    pub exhaustive_cap: u128,
}

impl ExperimentConfig {
    pub fn new(t: usize, s: usize, n: usize, w: f64, mode: Mode) -> Self {
        ExperimentConfig {
            t,
            s,
            n,
            w,
            mode,
            trials: 1000,
            seed: 0,
            exhaustive: false,
            decoder: DecoderOptions::default(),
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub t: usize,
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub w: f64,
    #[serde(rename = "W")]
    pub column_weight: usize,
    pub mode: Mode,
    pub trials: usize,
    pub seed: u64,
    pub exhaustive: bool,
}

/// Aggregate over all trials. Field order is the JSON order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ReportConfig,
    pub successes: usize,
    /// Trials in which an item reported as defective was not defective.
    pub false_positive_trials: usize,
    /// Number of identified defectives -> trials.
    pub partial_found_histogram: BTreeMap<usize, usize>,
    /// Second-stage tests -> trials.
    pub stage2_histogram: BTreeMap<usize, usize>,
    /// Candidate edges -> trials.
    pub edge_histogram: BTreeMap<usize, usize>,
    /// `log2(t) / (N + max stage2_tests)`; the worst observed case.
    pub empirical_rate: f64,
    /// Seconds; omitted in deterministic mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn min_found(&self) -> Option<usize> {
        self.partial_found_histogram.keys().next().copied()
    }

    pub fn max_stage2(&self) -> Option<usize> {
        self.stage2_histogram.keys().next_back().copied()
    }
}

struct TrialOutcome {
    success: bool,
    false_positive: bool,
    found: usize,
    stage2: usize,
    edges: usize,
}

fn trial(mode: Mode, x: &TestMatrix, s: usize, hidden: Vec<usize>, opts: DecoderOptions) -> Result<TrialOutcome> {
    let oracle = DefectiveOracle::new(x.cols(), hidden.iter().copied())?;
    let r = run(mode, x, s, &oracle, opts)?;
    let false_positive = r.found.iter().any(|v| !hidden.contains(v));
    let success = !false_positive
        && match mode {
            Mode::Full => r.found.len() == s,
            Mode::Partial => r.found.len() >= partial_target(s),
        };
    Ok(TrialOutcome {
        success,
        false_positive,
        found: r.found.len(),
        stage2: r.stage2_tests,
        edges: r.candidate_edge_count,
    })
}

/// Draws the design matrix from the master seed and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let x = gen_matrix(config.n, config.t, config.w, config.seed)?;
    run_experiment_on(config, &x)
}

/// Runs the experiment on a given design matrix.
pub fn run_experiment_on(config: &ExperimentConfig, x: &TestMatrix) -> Result<ExperimentReport> {
    let started = Instant::now();
    let (t, s) = (x.cols(), config.s);
    if s == 0 || s > t {
        return Err(Error::param(format!("need 1 <= s <= t, got s = {s}, t = {t}")));
    }

    let outcomes: Vec<TrialOutcome> = if config.exhaustive {
        let count = binomial(t as u64, s as u64);
        if count > config.exhaustive_cap {
            return Err(Error::Capacity(format!(
                "exhaustive run over C({t}, {s}) = {count} hidden sets exceeds the cap of {}",
                config.exhaustive_cap
            )));
        }
        let sets: Vec<Vec<usize>> = (0..t).combinations(s).collect();
        sets.into_par_iter()
            .map(|hidden| trial(config.mode, x, s, hidden, config.decoder))
            .collect::<Result<_>>()?
    } else {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, i as u64));
                let mut hidden = sample(&mut rng, t, s).into_vec();
                hidden.sort_unstable();
                trial(config.mode, x, s, hidden, config.decoder)
            })
            .collect::<Result<_>>()?
    };

    let mut report = ExperimentReport {
        config: ReportConfig {
            t,
            s,
            n: x.rows(),
            w: round_significant(x.relative_weight(), 12),
            column_weight: x.column_weight(),
            mode: config.mode,
            trials: outcomes.len(),
            seed: config.seed,
            exhaustive: config.exhaustive,
        },
        successes: 0,
        false_positive_trials: 0,
        partial_found_histogram: BTreeMap::new(),
        stage2_histogram: BTreeMap::new(),
        edge_histogram: BTreeMap::new(),
        empirical_rate: 0.0,
        wall_time: None,
    };
    for o in &outcomes {
        report.successes += usize::from(o.success);
        report.false_positive_trials += usize::from(o.false_positive);
        *report.partial_found_histogram.entry(o.found).or_default() += 1;
        *report.stage2_histogram.entry(o.stage2).or_default() += 1;
        *report.edge_histogram.entry(o.edges).or_default() += 1;
    }
    if let Some(worst) = report.max_stage2() {
        let rate = (t as f64).log2() / (x.rows() + worst) as f64;
        report.empirical_rate = round_significant(rate, 12);
    }
    report.wall_time = Some(round_significant(started.elapsed().as_secs_f64(), 12));
    Ok(report)
}
