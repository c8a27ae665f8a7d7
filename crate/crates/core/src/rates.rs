//! Numerical evaluation of achievable-rate lower bounds for two-stage testing.
//!
//! The central quantity is the exponent `A(s, w, q)` of the probability that
//! `s` independent random columns of relative weight `w` have a union of
//! relative weight `q`. It is parameterized by the root `y` of
//! `q = w (1 - y^s) / (1 - y)`. Two conditions built from `A`, called `r1` and
//! `r2` here, bound the rate at which random codes avoid bad configurations;
//! the rate bound is `sup_w min_k min(r1, r2)`.
//!
//! Every infimum and supremum is taken over an open interval shrunk by
//! `1e-9` of its width, scanned on a grid and refined by golden section.
//! Degenerate single-point intervals are evaluated at the point.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bisect_increasing, golden_section_min, grid_refine_min};
use crate::subsets::ln_binomial;

/// Previously known bounds for `s = 3..=6`, used by the comparison table.
pub const REFERENCE_S: [usize; 4] = [3, 4, 5, 6];
pub const REFERENCE_OLD: [f64; 4] = [0.199, 0.145, 0.114, 0.094];
pub const REFERENCE_NEW: [f64; 4] = [0.3219, 0.199, 0.145, 0.114];

const Y_TOL: f64 = 1e-15;
const POINT_TOL: f64 = 1e-12;
const SHRINK: f64 = 1e-9;

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("entropy argument {x} outside [0, 1]")));
    }
    Ok(h(x))
}

/// Binary entropy; arguments are clamped to `[0, 1]`.
pub(crate) fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -(x * x.ln() + (1.0 - x) * (-x).ln_1p()) / std::f64::consts::LN_2
}

/// `1 + y + ... + y^(s-1)`.
fn geometric_sum(y: f64, s: usize) -> f64 {
    (0..s).fold(0.0, |acc, _| acc * y + 1.0)
}

/// Root `y` in `(0, 1)` of `q = w (1 - y^s) / (1 - y)`, found by bisection on
/// the increasing left side `1 + y + ... + y^(s-1) = q / w`.
pub fn solve_y(s: usize, w: f64, q: f64) -> Result<f64> {
    if s < 2 {
        return Err(Error::domain(format!("root y needs s >= 2, got {s}")));
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::domain(format!("w = {w} outside (0, 1)")));
    }
    let ratio = q / w;
    if !(ratio > 1.0 && ratio < s as f64 && q <= 1.0) {
        return Err(Error::domain(format!(
            "need w < q < min(1, s w); got s = {s}, w = {w}, q = {q}"
        )));
    }
    Ok(bisect_increasing(|y| geometric_sum(y, s) - ratio, 0.0, 1.0, Y_TOL))
}

/// The exponent `A(s, w, q)`.
///
/// Defined for `w <= q <= min(1, s w)`; the endpoints take their limits:
/// `A(s, w, w) = (s - 1) h(w)` (all columns coincide) and, when `s w <= 1`,
/// `A(s, w, s w) = s w log2 w + (1 - s w) log2(1 - s w) + s h(w)` (pairwise
/// disjoint columns). For `s = 1` only `q = w` is valid and `A = 0`.
pub fn big_a(s: usize, w: f64, q: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::domain("A needs s >= 1"));
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::domain(format!("w = {w} outside (0, 1)")));
    }
    let sf = s as f64;
    let upper = (sf * w).min(1.0);
    if !(q >= w - POINT_TOL && q <= upper + POINT_TOL) {
        return Err(Error::domain(format!(
            "need w <= q <= min(1, s w); got s = {s}, w = {w}, q = {q}"
        )));
    }
    if s == 1 || q - w <= POINT_TOL * w {
        return Ok((sf - 1.0) * h(w));
    }
    if sf * w <= 1.0 && q >= sf * w * (1.0 - POINT_TOL) {
        let sw = sf * w;
        let tail = if sw < 1.0 { (1.0 - sw) * (1.0 - sw).log2() } else { 0.0 };
        return Ok(sw * w.log2() + tail + sf * h(w));
    }
    let q = q.min(1.0);
    let y = solve_y(s, w, q)?;
    let tail = if q < 1.0 {
        (1.0 - q) * (-q).ln_1p() / std::f64::consts::LN_2
    } else {
        0.0
    };
    let log_one_minus_y = (-y).ln_1p() / std::f64::consts::LN_2;
    Ok(tail + q * (w.log2() + sf * y.log2() - log_one_minus_y) + sf * w * (log_one_minus_y - y.log2()) + sf * h(w))
}

/// Grid resolution and tolerance for the rate optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateGrid {
    pub w_grid: usize,
    pub q_grid: usize,
    /// Refinement tolerance on the optimized argument.
    pub tol: f64,
}

impl Default for RateGrid {
    fn default() -> Self {
        RateGrid {
            w_grid: 200,
            q_grid: 200,
            tol: 1e-9,
        }
    }
}

impl RateGrid {
    fn validate(&self) -> Result<()> {
        if self.w_grid < 100 || self.q_grid < 100 {
            return Err(Error::param(format!(
                "grid resolutions must be at least 100, got w = {} and q = {}",
                self.w_grid, self.q_grid
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::param(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Which bound to evaluate: `sup_w min_{k in K} min(r1, r2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateQuery {
    pub s: usize,
    pub k_set: Vec<usize>,
    pub grid: RateGrid,
}

impl RateQuery {
    /// All `k` in `0..s`: full recovery.
    pub fn full(s: usize) -> Self {
        RateQuery {
            s,
            k_set: (0..s).collect(),
            grid: RateGrid::default(),
        }
    }

    /// `k` in `0..=s/2`: partial recovery.
    pub fn partial(s: usize) -> Self {
        RateQuery {
            s,
            k_set: (0..=s / 2).collect(),
            grid: RateGrid::default(),
        }
    }

    pub fn with_grid(mut self, grid: RateGrid) -> Self {
        self.grid = grid;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return Err(Error::param(format!("need s >= 2, got {}", self.s)));
        }
        if self.k_set.is_empty() {
            return Err(Error::param("K is empty"));
        }
        if let Some(k) = self.k_set.iter().find(|&&k| k >= self.s) {
            return Err(Error::param(format!("k = {k} is not below s = {}", self.s)));
        }
        self.grid.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KBounds {
    pub r1: f64,
    pub r2: f64,
}

impl KBounds {
    pub fn min(&self) -> f64 {
        self.r1.min(self.r2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub w_grid: usize,
    pub q_grid: usize,
    pub tol: f64,
    pub objective_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    pub s: usize,
    pub k_set: Vec<usize>,
    pub value: f64,
    pub w_star: f64,
    pub per_k: BTreeMap<usize, KBounds>,
    pub diagnostics: Diagnostics,
}

/// Infimum of `f` over `[lo, hi]`; `+inf` when the interval is empty.
fn infimum(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: &RateGrid) -> f64 {
    if lo > hi + POINT_TOL {
        return f64::INFINITY;
    }
    if hi - lo <= POINT_TOL {
        return f(lo.min(hi));
    }
    let delta = SHRINK * (hi - lo);
    grid_refine_min(f, lo + delta, hi - delta, grid.q_grid, grid.tol).1
}

fn check_k(s: usize, k: usize, w: f64) -> Result<()> {
    if k >= s {
        return Err(Error::param(format!("need 0 <= k < s, got k = {k}, s = {s}")));
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::domain(format!("w = {w} outside (0, 1)")));
    }
    Ok(())
}

/// `inf (A(s-k, w, q) - k w + h(q)) / (s-k)` over
/// `max(w, k w / 2) <= q <= min((s-k) w, 1)`; `+inf` if that range is empty.
pub fn r1_bound(s: usize, k: usize, w: f64, grid: &RateGrid) -> Result<f64> {
    check_k(s, k, w)?;
    let m = s - k;
    let kw = k as f64 * w;
    let f = |q: f64| match big_a(m, w, q) {
        Ok(a) => (a - kw + h(q)) / m as f64,
        Err(_) => f64::INFINITY,
    };
    Ok(infimum(f, w.max(kw / 2.0), (m as f64 * w).min(1.0), grid))
}

/// `inf (A(s-k, w, q) - k w h(q / (k w)) + h(q)) / (s-k)` over
/// `w <= q <= min(1, (s-k) w, k w / 2)`; `+inf` if that range is empty
/// (always the case for `k = 0`).
pub fn r2_bound(s: usize, k: usize, w: f64, grid: &RateGrid) -> Result<f64> {
    check_k(s, k, w)?;
    if k == 0 {
        return Ok(f64::INFINITY);
    }
    let m = s - k;
    let kw = k as f64 * w;
    let f = |q: f64| match big_a(m, w, q) {
        Ok(a) => (a - kw * h(q / kw) + h(q)) / m as f64,
        Err(_) => f64::INFINITY,
    };
    Ok(infimum(f, w, (m as f64 * w).min(1.0).min(kw / 2.0), grid))
}

fn per_k_bounds(s: usize, k_set: &[usize], w: f64, grid: &RateGrid) -> Result<BTreeMap<usize, KBounds>> {
    k_set
        .iter()
        .map(|&k| {
            Ok((
                k,
                KBounds {
                    r1: r1_bound(s, k, w, grid)?,
                    r2: r2_bound(s, k, w, grid)?,
                },
            ))
        })
        .collect()
}

/// `min_{k in K} min(r1, r2)` at a fixed relative weight.
pub fn bound_at(s: usize, k_set: &[usize], w: f64, grid: &RateGrid) -> Result<f64> {
    Ok(per_k_bounds(s, k_set, w, grid)?
        .values()
        .map(KBounds::min)
        .fold(f64::INFINITY, f64::min))
}

/// Evaluates `sup_w min_{k in K} min(r1, r2)`.
pub fn rate_bound(query: &RateQuery) -> Result<RateResult> {
    query.validate()?;
    let RateQuery { s, k_set, grid } = query;
    let objective = |w: f64| bound_at(*s, k_set, w, grid).expect("validated query");

    let (lo, hi) = (1e-3, 1.0 - 1e-3);
    let step = (hi - lo) / (grid.w_grid - 1) as f64;
    let values: Vec<f64> = (0..grid.w_grid)
        .into_par_iter()
        .map(|i| objective(lo + step * i as f64))
        .collect();
    let best_i = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best });
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    let evaluations = std::cell::Cell::new(grid.w_grid);
    let (w_refined, neg) = golden_section_min(
        |w| {
            evaluations.set(evaluations.get() + 1);
            -objective(w)
        },
        a,
        b,
        grid.tol,
    );
    let (w_star, value) = if -neg >= values[best_i] {
        (w_refined, -neg)
    } else {
        (lo + step * best_i as f64, values[best_i])
    };
    Ok(RateResult {
        s: *s,
        k_set: k_set.clone(),
        value,
        w_star,
        per_k: per_k_bounds(*s, k_set, w_star, grid)?,
        diagnostics: Diagnostics {
            w_grid: grid.w_grid,
            q_grid: grid.q_grid,
            tol: grid.tol,
            objective_evaluations: evaluations.get(),
        },
    })
}

/// Rate lower bound for finding all `s` defectives.
pub fn full_bound(s: usize, grid: &RateGrid) -> Result<RateResult> {
    rate_bound(&RateQuery::full(s).with_grid(*grid))
}

/// Rate lower bound for finding `s/2 + 1` of `s` defectives.
pub fn partial_bound(s: usize, grid: &RateGrid) -> Result<RateResult> {
    rate_bound(&RateQuery::partial(s).with_grid(*grid))
}

/// Relative weight `1 - 2^(-1/s)` used by partial recovery.
pub fn partial_weight(s: usize) -> f64 {
    1.0 - 2f64.powf(-1.0 / s as f64)
}

/// `h(w) + w log2(2^(1/s) - 1)` at `w = 1 - 2^(-1/s)`; equals `1/s`.
pub fn partial_closed_form(s: usize) -> f64 {
    let w = partial_weight(s);
    h(w) + w * (2f64.powf(1.0 / s as f64) - 1.0).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QminCheck {
    pub s: usize,
    pub w: f64,
    /// Numeric minimizer of `A(s, w, q) + h(q)`.
    pub argmin_q: f64,
    /// `w / (2 (1 - 2^(-1/s)))`.
    pub closed_form_q: f64,
    /// Root `y` at the numeric minimizer.
    pub y_at_argmin: f64,
    /// `2^(-1/s)`.
    pub closed_form_y: f64,
}

/// Locates the minimizer of `f(q) = A(s, w, q) + h(q)` numerically and
/// alongside its closed form.
pub fn qmin_check(s: usize, w: f64, grid: &RateGrid) -> Result<QminCheck> {
    if s < 2 {
        return Err(Error::domain(format!("need s >= 2, got {s}")));
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::domain(format!("w = {w} outside (0, 1)")));
    }
    let hi = (s as f64 * w).min(1.0);
    let closed_form_q = w / (2.0 * partial_weight(s));
    if !(closed_form_q > w && closed_form_q < hi) {
        return Err(Error::domain(format!(
            "q_min = {closed_form_q} is not inside ({w}, {hi})"
        )));
    }
    let f = |q: f64| big_a(s, w, q).map_or(f64::INFINITY, |a| a + h(q));
    let delta = SHRINK * (hi - w);
    let (argmin_q, _) = grid_refine_min(f, w + delta, hi - delta, grid.q_grid, 1e-13);
    Ok(QminCheck {
        s,
        w,
        argmin_q,
        closed_form_q,
        y_at_argmin: solve_y(s, w, argmin_q)?,
        closed_form_y: 2f64.powf(-1.0 / s as f64),
    })
}

/// `q h(w/q) + w h((q-w)/w) - 2 h(w)`, the exponent of the probability that two
/// random columns OR to a given vector of weight `q`, net of the column count.
pub fn pair_exponent(w: f64, q: f64) -> Result<f64> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::domain(format!("w = {w} outside (0, 1)")));
    }
    let hi = (2.0 * w).min(1.0);
    if !(q >= w && q <= hi) {
        return Err(Error::domain(format!("need w <= q <= min(2w, 1), got q = {q}")));
    }
    Ok(q * h(w / q) + w * h((q - w) / w) - 2.0 * h(w))
}

/// Supremum of [`pair_exponent`] over `q`, returned as `(argmax, value)`.
pub fn pair_exponent_sup(w: f64, grid: &RateGrid) -> Result<(f64, f64)> {
    pair_exponent(w, w)?;
    let hi = (2.0 * w).min(1.0);
    let delta = SHRINK * (hi - w);
    let f = |q: f64| -pair_exponent(w, q).unwrap_or(f64::NEG_INFINITY);
    let (q, neg) = grid_refine_min(f, w + delta, hi - delta, grid.q_grid, 1e-13);
    Ok((q, -neg))
}

/// Base-2 logarithms of the single-pair and double-pair coincidence
/// probabilities for columns of weight `wN` and an outcome of weight `qN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairProbabilities {
    pub log2_p1: f64,
    pub log2_p2: f64,
}

impl PairProbabilities {
    pub fn p1(&self) -> f64 {
        self.log2_p1.exp2()
    }

    pub fn p2(&self) -> f64 {
        self.log2_p2.exp2()
    }
}

/// `p1 = C(wN, qN-wN) / C(N, wN)`, `p2 = C(qN, wN) C(wN, qN-wN) / C(N, wN)^2`,
/// evaluated exactly in the log domain.
pub fn pair_probabilities(n: u64, wn: u64, qn: u64) -> Result<PairProbabilities> {
    if !(wn <= qn && qn <= n && qn - wn <= wn) {
        return Err(Error::domain(format!(
            "need wN <= qN <= N and qN - wN <= wN; got N = {n}, wN = {wn}, qN = {qn}"
        )));
    }
    let log2_binom = |a: u64, b: u64| ln_binomial(a, b) / std::f64::consts::LN_2;
    let total = log2_binom(n, wn);
    let spread = log2_binom(wn, qn - wn);
    Ok(PairProbabilities {
        log2_p1: spread - total,
        log2_p2: log2_binom(qn, wn) + spread - 2.0 * total,
    })
}
