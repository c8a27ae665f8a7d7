//! Constant-weight random pooling designs.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::rates::{self, RateGrid};

pub const MATRIX_MAGIC: &str = "gtlab-matrix v1";

/// Recovery goal of a two-stage run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Identify the whole defective set.
    Full,
    /// Identify at least `s/2 + 1` defectives (integer division).
    Partial,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Partial => "partial",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "partial" => Ok(Mode::Partial),
            other => Err(Error::param(format!(
                "unknown mode {other:?} (expected full or partial)"
            ))),
        }
    }
}

/// An `N x t` binary pooling matrix in which every column has the same weight.
///
/// Row `i` is pool `i`; column `j` lists the pools item `j` takes part in.
/// Bits are stored row-major.
#[derive(Clone, PartialEq)]
pub struct TestMatrix {
    rows: usize,
    cols: usize,
    column_weight: usize,
    relative_weight: f64,
    seed: u64,
    data: Vec<BitVec>,
}

impl fmt::Debug for TestMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("column_weight", &self.column_weight)
            .field("relative_weight", &self.relative_weight)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// Column weight for relative weight `w` over `n` rows: `round(w n)` clamped to `[1, n-1]`.
pub fn column_weight_for(n: usize, w: f64) -> usize {
    let raw = (w * n as f64).round();
    (raw as usize).clamp(1, n - 1)
}

/// Draws a random constant-weight matrix.
///
/// Each column is an independent uniform choice among the weight-`W` columns,
/// produced by a partial shuffle on its own ChaCha stream `(seed, column)`.
/// Columns may repeat.
pub fn gen_matrix(n: usize, t: usize, w: f64, seed: u64) -> Result<TestMatrix> {
    if n < 2 {
        return Err(Error::param(format!("need at least 2 rows, got {n}")));
    }
    if t < 1 {
        return Err(Error::param("need at least 1 column"));
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::param(format!("relative weight must lie in (0,1), got {w}")));
    }
    let weight = column_weight_for(n, w);
    let mut data = vec![BitVec::zeros(t); n];
    let mut scratch: Vec<usize> = Vec::with_capacity(n);
    for j in 0..t {
        let mut rng = column_rng(seed, j);
        scratch.clear();
        scratch.extend(0..n);
        let (chosen, _) = scratch.partial_shuffle(&mut rng, weight);
        for &i in chosen.iter() {
            data[i].set(j, true);
        }
    }
    Ok(TestMatrix {
        rows: n,
        cols: t,
        column_weight: weight,
        relative_weight: w,
        seed,
        data,
    })
}

fn column_rng(seed: u64, column: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(column as u64);
    rng
}

/// Recommended relative weight for `s` defectives.
///
/// Full recovery with `s = 2` and partial recovery use closed forms; full
/// recovery with `s > 2` maximizes the rate bound numerically.
pub fn recommended_weight(s: usize, mode: Mode) -> Result<f64> {
    if s < 2 {
        return Err(Error::param(format!("need s >= 2, got {s}")));
    }
    Ok(match (mode, s) {
        (Mode::Full, 2) => 1.0 - std::f64::consts::SQRT_2 / 2.0,
        (Mode::Partial, _) => 1.0 - 2f64.powf(-1.0 / s as f64),
        (Mode::Full, _) => rates::full_bound(s, &RateGrid::default())?.w_star,
    })
}

impl TestMatrix {
    /// Builds a matrix from explicit rows. All columns must share one weight.
    pub fn from_rows(rows: Vec<BitVec>) -> Result<TestMatrix> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::param("matrix has no rows"));
        }
        let t = rows[0].len();
        if t == 0 || rows.iter().any(|r| r.len() != t) {
            return Err(Error::param("rows must be non-empty and of equal length"));
        }
        let weights: Vec<usize> = (0..t).map(|j| rows.iter().filter(|r| r.get(j)).count()).collect();
        let weight = weights[0];
        if let Some(j) = weights.iter().position(|&x| x != weight) {
            return Err(Error::param(format!(
                "column {} has weight {} but column 1 has weight {weight}",
                j + 1,
                weights[j]
            )));
        }
        Ok(TestMatrix {
            rows: n,
            cols: t,
            column_weight: weight,
            relative_weight: weight as f64 / n as f64,
            seed: 0,
            data: rows,
        })
    }

    /// Builds a matrix from its columns.
    pub fn from_columns(columns: &[BitVec]) -> Result<TestMatrix> {
        let n = columns.first().map_or(0, BitVec::len);
        let rows = (0..n)
            .map(|i| {
                let mut r = BitVec::zeros(columns.len());
                for (j, c) in columns.iter().enumerate() {
                    r.set(j, c.get(i));
                }
                r
            })
            .collect();
        TestMatrix::from_rows(rows)
    }

    /// The `n x n` identity design.
    pub fn identity(n: usize) -> TestMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = BitVec::zeros(n);
                r.set(i, true);
                r
            })
            .collect();
        TestMatrix::from_rows(rows).expect("identity has constant weight")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column_weight(&self) -> usize {
        self.column_weight
    }

    pub fn relative_weight(&self) -> f64 {
        self.relative_weight
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i].get(j)
    }

    pub fn row(&self, i: usize) -> &BitVec {
        &self.data[i]
    }

    pub fn column(&self, j: usize) -> BitVec {
        let mut c = BitVec::zeros(self.rows);
        for (i, row) in self.data.iter().enumerate() {
            if row.get(j) {
                c.set(i, true);
            }
        }
        c
    }

    pub fn columns(&self) -> Vec<BitVec> {
        let mut cols = vec![BitVec::zeros(self.rows); self.cols];
        for (i, row) in self.data.iter().enumerate() {
            for j in row.ones_iter() {
                cols[j].set(i, true);
            }
        }
        cols
    }

    /// Serializes to matrix text format v1.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1) + 64);
        out.push_str(MATRIX_MAGIC);
        out.push('\n');
        out.push_str(&format!(
            "N={} t={} w={} W={} seed={}\n",
            self.rows, self.cols, self.relative_weight, self.column_weight, self.seed
        ));
        for row in &self.data {
            out.push_str(&row.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses matrix text format v1.
    pub fn from_text(text: &str) -> Result<TestMatrix> {
        let err = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = text.lines();
        match lines.next() {
            Some(MATRIX_MAGIC) => {}
            other => return Err(err(1, format!("expected {MATRIX_MAGIC:?}, found {other:?}"))),
        }
        let header = lines.next().ok_or_else(|| err(2, "missing header".into()))?;
        let mut n = None;
        let mut t = None;
        let mut w = None;
        let mut weight = None;
        let mut seed = None;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| err(2, format!("malformed field {field:?}")))?;
            let bad = |e: &dyn fmt::Display| err(2, format!("bad value for {key}: {e}"));
            match key {
                "N" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "t" => t = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "w" => w = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "W" => weight = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
                _ => return Err(err(2, format!("unknown field {key:?}"))),
            }
        }
        let missing = |k: &str| err(2, format!("header lacks {k}"));
        let n = n.ok_or_else(|| missing("N"))?;
        let t = t.ok_or_else(|| missing("t"))?;
        let w = w.ok_or_else(|| missing("w"))?;
        let weight = weight.ok_or_else(|| missing("W"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;

        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let line_no = i + 3;
            let line = lines
                .next()
                .ok_or_else(|| err(line_no, format!("expected {n} matrix rows, found {i}")))?;
            if line.len() != t {
                return Err(err(line_no, format!("row has {} entries, expected {t}", line.len())));
            }
            let row = BitVec::parse(line).ok_or_else(|| err(line_no, "rows may only contain 0 and 1".into()))?;
            data.push(row);
        }
        if let Some((k, extra)) = lines.enumerate().find(|(_, l)| !l.is_empty()) {
            return Err(err(n + 3 + k, format!("trailing content {extra:?}")));
        }
        let mut m = TestMatrix::from_rows(data).map_err(|e| err(3, e.to_string()))?;
        if m.column_weight != weight {
            return Err(err(
                2,
                format!("header says W={weight}, columns have weight {}", m.column_weight),
            ));
        }
        m.relative_weight = w;
        m.seed = seed;
        Ok(m)
    }
}
