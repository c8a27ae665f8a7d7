//! Scalar root finding and one-dimensional minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Bisection for an increasing function on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a).abs() > tol && iterations < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimum of `f` over `[lo, hi]`: scan `points` equally spaced values, then
/// refine around the best one by golden section.
///
/// Returns `(argmin, min)`. Non-finite values are treated as `+inf`.
pub fn grid_refine_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize, tol: f64) -> (f64, f64) {
    let value = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if hi <= lo {
        return (lo, value(lo));
    }
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, value(lo));
    let mut best_i = 0;
    for i in 1..points {
        let x = if i == points - 1 { hi } else { lo + step * i as f64 };
        let v = value(x);
        if v < best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    let refined = golden_section_min(value, a, b, tol);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

/// Rounds to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Formats with 12 significant digits, without exponent for moderate magnitudes.
pub fn format_sig12(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let r = round_significant(x, 12);
    format!("{r}")
}
