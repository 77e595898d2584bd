//! Reference implementations written from the textbook definitions, kept
//! independent of the library code they check.

/// Value at a (possibly half-integer) 1-based depth into `sorted`.
fn at_depth(sorted: &[f64], depth: f64) -> f64 {
    let lo = depth.floor() as usize;
    let hi = depth.ceil() as usize;
    (sorted[lo - 1] + sorted[hi - 1]) / 2.0
}

/// Tukey's five-number summary by depth counting:
/// median depth (n + 1) / 2, hinge depth (floor(median depth) + 1) / 2.
pub fn tukey_five(values: &[u8]) -> (f64, f64, f64, f64, f64) {
    let mut sorted: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let depth_median = (n as f64 + 1.0) / 2.0;
    let depth_hinge = (depth_median.floor() + 1.0) / 2.0;
    let reversed: Vec<f64> = sorted.iter().rev().copied().collect();
    (
        sorted[0],
        at_depth(&sorted, depth_hinge),
        at_depth(&sorted, depth_median),
        at_depth(&reversed, depth_hinge),
        sorted[n - 1],
    )
}

/// Points beyond 1.5 IQR of the hinges, in ascending order.
pub fn tukey_outliers(values: &[u8]) -> Vec<f64> {
    let (_, lo, _, hi, _) = tukey_five(values);
    let reach = 1.5 * (hi - lo);
    let mut out: Vec<f64> = values
        .iter()
        .map(|&v| f64::from(v))
        .filter(|&v| v < lo - reach || v > hi + reach)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Classifies every ordered pair of components once, by scanning the
/// canonical order for whichever of the two comes first, then tallies the
/// consecutive pairs of `sequence`. Returns (forward, backward, self).
pub fn classify_pairs(sequence: &[&str], order: &[String]) -> (u64, u64, u64) {
    use std::collections::HashMap;
    let mut class: HashMap<(&str, &str), i8> = HashMap::new();
    for a in order {
        for b in order {
            let c = if a == b {
                0
            } else if order.iter().find(|o| *o == a || *o == b).unwrap() == a {
                1
            } else {
                -1
            };
            class.insert((a.as_str(), b.as_str()), c);
        }
    }
    let (mut f, mut b, mut s) = (0, 0, 0);
    for w in sequence.windows(2) {
        match class[&(w[0], w[1])] {
            1 => f += 1,
            -1 => b += 1,
            _ => s += 1,
        }
    }
    (f, b, s)
}
