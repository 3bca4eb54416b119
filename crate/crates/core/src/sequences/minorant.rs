use serde::{Deserialize, Serialize};

use super::{Alpha, DecaySequence, SEQ_TOL};
use crate::{Error, Result};

/// Largest chord horizon the minorant will scan.
pub const CHORD_CAP: usize = 1 << 25;

/// The greatest convex sequence below α on `1..=horizon`, built from chords
/// whose endpoints lie in `1..=chord_horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexDecaySequence {
    pub base: String,
    pub horizon: usize,
    pub chord_horizon: usize,
    /// β_1 … β_horizon.
    pub values: Vec<f64>,
}

impl ConvexDecaySequence {
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }
}

impl Alpha for ConvexDecaySequence {
    fn alpha(&self, j: usize) -> Result<f64> {
        self.get(j).ok_or(Error::HorizonExceeded {
            index: j,
            horizon: self.horizon,
        })
    }

    fn horizon(&self) -> Option<usize> {
        Some(self.horizon)
    }
}

/// Chord horizon H′ = max(4·horizon, first index with α ≤ α_horizon / 8),
/// clipped to the sequence's own horizon and to [`CHORD_CAP`].
fn chord_horizon<S: Alpha + ?Sized>(seq: &S, horizon: usize) -> Result<usize> {
    let limit = seq.horizon().unwrap_or(usize::MAX).min(CHORD_CAP);
    let target = seq.alpha(horizon)? / 8.0;
    let mut end = horizon;
    while end < limit && seq.alpha(end)? > target {
        end = (end * 2).min(limit);
    }
    Ok((4 * horizon).max(end).min(limit).max(horizon))
}

/// Convex minorant of α on `1..=horizon`.
///
/// β_k is the infimum over chords (m, n) with m ≤ k ≤ n, m < n, of the
/// chord value at k, which is the lower convex hull of the points (j, α_j).
pub fn convex_minorant<S: Alpha + ?Sized>(seq: &S, horizon: usize) -> Result<ConvexDecaySequence> {
    if horizon < 2 {
        return Err(Error::invalid(format!("horizon must be at least 2, got {horizon}")));
    }
    if let Some(h) = seq.horizon() {
        if horizon > h {
            return Err(Error::HorizonExceeded { index: horizon, horizon: h });
        }
    }
    let a1 = seq.alpha(1)?;
    if a1 <= 0.0 {
        return Err(Error::invalid("convex minorant needs alpha_1 > 0"));
    }
    let chord = chord_horizon(seq, horizon)?;

    // Monotone-chain lower hull over x = 1..=chord.
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for j in 1..=chord {
        let p = (j as f64, seq.alpha(j)?);
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let mut values = Vec::with_capacity(horizon);
    let mut seg = 0;
    for k in 1..=horizon {
        let x = k as f64;
        while seg + 1 < hull.len() && hull[seg + 1].0 < x {
            seg += 1;
        }
        let (x0, y0) = hull[seg];
        let v = if x0 == x || seg + 1 == hull.len() {
            y0
        } else {
            let (x1, y1) = hull[seg + 1];
            if x1 == x {
                y1
            } else {
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        };
        values.push(v.max(0.0));
    }
    values[0] = a1;

    Ok(ConvexDecaySequence {
        base: describe(seq),
        horizon,
        chord_horizon: chord,
        values,
    })
}

fn describe<S: Alpha + ?Sized>(seq: &S) -> String {
    match seq.horizon() {
        Some(h) => format!("tabulated[{h}]"),
        None => "closed-form".to_string(),
    }
}

/// True iff all second differences are ≥ −tol, i.e. every chord lies above
/// the sequence.
pub fn check_convexity(values: &[f64]) -> Result<bool> {
    if values.len() < 3 {
        return Err(Error::invalid("convexity check needs at least 3 values"));
    }
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    Ok(values
        .windows(3)
        .all(|w| w[0] - 2.0 * w[1] + w[2] >= -SEQ_TOL * scale))
}

/// The slope comparison (α_i − α_j)/(j − i) ≥ (α_m − α_n)/(n − m) for
/// 1-based i < j, m < n with i ≤ m and j ≤ n.
pub fn check_slope_monotonicity(
    values: &[f64],
    i: usize,
    j: usize,
    m: usize,
    n: usize,
) -> Result<bool> {
    if !(j > i && n > m && i <= m && j <= n && i >= 1) {
        return Err(Error::invalid(format!(
            "need j > i, n > m, i <= m, j <= n (got i={i}, j={j}, m={m}, n={n})"
        )));
    }
    if n > values.len() {
        return Err(Error::invalid(format!(
            "index {n} outside list of length {}",
            values.len()
        )));
    }
    let v = |k: usize| values[k - 1];
    let left = (v(i) - v(j)) / (j - i) as f64;
    let right = (v(m) - v(n)) / (n - m) as f64;
    let scale = values.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    Ok(left >= right - SEQ_TOL * scale)
}

/// One line of the minorant table: α_k, β_k and the floor min{α_k/2, α_{2k−1}}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorantRow {
    pub k: usize,
    pub alpha_k: f64,
    pub beta_k: f64,
    pub floor_k: f64,
}

pub fn minorant_rows(seq: &DecaySequence, minorant: &ConvexDecaySequence) -> Vec<MinorantRow> {
    minorant
        .values
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            let k = i + 1;
            let alpha = seq.eval(k);
            MinorantRow {
                k,
                alpha_k: alpha,
                beta_k: beta,
                floor_k: (alpha / 2.0).min(seq.eval(2 * k - 1)),
            }
        })
        .collect()
}
