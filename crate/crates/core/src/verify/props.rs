use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::PNorm;
use crate::operators::{build_nocotype, TaggedMatrix};
use crate::oracle::{gelfand_oracle, OracleConfig};
use crate::rng::substream;
use crate::sequences::DecaySequence;
use crate::snumbers::prop12_decay_envelope;
use crate::{Error, Result};

use super::{NamedCheck, Provenance, Report, VerifyOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReportRow {
    pub k: usize,
    pub sqrt_k_x: f64,
    pub sqrt_k_y: f64,
    pub k_h: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub theorem: String,
    pub sequence: String,
    pub indices: Vec<usize>,
    pub epsilon: f64,
    pub k_max: usize,
    /// Smallest k₀ with every scaled envelope ≤ ε on [k₀, k_max].
    pub k0: Option<usize>,
    pub rows: Vec<EnvelopeReportRow>,
    pub checks: Vec<NamedCheck>,
    pub kg: f64,
    pub provenance: Provenance,
    pub overall_pass: bool,
}

/// Scaled decay envelopes √k·x̂_k, √k·ŷ_k, k·ĥ_k of the (c₀, ℓ₁) model and the
/// first k₀ from which all three stay below ε up to `k_max`.
pub fn verify_prop_optimal(
    seq: &DecaySequence,
    blocks: usize,
    k_max: usize,
    epsilon: f64,
    opts: &VerifyOptions,
) -> Result<EnvelopeReport> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be a nonnegative number, got {epsilon}")));
    }
    let op = build_nocotype(seq, blocks)?;
    let env = prop12_decay_envelope(&op, k_max, &opts.constants)?;
    let rows: Vec<EnvelopeReportRow> = env
        .iter()
        .map(|r| {
            let sk = (r.k as f64).sqrt();
            let (x, y, h) = (sk * r.x_hat, sk * r.y_hat, r.k as f64 * r.h_hat);
            EnvelopeReportRow {
                k: r.k,
                sqrt_k_x: x,
                sqrt_k_y: y,
                k_h: h,
                within: x <= epsilon && y <= epsilon && h <= epsilon,
            }
        })
        .collect();
    let k0 = rows
        .iter()
        .rposition(|r| !r.within)
        .map_or(Some(1), |i| (i + 1 < rows.len()).then(|| rows[i + 1].k));
    let mut checks = Vec::new();
    match k0 {
        Some(k0) => {
            let tail = &rows[k0 - 1..];
            let monotone = tail.windows(2).all(|w| {
                let ok = |a: f64, b: f64| b <= a * (1.0 + 1e-12);
                ok(w[0].sqrt_k_x, w[1].sqrt_k_x) && ok(w[0].sqrt_k_y, w[1].sqrt_k_y) && ok(w[0].k_h, w[1].k_h)
            });
            checks.push(NamedCheck::new("threshold", true, format!("k0 = {k0}")));
            checks.push(NamedCheck::new(
                "monotone_beyond_k0",
                monotone,
                "scaled envelopes nonincreasing on [k0, k_max]",
            ));
        }
        None => {
            let last = rows.last().expect("k_max >= 1");
            checks.push(NamedCheck::new(
                "threshold",
                false,
                format!(
                    "no k0 <= {k_max}: at k = {k_max} the scaled envelopes are ({:e}, {:e}, {:e}) against epsilon {epsilon:e}",
                    last.sqrt_k_x, last.sqrt_k_y, last.k_h
                ),
            ));
        }
    }
    let overall_pass = checks.iter().all(|c| c.pass);
    Ok(EnvelopeReport {
        theorem: "prop-optimal".into(),
        sequence: seq.describe(),
        indices: op.plan.indices.clone(),
        epsilon,
        k_max,
        k0,
        rows,
        checks,
        kg: opts.constants.kg,
        provenance: Provenance::new(seq.describe(), opts),
        overall_pass,
    })
}

impl Report for EnvelopeReport {
    fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn overall_pass(&self) -> bool {
        self.overall_pass
    }

    fn csv(&self) -> String {
        let mut s = String::from("k,sqrt_k_x,sqrt_k_y,k_h,within\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{:e},{:e},{}", r.k, r.sqrt_k_x, r.sqrt_k_y, r.k_h, r.within);
        }
        s
    }

    fn plot_data(&self) -> String {
        let mut s = String::from("# k sqrt_k_x sqrt_k_y k_h\n");
        for r in &self.rows {
            let _ = writeln!(s, "{} {:e} {:e} {:e}", r.k, r.sqrt_k_x, r.sqrt_k_y, r.k_h);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub trial: usize,
    pub n: usize,
    /// ‖T‖ = largest row norm.
    pub norm: f64,
    pub second_row_norm: f64,
    pub c2_upper: f64,
    pub gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalCheck {
    pub row_norms: Vec<f64>,
    pub c2_upper: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub theorem: String,
    pub n_max: usize,
    pub gap_min: f64,
    /// Required margin δ in c₂ < ‖T‖ − δ.
    pub delta: f64,
    pub rows: Vec<GapRow>,
    pub min_gap: f64,
    pub orthogonal: OrthogonalCheck,
    pub provenance: Provenance,
    pub overall_pass: bool,
}

/// Margin every trial must clear.
const GAP_DELTA: f64 = 1e-3;

/// Draws T : ℓ₂ⁿ → ℓ_∞ⁿ with top row norm 1 and every other row norm at most
/// 1 − gap_min. Draws with a vanishing row are discarded.
fn sample_gap_instance(seed: u64, trial: usize, n: usize, gap_min: f64) -> DMatrix<f64> {
    for attempt in 0.. {
        let mut rng = substream(seed, "prop-second", ((trial as u64) << 16) | attempt);
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let top = rng.random_range(0..n);
        let mut ok = true;
        for i in 0..n {
            let norm = m.row(i).norm();
            if norm < 1e-12 {
                ok = false;
                break;
            }
            let target = if i == top { 1.0 } else { (1.0 - gap_min) * rng.random::<f64>() };
            m.row_mut(i).scale_mut(target / norm);
        }
        let mut norms: Vec<f64> = m.row_iter().map(|r| r.norm()).collect();
        norms.sort_by(|a, b| b.total_cmp(a));
        if ok && norms[0] - norms[1] >= gap_min {
            return m;
        }
    }
    unreachable!()
}

fn row_norms(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.row_iter().map(|r| r.norm()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Strict gap c₂(T) < ‖T‖ for random T : ℓ₂ⁿ → ℓ_∞ⁿ with a unique longest row,
/// trial dimensions cycling through 2..=n.
pub fn verify_prop_second(
    n: usize,
    trials: usize,
    gap_min: f64,
    oracle: &OracleConfig,
    opts: &VerifyOptions,
) -> Result<GapReport> {
    if !(2..=6).contains(&n) {
        return Err(Error::invalid(format!("dimension must lie in 2..=6, got {n}")));
    }
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if !(gap_min > 0.0 && gap_min < 1.0) {
        return Err(Error::invalid(format!("gap_min must lie in (0,1), got {gap_min}")));
    }
    let rows: Vec<GapRow> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let dim = 2 + trial % (n - 1);
            let m = sample_gap_instance(opts.seed, trial, dim, gap_min);
            let norms = row_norms(&m);
            let tm = TaggedMatrix::new(m, PNorm::Two, PNorm::Inf)?;
            let cfg = OracleConfig { seed: opts.seed ^ trial as u64, ..oracle.clone() };
            let c2 = gelfand_oracle(&tm, 2, &cfg)?.upper;
            let gap = norms[0] - c2;
            Ok(GapRow {
                trial,
                n: dim,
                norm: norms[0],
                second_row_norm: norms[1],
                c2_upper: c2,
                gap,
                pass: gap > GAP_DELTA,
            })
        })
        .collect::<Result<_>>()?;
    let min_gap = rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);

    let ortho = TaggedMatrix::new(
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.8, 0.6])),
        PNorm::Two,
        PNorm::Inf,
    )?;
    let c2 = gelfand_oracle(&ortho, 2, &OracleConfig { seed: opts.seed, ..oracle.clone() })?.upper;
    let expected = 0.8 / 1.64f64.sqrt();
    let orthogonal = OrthogonalCheck {
        row_norms: vec![1.0, 0.8, 0.6],
        c2_upper: c2,
        expected,
        pass: (c2 - expected).abs() <= 1e-4,
    };
    let overall_pass = rows.iter().all(|r| r.pass) && orthogonal.pass;
    Ok(GapReport {
        theorem: "prop-second".into(),
        n_max: n,
        gap_min,
        delta: GAP_DELTA,
        rows,
        min_gap,
        orthogonal,
        provenance: Provenance::new(format!("random rows, n <= {n}"), opts),
        overall_pass,
    })
}

impl Report for GapReport {
    fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn overall_pass(&self) -> bool {
        self.overall_pass
    }

    fn csv(&self) -> String {
        let mut s = String::from("trial,n,norm,second_row_norm,c2_upper,gap,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{}",
                r.trial, r.n, r.norm, r.second_row_norm, r.c2_upper, r.gap, r.pass
            );
        }
        s
    }

    fn plot_data(&self) -> String {
        let mut s = String::from("# trial norm second_row_norm c2_upper\n");
        for r in &self.rows {
            let _ = writeln!(s, "{} {:e} {:e} {:e}", r.trial, r.norm, r.second_row_norm, r.c2_upper);
        }
        s
    }
}
