use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, vec_norm, PNorm};
use crate::operators::TaggedMatrix;
use crate::rng::substream;
use crate::Result;

use super::{gaussian, pattern_search, OracleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pi2Result {
    /// Best ratio found; a lower bound for π₂(M).
    pub value: f64,
    /// Ratio of the canonical basis family.
    pub canonical: f64,
    /// Best ratio over the sampled and refined families.
    pub best_sampled: f64,
    pub families: usize,
}

/// (Σ‖M x_i‖²)^{1/2} divided by the weak ℓ₂ norm of the family given by
/// the columns of `x`; 0 for a zero family.
///
/// The weak norm sup_{‖x*‖ ≤ 1} ‖Xᵀx*‖₂ is attained at a vertex of the dual
/// unit ball: ±e_j for an ℓ_∞ domain, sign vectors for an ℓ₁ domain, and it
/// is σ_max(X) for an ℓ₂ domain.
pub fn pi2_family_ratio(m: &TaggedMatrix, x: &DMatrix<f64>) -> f64 {
    let weak = match m.p_dom {
        PNorm::Inf => x.row_iter().map(|r| r.norm()).fold(0.0, f64::max),
        PNorm::Two => linalg::singular_values(x).first().copied().unwrap_or(0.0),
        PNorm::One => {
            let n = x.nrows();
            (0..1u64 << (n - 1))
                .map(|mask| {
                    let s = nalgebra::DVector::from_fn(n, |i, _| {
                        if i == 0 || mask & (1 << (i - 1)) == 0 { 1.0 } else { -1.0 }
                    });
                    (x.transpose() * s).norm()
                })
                .fold(0.0, f64::max)
        }
    };
    if weak <= 0.0 {
        return 0.0;
    }
    let images = &m.entries * x;
    let strong = images
        .column_iter()
        .map(|c| vec_norm(c.iter(), m.p_cod).powi(2))
        .sum::<f64>()
        .sqrt();
    strong / weak
}

/// Lower bound for π₂(M) from the canonical family and `rounds` refined
/// random families of `family_size` vectors.
pub fn pi2_lower_oracle(m: &TaggedMatrix, family_size: usize, rounds: usize, seed: u64) -> Result<Pi2Result> {
    if family_size == 0 {
        return Err(crate::Error::invalid("family size must be at least 1"));
    }
    let n = m.cols();
    let canonical = pi2_family_ratio(m, &DMatrix::identity(n, n));
    let cfg = OracleConfig { tol: 1e-6, max_evals: 400, ..OracleConfig::default() };
    let objective = |x: &DMatrix<f64>| -> Result<f64> { Ok(-pi2_family_ratio(m, x)) };
    let keep = |x: DMatrix<f64>| Some(x);
    let sampled: Vec<f64> = (0..rounds)
        .into_par_iter()
        .map(|idx| {
            let mut rng = substream(seed, "pi2", idx as u64);
            let start = gaussian(&mut rng, n, family_size);
            pattern_search(start, &objective, &keep, &mut rng, &cfg).map(|(_, v, _)| -v)
        })
        .collect::<Result<_>>()?;
    let best_sampled = sampled.into_iter().fold(0.0, f64::max);
    Ok(Pi2Result {
        value: canonical.max(best_sampled),
        canonical,
        best_sampled,
        families: rounds + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn examples() {
        let d = TaggedMatrix::diagonal(&[3.0, 4.0], PNorm::Inf, PNorm::Two).unwrap();
        let r = pi2_lower_oracle(&d, 3, 4, 1).unwrap();
        assert_abs_diff_eq!(r.canonical, 5.0, epsilon = 1e-12);
        assert!(r.best_sampled <= 5.0 + 1e-9);
        let z = TaggedMatrix::new(DMatrix::zeros(2, 2), PNorm::Inf, PNorm::Two).unwrap();
        assert_eq!(pi2_lower_oracle(&z, 2, 2, 1).unwrap().value, 0.0);
        assert!(pi2_lower_oracle(&d, 0, 2, 1).is_err());
    }

    #[test]
    fn hilbert_schmidt_on_l2() {
        // On ℓ₂ the π₂ norm is the Hilbert–Schmidt norm, attained by an orthonormal family.
        let d = TaggedMatrix::diagonal(&[1.0, 2.0, 2.0], PNorm::Two, PNorm::Two).unwrap();
        let r = pi2_lower_oracle(&d, 3, 4, 2).unwrap();
        assert_abs_diff_eq!(r.canonical, 3.0, epsilon = 1e-12);
        assert!(r.value <= 3.0 + 1e-9);
    }
}
