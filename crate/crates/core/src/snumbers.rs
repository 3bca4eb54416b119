//! Closed-form s-number and summing-norm calculators.
//!
//! On Hilbert pairs every s-scale equals the singular values. For diagonal
//! maps ℓ_∞ⁿ → ℓ₁ⁿ the approximation and Gelfand numbers are tail sums, and
//! the Kolmogorov numbers agree with them because the transpose is again such
//! a diagonal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::linalg::PNorm;
use crate::operators::{analytic_remainder, BlockOperator, Instantiation, TaggedMatrix};
use crate::oracle::{approx_oracle, gelfand_oracle, kolmogorov_oracle, OracleConfig};
use crate::sequences::TypeExponents;
use crate::{Error, Result};

pub const DEFAULT_KG: f64 = 1.78222;

/// 𝔞 = √(2/π).
pub fn gauss_a() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

/// Numerical constants the calculators depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub kg: f64,
    /// κ_p keyed by the decimal spelling of p; κ₂ = 1 is implicit.
    pub kappa: BTreeMap<String, f64>,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            kg: DEFAULT_KG,
            kappa: BTreeMap::new(),
        }
    }
}

impl Constants {
    pub fn new(kg: f64, kappa: BTreeMap<String, f64>) -> Result<Self> {
        if !(kg >= 1.0 && kg.is_finite()) {
            return Err(Error::Config(format!("kg_constant must be at least 1, got {kg}")));
        }
        for (p, &v) in &kappa {
            let pv: f64 = p
                .parse()
                .map_err(|_| Error::Config(format!("kappa key `{p}` is not a number")))?;
            if pv < 2.0 {
                return Err(Error::Config(format!("kappa is only defined for p >= 2, got {p}")));
            }
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("kappa_{p} must lie in (0,1], got {v}")));
            }
            if pv == 2.0 && v != 1.0 {
                return Err(Error::Config(format!("kappa_2 is exactly 1, got {v}")));
            }
        }
        Ok(Self { kg, kappa })
    }

    pub fn gauss_a(&self) -> f64 {
        gauss_a()
    }

    pub fn kappa(&self, p: f64) -> Result<f64> {
        if p == 2.0 {
            return Ok(1.0);
        }
        self.kappa
            .iter()
            .find(|(k, _)| k.parse::<f64>().ok() == Some(p))
            .map(|(_, &v)| v)
            .ok_or_else(|| Error::Config(format!("kappa_{p} is not configured")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    A,
    C,
    D,
    T,
    X,
    Y,
    H,
    Pi2Gelfand,
    PitrGelfand,
    SchattenQApprox,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::parse("scale", format!("unknown scale `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SNumberRow {
    pub m: usize,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SNumberReport {
    pub scale: Scale,
    pub rows: Vec<SNumberRow>,
}

impl SNumberReport {
    /// Exact rows from a nonincreasing list of values.
    pub fn exact(scale: Scale, values: &[f64]) -> Self {
        Self {
            scale,
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| SNumberRow { m: i + 1, lower: v, upper: v, exact: true })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let scale = serde_json::to_value(self.scale).expect("scale serialises");
        let scale = scale.as_str().unwrap_or_default().to_string();
        let mut out = String::from("m,scale,lower,upper,exact\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.m, scale, r.lower, r.upper, r.exact));
        }
        out
    }
}

/// Singular values of an ℓ₂ → ℓ₂ matrix, nonincreasing.
pub fn singular_values(m: &TaggedMatrix) -> Result<Vec<f64>> {
    if !m.is_hilbert() {
        return Err(Error::invalid("singular values need l2 tags on both sides"));
    }
    Ok(linalg::singular_values(&m.entries))
}

fn check_diagonal(d: &[f64]) -> Result<()> {
    if d.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("diagonal entries must be finite and nonnegative"));
    }
    if d.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("diagonal must be nonincreasing"));
    }
    Ok(())
}

fn check_index(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!("index {m} outside 1..={n}")));
    }
    Ok(())
}

/// a_m = c_m = d_m of diag(d) : ℓ_∞ⁿ → ℓ₁ⁿ, which is Σ_{i ≥ m} d_i.
pub fn diag_inf1_snumber(d: &[f64], m: usize) -> Result<f64> {
    check_diagonal(d)?;
    check_index(m, d.len())?;
    Ok(d[m - 1..].iter().sum())
}

/// (Σ_{i ≥ m} d_i^q)^{1/q}, the distance in Schatten-q norm from diag(d) to
/// the operators of rank below m.
pub fn schatten_q_tail(d: &[f64], m: usize, q: f64) -> Result<f64> {
    check_diagonal(d)?;
    check_index(m, d.len())?;
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("Schatten exponent must be at least 1, got {q}")));
    }
    let tail = &d[m - 1..];
    Ok(if q.is_infinite() {
        tail[0]
    } else {
        tail.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    })
}

/// π₂ of diag(d) : ℓ_∞ⁿ → ℓ₂ⁿ, which is ‖d‖₂.
pub fn pi2_diag_inf2(d: &[f64]) -> Result<f64> {
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("diagonal entries must be finite"));
    }
    Ok(linalg::vec_norm(d, linalg::PNorm::Two))
}

/// [κ_p‖d‖₂, ‖d‖₂] for π_p of diag(d) : ℓ_∞ⁿ → ℓ₂ⁿ, p ≥ 2.
pub fn pi_p_diag_bounds(d: &[f64], p: f64, constants: &Constants) -> Result<Interval> {
    if !(p >= 2.0) {
        return Err(Error::invalid(format!("p must be at least 2, got {p}")));
    }
    let kappa = constants.kappa(p)?;
    let hs = pi2_diag_inf2(d)?;
    Ok(Interval { lower: kappa * hs, upper: hs })
}

/// [‖M‖_q, √(π/2)·‖M‖_q] for π_{t,r} of a Hilbert-space matrix.
pub fn pitr_hilbert_bounds(m: &TaggedMatrix, t: f64, r: f64) -> Result<Interval> {
    let q = TypeExponents::new(t, r)?.q;
    let s = singular_values(m)?;
    let norm = s.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q);
    Ok(Interval { lower: norm, upper: norm / gauss_a() })
}

/// x_k(u) ≤ π₂(u)/√k.
pub fn weyl_upper(pi2: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(pi2 / (k as f64).sqrt())
}

/// a_k ≤ ν/k for a Hilbert-space operator of nuclear norm ν.
pub fn hilbertnum_upper_from_nuclear(nu: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(nu / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub k: usize,
    pub x_hat: f64,
    pub y_hat: f64,
    pub h_hat: f64,
}

/// Upper envelopes for x_k, y_k, h_k of a (c₀, ℓ₁) model.
///
/// With tail(N) the norm of T − P_N T P_N (positional entries past N plus the
/// analytic remainder), x̂_k = ŷ_k = min_{N<k} K_G·tail(N)/√(k−N) and
/// ĥ_k = min_{N<k} K_G²·tail(N)/(k−N).
pub fn prop12_decay_envelope(
    op: &BlockOperator,
    k_max: usize,
    constants: &Constants,
) -> Result<Vec<EnvelopeRow>> {
    if op.instantiation != Instantiation::C0L1 {
        return Err(Error::invalid("decay envelopes need the (c0, l1) instantiation"));
    }
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let diag = op.positional_diagonal();
    let remainder = analytic_remainder(op)?;
    // Suffix sums from the far end so rounding never breaks monotonicity.
    let mut suffix = vec![0.0; diag.len() + 1];
    for i in (0..diag.len()).rev() {
        suffix[i] = suffix[i + 1] + diag[i];
    }
    let tails: Vec<f64> = (0..k_max).map(|n| suffix[n.min(diag.len())] + remainder).collect();
    let kg = constants.kg;
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut x = f64::INFINITY;
        let mut h = f64::INFINITY;
        for (n, &t) in tails.iter().enumerate().take(k) {
            let gap = (k - n) as f64;
            x = x.min(kg * t / gap.sqrt());
            h = h.min(kg * kg * t / gap);
        }
        rows.push(EnvelopeRow { k, x_hat: x, y_hat: x, h_hat: h });
    }
    Ok(rows)
}

/// Sorted |d_i| when `m` is square and diagonal.
fn diagonal_of(m: &TaggedMatrix) -> Option<Vec<f64>> {
    let e = &m.entries;
    if !e.is_square() {
        return None;
    }
    let n = e.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && e[(i, j)] != 0.0 {
                return None;
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| e[(i, i)].abs()).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    Some(d)
}

/// Rows m = 1..=n of one s-scale of `m`.
///
/// Hilbert pairs and ℓ_∞ → ℓ₁ diagonals use closed forms. Approximation,
/// Gelfand and Kolmogorov numbers of other small matrices come from the
/// width oracles as intervals. The (t,r)-summing scale needs `exponents`;
/// the Schatten scale reads q from them.
pub fn snumber_report(
    m: &TaggedMatrix,
    scale: Scale,
    exponents: Option<TypeExponents>,
    cfg: &OracleConfig,
) -> Result<SNumberReport> {
    let n = m.rows().min(m.cols());
    let tails = |v: &[f64], q: f64| -> Result<Vec<f64>> { (1..=v.len()).map(|k| schatten_q_tail(v, k, q)).collect() };
    let need_q = || exponents.ok_or_else(|| Error::invalid("this scale needs --t and --r")).map(|e| e.q);
    if m.is_hilbert() {
        let s = singular_values(m)?;
        return Ok(match scale {
            Scale::A | Scale::C | Scale::D | Scale::T | Scale::X | Scale::Y | Scale::H => {
                SNumberReport::exact(scale, &s)
            }
            Scale::Pi2Gelfand => SNumberReport::exact(scale, &tails(&s, 2.0)?),
            Scale::SchattenQApprox => SNumberReport::exact(scale, &tails(&s, need_q()?)?),
            Scale::PitrGelfand => {
                let t = tails(&s, need_q()?)?;
                SNumberReport {
                    scale,
                    rows: t
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| SNumberRow { m: i + 1, lower: v, upper: v / gauss_a(), exact: v == 0.0 })
                        .collect(),
                }
            }
        });
    }
    if m.p_dom == PNorm::Inf && m.p_cod == PNorm::One && matches!(scale, Scale::A | Scale::C | Scale::D) {
        if let Some(d) = diagonal_of(m) {
            return Ok(SNumberReport::exact(scale, &tails(&d, 1.0)?));
        }
    }
    let oracle = match scale {
        Scale::A => approx_oracle,
        Scale::C => gelfand_oracle,
        Scale::D => kolmogorov_oracle,
        _ => {
            return Err(Error::invalid(format!(
                "scale {scale:?} is only available for l2 -> l2 matrices"
            )))
        }
    };
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        let r = oracle(m, k, cfg)?;
        rows.push(SNumberRow { m: k, lower: r.lower, upper: r.upper, exact: r.lower == r.upper });
    }
    Ok(SNumberReport { scale, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::PNorm;
    use crate::operators::{build_nocotype, build_twosum};
    use crate::sequences::DecaySequence;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn hilbert(m: DMatrix<f64>) -> TaggedMatrix {
        TaggedMatrix::new(m, PNorm::Two, PNorm::Two).unwrap()
    }

    #[test]
    fn singular_value_examples() {
        let d = hilbert(DMatrix::from_diagonal(&nalgebra::dvector![3.0, 2.0, 1.0]));
        assert_eq!(singular_values(&d).unwrap(), vec![3.0, 2.0, 1.0]);
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let rot = hilbert(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]));
        for v in singular_values(&rot).unwrap() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
        let tagged = TaggedMatrix::new(DMatrix::identity(2, 2), PNorm::Inf, PNorm::Two).unwrap();
        assert!(singular_values(&tagged).is_err());
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let mut rng = crate::rng::substream(1, "snumbers-test", 0);
        for _ in 0..20 {
            let m = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sv = singular_values(&hilbert(m.clone())).unwrap();
            let mut eig: Vec<f64> = (m.transpose() * &m)
                .symmetric_eigenvalues()
                .iter()
                .map(|v| v.max(0.0).sqrt())
                .collect();
            eig.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in sv.iter().zip(&eig) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn best_rank_truncation_matches_sigma() {
        let mut rng = crate::rng::substream(2, "snumbers-test", 0);
        let m = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let svd = m.clone().svd(true, true);
        let sv = singular_values(&hilbert(m.clone())).unwrap();
        let (u, v) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for k in 1..5 {
            let mut s = DMatrix::zeros(5, 5);
            for &i in &order[..k - 1] {
                s += svd.singular_values[i] * u.column(i) * v.row(i);
            }
            let err = linalg::singular_values(&(&m - s))[0];
            assert_abs_diff_eq!(err, sv[k - 1], epsilon = 1e-10);
        }
    }

    #[test]
    fn diagonal_formulas() {
        assert_eq!(diag_inf1_snumber(&[3.0, 2.0, 1.0], 1).unwrap(), 6.0);
        assert_eq!(diag_inf1_snumber(&[3.0, 2.0, 1.0], 3).unwrap(), 1.0);
        assert_eq!(diag_inf1_snumber(&[0.7], 1).unwrap(), 0.7);
        assert!(diag_inf1_snumber(&[3.0, 2.0], 3).is_err());
        assert!(diag_inf1_snumber(&[1.0, 2.0], 1).is_err());

        assert_abs_diff_eq!(schatten_q_tail(&[3.0, 2.0, 1.0], 2, 2.0).unwrap(), 5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(schatten_q_tail(&[3.0, 2.0, 1.0], 1, 1.0).unwrap(), 6.0);
        assert_eq!(schatten_q_tail(&[3.0, 2.0, 1.0], 1, f64::INFINITY).unwrap(), 3.0);
        assert!(schatten_q_tail(&[3.0], 1, 0.5).is_err());

        assert_eq!(pi2_diag_inf2(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(pi2_diag_inf2(&[1.0, 0.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(pi2_diag_inf2(&[1.0, 1.0, 1.0]).unwrap(), 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn pi_p_intervals() {
        let mut c = Constants::default();
        assert_eq!(pi_p_diag_bounds(&[3.0, 4.0], 2.0, &c).unwrap(), Interval { lower: 5.0, upper: 5.0 });
        assert!(matches!(pi_p_diag_bounds(&[3.0, 4.0], 4.0, &c), Err(Error::Config(_))));
        c.kappa.insert("4".into(), 0.5);
        assert_eq!(pi_p_diag_bounds(&[3.0, 4.0], 4.0, &c).unwrap(), Interval { lower: 2.5, upper: 5.0 });
        assert_eq!(pi_p_diag_bounds(&[0.0, 0.0], 2.0, &c).unwrap(), Interval { lower: 0.0, upper: 0.0 });
        assert!(pi_p_diag_bounds(&[1.0], 1.5, &c).is_err());
        assert!(Constants::new(1.7, BTreeMap::from([("2".to_string(), 0.9)])).is_err());
        assert!(Constants::new(0.5, BTreeMap::new()).is_err());
        assert_abs_diff_eq!(gauss_a().powi(2), 2.0 / std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn mitiagin_intervals() {
        let one = hilbert(DMatrix::identity(1, 1));
        let i = pitr_hilbert_bounds(&one, 2.0, 2.0).unwrap();
        assert_eq!(i.lower, 1.0);
        assert_abs_diff_eq!(i.upper, 1.2533141373155, epsilon = 1e-12);
        let zero = hilbert(DMatrix::zeros(2, 2));
        assert_eq!(pitr_hilbert_bounds(&zero, 2.0, 2.0).unwrap(), Interval { lower: 0.0, upper: 0.0 });
        let two = hilbert(DMatrix::identity(2, 2));
        let i = pitr_hilbert_bounds(&two, 4.0, 2.0).unwrap();
        assert_abs_diff_eq!(i.lower, 2f64.powf(0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(i.upper / i.lower, (std::f64::consts::PI / 2.0).sqrt(), epsilon = 1e-12);
        assert!(pitr_hilbert_bounds(&two, 2.0, 1.0).is_err());
    }

    #[test]
    fn weyl_and_nuclear() {
        assert_eq!(weyl_upper(5.0, 4).unwrap(), 2.5);
        assert_eq!(weyl_upper(0.0, 7).unwrap(), 0.0);
        assert_eq!(weyl_upper(DEFAULT_KG * 1.0, 1).unwrap(), 1.78222);
        assert_eq!(hilbertnum_upper_from_nuclear(6.0, 3).unwrap(), 2.0);
        assert_eq!(hilbertnum_upper_from_nuclear(0.0, 5).unwrap(), 0.0);
        assert_eq!(hilbertnum_upper_from_nuclear(6.0, 2).unwrap(), 3.0);
        assert!(weyl_upper(1.0, 0).is_err());
    }

    #[test]
    fn scaling_covariance() {
        let d = [3.0, 2.0, 0.5];
        let l = 2.75;
        let ds: Vec<f64> = d.iter().map(|v| v * l).collect();
        for m in 1..=3 {
            assert_abs_diff_eq!(diag_inf1_snumber(&ds, m).unwrap(), l * diag_inf1_snumber(&d, m).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(schatten_q_tail(&ds, m, 4.0).unwrap(), l * schatten_q_tail(&d, m, 4.0).unwrap(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(pi2_diag_inf2(&ds).unwrap(), l * pi2_diag_inf2(&d).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn envelope_examples() {
        let table = DecaySequence::table(vec![1.0, 0.5]).unwrap();
        let op = build_nocotype(&table, 1).unwrap();
        let n1 = op.plan.indices[0];
        let env = prop12_decay_envelope(&op, n1 + 5, &Constants::default()).unwrap();
        assert!(env[n1..].iter().all(|r| r.x_hat == 0.0 && r.h_hat == 0.0));

        let op = build_nocotype(&DecaySequence::geometric(0.5).unwrap(), 2).unwrap();
        let n1 = op.plan.indices[0];
        let env = prop12_decay_envelope(&op, n1 + 1, &Constants::default()).unwrap();
        let block2: f64 = op.blocks[1].diagonal.iter().sum::<f64>() + analytic_remainder(&op).unwrap();
        let at = env[n1].x_hat;
        assert!(at <= DEFAULT_KG * block2 + 1e-15);
        assert!(env.windows(2).all(|w| w[1].x_hat <= w[0].x_hat && w[1].h_hat <= w[0].h_hat));
        assert!(prop12_decay_envelope(&build_twosum(&table, 1).unwrap(), 5, &Constants::default()).is_err());
    }

    #[test]
    fn report_dispatch() {
        let cfg = OracleConfig { restarts: 4, ..OracleConfig::default() };
        let h = TaggedMatrix::diagonal(&[1.0, 3.0, 2.0], PNorm::Two, PNorm::Two).unwrap();
        let r = snumber_report(&h, Scale::X, None, &cfg).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.upper).collect::<Vec<_>>(), vec![3.0, 2.0, 1.0]);
        let r = snumber_report(&h, Scale::Pi2Gelfand, None, &cfg).unwrap();
        assert_abs_diff_eq!(r.rows[1].lower, 5f64.sqrt(), epsilon = 1e-12);
        assert!(snumber_report(&h, Scale::PitrGelfand, None, &cfg).is_err());
        let d = TaggedMatrix::diagonal(&[3.0, 2.0, 1.0], PNorm::Inf, PNorm::One).unwrap();
        let r = snumber_report(&d, Scale::C, None, &cfg).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.lower).collect::<Vec<_>>(), vec![6.0, 3.0, 1.0]);
        assert!(r.rows.iter().all(|r| r.exact));
        let g = TaggedMatrix::new(nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]), PNorm::Two, PNorm::Inf).unwrap();
        let r = snumber_report(&g, Scale::A, None, &cfg).unwrap();
        assert!(r.rows.iter().all(|r| r.lower <= r.upper));
        assert!(snumber_report(&g, Scale::H, None, &cfg).is_err());
        assert_eq!("pi2_gelfand".parse::<Scale>().unwrap(), Scale::Pi2Gelfand);
    }
}
