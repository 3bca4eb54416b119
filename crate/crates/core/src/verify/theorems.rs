use crate::operators::{analytic_remainder, build, truncate, BlockOperator};
use crate::sequences::{Alpha, DecaySequence, TypeExponents, Variant};
use crate::snumbers::{gauss_a, singular_values};
use crate::{Error, Result};

use super::{
    input_is_convex, le_tol, CheckRow, ClaimForm, ConstantsUsed, NamedCheck, PlanSummary, Provenance,
    TheoremCheckReport, VerifyOptions,
};

/// Dense SVD cross-checks run only up to this total dimension.
const SVD_CHECK_DIM: usize = 512;

fn plan_summary(op: &BlockOperator, blocks_checked: usize) -> PlanSummary {
    let doc = op.document();
    PlanSummary {
        indices: op.plan.indices.clone(),
        thresholds: op.plan.thresholds.clone(),
        blocks_checked,
        q_exponent: op.plan.q(),
        minorant_horizon: doc.minorant_horizon,
        chord_horizon: doc.chord_horizon,
    }
}

fn resolve_m_max(m_max: Option<usize>, nk: usize) -> Result<usize> {
    let m = m_max.unwrap_or(nk);
    if m == 0 || m > nk {
        return Err(Error::invalid(format!("m_max {m} outside 1..={nk} (the truncation)")));
    }
    Ok(m)
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn interval_check(rows: &[CheckRow]) -> NamedCheck {
    let bad = rows
        .iter()
        .filter(|r| !le_tol(r.certified_lower, r.certified_upper, 1e-9))
        .map(|r| r.m)
        .collect::<Vec<_>>();
    NamedCheck::new(
        "interval_sanity",
        bad.is_empty(),
        if bad.is_empty() {
            "certified lower <= certified upper on every row".to_string()
        } else {
            format!("inverted intervals at m = {bad:?}")
        },
    )
}

fn finish(
    theorem: &str,
    op: &BlockOperator,
    seq: &DecaySequence,
    form: ClaimForm,
    certification: &str,
    blocks: usize,
    rows: Vec<CheckRow>,
    mut checks: Vec<NamedCheck>,
    constants_used: ConstantsUsed,
    opts: &VerifyOptions,
) -> TheoremCheckReport {
    checks.push(interval_check(&rows));
    let overall_pass = rows.iter().all(|r| r.pass) && checks.iter().all(|c| c.pass);
    TheoremCheckReport {
        theorem: theorem.into(),
        instantiation: op.instantiation.name().into(),
        sequence: seq.describe(),
        claim_form: form,
        certification: certification.into(),
        plan: plan_summary(op, blocks),
        per_index: rows,
        checks,
        constants_used,
        provenance: Provenance::new(seq.describe(), opts),
        overall_pass,
    }
}

fn all_rows(name: &str, ms: &[usize], ok: impl Fn(usize) -> bool, what: &str) -> NamedCheck {
    let bad: Vec<usize> = ms.iter().copied().filter(|&m| !ok(m)).collect();
    let detail = if bad.is_empty() {
        format!("{what} for every m")
    } else {
        format!("{what} fails at m = {:?}", &bad[..bad.len().min(20)])
    };
    NamedCheck::new(name, bad.is_empty(), detail)
}

/// Checks of the controlled construction in (ℓ₂, ℓ₂).
///
/// Every s-scale of a Hilbert-space diagonal is its sorted entry list, so the
/// model's σ_m is exact. Blocks past K only add entries ≤ α_{n_K+1}, which
/// gives σ_m ≤ max(σ_m(model), α_{n_K+1}) for the full operator.
pub fn verify_controlled(
    seq: &DecaySequence,
    blocks: usize,
    m_max: Option<usize>,
    opts: &VerifyOptions,
) -> Result<TheoremCheckReport> {
    opts.check()?;
    let op = build(seq, Variant::Controlled, blocks, None, opts.type_constants, 0)?;
    let nk = op.plan.n(blocks);
    let mm = resolve_m_max(m_max, nk)?;
    let sigma = sorted_desc(op.positional_diagonal());
    let beyond = seq.eval(nk + 1);
    let tol = opts.tolerance;
    let rows: Vec<CheckRow> = (1..=mm)
        .map(|m| {
            let s = sigma[m - 1];
            let claimed_lower = seq.eval(m) / 9.0;
            let claimed_upper = 3.0 * seq.eval(m.div_ceil(6));
            let upper = s.max(beyond);
            CheckRow {
                m,
                block: op.plan.block_of(m).unwrap_or(0),
                case: None,
                claimed_lower,
                certified_lower: s,
                certified_upper: upper,
                claimed_upper,
                pass: le_tol(claimed_lower, s, tol) && le_tol(upper, claimed_upper, tol),
            }
        })
        .collect();
    let ms: Vec<usize> = (1..=mm).collect();
    let a = |m: usize| seq.eval(m);
    let s = |m: usize| sigma[m - 1];
    let mut checks = vec![
        all_rows("weyl_chang_lower", &ms, |m| le_tol(a(m) / (9.0 * (m as f64).sqrt()), s(m), tol), "alpha_m/(9 sqrt m) <= sigma_m"),
        all_rows("hilbert_lower", &ms, |m| le_tol(a(m) / (9.0 * m as f64), s(m), tol), "alpha_m/(9m) <= sigma_m"),
        all_rows("sharp_lower", &ms, |m| le_tol(a(m), s(m), tol), "alpha_m <= sigma_m"),
    ];
    let norm = op.norm();
    checks.push(NamedCheck::new(
        "norm_bound",
        le_tol(norm, 2.0 * seq.eval(1), tol),
        format!("||T|| = {norm:e}, 2 alpha_1 = {:e}", 2.0 * seq.eval(1)),
    ));
    let dim = op.total_dim();
    checks.push(if dim <= SVD_CHECK_DIM {
        let dense = truncate(&op, blocks)?;
        let sv = singular_values(&dense)?;
        let dev = sv.iter().zip(&sigma).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        NamedCheck::new("svd_cross_check", dev <= 1e-10, format!("max deviation {dev:e} over dimension {dim}"))
    } else {
        NamedCheck::new("svd_cross_check", true, format!("skipped: dimension {dim} above {SVD_CHECK_DIM}"))
    });
    let constants_used = ConstantsUsed {
        kg: opts.constants.kg,
        p: 2.0,
        kappa_p: 1.0,
        c_lower: 1.0 / 9.0,
        c: opts.type_constants.c,
        c1: opts.type_constants.c1,
        gauss_a: gauss_a(),
    };
    Ok(finish(
        "controlled",
        &op,
        seq,
        ClaimForm::Convex,
        "exact",
        blocks,
        rows,
        checks,
        constants_used,
        opts,
    ))
}

/// Parameters distinguishing the three diagonal-table constructions.
struct DiagonalClaims {
    theorem: &'static str,
    variant: Variant,
    exponents: Option<TypeExponents>,
    /// Exponent the block tails telescope in: 2, 1 or q.
    power: f64,
    p: f64,
    kappa: f64,
    lower_factor: f64,
    upper_factor: f64,
    c_convex: f64,
    c_general: f64,
    c_upper: f64,
}

struct DiagonalRun {
    report: TheoremCheckReport,
    op: BlockOperator,
}

fn pw(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else {
        x.powf(e)
    }
}

fn root(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else {
        x.powf(1.0 / e)
    }
}

fn suffix_powers(values: &[f64], e: f64) -> Vec<f64> {
    let mut s = vec![0.0; values.len() + 1];
    for i in (0..values.len()).rev() {
        s[i] = s[i + 1] + pw(values[i], e);
    }
    s
}

fn case_label(op: &BlockOperator, k: usize, m: usize) -> Option<String> {
    let mk = *op.plan.thresholds.get(k - 1)?;
    let nk = op.plan.n(k);
    Some(
        match mk {
            Some(t) if m <= t => "i",
            Some(t) if 3 * t >= nk => "ii",
            _ => "iii",
        }
        .into(),
    )
}

/// Lower bounds by restriction to single blocks, upper bounds by removing
/// the m − 1 largest entries of the model plus the analytic remainder.
///
/// One block past `blocks` is built as look-ahead: for m between m_K and n_K
/// the block restriction that certifies the claim is block K + 1.
fn verify_diagonal(
    seq: &DecaySequence,
    blocks: usize,
    m_max: Option<usize>,
    spec: DiagonalClaims,
    opts: &VerifyOptions,
) -> Result<DiagonalRun> {
    opts.check()?;
    if blocks == 0 {
        return Err(Error::invalid("at least one block is required"));
    }
    let op = build(seq, spec.variant, blocks + 1, spec.exponents, opts.type_constants, 0)?;
    let nk = op.plan.n(blocks);
    let mm = resolve_m_max(m_max, nk)?;
    let form = match opts.form {
        ClaimForm::Auto if input_is_convex(seq) => ClaimForm::Convex,
        ClaimForm::Auto => ClaimForm::General,
        f => f,
    };
    let (c_lower, stretch) = match form {
        ClaimForm::General => (spec.c_general, 18),
        _ => (spec.c_convex, 9),
    };
    let e = spec.power;
    let suffixes: Vec<Vec<f64>> = op.blocks.iter().map(|b| suffix_powers(&b.diagonal, e)).collect();
    let union = suffix_powers(&sorted_desc(op.positional_diagonal()), e);
    let remainder = analytic_remainder(&op)?;
    let tol = opts.tolerance;

    let rows: Vec<CheckRow> = (1..=mm)
        .map(|m| {
            let lower = suffixes
                .iter()
                .filter(|s| s.len() > m)
                .map(|s| root(s[m - 1], e))
                .fold(0.0, f64::max)
                * spec.lower_factor;
            let upper = spec.upper_factor * (root(union[m - 1], e) + remainder);
            let claimed_lower = c_lower * seq.eval(stretch * m);
            let claimed_upper = spec.c_upper * seq.eval((4 * m).div_ceil(5));
            let block = op.plan.block_of(m).unwrap_or(0);
            CheckRow {
                m,
                block,
                case: case_label(&op, block, m),
                claimed_lower,
                certified_lower: lower,
                certified_upper: upper,
                claimed_upper,
                pass: le_tol(claimed_lower, lower, tol) && le_tol(upper, claimed_upper, tol),
            }
        })
        .collect();

    // Σ_{j ≥ m} β_{jk}^e = α_{m+2n_{k−1}}^e − α_{n_k+2n_{k−1}+1}^e on the effective sequence.
    let scale = pw(op.effective.alpha(1)?, e).max(1.0);
    let mut worst: f64 = 0.0;
    for (k, s) in suffixes.iter().enumerate() {
        let shift = 2 * op.plan.n(k);
        let nk = op.plan.n(k + 1);
        let end = pw(op.effective.alpha(nk + shift + 1)?, e);
        for m in 1..=nk {
            let rhs = pw(op.effective.alpha(m + shift)?, e) - end;
            worst = worst.max((s[m - 1] - rhs).abs());
        }
    }
    let checks = vec![NamedCheck::new(
        "telescoping",
        worst <= 1e-12 * scale,
        format!("max deviation {worst:e} of block tail power sums (exponent {e})"),
    )];
    let constants_used = ConstantsUsed {
        kg: opts.constants.kg,
        p: spec.p,
        kappa_p: spec.kappa,
        c_lower,
        c: opts.type_constants.c,
        c1: opts.type_constants.c1,
        gauss_a: gauss_a(),
    };
    let report = finish(
        spec.theorem,
        &op,
        seq,
        form,
        "bounds",
        blocks,
        rows,
        checks,
        constants_used,
        opts,
    );
    Ok(DiagonalRun { report, op })
}

/// Checks of the 2-summing construction for the Π_p-Gelfand numbers, p ≥ 2.
///
/// Lower: κ_p times the Hilbert–Schmidt tail of a block. Upper: π₂ of the
/// model minus its m − 1 largest entries, plus the remainder.
pub fn verify_twosum(
    seq: &DecaySequence,
    blocks: usize,
    m_max: Option<usize>,
    p: f64,
    opts: &VerifyOptions,
) -> Result<TheoremCheckReport> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must lie in [2, inf), got {p}")));
    }
    let kappa = opts.constants.kappa(p)?;
    let spec = DiagonalClaims {
        theorem: "twosum",
        variant: Variant::Twosum,
        exponents: None,
        power: 2.0,
        p,
        kappa,
        lower_factor: kappa,
        upper_factor: 1.0,
        c_convex: 7.0 / 99.0 * kappa,
        c_general: 7.0 / 198.0 * kappa,
        c_upper: 3.0,
    };
    Ok(verify_diagonal(seq, blocks, m_max, spec, opts)?.report)
}

/// Checks of the (c₀, ℓ₁) construction for Gelfand and approximation numbers.
pub fn verify_nocotype(
    seq: &DecaySequence,
    blocks: usize,
    m_max: Option<usize>,
    opts: &VerifyOptions,
) -> Result<TheoremCheckReport> {
    let spec = DiagonalClaims {
        theorem: "nocotype",
        variant: Variant::Nocotype,
        exponents: None,
        power: 1.0,
        p: 2.0,
        kappa: 1.0,
        lower_factor: 1.0,
        upper_factor: 1.0,
        c_convex: 49.0 / 1100.0,
        c_general: 1.0 / 50.0,
        c_upper: 4.0,
    };
    Ok(verify_diagonal(seq, blocks, m_max, spec, opts)?.report)
}

/// Checks of the (ℓ₂, ℓ₂) construction for the Π_{t,r} s-numbers.
///
/// On Hilbert space ‖u‖_q ≤ π_{t,r}(u) ≤ √(π/2)·‖u‖_q, so the lower bound
/// is a Schatten-q block tail and the upper bound carries the √(π/2) factor.
pub fn verify_type(
    seq: &DecaySequence,
    blocks: usize,
    m_max: Option<usize>,
    t: f64,
    r: f64,
    opts: &VerifyOptions,
) -> Result<TheoremCheckReport> {
    let ex = TypeExponents::new(t, r)?;
    let tc = opts.type_constants;
    let spec = DiagonalClaims {
        theorem: "type",
        variant: Variant::Type,
        exponents: Some(ex),
        power: ex.q,
        p: 2.0,
        kappa: 1.0,
        lower_factor: 1.0,
        upper_factor: 1.0 / gauss_a(),
        c_convex: 7.0 / (66.0 * tc.c1),
        c_general: 1.0 / (20.0 * tc.c * tc.c),
        c_upper: 4.0,
    };
    let DiagonalRun { mut report, op } = verify_diagonal(seq, blocks, m_max, spec, opts)?;
    let target = (std::f64::consts::PI / 2.0).sqrt();
    let mut worst: f64 = 0.0;
    for row in &report.per_index {
        let k = op.plan.block_of(row.m).unwrap_or(1);
        let d = &op.blocks[k - 1].diagonal;
        let lo = crate::snumbers::schatten_q_tail(d, row.m, ex.q)?;
        if lo > 0.0 {
            worst = worst.max((lo / gauss_a() / lo - target).abs());
        }
    }
    let pass = worst <= 1e-12;
    report.checks.push(NamedCheck::new(
        "mitiagin_ratio",
        pass,
        format!("max |upper/lower - sqrt(pi/2)| = {worst:e}"),
    ));
    report.overall_pass &= pass;
    Ok(report)
}
