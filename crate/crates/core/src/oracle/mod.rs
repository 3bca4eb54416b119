//! Brute-force and optimisation oracles for small tagged matrices.
//!
//! Inner maximisations (restricted norms) are exact. Outer minimisations
//! over subspaces or low-rank approximants are heuristic: they return
//! certified upper bounds, and a lower bound only when a closed form or a
//! duality certificate applies (otherwise the lower bound is 0).

mod auerbach;
mod pi2;

pub use auerbach::{
    auerbach_basis, auerbach_basis_of_space, perturb_projection, AuerbachBasis,
    PerturbationInstance, PerturbationResult,
};
pub use pi2::{pi2_family_ratio, pi2_lower_oracle, Pi2Result};

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, orthogonal_complement, orthonormalize, restricted_norm, PNorm};
use crate::operators::TaggedMatrix;
use crate::rng::substream;
use crate::{Error, Result};

pub const DEFAULT_WIDTH_CAP: usize = 12;
pub const DEFAULT_AUERBACH_CAP: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Pattern-search step at which a restart counts as converged.
    pub tol: f64,
    /// Objective evaluations allowed per restart.
    pub max_evals: usize,
    pub dim_cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            seed: 0,
            tol: 1e-9,
            max_evals: 4000,
            dim_cap: DEFAULT_WIDTH_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub lower: f64,
    pub upper: f64,
    /// How the upper bound was attained.
    pub witness: String,
    /// Columns spanning the witness subspace, or rows of the approximant.
    pub witness_matrix: Vec<Vec<f64>>,
    pub restarts_used: usize,
    pub converged: bool,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn check_dims(m: &TaggedMatrix, k: usize, cfg: &OracleConfig) -> Result<()> {
    if m.rows().max(m.cols()) > cfg.dim_cap {
        return Err(Error::ResourceLimit(format!(
            "matrix {}x{} exceeds the oracle dimension cap {}",
            m.rows(),
            m.cols(),
            cfg.dim_cap
        )));
    }
    if k == 0 {
        return Err(Error::invalid("s-number index must be at least 1"));
    }
    Ok(())
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Random-direction pattern search minimising `f`; the step halves after a
/// round without improvement.
fn pattern_search(
    start: DMatrix<f64>,
    f: &dyn Fn(&DMatrix<f64>) -> Result<f64>,
    normalise: &dyn Fn(DMatrix<f64>) -> Option<DMatrix<f64>>,
    rng: &mut ChaCha8Rng,
    cfg: &OracleConfig,
) -> Result<(DMatrix<f64>, f64, bool)> {
    let (r, c) = start.shape();
    let mut x = start;
    let mut best = f(&x)?;
    let mut evals = 1;
    let mut step = 0.5;
    let trials = (2 * r * c).clamp(4, 24);
    while step > cfg.tol && evals < cfg.max_evals {
        let mut improved = false;
        'round: for _ in 0..trials {
            let mut g = gaussian(rng, r, c);
            let n = g.norm();
            if n == 0.0 {
                continue;
            }
            g /= n;
            for sign in [1.0, -1.0] {
                let Some(cand) = normalise(&x + sign * step * &g) else { continue };
                let v = f(&cand)?;
                evals += 1;
                if v < best {
                    best = v;
                    x = cand;
                    improved = true;
                    break 'round;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((x, best, step <= cfg.tol))
}

/// Best entry of an ordered list, ties to the earliest.
fn pick_min<T>(items: Vec<(f64, T)>) -> Option<(f64, T)> {
    items.into_iter().fold(None, |acc, (v, t)| match acc {
        Some((bv, bt)) if bv <= v => Some((bv, bt)),
        _ => Some((v, t)),
    })
}

/// Square diagonal matrix, as |d| sorted nonincreasing.
fn diagonal_entries(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return None;
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != 0.0 {
                return None;
            }
        }
    }
    let mut d: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)].abs()).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    Some(d)
}

/// Lower bound for c_m(M) backed by a closed form, else 0.
fn certified_gelfand_lower(m: &TaggedMatrix, k: usize) -> Result<(f64, bool)> {
    if k == 1 {
        return Ok((m.norm()?, true));
    }
    if k > m.cols() {
        return Ok((0.0, true));
    }
    if m.is_hilbert() {
        let s = linalg::singular_values(&m.entries);
        return Ok((s.get(k - 1).copied().unwrap_or(0.0), true));
    }
    if m.p_dom == PNorm::Inf && m.p_cod == PNorm::One {
        if let Some(d) = diagonal_entries(&m.entries) {
            return Ok((d[k - 1..].iter().sum(), true));
        }
    }
    Ok((0.0, false))
}

/// Gelfand number c_m(M) = inf over subspaces E of codimension < m of ‖M|_E‖.
pub fn gelfand_oracle(m: &TaggedMatrix, k: usize, cfg: &OracleConfig) -> Result<OracleResult> {
    check_dims(m, k, cfg)?;
    let n = m.cols();
    if k > n + 1 {
        return Err(Error::invalid(format!("index {k} exceeds dimension + 1 = {}", n + 1)));
    }
    if k == n + 1 {
        return Ok(OracleResult {
            lower: 0.0,
            upper: 0.0,
            witness: "E = {0}".into(),
            witness_matrix: Vec::new(),
            restarts_used: 0,
            converged: true,
        });
    }
    let (lower, exact) = certified_gelfand_lower(m, k)?;
    if k == 1 {
        return Ok(OracleResult {
            lower,
            upper: lower,
            witness: "E = whole domain".into(),
            witness_matrix: rows_of(&DMatrix::identity(n, n)),
            restarts_used: 0,
            converged: true,
        });
    }
    let codim = k - 1;
    let objective = |w: &DMatrix<f64>| -> Result<f64> {
        restricted_norm(&m.entries, &orthogonal_complement(w), m.p_dom, m.p_cod)
    };

    // Deterministic candidates: coordinate subspaces, the top right singular
    // vectors, and kernels of row subsets.
    let mut candidates: Vec<(f64, (String, DMatrix<f64>))> = Vec::new();
    for cols in (0..n).combinations(codim) {
        let w = DMatrix::from_fn(n, codim, |i, j| if i == cols[j] { 1.0 } else { 0.0 });
        candidates.push((objective(&w)?, (format!("coordinate subspace x_i = 0 for i in {cols:?}"), w)));
    }
    let svd = m.entries.clone().svd(false, true);
    if let Some(vt) = svd.v_t {
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        if order.len() >= codim {
            let w = DMatrix::from_fn(n, codim, |i, j| vt[(order[j], i)]);
            candidates.push((objective(&w)?, ("complement of top right singular vectors".into(), w)));
        }
    }
    if m.rows() >= codim {
        for rows in (0..m.rows()).combinations(codim) {
            let w = m.entries.select_rows(rows.iter()).transpose();
            if orthonormalize(&w).ncols() == codim {
                candidates.push((objective(&w)?, (format!("kernel of rows {rows:?}"), w)));
            }
        }
    }
    if !m.is_hilbert() {
        // Restricting M to ker S gives ‖M|_E‖ ≤ ‖M − S‖, so c_m never
        // exceeds the approximation search.
        let (_, _, s, _) = approx_search(m, k, cfg)?;
        let st = s.transpose();
        let off = st.ncols();
        let mut stacked = st.insert_columns(off, n, 0.0);
        for i in 0..n {
            stacked[(i, off + i)] = 1.0;
        }
        let q = orthonormalize(&stacked);
        let w = q.columns(0, codim).into_owned();
        candidates.push((objective(&w)?, ("kernel of the best approximant".into(), w)));
    }
    let (det_val, (det_desc, det_w)) = pick_min(candidates).expect("at least one candidate");

    let normalise = |w: DMatrix<f64>| {
        let q = orthonormalize(&w);
        (q.ncols() == codim).then_some(q)
    };
    let searches: Vec<Result<(DMatrix<f64>, f64, bool)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|idx| {
            let mut rng = substream(cfg.seed, "gelfand", idx as u64);
            let start = if idx == 0 {
                orthonormalize(&det_w)
            } else {
                loop {
                    if let Some(q) = normalise(gaussian(&mut rng, n, codim)) {
                        break q;
                    }
                }
            };
            pattern_search(start, &objective, &normalise, &mut rng, cfg)
        })
        .collect();
    let mut converged = cfg.restarts == 0;
    let mut found = vec![(det_val, (det_desc, det_w))];
    for (idx, s) in searches.into_iter().enumerate() {
        let (w, v, conv) = s?;
        converged |= conv;
        found.push((v, (format!("pattern search restart {idx}"), w)));
    }
    let (mut upper, (witness, w)) = pick_min(found).expect("nonempty");
    if exact {
        upper = upper.max(lower);
    }
    Ok(OracleResult {
        lower: lower.min(upper),
        upper,
        witness,
        witness_matrix: rows_of(&orthogonal_complement(&w).transpose()),
        restarts_used: cfg.restarts,
        converged,
    })
}

/// Kolmogorov number d_m(M) = c_m(Mᵀ) with dual tags.
pub fn kolmogorov_oracle(m: &TaggedMatrix, k: usize, cfg: &OracleConfig) -> Result<OracleResult> {
    let mut r = gelfand_oracle(&m.adjoint(), k, cfg)?;
    r.witness = format!("adjoint: {}", r.witness);
    Ok(r)
}

/// Stream name that depends only on the matrix and its tags.
fn matrix_key(m: &TaggedMatrix) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(m.rows() as u64);
    feed(m.cols() as u64);
    for v in m.entries.iter() {
        feed(v.to_bits());
    }
    format!("approx-{}-{}-{h:016x}", m.p_dom, m.p_cod)
}

fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let mut ord: Vec<usize> = (0..svd.singular_values.len()).collect();
    ord.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = DMatrix::from_fn(u.nrows(), ord.len(), |i, j| u[(i, ord[j])]);
    let vt = DMatrix::from_fn(ord.len(), vt.ncols(), |i, j| vt[(ord[i], j)]);
    let s = ord.iter().map(|&i| svd.singular_values[i]).collect();
    (u, s, vt)
}

/// Best rank-`rank` approximant found for `m` in its own orientation.
fn one_sided_search(m: &TaggedMatrix, rank: usize, cfg: &OracleConfig) -> Result<(f64, String, DMatrix<f64>, bool)> {
    let (rows, cols) = (m.rows(), m.cols());
    let norm = |d: &DMatrix<f64>| linalg::operator_norm(d, m.p_dom, m.p_cod);
    let (u, sv, vt) = sorted_svd(&m.entries);
    let svd_trunc = DMatrix::from_fn(rows, cols, |i, j| (0..rank).map(|t| u[(i, t)] * sv[t] * vt[(t, j)]).sum());

    let mut candidates: Vec<(f64, (String, DMatrix<f64>))> = Vec::new();
    candidates.push((norm(&(&m.entries - &svd_trunc))?, ("SVD truncation".into(), svd_trunc)));
    for keep in (0..cols).combinations(rank) {
        let s = DMatrix::from_fn(rows, cols, |i, j| if keep.contains(&j) { m.entries[(i, j)] } else { 0.0 });
        candidates.push((norm(&(&m.entries - &s))?, (format!("columns {keep:?} removed"), s)));
    }
    for keep in (0..rows).combinations(rank) {
        let s = DMatrix::from_fn(rows, cols, |i, j| if keep.contains(&i) { m.entries[(i, j)] } else { 0.0 });
        candidates.push((norm(&(&m.entries - &s))?, (format!("rows {keep:?} removed"), s)));
    }
    let (det_val, (det_desc, det_s)) = pick_min(candidates).expect("nonempty");

    // Factored search S = A·Bᵀ over the stacked factor [A; B].
    let split = |x: &DMatrix<f64>| x.rows(0, rows) * x.rows(rows, cols).transpose();
    let objective = |x: &DMatrix<f64>| norm(&(&m.entries - split(x)));
    let det_start = {
        let (u, sv, vt) = sorted_svd(&det_s);
        DMatrix::from_fn(rows + cols, rank, |i, j| {
            let w = sv[j].sqrt();
            if i < rows { u[(i, j)] * w } else { vt[(j, i - rows)] * w }
        })
    };
    let scale = m.entries.norm().max(f64::MIN_POSITIVE);
    let keep = |x: DMatrix<f64>| Some(x);
    let stream = matrix_key(m);
    let searches: Vec<Result<(DMatrix<f64>, f64, bool)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|idx| {
            let mut rng = substream(cfg.seed, &stream, idx as u64);
            let start = if idx == 0 {
                det_start.clone()
            } else {
                &det_start + gaussian(&mut rng, rows + cols, rank) * (0.3 * scale.sqrt())
            };
            pattern_search(start, &objective, &keep, &mut rng, cfg)
        })
        .collect();
    let mut converged = cfg.restarts == 0;
    let mut found = vec![(det_val, (det_desc, det_s))];
    for (idx, s) in searches.into_iter().enumerate() {
        let (x, v, conv) = s?;
        converged |= conv;
        found.push((v, (format!("factored search restart {idx}"), split(&x))));
    }
    let (v, (desc, s)) = pick_min(found).expect("nonempty");
    Ok((v, desc, s, converged))
}

/// Best approximant of rank below k, searched in both orientations since
/// ‖M − S‖ equals ‖Mᵀ − Sᵀ‖ between the dual spaces.
fn approx_search(m: &TaggedMatrix, k: usize, cfg: &OracleConfig) -> Result<(f64, String, DMatrix<f64>, bool)> {
    let (rows, cols) = (m.rows(), m.cols());
    let rank = k - 1;
    if rank >= rows.min(cols) {
        return Ok((0.0, "S = M".into(), m.entries.clone(), true));
    }
    if rank == 0 {
        return Ok((m.norm()?, "S = 0".into(), DMatrix::zeros(rows, cols), true));
    }
    if m.is_hilbert() {
        let (u, sv, vt) = sorted_svd(&m.entries);
        let s = DMatrix::from_fn(rows, cols, |i, j| (0..rank).map(|t| u[(i, t)] * sv[t] * vt[(t, j)]).sum());
        return Ok((sv[rank], "SVD truncation".into(), s, true));
    }
    let direct = one_sided_search(m, rank, cfg)?;
    let dual = one_sided_search(&m.adjoint(), rank, cfg)?;
    let dual = (dual.0, format!("adjoint {}", dual.1), dual.2.transpose(), dual.3);
    // Order by value, then by the orientation-free key, so M and Mᵀ agree.
    let first_direct = match direct.0.total_cmp(&dual.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => matrix_key(m) <= matrix_key(&m.adjoint()),
    };
    let converged = direct.3 || dual.3;
    let best = if first_direct { direct } else { dual };
    Ok((best.0, best.1, best.2, converged))
}

/// Approximation number a_m(M) = inf ‖M − S‖ over rank S < m.
pub fn approx_oracle(m: &TaggedMatrix, k: usize, cfg: &OracleConfig) -> Result<OracleResult> {
    check_dims(m, k, cfg)?;
    let (upper, witness, s, converged) = approx_search(m, k, cfg)?;
    let exact = k == 1 || k > m.rows().min(m.cols()) || m.is_hilbert();
    let lower = if exact {
        upper
    } else {
        let (cl, _) = certified_gelfand_lower(m, k)?;
        let (dl, _) = certified_gelfand_lower(&m.adjoint(), k)?;
        cl.max(dl).min(upper)
    };
    Ok(OracleResult {
        lower,
        upper,
        witness,
        witness_matrix: rows_of(&s),
        restarts_used: if exact { 0 } else { cfg.restarts },
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(restarts: usize) -> OracleConfig {
        OracleConfig { restarts, seed: 5, ..OracleConfig::default() }
    }

    fn diag(d: &[f64], p: PNorm, q: PNorm) -> TaggedMatrix {
        TaggedMatrix::diagonal(d, p, q).unwrap()
    }

    #[test]
    fn gelfand_examples() {
        let m = diag(&[3.0, 2.0, 1.0], PNorm::Inf, PNorm::One);
        let r = gelfand_oracle(&m, 2, &cfg(8)).unwrap();
        assert_abs_diff_eq!(r.upper, 3.0, epsilon = 1e-6);
        assert_eq!(r.lower, 3.0);
        let r1 = gelfand_oracle(&m, 1, &cfg(8)).unwrap();
        assert_eq!(r1.upper, 6.0);
        let h = diag(&[2.0, 1.0], PNorm::Two, PNorm::Two);
        let r = gelfand_oracle(&h, 2, &cfg(8)).unwrap();
        assert_abs_diff_eq!(r.upper, 1.0, epsilon = 1e-9);
        assert_eq!(gelfand_oracle(&h, 3, &cfg(1)).unwrap().upper, 0.0);
        assert!(gelfand_oracle(&h, 4, &cfg(1)).is_err());
        let big = TaggedMatrix::new(DMatrix::identity(13, 13), PNorm::Two, PNorm::Two).unwrap();
        assert!(matches!(gelfand_oracle(&big, 2, &cfg(1)), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn kolmogorov_examples() {
        let m = diag(&[3.0, 2.0, 1.0], PNorm::Inf, PNorm::One);
        assert_abs_diff_eq!(kolmogorov_oracle(&m, 2, &cfg(8)).unwrap().upper, 3.0, epsilon = 1e-6);
        assert_eq!(kolmogorov_oracle(&m, 1, &cfg(8)).unwrap().upper, 6.0);
        let h = diag(&[2.0, 1.0], PNorm::Two, PNorm::Two);
        assert_abs_diff_eq!(kolmogorov_oracle(&h, 2, &cfg(8)).unwrap().upper, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn approx_examples() {
        let h = diag(&[3.0, 2.0, 1.0], PNorm::Two, PNorm::Two);
        let r = approx_oracle(&h, 2, &cfg(4)).unwrap();
        assert_abs_diff_eq!(r.upper, 2.0, epsilon = 1e-12);
        assert_eq!(r.lower, r.upper);
        let m = diag(&[3.0, 2.0, 1.0], PNorm::Inf, PNorm::One);
        let r = approx_oracle(&m, 2, &cfg(4)).unwrap();
        assert!(r.lower <= 3.0 + 1e-12 && r.upper >= 3.0 - 1e-9 && r.upper <= 3.3);
        assert_eq!(approx_oracle(&m, 4, &cfg(4)).unwrap().upper, 0.0);
    }

    #[test]
    fn chain_and_determinism() {
        let mut rng = substream(3, "oracle-test", 0);
        for (p, q) in [(PNorm::Inf, PNorm::One), (PNorm::Two, PNorm::Inf), (PNorm::Inf, PNorm::Two)] {
            for _ in 0..3 {
                let a = TaggedMatrix::new(gaussian(&mut rng, 3, 3), p, q).unwrap();
                for k in 1..=3 {
                    let c = gelfand_oracle(&a, k, &cfg(6)).unwrap();
                    let d = kolmogorov_oracle(&a, k, &cfg(6)).unwrap();
                    let ap = approx_oracle(&a, k, &cfg(6)).unwrap();
                    assert!(c.lower <= c.upper + 1e-9);
                    assert!(c.upper <= ap.upper + 1e-6, "c {} a {}", c.upper, ap.upper);
                    assert!(d.upper <= ap.upper + 1e-6, "d {} a {}", d.upper, ap.upper);
                    assert_eq!(c, gelfand_oracle(&a, k, &cfg(6)).unwrap());
                }
            }
        }
    }

    #[test]
    fn orthogonal_invariance() {
        let mut rng = substream(4, "oracle-test", 0);
        let a = gaussian(&mut rng, 4, 4);
        let q = orthonormalize(&gaussian(&mut rng, 4, 4));
        let m1 = TaggedMatrix::new(a.clone(), PNorm::Two, PNorm::Two).unwrap();
        let m2 = TaggedMatrix::new(&q * a, PNorm::Two, PNorm::Two).unwrap();
        for k in 1..=4 {
            let x = gelfand_oracle(&m1, k, &cfg(4)).unwrap().upper;
            let y = gelfand_oracle(&m2, k, &cfg(4)).unwrap().upper;
            assert_abs_diff_eq!(x, y, epsilon = 1e-8);
        }
    }
}
