use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::linalg::{self, min_norm_solution, orthonormalize, restricted_norm, section_vertices, PNorm};
use crate::rng::substream;
use crate::{Error, Result};

use super::gaussian;

/// Unit vectors f_i spanning F and unit functionals f_i* on F with
/// ⟨f_i*, f_j⟩ = δ_ij.
#[derive(Debug, Clone, PartialEq)]
pub struct AuerbachBasis {
    pub p: PNorm,
    /// Columns f_1 … f_r.
    pub vectors: DMatrix<f64>,
    /// Rows represent f_i* on F: f_i*(x) = (functionals · x)_i for x ∈ F.
    pub functionals: DMatrix<f64>,
    pub converged: bool,
}

impl AuerbachBasis {
    pub fn vector_norms(&self) -> Vec<f64> {
        self.vectors.column_iter().map(|c| linalg::vec_norm(c.iter(), self.p)).collect()
    }

    /// Norms of the functionals as functionals on F.
    pub fn functional_norms(&self) -> Result<Vec<f64>> {
        self.functionals
            .row_iter()
            .map(|r| restricted_norm(&DMatrix::from_rows(&[r.into_owned()]), &self.vectors, self.p, PNorm::Two))
            .collect()
    }

    /// max |⟨f_i*, f_j⟩ − δ_ij|.
    pub fn pairing_error(&self) -> f64 {
        let g = &self.functionals * &self.vectors;
        let r = g.nrows();
        (g - DMatrix::identity(r, r)).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Auerbach basis of the subspace spanned by the columns of `basis` in ℓ_pⁿ.
///
/// For p = 2 any orthonormal basis works. For p ∈ {1, ∞} the coefficient
/// matrix Y (f_i = B y_i) maximises |det Y| over the unit ball by exact
/// coordinate ascent: det is linear in each column, so the best replacement
/// for y_i is a vertex of the section's unit ball. At a coordinate-wise
/// maximum |(Y⁻¹v)_i| ≤ 1 on the unit ball, so the coefficient functionals of
/// Y⁻¹ have norm one.
pub fn auerbach_basis(basis: &DMatrix<f64>, p: PNorm, cap: usize) -> Result<AuerbachBasis> {
    let (n, r) = basis.shape();
    if r == 0 {
        return Err(Error::invalid("Auerbach basis of the zero space"));
    }
    if n > cap {
        return Err(Error::ResourceLimit(format!("dimension {n} exceeds the Auerbach cap {cap}")));
    }
    let b = orthonormalize(basis);
    if b.ncols() != r {
        return Err(Error::invalid("subspace basis is rank deficient"));
    }
    if p == PNorm::Two {
        return Ok(AuerbachBasis { p, functionals: b.transpose(), vectors: b, converged: true });
    }
    let verts = section_vertices(&b, p)?;
    // Greedy start: each next vertex farthest from the span of the chosen ones.
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(r);
    for _ in 0..r {
        let span = if chosen.is_empty() {
            DMatrix::zeros(r, 0)
        } else {
            orthonormalize(&DMatrix::from_columns(&chosen))
        };
        let best = verts
            .iter()
            .map(|v| {
                let resid = v - &span * (span.transpose() * v);
                (resid.norm(), v)
            })
            .fold((-1.0, &verts[0]), |a, b| if b.0 > a.0 { b } else { a });
        chosen.push(best.1.clone());
    }
    let mut y = DMatrix::from_columns(&chosen);
    let mut converged = false;
    for _ in 0..10_000 {
        let inv = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("degenerate Auerbach iterate"))?;
        let mut best = (1.0 + 1e-12, None);
        for i in 0..r {
            for v in &verts {
                let gain = (inv.row(i) * v)[0].abs();
                if gain > best.0 {
                    best = (gain, Some((i, v)));
                }
            }
        }
        match best.1 {
            Some((i, v)) => y.set_column(i, v),
            None => {
                converged = true;
                break;
            }
        }
    }
    let inv = y.clone().try_inverse().ok_or_else(|| Error::invalid("degenerate Auerbach basis"))?;
    Ok(AuerbachBasis {
        p,
        vectors: &b * &y,
        functionals: inv * b.transpose(),
        converged,
    })
}

/// Auerbach basis of the whole space ℓ_p^dim.
pub fn auerbach_basis_of_space(p: PNorm, dim: usize, cap: usize) -> Result<AuerbachBasis> {
    auerbach_basis(&DMatrix::identity(dim, dim), p, cap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationResult {
    /// Rows of Q.
    pub q: Vec<Vec<f64>>,
    pub p_norm: f64,
    pub p_on_e: f64,
    pub distance: f64,
    pub bound: f64,
    pub projection_residual: f64,
    pub kernel_residual: f64,
    pub range_residual: f64,
}

/// Projection Q onto F = range P with Q|_E = 0 and ‖P − Q‖ ≤ 4‖P‖nε.
///
/// With an Auerbach basis (f_i, f_i*) of F and x_i* = f_i* ∘ P, each z_i* is
/// a minimum-norm extension of the functional equal to x_i* on E and 0 on
/// F; Q = Σ f_i ⊗ (x_i* − z_i*).
pub fn perturb_projection(
    p: &DMatrix<f64>,
    e: &DMatrix<f64>,
    ambient: PNorm,
    eps: f64,
    cap: usize,
) -> Result<(DMatrix<f64>, PerturbationResult)> {
    let n = p.nrows();
    if p.ncols() != n || e.nrows() != n {
        return Err(Error::invalid("P must be square and E must live in its domain"));
    }
    if !(eps > 0.0 && eps < 0.125) {
        return Err(Error::Precondition(format!("epsilon {eps} must lie in (0, 1/8)")));
    }
    let idem = (p * p - p).norm();
    if idem > 1e-9 * p.norm().max(1.0) {
        return Err(Error::Precondition(format!("P is not a projection (|P^2 - P| = {idem:e})")));
    }
    let p_on_e = restricted_norm(p, e, ambient, ambient)?;
    if p_on_e >= eps {
        return Err(Error::Precondition(format!(
            "|P restricted to E| = {p_on_e} is not below epsilon = {eps}"
        )));
    }
    let f = orthonormalize(p);
    let r = f.ncols();
    if r == 0 {
        return Err(Error::invalid("P has zero range"));
    }
    let aub = auerbach_basis(&f, ambient, cap)?;
    let xs = &aub.functionals * p;
    let g = DMatrix::from_fn(n, e.ncols() + r, |i, j| if j < e.ncols() { e[(i, j)] } else { f[(i, j - e.ncols())] });
    let mut z = DMatrix::zeros(r, n);
    for i in 0..r {
        let on_e = xs.row(i) * e;
        let c = DVector::from_fn(e.ncols() + r, |j, _| if j < e.ncols() { on_e[j] } else { 0.0 });
        let zi = min_norm_solution(&g, &c, ambient.dual())?;
        z.set_row(i, &zi.transpose());
    }
    let q = &aub.vectors * (xs - z);
    let p_norm = linalg::operator_norm(p, ambient, ambient)?;
    let distance = linalg::operator_norm(&(p - &q), ambient, ambient)?;
    let result = PerturbationResult {
        q: q.row_iter().map(|r| r.iter().copied().collect()).collect(),
        p_norm,
        p_on_e,
        distance,
        bound: 4.0 * p_norm * r as f64 * eps,
        projection_residual: (&q * &q - &q).iter().fold(0.0, |m, v| m.max(v.abs())),
        kernel_residual: (&q * e).iter().fold(0.0, |m, v| m.max(v.abs())),
        range_residual: (&q * &f - &f).iter().fold(0.0, |m, v| m.max(v.abs())),
    };
    Ok((q, result))
}

/// A random projection P onto an r-dimensional F whose kernel nearly
/// contains an e-dimensional E, with ε between ‖P|_E‖ and `eps_max`.
#[derive(Debug, Clone)]
pub struct PerturbationInstance {
    pub ambient: PNorm,
    pub p: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub eps: f64,
}

impl PerturbationInstance {
    pub fn sample(seed: u64, index: u64, n: usize, r: usize, de: usize, ambient: PNorm, eps_max: f64) -> Result<Self> {
        if r == 0 || de == 0 || r + de > n {
            return Err(Error::invalid("need 1 <= r, 1 <= dim E and r + dim E <= n"));
        }
        let mut rng = substream(seed, "perturbation", index);
        for _ in 0..1000 {
            let f = gaussian(&mut rng, n, r);
            let e = gaussian(&mut rng, n, de);
            let tilt: f64 = rng.random_range(0.0..0.05);
            let mut k = DMatrix::from_fn(n, n - r, |i, j| if j < de { e[(i, j)] } else { 0.0 });
            let noise = gaussian(&mut rng, n, n - r);
            for j in 0..n - r {
                for i in 0..n {
                    k[(i, j)] += if j < de { tilt * noise[(i, j)] } else { noise[(i, j)] };
                }
            }
            let c = linalg::orthogonal_complement(&k);
            if c.ncols() != r {
                continue;
            }
            let Some(inv) = (c.transpose() * &f).try_inverse() else { continue };
            let p = &f * inv * c.transpose();
            if linalg::singular_values(&p)[0] > 50.0 {
                continue;
            }
            let pe = restricted_norm(&p, &e, ambient, ambient)?;
            if pe >= 0.9 * eps_max {
                continue;
            }
            let u: f64 = rng.random_range(0.1..1.0);
            let eps = pe + (eps_max - pe) * u;
            return Ok(Self { ambient, p, e, eps });
        }
        Err(Error::ResourceLimit("could not sample a perturbation instance".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn check(a: &AuerbachBasis) {
        for v in a.vector_norms() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
        }
        for v in a.functional_norms().unwrap() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
        }
        assert!(a.pairing_error() < 1e-8);
    }

    #[test]
    fn whole_spaces() {
        for p in [PNorm::One, PNorm::Two, PNorm::Inf] {
            for n in 1..=6 {
                let a = auerbach_basis_of_space(p, n, 6).unwrap();
                assert!(a.converged);
                check(&a);
            }
        }
        assert!(auerbach_basis_of_space(PNorm::Inf, 7, 6).is_err());
    }

    #[test]
    fn random_sections() {
        for idx in 0..20 {
            let mut rng = substream(21, "auerbach-test", idx);
            for p in [PNorm::One, PNorm::Inf] {
                let b = gaussian(&mut rng, 4, 2);
                check(&auerbach_basis(&b, p, 6).unwrap());
                let b = gaussian(&mut rng, 6, 3);
                check(&auerbach_basis(&b, p, 6).unwrap());
            }
        }
    }

    #[test]
    fn orthogonal_case_keeps_p() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let e = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let (q, res) = perturb_projection(&p, &e, PNorm::Two, 0.05, 6).unwrap();
        assert!((q - &p).norm() < 1e-12);
        assert_eq!(res.distance, 0.0);
    }

    #[test]
    fn two_by_two_example() {
        // P x = ⟨x, e₁ + 0.1 e₂⟩ e₁ and E = span(e₂).
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.0]);
        let e = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let (q, res) = perturb_projection(&p, &e, PNorm::Two, 0.11, 6).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((q - expect).norm() < 1e-12);
        assert_abs_diff_eq!(res.distance, 0.1, epsilon = 1e-12);
        assert!(res.distance <= res.bound);
        assert!(matches!(perturb_projection(&p, &e, PNorm::Two, 0.05, 6), Err(Error::Precondition(_))));
        assert!(matches!(perturb_projection(&p, &e, PNorm::Two, 0.2, 6), Err(Error::Precondition(_))));
    }

    #[test]
    fn random_instances() {
        let mut idx = 0;
        for p in [PNorm::One, PNorm::Two, PNorm::Inf] {
            for (n, r, de) in [(4, 1, 2), (5, 2, 2), (6, 3, 2)] {
                let inst = PerturbationInstance::sample(8, idx, n, r, de, p, 0.1).unwrap();
                idx += 1;
                let (_, res) = perturb_projection(&inst.p, &inst.e, p, inst.eps, 6).unwrap();
                assert!(res.projection_residual <= 1e-10, "{res:?}");
                assert!(res.kernel_residual <= 1e-10, "{res:?}");
                assert!(res.range_residual <= 1e-10, "{res:?}");
                assert!(res.distance <= res.bound, "{res:?}");
            }
        }
    }
}
