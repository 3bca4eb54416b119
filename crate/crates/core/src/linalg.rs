//! Dense linear algebra for small ℓ_p problems: norms, orthonormal frames,
//! unit-ball vertex enumeration on subspaces and exact restricted norms.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Exponent of a finite-dimensional ℓ_p space, p ∈ {1, 2, ∞}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PNorm {
    One,
    Two,
    Inf,
}

impl PNorm {
    pub fn dual(self) -> PNorm {
        match self {
            PNorm::One => PNorm::Inf,
            PNorm::Two => PNorm::Two,
            PNorm::Inf => PNorm::One,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PNorm::One => "1",
            PNorm::Two => "2",
            PNorm::Inf => "inf",
        }
    }
}

impl std::fmt::Display for PNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(PNorm::One),
            "2" => Ok(PNorm::Two),
            "inf" | "infinity" | "∞" => Ok(PNorm::Inf),
            other => Err(Error::parse("p", format!("expected 1, 2 or \"inf\", got `{other}`"))),
        }
    }
}

impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PNorm::One => s.serialize_u8(1),
            PNorm::Two => s.serialize_u8(2),
            PNorm::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) if x == 1.0 => Ok(PNorm::One),
            Raw::Num(x) if x == 2.0 => Ok(PNorm::Two),
            Raw::Num(x) => Err(serde::de::Error::custom(format!(
                "p must be 1, 2 or \"inf\", got {x}"
            ))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

pub fn vec_norm<'a>(x: impl IntoIterator<Item = &'a f64>, p: PNorm) -> f64 {
    let it = x.into_iter();
    match p {
        PNorm::One => it.map(|v| v.abs()).sum(),
        PNorm::Two => it.map(|v| v * v).sum::<f64>().sqrt(),
        PNorm::Inf => it.fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// Singular values, nonincreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis of the column span, columns with relative residual
/// below `1e-10` dropped.
pub fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = a.column(j).into_owned();
        let before = v.norm();
        for _ in 0..2 {
            for q in &cols {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let n = v.norm();
        if n > 1e-10 * scale.max(before) {
            cols.push(v / n);
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the orthogonal complement of the column span of `w`.
pub fn orthogonal_complement(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let q = orthonormalize(w);
    let mut cols: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let fixed = cols.len();
    for i in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / nv);
        }
    }
    let rest = &cols[fixed..];
    if rest.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(rest)
    }
}

/// Generalised cross product of the rows of a (d−1)×d matrix: a vector
/// spanning its kernel when the rows are independent, zero otherwise.
fn kernel_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let d = a.ncols();
    debug_assert_eq!(a.nrows() + 1, d);
    if d == 1 {
        return DVector::from_element(1, 1.0);
    }
    DVector::from_fn(d, |j, _| {
        let minor = a.clone().remove_column(j);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

fn row_scale(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.norm()).product::<f64>()
}

/// Coefficient vectors y of the vertices of {y : ‖B y‖_p ≤ 1} for p ∈ {1, ∞},
/// one representative per ± pair.
///
/// For p = ∞ a vertex has d independent active facets x_i = ±1, so it solves
/// B_S y = s for a d-subset S of rows. For p = 1 a vertex has d − 1
/// independent active facets x_i = 0, so it spans the kernel of B_Z for a
/// (d−1)-subset Z.
pub fn section_vertices(basis: &DMatrix<f64>, p: PNorm) -> Result<Vec<DVector<f64>>> {
    let (n, d) = basis.shape();
    if d == 0 {
        return Ok(Vec::new());
    }
    if d > n {
        return Err(Error::invalid("section basis has more columns than rows"));
    }
    let mut out = Vec::new();
    match p {
        PNorm::Two => return Err(Error::invalid("the Euclidean ball has no vertices")),
        PNorm::Inf => {
            for rows in (0..n).combinations(d) {
                let sub = basis.select_rows(rows.iter());
                let det = sub.determinant();
                if det.abs() <= 1e-12 * row_scale(&sub) {
                    continue;
                }
                let Some(inv) = sub.try_inverse() else { continue };
                for mask in 0..(1u64 << (d - 1)) {
                    let s = DVector::from_fn(d, |i, _| {
                        if i == 0 || mask & (1 << (i - 1)) == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    });
                    let y = &inv * s;
                    let x = basis * &y;
                    if vec_norm(x.iter(), PNorm::Inf) <= 1.0 + 1e-9 {
                        out.push(y);
                    }
                }
            }
        }
        PNorm::One => {
            for rows in (0..n).combinations(d - 1) {
                let sub = basis.select_rows(rows.iter());
                let y = kernel_vector(&sub);
                if y.norm() <= 1e-12 * row_scale(&sub) {
                    continue;
                }
                let x = basis * &y;
                let len = vec_norm(x.iter(), PNorm::One);
                if len <= 1e-300 {
                    continue;
                }
                out.push(y / len);
            }
        }
    }
    Ok(out)
}

/// Sign vectors in {±1}^n with first entry +1.
fn half_signs(n: usize) -> impl Iterator<Item = DVector<f64>> {
    let count = if n == 0 { 0 } else { 1u64 << (n - 1) };
    (0..count).map(move |mask| {
        DVector::from_fn(n, |i, _| {
            if i == 0 || mask & (1 << (i - 1)) == 0 {
                1.0
            } else {
                -1.0
            }
        })
    })
}

/// sup ‖M x‖_cod over x in span(B) with ‖x‖_dom ≤ 1, computed exactly.
///
/// For a Euclidean domain `basis` is orthonormalised first; otherwise any
/// basis of the subspace works.
pub fn restricted_norm(m: &DMatrix<f64>, basis: &DMatrix<f64>, dom: PNorm, cod: PNorm) -> Result<f64> {
    if basis.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "subspace lives in dimension {}, operator domain has {}",
            basis.nrows(),
            m.ncols()
        )));
    }
    if basis.ncols() == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    match dom {
        PNorm::Two => {
            let q = orthonormalize(basis);
            if q.ncols() == 0 {
                return Ok(0.0);
            }
            let mb = m * q;
            Ok(match cod {
                PNorm::Two => singular_values(&mb)[0],
                PNorm::Inf => mb.row_iter().map(|r| r.norm()).fold(0.0, f64::max),
                PNorm::One => {
                    let t = mb.transpose();
                    half_signs(mb.nrows()).map(|s| (&t * s).norm()).fold(0.0, f64::max)
                }
            })
        }
        PNorm::One | PNorm::Inf => {
            let mb = m * basis;
            Ok(section_vertices(basis, dom)?
                .iter()
                .map(|y| vec_norm((&mb * y).iter(), cod))
                .fold(0.0, f64::max))
        }
    }
}

/// ‖M‖ : ℓ_dom → ℓ_cod.
pub fn operator_norm(m: &DMatrix<f64>, dom: PNorm, cod: PNorm) -> Result<f64> {
    restricted_norm(m, &DMatrix::identity(m.ncols(), m.ncols()), dom, cod)
}

/// Minimum ‖z‖_q solution of Gᵀ z = c for q ∈ {1, 2, ∞}, G of full column
/// rank, by exhaustive enumeration of basic solutions.
pub fn min_norm_solution(g: &DMatrix<f64>, c: &DVector<f64>, q: PNorm) -> Result<DVector<f64>> {
    let (n, k) = g.shape();
    if c.len() != k {
        return Err(Error::invalid("constraint count mismatch"));
    }
    if k == 0 {
        return Ok(DVector::zeros(n));
    }
    if k > n {
        return Err(Error::invalid("more constraints than unknowns"));
    }
    let gt = g.transpose();
    let gram = &gt * g;
    let gram_inv = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid("constraint vectors are linearly dependent"))?;
    let z = match q {
        PNorm::Two => g * (&gram_inv * c),
        PNorm::One => {
            // An optimal basic solution has support of size at most k.
            let mut best: Option<(f64, DVector<f64>)> = None;
            for cols in (0..n).combinations(k) {
                let sub = gt.select_columns(cols.iter());
                if sub.determinant().abs() <= 1e-12 * row_scale(&sub.transpose()) {
                    continue;
                }
                let Some(zs) = sub.lu().solve(c) else { continue };
                let cost = vec_norm(zs.iter(), PNorm::One);
                if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    let mut z = DVector::zeros(n);
                    for (i, &col) in cols.iter().enumerate() {
                        z[col] = zs[i];
                    }
                    best = Some((cost, z));
                }
            }
            best.ok_or_else(|| Error::invalid("no basic solution found"))?.1
        }
        PNorm::Inf => {
            // min t with |z_i| ≤ t: an optimal basic solution has n + 1 − k
            // coordinates at ±t, the remaining k − 1 free.
            let tight = n + 1 - k;
            let mut best: Option<(f64, DVector<f64>)> = None;
            for set in (0..n).combinations(tight) {
                let free: Vec<usize> = (0..n).filter(|i| !set.contains(i)).collect();
                for mask in 0..(1u64 << tight) {
                    let sign = |i: usize| if mask & (1 << i) == 0 { 1.0 } else { -1.0 };
                    // Unknowns: z_free (k − 1 entries) then t.
                    let a = DMatrix::from_fn(k, k, |r, col| {
                        if col < free.len() {
                            gt[(r, free[col])]
                        } else {
                            set.iter().enumerate().map(|(i, &s)| sign(i) * gt[(r, s)]).sum()
                        }
                    });
                    let Some(sol) = a.lu().solve(c) else { continue };
                    if !sol.iter().all(|v| v.is_finite()) {
                        continue;
                    }
                    let t = sol[k - 1];
                    if t < -1e-15 || free.iter().enumerate().any(|(i, _)| sol[i].abs() > t + 1e-12) {
                        continue;
                    }
                    if best.as_ref().is_none_or(|(b, _)| t < *b) {
                        let mut z = DVector::zeros(n);
                        for (i, &f) in free.iter().enumerate() {
                            z[f] = sol[i];
                        }
                        for (i, &s) in set.iter().enumerate() {
                            z[s] = sign(i) * t;
                        }
                        best = Some((t, z));
                    }
                }
            }
            best.ok_or_else(|| Error::invalid("no basic solution found"))?.1
        }
    };
    // Remove the constraint residual left by rounding.
    let resid = &gt * &z - c;
    Ok(z - g * (&gram_inv * resid))
}
