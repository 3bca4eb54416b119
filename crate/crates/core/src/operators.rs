//! Block-diagonal operators built from a block index plan, their dense
//! truncations and analytic tail norms.
//!
//! Blocks occupy disjoint coordinate ranges in both domain and codomain, so
//! the coordinate projections onto them have norm one and annihilate each
//! other.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, orthonormalize};
use crate::sequences::{
    beta_table, convex_minorant, select_block_indices, Alpha, BlockIndexPlan,
    ConvexDecaySequence, DecaySequence, TypeExponents, Variant, DEFAULT_SCAN_CAP,
};
use crate::{Error, Result};

pub use crate::linalg::PNorm;

/// Largest dimension [`truncate`] will materialise densely.
pub const DENSE_CAP: usize = 4096;

/// Largest minorant horizon the adaptive builder will try.
pub const MINORANT_CAP: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceTag {
    pub p: PNorm,
    pub dim: usize,
}

impl SpaceTag {
    pub fn new(p: PNorm, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("space dimension must be at least 1"));
        }
        Ok(Self { p, dim })
    }
}

/// Ambient pair of sequence spaces the blocks are assembled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Instantiation {
    /// (ℓ₂, ℓ₂) with ℓ₂ → ℓ₂ diagonal blocks.
    L2L2,
    /// ℓ_∞-sum domain, ℓ₂-sum codomain with ℓ_∞ → ℓ₂ diagonal blocks.
    LinfL2,
    /// (c₀, ℓ₁) with ℓ_∞ → ℓ₁ diagonal blocks.
    C0L1,
}

impl Instantiation {
    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::Controlled | Variant::Type => Instantiation::L2L2,
            Variant::Twosum => Instantiation::LinfL2,
            Variant::Nocotype => Instantiation::C0L1,
        }
    }

    pub fn p_dom(self) -> PNorm {
        match self {
            Instantiation::L2L2 => PNorm::Two,
            Instantiation::LinfL2 | Instantiation::C0L1 => PNorm::Inf,
        }
    }

    pub fn p_cod(self) -> PNorm {
        match self {
            Instantiation::L2L2 | Instantiation::LinfL2 => PNorm::Two,
            Instantiation::C0L1 => PNorm::One,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Instantiation::L2L2 => "(l2, l2)",
            Instantiation::LinfL2 => "(linf-sum, l2-sum)",
            Instantiation::C0L1 => "(c0, l1)",
        }
    }

    /// Norm of a diagonal block with entries `d` in this instantiation.
    pub fn diagonal_norm(self, d: &[f64]) -> f64 {
        match self {
            Instantiation::L2L2 => linalg::vec_norm(d, PNorm::Inf),
            Instantiation::LinfL2 => linalg::vec_norm(d, PNorm::Two),
            Instantiation::C0L1 => linalg::vec_norm(d, PNorm::One),
        }
    }

    /// Norm of a direct sum of disjoint blocks with the given block norms.
    fn combine(self, norms: impl Iterator<Item = f64>) -> f64 {
        match self {
            Instantiation::L2L2 => norms.fold(0.0, f64::max),
            Instantiation::LinfL2 => norms.map(|v| v * v).sum::<f64>().sqrt(),
            Instantiation::C0L1 => norms.sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub p_dom: PNorm,
    pub p_cod: PNorm,
    pub diagonal: Vec<f64>,
}

impl Block {
    pub fn domain(&self) -> SpaceTag {
        SpaceTag { p: self.p_dom, dim: self.diagonal.len() }
    }

    pub fn codomain(&self) -> SpaceTag {
        SpaceTag { p: self.p_cod, dim: self.diagonal.len() }
    }
}

/// Property (P)_C constants of the type construction; both at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeConstants {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
}

impl Default for TypeConstants {
    fn default() -> Self {
        Self { c: 1.0, c1: 1.0 }
    }
}

impl TypeConstants {
    pub fn new(c: f64, c1: f64) -> Result<Self> {
        if !(c >= 1.0 && c1 >= 1.0 && c.is_finite() && c1.is_finite()) {
            return Err(Error::invalid(format!("constants C={c}, C1={c1} must be at least 1")));
        }
        Ok(Self { c, c1 })
    }
}

/// The sequence a plan was selected on: α itself or its convex minorant.
#[derive(Debug, Clone)]
pub enum Effective {
    Raw(DecaySequence),
    Minorant(ConvexDecaySequence),
}

impl Alpha for Effective {
    fn alpha(&self, j: usize) -> Result<f64> {
        match self {
            Effective::Raw(s) => s.alpha(j),
            Effective::Minorant(m) => m.alpha(j),
        }
    }

    fn horizon(&self) -> Option<usize> {
        match self {
            Effective::Raw(s) => s.horizon(),
            Effective::Minorant(m) => m.horizon(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub variant: Variant,
    pub instantiation: Instantiation,
    pub sequence: DecaySequence,
    pub plan: BlockIndexPlan,
    pub blocks: Vec<Block>,
    pub constants: TypeConstants,
    pub effective: Effective,
}

/// Serialised form of a [`BlockOperator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDocument {
    pub variant: Variant,
    pub instantiation: Instantiation,
    pub sequence: String,
    pub indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_exponent: Option<f64>,
    pub thresholds: Vec<Option<usize>>,
    pub blocks: Vec<Block>,
    pub constants: TypeConstants,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub minorant_horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chord_horizon: Option<usize>,
}

impl BlockOperator {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dim(&self) -> usize {
        self.plan.total_dim()
    }

    /// Largest index at which the effective sequence can be evaluated.
    pub fn minorant_horizon(&self) -> Option<usize> {
        match &self.effective {
            Effective::Raw(_) => None,
            Effective::Minorant(m) => Some(m.horizon),
        }
    }

    /// Operator norm of the finite model.
    pub fn norm(&self) -> f64 {
        self.instantiation
            .combine(self.blocks.iter().map(|b| self.instantiation.diagonal_norm(&b.diagonal)))
    }

    /// All diagonal entries in coordinate order.
    pub fn positional_diagonal(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.diagonal.iter().copied()).collect()
    }

    pub fn document(&self) -> OperatorDocument {
        let (minorant_horizon, chord_horizon) = match &self.effective {
            Effective::Raw(_) => (None, None),
            Effective::Minorant(m) => (Some(m.horizon), Some(m.chord_horizon)),
        };
        OperatorDocument {
            variant: self.variant,
            instantiation: self.instantiation,
            sequence: self.sequence.describe(),
            indices: self.plan.indices.clone(),
            q_exponent: self.plan.q(),
            thresholds: self.plan.thresholds.clone(),
            blocks: self.blocks.clone(),
            constants: self.constants,
            minorant_horizon,
            chord_horizon,
        }
    }
}

fn assemble(
    seq: &DecaySequence,
    variant: Variant,
    effective: Effective,
    indices: Vec<usize>,
    exponents: Option<TypeExponents>,
    constants: TypeConstants,
) -> Result<BlockOperator> {
    let instantiation = Instantiation::for_variant(variant);
    let mut tables = Vec::with_capacity(indices.len());
    let mut thresholds = Vec::with_capacity(indices.len());
    for k in 1..=indices.len() {
        tables.push(beta_table(&effective, &indices, variant, k, exponents)?);
        thresholds.push(if variant.needs_convex() {
            crate::sequences::threshold_index(&effective, &indices, k)?
        } else {
            None
        });
    }
    let blocks = tables
        .iter()
        .map(|t| {
            SpaceTag::new(instantiation.p_dom(), t.len())?;
            Ok(Block {
                p_dom: instantiation.p_dom(),
                p_cod: instantiation.p_cod(),
                diagonal: t.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockOperator {
        variant,
        instantiation,
        sequence: seq.clone(),
        plan: BlockIndexPlan {
            variant,
            indices,
            beta_tables: tables,
            exponents,
            thresholds,
        },
        blocks,
        constants,
        effective,
    })
}

/// Builds the operator of `variant` with `blocks` blocks.
///
/// Convex variants are built on the convex minorant of `seq`. Its horizon
/// starts at 64 (or the next power of two above `min_horizon`) and grows by 4
/// until the plan fits and reaches index 2n_K + 2, which the tail bound
/// needs.
pub fn build(
    seq: &DecaySequence,
    variant: Variant,
    blocks: usize,
    exponents: Option<TypeExponents>,
    constants: TypeConstants,
    min_horizon: usize,
) -> Result<BlockOperator> {
    if variant == Variant::Type && exponents.is_none() {
        return Err(Error::invalid("type construction needs (t,r)"));
    }
    if !variant.needs_convex() {
        let indices = select_block_indices(seq, variant, blocks, DEFAULT_SCAN_CAP)?;
        return assemble(seq, variant, Effective::Raw(seq.clone()), indices, exponents, constants);
    }
    let mut h = min_horizon.max(64).next_power_of_two();
    loop {
        if h > MINORANT_CAP {
            return Err(Error::ResourceLimit(format!(
                "convex minorant horizon would exceed {MINORANT_CAP}"
            )));
        }
        let minorant = convex_minorant(seq, h)?;
        match select_block_indices(&minorant, variant, blocks, DEFAULT_SCAN_CAP) {
            Ok(indices) if 2 * indices[blocks - 1] + 2 <= h => {
                return assemble(
                    seq,
                    variant,
                    Effective::Minorant(minorant),
                    indices,
                    exponents,
                    constants,
                );
            }
            Ok(_) | Err(Error::HorizonExceeded { .. }) => h *= 4,
            Err(e) => return Err(e),
        }
    }
}

pub fn build_controlled(seq: &DecaySequence, blocks: usize) -> Result<BlockOperator> {
    build(seq, Variant::Controlled, blocks, None, TypeConstants::default(), 0)
}

pub fn build_twosum(seq: &DecaySequence, blocks: usize) -> Result<BlockOperator> {
    build(seq, Variant::Twosum, blocks, None, TypeConstants::default(), 0)
}

pub fn build_nocotype(seq: &DecaySequence, blocks: usize) -> Result<BlockOperator> {
    build(seq, Variant::Nocotype, blocks, None, TypeConstants::default(), 0)
}

pub fn build_type(
    seq: &DecaySequence,
    blocks: usize,
    t: f64,
    r: f64,
    constants: TypeConstants,
) -> Result<BlockOperator> {
    let ex = TypeExponents::new(t, r)?;
    build(seq, Variant::Type, blocks, Some(ex), constants, 0)
}

/// A dense matrix tagged with ℓ_p norms on its domain and codomain.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedMatrix {
    pub entries: DMatrix<f64>,
    pub p_dom: PNorm,
    pub p_cod: PNorm,
}

const MATRIX_FIELDS: [&str; 5] = ["rows", "cols", "p_dom", "p_cod", "entries"];

#[derive(Serialize, Deserialize)]
struct TaggedMatrixFile {
    rows: usize,
    cols: usize,
    p_dom: PNorm,
    p_cod: PNorm,
    entries: Vec<Vec<f64>>,
}

impl TaggedMatrix {
    pub fn new(entries: DMatrix<f64>, p_dom: PNorm, p_cod: PNorm) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::invalid("tagged matrix must be nonempty"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tagged matrix entries must be finite"));
        }
        Ok(Self { entries, p_dom, p_cod })
    }

    pub fn diagonal(d: &[f64], p_dom: PNorm, p_cod: PNorm) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)), p_dom, p_cod)
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn domain(&self) -> SpaceTag {
        SpaceTag { p: self.p_dom, dim: self.cols() }
    }

    pub fn codomain(&self) -> SpaceTag {
        SpaceTag { p: self.p_cod, dim: self.rows() }
    }

    pub fn is_hilbert(&self) -> bool {
        self.p_dom == PNorm::Two && self.p_cod == PNorm::Two
    }

    /// Adjoint: the transpose between the dual spaces.
    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            p_dom: self.p_cod.dual(),
            p_cod: self.p_dom.dual(),
        }
    }

    pub fn norm(&self) -> Result<f64> {
        linalg::operator_norm(&self.entries, self.p_dom, self.p_cod)
    }

    pub fn to_json(&self) -> String {
        let file = TaggedMatrixFile {
            rows: self.rows(),
            cols: self.cols(),
            p_dom: self.p_dom,
            p_cod: self.p_cod,
            entries: self.entries.row_iter().map(|r| r.iter().copied().collect()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("matrix serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::parse("matrix", e.to_string()))?;
        if let Some(extra) = doc.keys().find(|k| !MATRIX_FIELDS.contains(&k.as_str())) {
            return Err(Error::parse(extra.as_str(), "unknown field"));
        }
        // Field by field, so a type error names the offending field.
        fn field<T: serde::de::DeserializeOwned>(
            doc: &serde_json::Map<String, serde_json::Value>,
            name: &str,
        ) -> Result<T> {
            let v = doc.get(name).ok_or_else(|| Error::parse(name, "missing field"))?;
            serde_json::from_value(v.clone()).map_err(|e| Error::parse(name, e.to_string()))
        }
        let file = TaggedMatrixFile {
            rows: field(&doc, "rows")?,
            cols: field(&doc, "cols")?,
            p_dom: field(&doc, "p_dom")?,
            p_cod: field(&doc, "p_cod")?,
            entries: field(&doc, "entries")?,
        };
        if file.entries.len() != file.rows {
            return Err(Error::parse(
                "entries",
                format!("expected {} rows, found {}", file.rows, file.entries.len()),
            ));
        }
        if let Some(i) = file.entries.iter().position(|r| r.len() != file.cols) {
            return Err(Error::parse(
                "entries",
                format!("row {} has {} entries, expected {}", i, file.entries[i].len(), file.cols),
            ));
        }
        let m = DMatrix::from_fn(file.rows, file.cols, |i, j| file.entries[i][j]);
        Self::new(m, file.p_dom, file.p_cod).map_err(|e| Error::parse("entries", e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Dense block-diagonal matrix of the first `up_to` blocks.
pub fn truncate(op: &BlockOperator, up_to: usize) -> Result<TaggedMatrix> {
    if up_to == 0 || up_to > op.block_count() {
        return Err(Error::invalid(format!(
            "truncation block {up_to} outside 1..={}",
            op.block_count()
        )));
    }
    let diag: Vec<f64> = op.blocks[..up_to].iter().flat_map(|b| b.diagonal.iter().copied()).collect();
    if diag.len() > DENSE_CAP {
        return Err(Error::ResourceLimit(format!(
            "dense truncation of dimension {} exceeds {DENSE_CAP}",
            diag.len()
        )));
    }
    TaggedMatrix::diagonal(&diag, op.instantiation.p_dom(), op.instantiation.p_cod())
}

fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = orthonormalize(&g);
        if q.ncols() == n {
            return q;
        }
    }
}

/// U·D·Vᵀ for random orthogonal U, V; only for (ℓ₂, ℓ₂) models, whose
/// s-numbers it leaves unchanged.
pub fn truncate_rotated(op: &BlockOperator, up_to: usize, seed: u64) -> Result<TaggedMatrix> {
    if op.instantiation != Instantiation::L2L2 {
        return Err(Error::invalid("rotated truncations need the (l2, l2) instantiation"));
    }
    let base = truncate(op, up_to)?;
    let n = base.rows();
    let mut rng = crate::rng::substream(seed, "rotation", 0);
    let u = random_orthogonal(n, &mut rng);
    let v = random_orthogonal(n, &mut rng);
    TaggedMatrix::new(u * base.entries * v.transpose(), PNorm::Two, PNorm::Two)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "q", rename_all = "snake_case")]
pub enum NormKind {
    Operator,
    Pi2,
    SchattenQ(f64),
}

/// Norm of the tail Σ_{s ≥ from} of the model plus a bound for the blocks
/// beyond the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailNorm {
    pub finite: f64,
    pub remainder: f64,
}

impl TailNorm {
    pub fn total(&self) -> f64 {
        self.finite + self.remainder
    }
}

/// Bound on the norm of all blocks past the last built one.
///
/// The plan conditions give geometric domination of the block norms by
/// ratio 1/5, so the remainder is 5/4 of the first missing block's bound:
/// α_{n_K+1} for the controlled plan and α_{2n_K+1} otherwise.
pub fn analytic_remainder(op: &BlockOperator) -> Result<f64> {
    let nk = op.plan.n(op.block_count());
    let idx = match op.variant {
        Variant::Controlled => nk + 1,
        _ => 2 * nk + 1,
    };
    Ok(1.25 * op.effective.alpha(idx)?)
}

pub fn tail_norm(op: &BlockOperator, from_block: usize, kind: NormKind) -> Result<TailNorm> {
    let k = op.block_count();
    if from_block == 0 || from_block > k + 1 {
        return Err(Error::invalid(format!("tail start {from_block} outside 1..={}", k + 1)));
    }
    let inst = op.instantiation;
    let tail = &op.blocks[from_block - 1..];
    let finite = match kind {
        NormKind::Operator => inst.combine(tail.iter().map(|b| inst.diagonal_norm(&b.diagonal))),
        NormKind::Pi2 => {
            if op.variant == Variant::Controlled || inst == Instantiation::C0L1 {
                return Err(Error::invalid(format!(
                    "pi2 tails are not available for the {} construction",
                    op.variant.name()
                )));
            }
            tail.iter()
                .flat_map(|b| b.diagonal.iter())
                .map(|d| d * d)
                .sum::<f64>()
                .sqrt()
        }
        NormKind::SchattenQ(q) => {
            if inst != Instantiation::L2L2 || op.variant == Variant::Controlled {
                return Err(Error::invalid("Schatten tails need the type construction"));
            }
            if !(q >= 1.0) {
                return Err(Error::invalid(format!("Schatten exponent {q} below 1")));
            }
            let all = tail.iter().flat_map(|b| b.diagonal.iter().copied());
            if q.is_infinite() {
                all.fold(0.0, f64::max)
            } else {
                all.map(|d| d.powf(q)).sum::<f64>().powf(1.0 / q)
            }
        }
    };
    Ok(TailNorm {
        finite,
        remainder: analytic_remainder(op)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g(r: f64) -> DecaySequence {
        DecaySequence::geometric(r).unwrap()
    }

    #[test]
    fn controlled_examples() {
        let op = build_controlled(&g(0.5), 1).unwrap();
        assert_eq!(op.blocks.len(), 1);
        assert_eq!(op.blocks[0].diagonal, (1..=6).map(|j| 0.5f64.powi(j)).collect::<Vec<_>>());
        assert_eq!(op.norm(), 0.5);
        let t = DecaySequence::table(vec![1.0]).unwrap();
        let op = build_controlled(&t, 1).unwrap();
        assert_eq!(op.blocks[0].diagonal.iter().filter(|&&d| d != 0.0).count(), 1);
        assert_eq!(op.norm(), 1.0);
    }

    #[test]
    fn twosum_pi2_telescopes() {
        let op = build_twosum(&g(0.5), 1).unwrap();
        assert_eq!(op.plan.indices, vec![8]);
        let pi2 = linalg::vec_norm(&op.blocks[0].diagonal, PNorm::Two);
        assert_abs_diff_eq!(pi2, (0.25 - 2f64.powi(-18)).sqrt(), epsilon = 1e-12);
        let t = DecaySequence::table(vec![1.0]).unwrap();
        let op = build_twosum(&t, 1).unwrap();
        assert_abs_diff_eq!(linalg::vec_norm(&op.blocks[0].diagonal, PNorm::Two), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn nocotype_examples() {
        let op = build_nocotype(&g(0.5), 1).unwrap();
        let n1 = op.plan.indices[0];
        let s: f64 = op.blocks[0].diagonal.iter().sum();
        assert_abs_diff_eq!(s, 0.5 - 0.5f64.powi(n1 as i32 + 1), epsilon = 1e-12);
        let t = DecaySequence::table(vec![2.0, 1.0]).unwrap();
        let op = build_nocotype(&t, 1).unwrap();
        assert_eq!(&op.blocks[0].diagonal[..3], &[1.0, 1.0, 0.0]);
        assert!(op.blocks[0].diagonal[2..].iter().all(|&d| d == 0.0));
        assert_eq!(op.instantiation, Instantiation::C0L1);
    }

    #[test]
    fn type_examples() {
        assert_eq!(build_type(&g(0.5), 1, 2.0, 2.0, TypeConstants::default()).unwrap().plan.q(), Some(2.0));
        let op = build_type(&g(0.5), 2, 4.0, 2.0, TypeConstants::default()).unwrap();
        assert_abs_diff_eq!(op.plan.q().unwrap(), 4.0, epsilon = 1e-12);
        assert!(matches!(
            build_type(&g(0.5), 1, 2.0, 1.0, TypeConstants::default()),
            Err(Error::InvalidInput(_))
        ));
        assert!(TypeConstants::new(0.5, 1.0).is_err());
    }

    #[test]
    fn truncation_shapes() {
        let op = build_controlled(&g(0.5), 2).unwrap();
        assert_eq!(truncate(&op, 1).unwrap().rows(), 6);
        let t2 = truncate(&op, 2).unwrap();
        assert_eq!((t2.rows(), t2.cols()), (42, 42));
        assert!(truncate(&op, 0).is_err());
        assert!(truncate(&op, 3).is_err());
    }

    #[test]
    fn truncation_singular_values_are_the_diagonals() {
        let op = build_controlled(&DecaySequence::power(1.0).unwrap(), 2).unwrap();
        let t = truncate(&op, 2).unwrap();
        let mut diag = op.positional_diagonal();
        diag.sort_by(|a, b| b.total_cmp(a));
        let sv = linalg::singular_values(&t.entries);
        let dev = sv.iter().zip(&diag).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-10);
        let rot = truncate_rotated(&op, 2, 9).unwrap();
        let sr = linalg::singular_values(&rot.entries);
        let dev = sr.iter().zip(&diag).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-10);
        assert!(truncate_rotated(&build_nocotype(&g(0.5), 1).unwrap(), 1, 0).is_err());
    }

    #[test]
    fn tail_examples() {
        let op = build_controlled(&g(0.5), 2).unwrap();
        let t = tail_norm(&op, 2, NormKind::Operator).unwrap();
        assert_eq!(t.finite, 2f64.powi(-7));
        assert_abs_diff_eq!(t.remainder, 1.25 * 2f64.powi(-37), epsilon = 1e-20);
        assert!(tail_norm(&op, 2, NormKind::Pi2).is_err());
        assert!(tail_norm(&op, 0, NormKind::Operator).is_err());

        let table = DecaySequence::table(vec![1.0, 0.5]).unwrap();
        let op = build_nocotype(&table, 1).unwrap();
        let t = tail_norm(&op, 2, NormKind::Operator).unwrap();
        assert_eq!(t.total(), 0.0);
        assert!(tail_norm(&op, 1, NormKind::Pi2).is_err());

        let seq = g(0.5);
        let op = build_twosum(&seq, 2).unwrap();
        let (n1, n2) = (op.plan.indices[0], op.plan.indices[1]);
        let t = tail_norm(&op, 2, NormKind::Pi2).unwrap();
        let a = |j: usize| seq.eval(j);
        assert_abs_diff_eq!(
            t.finite,
            (a(2 * n1 + 1).powi(2) - a(n2 + 2 * n1 + 1).powi(2)).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(t.remainder, 1.25 * a(2 * n2 + 1), epsilon = 1e-15);
    }

    #[test]
    fn nonconvex_input_goes_through_the_minorant() {
        let t = DecaySequence::table(vec![1.0, 1.0, 0.0]).unwrap();
        let op = build_twosum(&t, 2).unwrap();
        assert!(op.minorant_horizon().is_some());
        for b in &op.blocks {
            assert!(b.diagonal.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn rebuild_is_identical() {
        let a = build_type(&g(0.7), 3, 4.0, 2.0, TypeConstants::default()).unwrap();
        let b = build_type(&g(0.7), 3, 4.0, 2.0, TypeConstants::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&a.document()).unwrap(),
            serde_json::to_string(&b.document()).unwrap()
        );
    }

    #[test]
    fn matrix_round_trip() {
        let m = TaggedMatrix::new(
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            PNorm::Inf,
            PNorm::One,
        )
        .unwrap();
        let back = TaggedMatrix::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"rows":2,"cols":2,"p_dom":1,"p_cod":"inf","entries":[[1,2],[3]]}"#;
        match TaggedMatrix::from_json(bad) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "entries"),
            other => panic!("{other:?}"),
        }
        assert_eq!(m.adjoint().p_dom, PNorm::Inf);
        assert_eq!(m.adjoint().p_cod, PNorm::One);
    }
}
