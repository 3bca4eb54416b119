use serde::{Deserialize, Serialize};

use super::Alpha;
use crate::{Error, Result};

/// Default cap on the index scan in [`select_block_indices`].
pub const DEFAULT_SCAN_CAP: usize = 1 << 28;

/// Which construction a plan feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Hilbert blocks with β_{jk} = min{α_{n_{k−1}+1}, α_j}.
    Controlled,
    /// ℓ_∞ → ℓ₂ diagonals with β_{jk}² = α²_{j+2n_{k−1}} − α²_{j+2n_{k−1}+1}.
    Twosum,
    /// ℓ_∞ → ℓ₁ diagonals with β_{jk} = α_{j+2n_{k−1}} − α_{j+2n_{k−1}+1}.
    Nocotype,
    /// Hilbert blocks with β_{jk}^q = α^q_{j+2n_{k−1}} − α^q_{j+2n_{k−1}+1}.
    Type,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Controlled => "controlled",
            Variant::Twosum => "twosum",
            Variant::Nocotype => "nocotype",
            Variant::Type => "type",
        }
    }

    /// Whether the construction requires a convex input sequence.
    pub fn needs_convex(self) -> bool {
        !matches!(self, Variant::Controlled)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "controlled" => Ok(Variant::Controlled),
            "twosum" => Ok(Variant::Twosum),
            "nocotype" => Ok(Variant::Nocotype),
            "type" => Ok(Variant::Type),
            other => Err(Error::parse("theorem", format!("unknown construction `{other}`"))),
        }
    }
}

/// Summing exponents (t, r) and the Schatten exponent q they determine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeExponents {
    pub t: f64,
    pub r: f64,
    pub q: f64,
}

impl TypeExponents {
    /// Admissible when 1 ≤ r ≤ min{2, t} and 1/r − 1/t < 1/2; then
    /// 1/q = 1/2 − 1/r + 1/t.
    pub fn new(t: f64, r: f64) -> Result<Self> {
        if !(t.is_finite() && r.is_finite()) {
            return Err(Error::invalid(format!("(t,r) = ({t},{r}) must be finite")));
        }
        if !(r >= 1.0 && r <= 2.0_f64.min(t)) {
            return Err(Error::invalid(format!(
                "(t,r) = ({t},{r}) violates 1 <= r <= min(2,t)"
            )));
        }
        if 1.0 / r - 1.0 / t >= 0.5 {
            return Err(Error::invalid(format!(
                "(t,r) = ({t},{r}) violates 1/r - 1/t < 1/2"
            )));
        }
        let q = 1.0 / (0.5 - 1.0 / r + 1.0 / t);
        Ok(Self { t, r, q })
    }
}

/// Block indices n_1 < … < n_K (n_0 = 0 implicit) with the diagonal tables
/// built on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockIndexPlan {
    pub variant: Variant,
    pub indices: Vec<usize>,
    pub beta_tables: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exponents: Option<TypeExponents>,
    /// Per block, the largest m ≤ n_k with α_{m+2n_{k−1}} ≥ 1.1·α_{n_k+2n_{k−1}+1}
    /// (convex constructions only).
    #[serde(default)]
    pub thresholds: Vec<Option<usize>>,
}

impl BlockIndexPlan {
    pub fn block_count(&self) -> usize {
        self.indices.len()
    }

    /// n_k for 0 ≤ k ≤ K.
    pub fn n(&self, k: usize) -> usize {
        if k == 0 {
            0
        } else {
            self.indices[k - 1]
        }
    }

    /// n′_k = n_1 + … + n_{k−1}.
    pub fn offset(&self, k: usize) -> usize {
        self.indices[..k - 1].iter().sum()
    }

    pub fn total_dim(&self) -> usize {
        self.indices.iter().sum()
    }

    /// Block k (1-based) with n_{k−1} < m ≤ n_k.
    pub fn block_of(&self, m: usize) -> Option<usize> {
        self.indices.iter().position(|&n| m <= n).map(|i| i + 1)
    }

    pub fn q(&self) -> Option<f64> {
        self.exponents.map(|e| e.q)
    }
}

/// Smallest admissible n_k for each k, chosen greedily.
///
/// Controlled plans need n_k > 5(n_{k−1}+1) and α_{n_k} ≤ α_{n_{k−1}+1}/5;
/// the others need n_k > 5(n_{k−1}+1) and α_{n_k} ≤ α_{5(n_{k−1}+1)}/5.
pub fn select_block_indices<S: Alpha + ?Sized>(
    seq: &S,
    variant: Variant,
    blocks: usize,
    scan_cap: usize,
) -> Result<Vec<usize>> {
    if blocks == 0 {
        return Err(Error::invalid("block count must be at least 1"));
    }
    let mut indices = Vec::with_capacity(blocks);
    let mut prev = 0usize;
    for _ in 0..blocks {
        let reference = match variant {
            Variant::Controlled => prev + 1,
            _ => 5 * (prev + 1),
        };
        let threshold = seq.alpha(reference)? / 5.0;
        let lo = 5 * (prev + 1) + 1;
        let ok = |n: usize| -> Result<bool> { Ok(seq.alpha(n)? <= threshold) };

        // Gallop to a satisfying index, then bisect back to the first one.
        let mut fail = lo - 1;
        let mut hit = lo;
        let mut step = 1usize;
        while !ok(hit)? {
            fail = hit;
            hit = lo + step;
            step *= 2;
            if hit > scan_cap {
                return Err(Error::ResourceLimit(format!(
                    "no admissible block index below scan cap {scan_cap} (block {})",
                    indices.len() + 1
                )));
            }
        }
        while hit - fail > 1 {
            let mid = fail + (hit - fail) / 2;
            if mid >= lo && ok(mid)? {
                hit = mid;
            } else {
                fail = mid;
            }
        }
        indices.push(hit);
        prev = hit;
    }
    Ok(indices)
}

/// Diagonal table (β_{jk})_{j=1..n_k} of block `k` (1-based).
pub fn beta_table<S: Alpha + ?Sized>(
    seq: &S,
    indices: &[usize],
    variant: Variant,
    k: usize,
    exponents: Option<TypeExponents>,
) -> Result<Vec<f64>> {
    if k == 0 || k > indices.len() {
        return Err(Error::invalid(format!(
            "block {k} outside 1..={}",
            indices.len()
        )));
    }
    let nk = indices[k - 1];
    let prev = if k == 1 { 0 } else { indices[k - 2] };
    let shift = 2 * prev;
    let mut table = Vec::with_capacity(nk);
    match variant {
        Variant::Controlled => {
            let cap = seq.alpha(prev + 1)?;
            for j in 1..=nk {
                table.push(cap.min(seq.alpha(j)?));
            }
        }
        Variant::Twosum | Variant::Nocotype | Variant::Type => {
            let q = match variant {
                Variant::Twosum => 2.0,
                Variant::Nocotype => 1.0,
                _ => {
                    exponents
                        .ok_or_else(|| Error::invalid("type construction needs (t,r)"))?
                        .q
                }
            };
            let mut next = seq.alpha(shift + 1)?;
            for j in 1..=nk {
                let cur = next;
                next = seq.alpha(j + shift + 1)?;
                let diff = if q == 1.0 {
                    cur - next
                } else {
                    cur.powf(q) - next.powf(q)
                };
                if diff < 0.0 {
                    return Err(Error::invalid(format!(
                        "negative table entry at j={j}, block {k}: input is not nonincreasing"
                    )));
                }
                table.push(if q == 1.0 { diff } else { diff.powf(1.0 / q) });
            }
            // Convexity makes the table nonincreasing; tolerate rounding only.
            let top = table.first().copied().unwrap_or(0.0);
            for j in 1..table.len() {
                if table[j] > table[j - 1] {
                    if table[j] - table[j - 1] > 1e-9 * top + 1e-300 {
                        return Err(Error::invalid(format!(
                            "table of block {k} increases at j={}: input is not convex",
                            j + 1
                        )));
                    }
                    table[j] = table[j - 1];
                }
            }
        }
    }
    Ok(table)
}

/// m_k for block k of a convex-variant plan.
pub fn threshold_index<S: Alpha + ?Sized>(
    seq: &S,
    indices: &[usize],
    k: usize,
) -> Result<Option<usize>> {
    let nk = indices[k - 1];
    let prev = if k == 1 { 0 } else { indices[k - 2] };
    let end = seq.alpha(nk + 2 * prev + 1)?;
    for m in (1..=nk).rev() {
        if seq.alpha(m + 2 * prev)? >= 1.1 * end {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::DecaySequence;

    fn scan_oracle(seq: &DecaySequence, variant: Variant, blocks: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut prev = 0;
        for _ in 0..blocks {
            let mut n = 1;
            loop {
                let reference = match variant {
                    Variant::Controlled => seq.eval(prev + 1),
                    _ => seq.eval(5 * (prev + 1)),
                };
                if n > 5 * (prev + 1) && seq.eval(n) <= reference / 5.0 {
                    break;
                }
                n += 1;
            }
            out.push(n);
            prev = n;
        }
        out
    }

    #[test]
    fn plan_examples() {
        let g = DecaySequence::geometric(0.5).unwrap();
        let p = DecaySequence::power(1.0).unwrap();
        assert_eq!(select_block_indices(&g, Variant::Controlled, 3, DEFAULT_SCAN_CAP).unwrap(), vec![6, 36, 186]);
        assert_eq!(select_block_indices(&p, Variant::Controlled, 3, DEFAULT_SCAN_CAP).unwrap(), vec![6, 36, 186]);
        assert_eq!(select_block_indices(&g, Variant::Twosum, 1, DEFAULT_SCAN_CAP).unwrap(), vec![8]);
        for (seq, v) in [(&g, Variant::Twosum), (&p, Variant::Nocotype), (&p, Variant::Controlled)] {
            assert_eq!(
                select_block_indices(seq, v, 3, DEFAULT_SCAN_CAP).unwrap(),
                scan_oracle(seq, v, 3)
            );
        }
    }

    #[test]
    fn plan_is_minimal() {
        let seqs = [
            DecaySequence::geometric(0.8).unwrap(),
            DecaySequence::power(0.7).unwrap(),
            DecaySequence::table(vec![5.0, 4.0, 4.0, 3.0, 1.0, 0.5, 0.1]).unwrap(),
        ];
        for seq in &seqs {
            for v in [Variant::Controlled, Variant::Twosum] {
                let idx = select_block_indices(seq, v, 3, DEFAULT_SCAN_CAP).unwrap();
                let mut prev = 0;
                for &n in &idx {
                    let reference = match v {
                        Variant::Controlled => seq.eval(prev + 1),
                        _ => seq.eval(5 * (prev + 1)),
                    };
                    assert!(n > 5 * (prev + 1));
                    assert!(seq.eval(n) <= reference / 5.0);
                    if n > prev + 1 {
                        let m = n - 1;
                        assert!(!(m > 5 * (prev + 1) && seq.eval(m) <= reference / 5.0));
                    }
                    prev = n;
                }
            }
        }
    }

    #[test]
    fn scan_cap_is_enforced() {
        let slow = DecaySequence::power(0.05).unwrap();
        assert!(matches!(
            select_block_indices(&slow, Variant::Twosum, 2, 1 << 16),
            Err(Error::ResourceLimit(_))
        ));
        assert!(select_block_indices(&slow, Variant::Twosum, 0, 1 << 16).is_err());
    }

    #[test]
    fn controlled_tables() {
        let g = DecaySequence::geometric(0.5).unwrap();
        let idx = vec![6, 36];
        let t1 = beta_table(&g, &idx, Variant::Controlled, 1, None).unwrap();
        assert_eq!(t1, (1..=6).map(|j| 0.5f64.powi(j)).collect::<Vec<_>>());
        let t2 = beta_table(&g, &idx, Variant::Controlled, 2, None).unwrap();
        assert_eq!(t2.len(), 36);
        for (i, &b) in t2.iter().enumerate() {
            let j = i as i32 + 1;
            let expect = if j <= 7 { 0.5f64.powi(7) } else { 0.5f64.powi(j) };
            assert_eq!(b, expect);
        }
        assert!(beta_table(&g, &idx, Variant::Controlled, 3, None).is_err());
    }

    #[test]
    fn twosum_first_block_simplifies() {
        let g = DecaySequence::geometric(0.5).unwrap();
        let t = beta_table(&g, &[8], Variant::Twosum, 1, None).unwrap();
        for (i, &b) in t.iter().enumerate() {
            let expect = 0.5f64.powi(i as i32 + 1) * 3f64.sqrt() / 2.0;
            assert!((b - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn nocotype_table_of_step() {
        let s = DecaySequence::table(vec![2.0, 1.0]).unwrap();
        let t = beta_table(&s, &[6], Variant::Nocotype, 1, None).unwrap();
        assert_eq!(t, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn nonconvex_input_is_rejected() {
        let s = DecaySequence::table(vec![1.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(beta_table(&s, &[6], Variant::Twosum, 1, None).is_err());
    }

    #[test]
    fn type_exponents() {
        assert_eq!(TypeExponents::new(2.0, 2.0).unwrap().q, 2.0);
        assert!((TypeExponents::new(4.0, 2.0).unwrap().q - 4.0).abs() < 1e-12);
        assert!(TypeExponents::new(2.0, 1.0).is_err());
        assert!(TypeExponents::new(1.5, 2.0).is_err());
        assert!(TypeExponents::new(3.0, 0.5).is_err());
        let g = DecaySequence::geometric(0.5).unwrap();
        assert!(beta_table(&g, &[8], Variant::Type, 1, None).is_err());
    }

    #[test]
    fn telescoping_sums() {
        let g = DecaySequence::geometric(0.7).unwrap();
        let idx = select_block_indices(&g, Variant::Twosum, 3, DEFAULT_SCAN_CAP).unwrap();
        let ex = TypeExponents::new(4.0, 2.0).unwrap();
        for k in 1..=3 {
            let nk = idx[k - 1];
            let shift = if k == 1 { 0 } else { 2 * idx[k - 2] };
            let two = beta_table(&g, &idx, Variant::Twosum, k, None).unwrap();
            let one = beta_table(&g, &idx, Variant::Nocotype, k, None).unwrap();
            let four = beta_table(&g, &idx, Variant::Type, k, Some(ex)).unwrap();
            for m in 1..=nk {
                let a = |j: usize| g.eval(j);
                let end = nk + shift + 1;
                let s2: f64 = two[m - 1..].iter().map(|b| b * b).sum();
                let s1: f64 = one[m - 1..].iter().sum();
                let s4: f64 = four[m - 1..].iter().map(|b| b.powi(4)).sum();
                assert!((s2 - (a(m + shift).powi(2) - a(end).powi(2))).abs() < 1e-12);
                assert!((s1 - (a(m + shift) - a(end))).abs() < 1e-12);
                assert!((s4 - (a(m + shift).powi(4) - a(end).powi(4))).abs() < 1e-12);
            }
        }
    }
}
