//! Truncated signatures of piecewise-linear paths.
//!
//! Coefficients are flattened level-major: the level-0 constant 1 first,
//! then the d level-1 coefficients, then the d^2 level-2 coefficients in
//! lexicographic word order, and so on up to the truncation depth M, for a
//! total of C = Σ_{k=0}^{M} d^k entries.
//!
//! The signature of a single linear segment is the tensor exponential of
//! its increment (level k equals increment^{⊗k}/k!), and signatures of
//! longer paths are built by folding segments with Chen's identity. Folding
//! once along the base path yields the signatures of *all* count-sampled
//! prefixes in O(N d^M) total work instead of the naive O(N² d^M).

use nalgebra::DMatrix;

use crate::error::{Result, SigError};
use crate::path::Path;

/// Flattened signature truncated at depth M of a path in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSignature {
    depth: usize,
    dim: usize,
    coeffs: Vec<f64>,
}

/// Number of flattened coefficients for depth M in dimension d.
pub fn flat_len(dim: usize, depth: usize) -> usize {
    let mut total = 1usize;
    let mut level = 1usize;
    for _ in 0..depth {
        level *= dim;
        total += level;
    }
    total
}

/// Offset of the level-k block inside the flattened vector.
pub fn level_offset(dim: usize, k: usize) -> usize {
    flat_len(dim, k) - dim.pow(k as u32)
}

impl TruncatedSignature {
    /// The signature of a constant path: (1, 0, …, 0).
    pub fn trivial(dim: usize, depth: usize) -> Self {
        assert!(dim >= 1 && depth >= 1);
        let mut coeffs = vec![0.0; flat_len(dim, depth)];
        coeffs[0] = 1.0;
        TruncatedSignature { depth, dim, coeffs }
    }

    pub fn from_coeffs(dim: usize, depth: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != flat_len(dim, depth) {
            return Err(SigError::invalid(format!(
                "expected {} coefficients for dim {dim} depth {depth}, got {}",
                flat_len(dim, depth),
                coeffs.len()
            )));
        }
        Ok(TruncatedSignature { depth, dim, coeffs })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Level-1 coefficient for letter i (0-based).
    pub fn letter(&self, i: usize) -> f64 {
        self.coeffs[1 + i]
    }

    /// Level-2 coefficient for the word (i, j) (0-based letters).
    pub fn word2(&self, i: usize, j: usize) -> f64 {
        self.coeffs[1 + self.dim + i * self.dim + j]
    }
}

/// Signature of one linear segment with the given increment: the truncated
/// tensor exponential, level k = increment^{⊗k}/k!.
pub fn segment_signature(increment: &[f64], depth: usize) -> TruncatedSignature {
    let dim = increment.len();
    assert!(dim >= 1 && depth >= 1);
    let mut coeffs = vec![0.0; flat_len(dim, depth)];
    coeffs[0] = 1.0;
    let mut prev_off = 0usize;
    let mut prev_len = 1usize;
    for k in 1..=depth {
        let off = prev_off + prev_len;
        for u in 0..prev_len {
            let base = coeffs[prev_off + u] / k as f64;
            for (c, inc) in increment.iter().enumerate() {
                coeffs[off + u * dim + c] = base * inc;
            }
        }
        prev_off = off;
        prev_len *= dim;
    }
    TruncatedSignature { depth, dim, coeffs }
}

/// Chen's identity: the signature of the concatenation of two paths is the
/// truncated tensor product of their signatures. The level-n coefficient of
/// the output for a word w is Σ_{uv=w} a_u · b_v.
pub fn chen_concat(
    a: &TruncatedSignature,
    b: &TruncatedSignature,
) -> Result<TruncatedSignature> {
    if a.depth != b.depth || a.dim != b.dim {
        return Err(SigError::invalid(format!(
            "chen concat needs matching depth/dim, got ({}, {}) vs ({}, {})",
            a.depth, a.dim, b.depth, b.dim
        )));
    }
    let depth = a.depth;
    let dim = a.dim;
    let mut out = vec![0.0; flat_len(dim, depth)];
    let mut offsets = Vec::with_capacity(depth + 1);
    let mut lens = Vec::with_capacity(depth + 1);
    let mut off = 0usize;
    let mut len = 1usize;
    for _ in 0..=depth {
        offsets.push(off);
        lens.push(len);
        off += len;
        len *= dim;
    }
    for n in 0..=depth {
        for j in 0..=n {
            // level-j block of a times level-(n-j) block of b
            let (ao, al) = (offsets[j], lens[j]);
            let (bo, bl) = (offsets[n - j], lens[n - j]);
            let co = offsets[n];
            for u in 0..al {
                let av = a.coeffs[ao + u];
                if av == 0.0 {
                    continue;
                }
                let dst = co + u * bl;
                for v in 0..bl {
                    out[dst + v] += av * b.coeffs[bo + v];
                }
            }
        }
    }
    Ok(TruncatedSignature {
        depth,
        dim,
        coeffs: out,
    })
}

/// Signature of a whole piecewise-linear path by folding segment
/// exponentials left to right.
pub fn path_signature(path: &Path, depth: usize) -> TruncatedSignature {
    let dim = path.dim();
    let mut sig = TruncatedSignature::trivial(dim, depth);
    for j in 1..path.len() {
        let prev = path.row(j - 1);
        let cur = path.row(j);
        let inc: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| c - p).collect();
        let seg = segment_signature(&inc, depth);
        sig = chen_concat(&sig, &seg).expect("matching shapes by construction");
    }
    sig
}

/// One flattened signature row per count-sampled prefix.
#[derive(Debug, Clone)]
pub struct SignatureMatrix {
    depth: usize,
    dim: usize,
    /// (N+1) × C, row i = flattened signature of prefix f_i.
    rows: DMatrix<f64>,
}

impl SignatureMatrix {
    pub fn from_rows(dim: usize, depth: usize, rows: DMatrix<f64>) -> Result<Self> {
        if rows.ncols() != flat_len(dim, depth) {
            return Err(SigError::invalid(
                "signature matrix width does not match dim/depth",
            ));
        }
        if rows.nrows() == 0 {
            return Err(SigError::invalid("signature matrix needs at least one row"));
        }
        Ok(SignatureMatrix { depth, dim, rows })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn width(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row_signature(&self, i: usize) -> TruncatedSignature {
        TruncatedSignature {
            depth: self.depth,
            dim: self.dim,
            coeffs: self.rows.row(i).iter().copied().collect(),
        }
    }

    /// Appends one row (streaming growth).
    pub fn push_row(&mut self, sig: &TruncatedSignature) {
        assert_eq!(sig.dim, self.dim);
        assert_eq!(sig.depth, self.depth);
        let old = self.rows.clone();
        let mut grown = DMatrix::zeros(old.nrows() + 1, old.ncols());
        grown.view_mut((0, 0), (old.nrows(), old.ncols())).copy_from(&old);
        for (c, v) in sig.coeffs.iter().enumerate() {
            grown[(old.nrows(), c)] = *v;
        }
        self.rows = grown;
    }
}

/// Streams the truncated signatures of every count-sampled prefix of the
/// path with a single left-to-right Chen fold: row j is the signature of
/// prefix f_j and row 0 is the trivial signature of the degenerate prefix.
pub fn stream_prefix_signatures(path: &Path, depth: usize) -> Result<SignatureMatrix> {
    if path.len() < 2 {
        return Err(SigError::invalid(
            "prefix streaming needs a path with at least 2 samples",
        ));
    }
    let dim = path.dim();
    let width = flat_len(dim, depth);
    let n = path.len();
    let mut rows = DMatrix::zeros(n, width);
    let mut cur = TruncatedSignature::trivial(dim, depth);
    for (c, v) in cur.coeffs.iter().enumerate() {
        rows[(0, c)] = *v;
    }
    for j in 1..n {
        let prev = path.row(j - 1);
        let now = path.row(j);
        let inc: Vec<f64> = now.iter().zip(&prev).map(|(a, b)| a - b).collect();
        let seg = segment_signature(&inc, depth);
        cur = chen_concat(&cur, &seg)?;
        for (c, v) in cur.coeffs.iter().enumerate() {
            rows[(j, c)] = *v;
        }
    }
    Ok(SignatureMatrix { depth, dim, rows })
}

/// Per-column robust statistics: center = median, scale = inter-quartile
/// range under the linear-interpolation quartile convention. Columns whose
/// IQR falls below the epsilon guard are centered but not divided.
#[derive(Debug, Clone)]
pub struct RobustStats {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Per column: (row index, weight) pairs whose order statistics define
    /// the median; used when differentiating through the normalization.
    pub median_support: Vec<Vec<(usize, f64)>>,
    /// Same for Q3 − Q1 (weights carry the sign of the IQR combination).
    pub iqr_support: Vec<Vec<(usize, f64)>>,
    /// Whether the column was actually divided by its IQR.
    pub divided: Vec<bool>,
}

pub const IQR_EPSILON: f64 = 1e-12;

/// Linearly interpolated quantile of a column; returns the value and the
/// (row, weight) support in the original row indexing.
fn quantile_with_support(col: &[f64], p: f64) -> (f64, Vec<(usize, f64)>) {
    let n = col.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap());
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n && frac > 0.0 {
        let v = col[order[lo]] * (1.0 - frac) + col[order[lo + 1]] * frac;
        (v, vec![(order[lo], 1.0 - frac), (order[lo + 1], frac)])
    } else {
        (col[order[lo]], vec![(order[lo], 1.0)])
    }
}

/// Computes the per-column robust statistics of a signature matrix.
pub fn robust_stats(s: &SignatureMatrix) -> Result<RobustStats> {
    if s.num_rows() < 2 {
        return Err(SigError::invalid(
            "robust normalization needs at least 2 rows",
        ));
    }
    let ncols = s.width();
    let mut center = Vec::with_capacity(ncols);
    let mut scale = Vec::with_capacity(ncols);
    let mut median_support = Vec::with_capacity(ncols);
    let mut iqr_support = Vec::with_capacity(ncols);
    let mut divided = Vec::with_capacity(ncols);
    for c in 0..ncols {
        let col: Vec<f64> = s.rows.column(c).iter().copied().collect();
        let (med, med_sup) = quantile_with_support(&col, 0.5);
        let (q1, q1_sup) = quantile_with_support(&col, 0.25);
        let (q3, q3_sup) = quantile_with_support(&col, 0.75);
        let iqr = q3 - q1;
        center.push(med);
        median_support.push(med_sup);
        let mut sup: Vec<(usize, f64)> = q3_sup;
        for (r, w) in q1_sup {
            sup.push((r, -w));
        }
        iqr_support.push(sup);
        if iqr < IQR_EPSILON {
            scale.push(1.0);
            divided.push(false);
        } else {
            scale.push(iqr);
            divided.push(true);
        }
    }
    Ok(RobustStats {
        center,
        scale,
        median_support,
        iqr_support,
        divided,
    })
}

/// Applies frozen robust statistics to a matrix (or to freshly streamed
/// rows during the online protocol).
pub fn apply_robust_stats(s: &SignatureMatrix, stats: &RobustStats) -> SignatureMatrix {
    let mut rows = s.rows.clone();
    for c in 0..rows.ncols() {
        let inv = 1.0 / stats.scale[c];
        for r in 0..rows.nrows() {
            rows[(r, c)] = (rows[(r, c)] - stats.center[c]) * inv;
        }
    }
    SignatureMatrix {
        depth: s.depth,
        dim: s.dim,
        rows,
    }
}

/// Applies frozen robust statistics to a single flattened row.
pub fn apply_robust_stats_row(row: &mut [f64], stats: &RobustStats) {
    for (c, v) in row.iter_mut().enumerate() {
        *v = (*v - stats.center[c]) / stats.scale[c];
    }
}

/// Column-wise robust normalization: subtract the median, divide by the
/// inter-quartile range; columns with IQR below the epsilon guard are
/// centered and left undivided.
pub fn robust_normalize(s: &SignatureMatrix) -> Result<SignatureMatrix> {
    let stats = robust_stats(s)?;
    Ok(apply_robust_stats(s, &stats))
}

/// Max over letter pairs (i, j) of |S^i·S^j − S^{ij} − S^{ji}|: the level-2
/// integration-by-parts defect. Zero (to roundoff) for signatures of
/// piecewise-linear paths.
pub fn shuffle_residual(sig: &TruncatedSignature) -> f64 {
    assert!(sig.depth >= 2, "shuffle residual needs depth >= 2");
    let d = sig.dim;
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let lhs = sig.letter(i) * sig.letter(j);
            let rhs = sig.word2(i, j) + sig.word2(j, i);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_len_matches_sum() {
        assert_eq!(flat_len(1, 3), 4);
        assert_eq!(flat_len(2, 2), 7);
        assert_eq!(flat_len(2, 3), 15);
        assert_eq!(flat_len(3, 2), 13);
        assert_eq!(level_offset(2, 2), 3);
    }

    #[test]
    fn segment_scalar_exponential() {
        let s = segment_signature(&[2.0], 3);
        assert_eq!(s.coeffs(), &[1.0, 2.0, 2.0, 4.0 / 3.0]);
    }

    #[test]
    fn segment_zero_increment_is_trivial() {
        let s = segment_signature(&[0.0, 0.0], 3);
        assert_eq!(s.coeffs()[0], 1.0);
        assert!(s.coeffs()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn segment_axis_level2() {
        let s = segment_signature(&[1.0, 0.0], 2);
        // level-2 block in word order (11, 12, 21, 22)
        assert_eq!(&s.coeffs()[3..], &[0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn chen_on_a_line() {
        let a = segment_signature(&[1.0], 2);
        let b = segment_signature(&[2.0], 2);
        let c = chen_concat(&a, &b).unwrap();
        assert_abs_diff_eq!(c.coeffs()[2], 4.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c.coeffs()[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn chen_with_identity_is_noop() {
        let a = segment_signature(&[0.3, -0.7], 3);
        let id = TruncatedSignature::trivial(2, 3);
        let left = chen_concat(&id, &a).unwrap();
        let right = chen_concat(&a, &id).unwrap();
        assert_eq!(left.coeffs(), a.coeffs());
        assert_eq!(right.coeffs(), a.coeffs());
    }

    #[test]
    fn chen_rejects_mismatched_shapes() {
        let a = segment_signature(&[1.0], 2);
        let b = segment_signature(&[1.0, 2.0], 2);
        assert!(chen_concat(&a, &b).is_err());
    }

    #[test]
    fn staircase_level2() {
        let a = segment_signature(&[1.0, 0.0], 2);
        let b = segment_signature(&[0.0, 1.0], 2);
        let c = chen_concat(&a, &b).unwrap();
        assert_abs_diff_eq!(c.word2(0, 1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.word2(1, 0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.word2(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.word2(1, 1), 0.5, epsilon = 1e-15);
        // integration by parts at level 2
        assert_abs_diff_eq!(
            c.letter(0) * c.letter(1),
            c.word2(0, 1) + c.word2(1, 0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn streamed_rows_match_naive_fold() {
        let path = Path::scalar(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0]).unwrap();
        let m = stream_prefix_signatures(&path, 2).unwrap();
        // row 0 trivial
        assert_eq!(m.rows().row(0)[0], 1.0);
        assert!(m.rows().row(0).iter().skip(1).all(|&v| v == 0.0));
        // row 2: level-1 = 3, level-2 = 4.5
        assert_abs_diff_eq!(m.rows()[(2, 1)], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.rows()[(2, 2)], 4.5, epsilon = 1e-14);
        // every row equals the naive fold over the same prefix
        for j in 1..path.len() {
            let times = path.times()[..=j].to_vec();
            let vals: Vec<f64> = (0..=j).map(|r| path.row(r)[0]).collect();
            let prefix = Path::scalar(times, vals).unwrap();
            let naive = path_signature(&prefix, 2);
            for c in 0..m.width() {
                assert_abs_diff_eq!(m.rows()[(j, c)], naive.coeffs()[c], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn robust_normalize_quartile_convention() {
        let rows = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0]);
        let s = SignatureMatrix::from_rows(1, 1, rows).unwrap();
        let n = robust_normalize(&s).unwrap();
        let expect = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (r, e) in expect.iter().enumerate() {
            assert_abs_diff_eq!(n.rows()[(r, 1)], *e, epsilon = 1e-12);
        }
        // constant level-0 column centers to zero without division
        for r in 0..4 {
            assert_eq!(n.rows()[(r, 0)], 0.0);
        }
    }

    #[test]
    fn robust_normalize_duplicated_value_column() {
        // one column constant (5 copies), the other varying
        let rows = DMatrix::from_row_slice(
            5,
            2,
            &[7.0, 1.0, 7.0, 2.0, 7.0, 3.0, 7.0, 4.0, 7.0, 5.0],
        );
        let s = SignatureMatrix::from_rows(1, 1, rows).unwrap();
        let n = robust_normalize(&s).unwrap();
        for r in 0..5 {
            assert_eq!(n.rows()[(r, 0)], 0.0);
        }
    }

    #[test]
    fn shuffle_residual_geometric_and_perturbed() {
        let p = Path::new(
            vec![0.0, 0.3, 0.7, 1.0],
            vec![
                vec![0.0, 0.0],
                vec![0.5, -0.2],
                vec![0.1, 0.4],
                vec![0.9, 0.9],
            ],
        )
        .unwrap();
        let sig = path_signature(&p, 3);
        assert!(shuffle_residual(&sig) <= 1e-10);

        // perturb S^{12} by 0.1
        let mut coeffs = sig.coeffs().to_vec();
        coeffs[1 + 2 + 1] += 0.1; // word (1,2) at offset 1 + d + 0*d + 1
        let bad = TruncatedSignature::from_coeffs(2, 3, coeffs).unwrap();
        assert_abs_diff_eq!(shuffle_residual(&bad), 0.1, epsilon = 1e-12);
    }
}
