//! Signature-kernel Gram matrices over the count-sampled family and their
//! iterated cumulative-trapezoid integrals.
//!
//! The Gram matrix K has K[j][i] = kernel(f_i, f_j): the row index j is the
//! collocation/integration index. K^(k) integrates the kernel k times in
//! its second (row) argument by cumulative trapezoid down each column, so
//! row 0 of every K^(k), k ≥ 1, vanishes identically.

use nalgebra::DMatrix;

use crate::error::{Result, SigError};
use crate::signature::{SignatureMatrix, TruncatedSignature};

/// Kernel flavor applied to flattened signature features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFlavor {
    Linear,
    Rbf,
}

/// Whether the signature matrix gets robust column normalization before
/// Gram assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    None,
    Robust,
}

/// Kernel configuration: flavor, RBF bandwidth, truncation depth and
/// normalization mode.
#[derive(Debug, Clone, Copy)]
pub struct KernelSpec {
    pub flavor: KernelFlavor,
    pub sigma: f64,
    pub depth: usize,
    pub normalization: Normalization,
}

impl KernelSpec {
    pub fn linear(depth: usize) -> Self {
        KernelSpec {
            flavor: KernelFlavor::Linear,
            sigma: 1.0,
            depth,
            normalization: Normalization::None,
        }
    }

    pub fn rbf(depth: usize, sigma: f64) -> Self {
        KernelSpec {
            flavor: KernelFlavor::Rbf,
            sigma,
            depth,
            normalization: Normalization::None,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.flavor == KernelFlavor::Rbf && !(self.sigma > 0.0) {
            return Err(SigError::invalid(format!(
                "rbf bandwidth must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Gram matrix over an arbitrary feature matrix (rows = anchors).
/// Normalization is expected to have been applied already.
pub fn gram_from_features(features: &DMatrix<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if features.nrows() == 0 {
        return Err(SigError::invalid("empty feature matrix"));
    }
    let g = features * features.transpose();
    match spec.flavor {
        KernelFlavor::Linear => Ok(g),
        KernelFlavor::Rbf => {
            let n = g.nrows();
            let inv = 1.0 / (2.0 * spec.sigma * spec.sigma);
            let mut k = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..=j {
                    let sq = (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0);
                    let v = if i == j { 1.0 } else { (-sq * inv).exp() };
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            Ok(k)
        }
    }
}

/// Signature-kernel Gram matrix of a (pre-normalized) signature matrix.
pub fn gram(s: &SignatureMatrix, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    gram_from_features(s.rows(), spec)
}

/// Kernel values of one query signature against every anchor row.
pub fn kernel_row(
    s: &SignatureMatrix,
    query: &TruncatedSignature,
    spec: &KernelSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if query.coeffs().len() != s.width() {
        return Err(SigError::invalid(
            "query signature width does not match the anchor matrix",
        ));
    }
    let n = s.num_rows();
    let mut out = Vec::with_capacity(n);
    let q = nalgebra::DVector::from_column_slice(query.coeffs());
    let qq = q.dot(&q);
    for i in 0..n {
        let row = s.rows().row(i);
        let dot = row.iter().zip(q.iter()).map(|(a, b)| a * b).sum::<f64>();
        match spec.flavor {
            KernelFlavor::Linear => out.push(dot),
            KernelFlavor::Rbf => {
                let rr = row.iter().map(|v| v * v).sum::<f64>();
                let sq = (rr + qq - 2.0 * dot).max(0.0);
                out.push((-sq / (2.0 * spec.sigma * spec.sigma)).exp());
            }
        }
    }
    Ok(out)
}

/// Cumulative trapezoid integral along a strictly increasing grid:
/// out[0] = 0, out[j] = out[j−1] + (v[j] + v[j−1])·(t_j − t_{j−1})/2.
pub fn cumtrapz(grid: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if grid.len() != values.len() {
        return Err(SigError::invalid(format!(
            "cumtrapz length mismatch: {} grid nodes vs {} values",
            grid.len(),
            values.len()
        )));
    }
    let mut out = vec![0.0; values.len()];
    for j in 1..values.len() {
        let h = grid[j] - grid[j - 1];
        out[j] = out[j - 1] + 0.5 * (values[j] + values[j - 1]) * h;
    }
    Ok(out)
}

/// The Gram matrix together with its iterated cumulative-trapezoid
/// integrals K^(1) … K^(m) on the collocation grid.
#[derive(Debug, Clone)]
pub struct GramStack {
    grid: Vec<f64>,
    /// levels[k] = K^(k); levels[0] is the plain Gram matrix.
    levels: Vec<DMatrix<f64>>,
}

impl GramStack {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn size(&self) -> usize {
        self.levels[0].nrows()
    }

    pub fn level(&self, k: usize) -> &DMatrix<f64> {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[DMatrix<f64>] {
        &self.levels
    }

    /// Kernel vectors over all anchors at a query grid node, one per
    /// integration level 0..=m.
    pub fn rows_at_node(&self, node: usize) -> Vec<Vec<f64>> {
        self.levels
            .iter()
            .map(|k| k.row(node).iter().copied().collect())
            .collect()
    }

    /// Appends one anchor/collocation node: `new_row` holds the kernel of
    /// the new prefix against all old anchors plus itself (length n+1).
    /// Level extensions reuse the previous cumulative values, so a step
    /// costs O(n·m).
    pub fn extend(&mut self, t_new: f64, new_row: &[f64]) -> Result<()> {
        let n = self.size();
        if new_row.len() != n + 1 {
            return Err(SigError::invalid(format!(
                "gram extension row must have length {}, got {}",
                n + 1,
                new_row.len()
            )));
        }
        let t_prev = *self.grid.last().expect("non-empty grid");
        if !(t_new > t_prev) {
            return Err(SigError::invalid(format!(
                "gram extension time {t_new} does not advance past {t_prev}"
            )));
        }
        let h = t_new - t_prev;
        let m = self.order();
        let mut grown: Vec<DMatrix<f64>> = Vec::with_capacity(m + 1);
        // level 0: symmetric extension by the kernel row
        let mut k0 = DMatrix::zeros(n + 1, n + 1);
        k0.view_mut((0, 0), (n, n)).copy_from(&self.levels[0]);
        for i in 0..=n {
            k0[(n, i)] = new_row[i];
            k0[(i, n)] = new_row[i];
        }
        grown.push(k0);
        for k in 1..=m {
            let prev_level = &self.levels[k]; // old K^(k), n x n
            let below = &grown[k - 1]; // new K^(k-1), (n+1) x (n+1)
            let mut lk = DMatrix::zeros(n + 1, n + 1);
            lk.view_mut((0, 0), (n, n)).copy_from(prev_level);
            // new row: continue each old column's running integral
            for i in 0..n {
                lk[(n, i)] = prev_level[(n - 1, i)] + 0.5 * h * (below[(n, i)] + below[(n - 1, i)]);
            }
            // new column: fresh cumulative integral down all rows
            lk[(0, n)] = 0.0;
            for j in 1..=n {
                let hj = self.grid_value(j, t_new) - self.grid_value(j - 1, t_new);
                lk[(j, n)] = lk[(j - 1, n)] + 0.5 * hj * (below[(j, n)] + below[(j - 1, n)]);
            }
            grown.push(lk);
        }
        self.levels = grown;
        self.grid.push(t_new);
        Ok(())
    }

    fn grid_value(&self, j: usize, t_new: f64) -> f64 {
        if j < self.grid.len() {
            self.grid[j]
        } else {
            t_new
        }
    }
}

/// Builds the stack K, K^(1), …, K^(m) by applying cumtrapz down each
/// column k times.
pub fn integrated_gram_stack(k: DMatrix<f64>, grid: &[f64], m: usize) -> Result<GramStack> {
    if k.nrows() != k.ncols() {
        return Err(SigError::invalid("gram matrix must be square"));
    }
    if k.nrows() != grid.len() {
        return Err(SigError::invalid(format!(
            "gram size {} does not match grid length {}",
            k.nrows(),
            grid.len()
        )));
    }
    let n = grid.len();
    let mut levels = Vec::with_capacity(m + 1);
    levels.push(k);
    for lev in 1..=m {
        let prev = &levels[lev - 1];
        let mut next = DMatrix::zeros(n, n);
        for col in 0..n {
            let vals: Vec<f64> = prev.column(col).iter().copied().collect();
            let integ = cumtrapz(grid, &vals)?;
            for row in 0..n {
                next[(row, col)] = integ[row];
            }
        }
        levels.push(next);
    }
    Ok(GramStack {
        grid: grid.to_vec(),
        levels,
    })
}

/// Per-level kernel vectors at a query time, mapped to a grid node by the
/// prefix-floor rule. When the query is a training node the vectors equal
/// the corresponding GramStack rows exactly.
pub fn query_rows(stack: &GramStack, t: f64) -> Result<Vec<Vec<f64>>> {
    let grid = stack.grid();
    if t < grid[0] {
        return Err(SigError::invalid(format!(
            "query time {t} precedes the collocation window start {}",
            grid[0]
        )));
    }
    let mut node = 0usize;
    for (i, &tj) in grid.iter().enumerate() {
        if tj <= t {
            node = i;
        } else {
            break;
        }
    }
    Ok(stack.rows_at_node(node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn feature_matrix(rows: &[&[f64]]) -> DMatrix<f64> {
        let r = rows.len();
        let c = rows[0].len();
        DMatrix::from_fn(r, c, |i, j| rows[i][j])
    }

    #[test]
    fn rbf_identical_rows_all_ones() {
        let f = feature_matrix(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        let k = gram_from_features(&f, &KernelSpec::rbf(1, 1.0)).unwrap();
        for v in k.iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_unit_basis_gram() {
        let f = feature_matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let k = gram_from_features(&f, &KernelSpec::linear(1)).unwrap();
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 1)], 1.0);
        assert_eq!(k[(0, 1)], 0.0);
    }

    #[test]
    fn rbf_unit_basis_off_diagonal() {
        let f = feature_matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let k = gram_from_features(&f, &KernelSpec::rbf(1, 1.0)).unwrap();
        assert_abs_diff_eq!(k[(0, 1)], (-1.0_f64).exp(), epsilon = 1e-12);
        assert_eq!(k[(0, 0)], 1.0);
    }

    #[test]
    fn rbf_rejects_nonpositive_sigma() {
        let f = feature_matrix(&[&[1.0]]);
        assert!(gram_from_features(&f, &KernelSpec::rbf(1, 0.0)).is_err());
        assert!(gram_from_features(&f, &KernelSpec::rbf(1, -1.0)).is_err());
    }

    #[test]
    fn cumtrapz_examples() {
        let out = cumtrapz(&[0.0, 0.5, 1.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.25, 1.0]);

        let grid: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let c = cumtrapz(&grid, &[3.0; 5]).unwrap();
        assert_abs_diff_eq!(*c.last().unwrap(), 3.0, epsilon = 1e-15);

        let n = 1001;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let vals = grid.clone();
        let c = cumtrapz(&grid, &vals).unwrap();
        assert_abs_diff_eq!(*c.last().unwrap(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn cumtrapz_length_mismatch() {
        assert!(cumtrapz(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn integrated_stack_on_constant_kernel() {
        let n = 101;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let k = DMatrix::from_element(n, n, 1.0);
        let stack = integrated_gram_stack(k, &grid, 2).unwrap();
        for j in 0..n {
            assert_abs_diff_eq!(stack.level(1)[(j, 17)], grid[j], epsilon = 1e-12);
            assert_abs_diff_eq!(
                stack.level(2)[(j, 42)],
                grid[j] * grid[j] / 2.0,
                epsilon = 1e-4
            );
        }
        // row 0 of every integrated level vanishes
        for k in 1..=2 {
            for i in 0..n {
                assert_eq!(stack.level(k)[(0, i)], 0.0);
            }
        }
    }

    #[test]
    fn stack_order_zero_keeps_only_k() {
        let grid = vec![0.0, 1.0];
        let k = DMatrix::from_element(2, 2, 2.0);
        let stack = integrated_gram_stack(k.clone(), &grid, 0).unwrap();
        assert_eq!(stack.order(), 0);
        assert_eq!(stack.level(0), &k);
    }

    #[test]
    fn query_rows_floor_rule() {
        let n = 7;
        let grid: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let k = DMatrix::from_fn(n, n, |i, j| ((i + 1) * (j + 1)) as f64);
        let stack = integrated_gram_stack(k, &grid, 1).unwrap();
        let at_last = query_rows(&stack, grid[n - 1]).unwrap();
        assert_eq!(at_last[0], stack.rows_at_node(n - 1)[0]);
        assert_eq!(at_last[1], stack.rows_at_node(n - 1)[1]);
        let at_start = query_rows(&stack, 0.0).unwrap();
        assert!(at_start[1].iter().all(|&v| v == 0.0));
        let between = query_rows(&stack, 5.5).unwrap();
        assert_eq!(between[0], stack.rows_at_node(5)[0]);
        assert!(query_rows(&stack, -1.0).is_err());
    }

    #[test]
    fn incremental_extension_matches_batch() {
        // build a stack on 6 nodes, then extend to 9 and compare against a
        // from-scratch build on the full grid
        let n_full = 9;
        let grid_full: Vec<f64> = (0..n_full).map(|i| i as f64 * 0.13).collect();
        let k_full = DMatrix::from_fn(n_full, n_full, |i, j| {
            (-((i as f64 - j as f64) * 0.37).powi(2)).exp()
        });
        let batch = integrated_gram_stack(k_full.clone(), &grid_full, 2).unwrap();

        let n0 = 6;
        let k0 = k_full.view((0, 0), (n0, n0)).into_owned();
        let mut inc = integrated_gram_stack(k0, &grid_full[..n0], 2).unwrap();
        for step in n0..n_full {
            let row: Vec<f64> = (0..=step).map(|i| k_full[(step, i)]).collect();
            inc.extend(grid_full[step], &row).unwrap();
        }
        for lev in 0..=2 {
            for i in 0..n_full {
                for j in 0..n_full {
                    assert_abs_diff_eq!(
                        inc.level(lev)[(i, j)],
                        batch.level(lev)[(i, j)],
                        epsilon = 1e-12
                    );
                }
            }
        }
    }
}
