//! Discretely observed paths, the count-sampled prefix family and
//! deterministic channel augmentations.
//!
//! A [`Path`] is a piecewise-linear interpolation of samples on a strictly
//! increasing time grid. Count-sampling turns one observed path of N+1
//! samples into the nested prefix family f_0 ⊂ f_1 ⊂ … ⊂ f_N used as kernel
//! anchors, where f_0 is the degenerate two-point path that repeats the
//! initial value so the signature kernel is well-defined on it.

use nalgebra::DMatrix;

use crate::error::{Result, SigError};

/// A d-dimensional path observed on a strictly increasing time grid,
/// interpreted piecewise-linearly between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    times: Vec<f64>,
    /// One row per sample, one column per channel.
    values: DMatrix<f64>,
}

impl Path {
    /// Builds a path from a time grid and per-sample rows.
    pub fn new(times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(SigError::invalid("path needs at least one sample"));
        }
        if times.len() != rows.len() {
            return Err(SigError::invalid(format!(
                "grid has {} entries but {} value rows were given",
                times.len(),
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(SigError::invalid("path dimension must be >= 1"));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(SigError::invalid("value rows have inconsistent widths"));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(SigError::invalid(format!(
                    "time grid must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if times.iter().any(|t| !t.is_finite())
            || rows.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(SigError::invalid("path contains non-finite entries"));
        }
        let values = DMatrix::from_fn(times.len(), dim, |i, j| rows[i][j]);
        Ok(Path { times, values })
    }

    /// Scalar path from (t, x) pairs.
    pub fn scalar(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let rows = values.into_iter().map(|v| vec![v]).collect();
        Path::new(times, rows)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of channels.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Column of a single channel.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values.column(c).iter().copied().collect()
    }

    /// Index of the last grid node with t_j <= t (prefix-floor rule).
    pub fn floor_index(&self, t: f64) -> Result<usize> {
        if t < self.times[0] {
            return Err(SigError::invalid(format!(
                "query time {} precedes the first observation {}",
                t, self.times[0]
            )));
        }
        let mut j = 0;
        for (i, &tj) in self.times.iter().enumerate() {
            if tj <= t {
                j = i;
            } else {
                break;
            }
        }
        Ok(j)
    }

    /// Prepends the time grid as channel 0, giving the time-augmented path
    /// (t, X_t). The grid itself is copied bitwise.
    pub fn augment_time(&self) -> Path {
        let n = self.len();
        let d = self.dim();
        let values = DMatrix::from_fn(n, d + 1, |i, j| {
            if j == 0 {
                self.times[i]
            } else {
                self.values[(i, j - 1)]
            }
        });
        Path {
            times: self.times.clone(),
            values,
        }
    }

    /// Inserts a t^alpha channel right after the time channel, giving the
    /// lifted path (t, t^alpha, rest…). Requires a time-augmented input
    /// (channel 0 must be the grid) and alpha in (0,1).
    pub fn augment_time_power(&self, alpha: f64) -> Result<Path> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(SigError::invalid(format!(
                "time-power exponent must lie in (0,1), got {alpha}"
            )));
        }
        let time_channel_ok = (0..self.len()).all(|i| self.values[(i, 0)] == self.times[i]);
        if !time_channel_ok {
            return Err(SigError::invalid(
                "time-power augmentation expects a time-augmented path (channel 0 = t)",
            ));
        }
        let n = self.len();
        let d = self.dim();
        let values = DMatrix::from_fn(n, d + 1, |i, j| match j {
            0 => self.values[(i, 0)],
            1 => self.times[i].powf(alpha),
            _ => self.values[(i, j - 1)],
        });
        Ok(Path {
            times: self.times.clone(),
            values,
        })
    }

    /// Appends extra channels after the existing ones (used by learned
    /// lifts). Original channels are preserved bitwise.
    pub fn concat_channels(&self, extra: &DMatrix<f64>) -> Result<Path> {
        if extra.nrows() != self.len() {
            return Err(SigError::invalid(format!(
                "extension has {} rows but the path has {} samples",
                extra.nrows(),
                self.len()
            )));
        }
        let n = self.len();
        let d = self.dim();
        let values = DMatrix::from_fn(n, d + extra.ncols(), |i, j| {
            if j < d {
                self.values[(i, j)]
            } else {
                extra[(i, j - d)]
            }
        });
        Ok(Path {
            times: self.times.clone(),
            values,
        })
    }
}

/// The count-sampled family of nested prefixes of a base path.
///
/// Prefix i restricts the base to [t_0, t_i]; prefix 0 is the degenerate
/// two-point path that repeats the first sample at t_0 (zero-length segment,
/// trivial signature). The prefixes are materialized lazily.
#[derive(Debug, Clone)]
pub struct PathFamily {
    base: Path,
}

impl PathFamily {
    pub fn base(&self) -> &Path {
        &self.base
    }

    /// Number of prefixes, N+1 for a base with N+1 samples.
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Materializes prefix i as an owned path.
    ///
    /// Prefix 0 duplicates the first row at the same time; its `Path`
    /// representation keeps a single sample (the degenerate segment has zero
    /// length), and signature code treats it as the trivial signature.
    pub fn prefix(&self, i: usize) -> Path {
        assert!(i < self.len(), "prefix index out of range");
        let take = if i == 0 { 1 } else { i + 1 };
        let times = self.base.times[..take].to_vec();
        let rows: Vec<Vec<f64>> = (0..take).map(|r| self.base.row(r)).collect();
        Path::new(times, rows).expect("prefix of a valid path is valid")
    }

    /// Value rows of prefix i including the degenerate duplication of f_0,
    /// i.e. exactly the sample list the count-sampling construction names.
    pub fn prefix_rows(&self, i: usize) -> Vec<Vec<f64>> {
        assert!(i < self.len(), "prefix index out of range");
        if i == 0 {
            vec![self.base.row(0), self.base.row(0)]
        } else {
            (0..=i).map(|r| self.base.row(r)).collect()
        }
    }
}

/// Builds the count-sampled prefix family of a path with at least two
/// samples.
pub fn count_sample(path: &Path) -> Result<PathFamily> {
    if path.len() < 2 {
        return Err(SigError::invalid(
            "count-sampling needs a path with at least 2 samples",
        ));
    }
    Ok(PathFamily { base: path.clone() })
}
