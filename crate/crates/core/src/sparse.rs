//! Compressed sparse row matrices.

use crate::error::{Error, Result};

/// CSR matrix with strictly increasing column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given sparsity pattern; `pattern[r]` lists the
    /// columns of row `r` (any order, duplicates ignored).
    pub fn from_pattern(rows: usize, cols: usize, pattern: &[Vec<usize>]) -> Result<Self> {
        if pattern.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: pattern.len(),
            });
        }
        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in pattern {
            let mut r = row.clone();
            r.sort_unstable();
            r.dedup();
            if let Some(&c) = r.last() {
                if c >= cols {
                    return Err(Error::DimensionMismatch {
                        expected: cols,
                        found: c + 1,
                    });
                }
            }
            col_indices.extend(r);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values: vec![0.0; nnz],
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut pattern = vec![Vec::new(); rows];
        for &(r, c, _) in triplets {
            if r >= rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: r + 1,
                });
            }
            pattern[r].push(c);
        }
        let mut m = Self::from_pattern(rows, cols, &pattern)?;
        for &(r, c, v) in triplets {
            m.add_to(r, c, v);
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_offsets[r];
        let cols = &self.col_indices[start..self.row_offsets[r + 1]];
        cols.binary_search(&c).ok().map(|k| start + k)
    }

    /// Entry `(r, c)`, zero outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(r, c)`, which must be in the pattern.
    ///
    /// # Panics
    /// If `(r, c)` is not a stored entry.
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) outside sparsity pattern"));
        self.values[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// `Σ_k c_k · A_k` over matrices of one shape. Patterns are merged when
    /// they differ.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<Self> {
        let Some(&(_, first)) = terms.first() else {
            return Err(Error::InvalidArgument("empty linear combination".into()));
        };
        for (_, m) in terms {
            if m.rows != first.rows || m.cols != first.cols {
                return Err(Error::DimensionMismatch {
                    expected: first.rows,
                    found: m.rows,
                });
            }
        }
        if terms.iter().all(|(_, m)| m.same_pattern(first)) {
            let mut out = first.clone();
            out.values.iter_mut().for_each(|v| *v = 0.0);
            for (c, m) in terms {
                for (o, v) in out.values.iter_mut().zip(&m.values) {
                    *o += c * v;
                }
            }
            return Ok(out);
        }
        let pattern: Vec<Vec<usize>> = (0..first.rows)
            .map(|r| {
                terms
                    .iter()
                    .flat_map(|(_, m)| m.row(r).0.iter().copied())
                    .collect()
            })
            .collect();
        let mut out = Self::from_pattern(first.rows, first.cols, &pattern)?;
        for (c, m) in terms {
            for r in 0..m.rows {
                let (cols, vals) = m.row(r);
                for (&col, &v) in cols.iter().zip(vals) {
                    out.add_to(r, col, c * v);
                }
            }
        }
        Ok(out)
    }

    /// Submatrix on the index set `keep` (used for both rows and columns);
    /// `slot[i]` maps an original index to its position in `keep`.
    pub fn restrict(&self, keep: &[usize], slot: impl Fn(usize) -> Option<usize>) -> Self {
        let mut row_offsets = Vec::with_capacity(keep.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for &r in keep {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if let Some(s) = slot(c) {
                    col_indices.push(s);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            rows: keep.len(),
            cols: keep.len(),
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Half-bandwidth `max |r - c|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.rows)
            .flat_map(|r| self.row(r).0.iter().map(move |&c| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
