//! Minimal compressed-row storage used for the hat-function matrices.

use std::ops::{AddAssign, Range};

use faer::c64;

#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Default + AddAssign> Csr<T> {
    /// Zero matrix with the sparsity pattern given by `pairs` (duplicates allowed).
    pub fn from_pattern(n_rows: usize, n_cols: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0usize; n_rows + 1];
        for &(r, c) in &pairs {
            assert!(r < n_rows && c < n_cols, "entry ({r}, {c}) outside {n_rows}x{n_cols}");
            row_ptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let cols = pairs.iter().map(|p| p.1).collect();
        let values = vec![T::default(); pairs.len()];
        Csr { n_rows, n_cols, row_ptr, cols, values }
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[lo..hi].binary_search(&c).ok().map(|k| lo + k)
    }

    /// Accumulate into an entry of the pattern.
    ///
    /// # Panics
    /// If `(r, c)` is not part of the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: T) {
        let k = self.position(r, c).unwrap_or_else(|| panic!("({r}, {c}) not in pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.position(r, c).map(|k| self.values[k]).unwrap_or_default()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[lo..hi], &self.values[lo..hi])
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterate `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            (lo..hi).map(move |k| (r, self.cols[k], self.values[k]))
        })
    }

    /// Copy of the block `rows × cols`, re-indexed from zero.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Csr<T> {
        let mut row_ptr = vec![0usize];
        let mut out_cols = Vec::new();
        let mut values = Vec::new();
        for r in rows.clone() {
            let (cs, vs) = self.row(r);
            for (c, v) in cs.iter().zip(vs) {
                if cols.contains(c) {
                    out_cols.push(c - cols.start);
                    values.push(*v);
                }
            }
            row_ptr.push(out_cols.len());
        }
        Csr { n_rows: rows.len(), n_cols: cols.len(), row_ptr, cols: out_cols, values }
    }

    /// Same pattern, values combined entry by entry from several matrices.
    pub fn zip_map<U: Copy + Default + AddAssign>(&self, others: &[&Csr<T>], f: impl Fn(&[T]) -> U) -> Csr<U> {
        let mut buf = Vec::with_capacity(others.len() + 1);
        let values = (0..self.values.len())
            .map(|k| {
                buf.clear();
                buf.push(self.values[k]);
                for o in others {
                    debug_assert_eq!(o.cols.len(), self.cols.len());
                    buf.push(o.values[k]);
                }
                f(&buf)
            })
            .collect();
        Csr { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr: self.row_ptr.clone(), cols: self.cols.clone(), values }
    }
}

impl Csr<f64> {
    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| {
                let (cs, vs) = self.row(r);
                cs.iter().zip(vs).fold(c64::new(0.0, 0.0), |s, (c, v)| s + x[*c] * *v)
            })
            .collect()
    }

    /// `xᴴ A y`
    pub fn form(&self, x: &[c64], y: &[c64]) -> c64 {
        assert_eq!(x.len(), self.n_rows);
        let mut s = c64::new(0.0, 0.0);
        for r in 0..self.n_rows {
            let (cs, vs) = self.row(r);
            let row = cs.iter().zip(vs).fold(c64::new(0.0, 0.0), |s, (c, v)| s + y[*c] * *v);
            s += x[r].conj() * row;
        }
        s
    }
}

impl Csr<c64> {
    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| {
                let (cs, vs) = self.row(r);
                cs.iter().zip(vs).fold(c64::new(0.0, 0.0), |s, (c, v)| s + x[*c] * *v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_and_read() {
        let mut a = Csr::<f64>::from_pattern(3, 3, vec![(0, 0), (0, 2), (2, 1), (0, 2), (1, 1)]);
        assert_eq!(a.nnz(), 4);
        a.add(0, 2, 1.5);
        a.add(0, 2, 1.0);
        a.add(2, 1, -1.0);
        assert_eq!(a.get(0, 2), 2.5);
        assert_eq!(a.get(1, 0), 0.0);
        let y = a.apply(&[c64::new(1.0, 0.0), c64::new(0.0, 2.0), c64::new(1.0, 1.0)]);
        assert_eq!(y[0], c64::new(2.5, 2.5));
        assert_eq!(y[2], c64::new(0.0, -2.0));
        let b = a.block(0..1, 1..3);
        assert_eq!(b.n_cols(), 2);
        assert_eq!(b.get(0, 1), 2.5);
    }

    #[test]
    #[should_panic]
    fn add_outside_pattern_panics() {
        let mut a = Csr::<f64>::from_pattern(2, 2, vec![(0, 0)]);
        a.add(1, 1, 1.0);
    }
}
