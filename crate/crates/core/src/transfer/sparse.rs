use rayon::prelude::*;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            offsets[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        Self {
            rows,
            cols,
            offsets,
            indices,
            values,
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            t.extend(self.row(r).map(|(c, v)| (c, r, v)));
        }
        Self::from_triplets(self.cols, self.rows, t)
    }

    /// `out = A x` for `x` holding `dim` interleaved components per column.
    pub fn mul_blocks(&self, x: &[f64], dim: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols * dim);
        debug_assert_eq!(out.len(), self.rows * dim);
        out.par_chunks_mut(dim)
            .enumerate()
            .with_min_len(256)
            .for_each(|(r, o)| {
                o.iter_mut().for_each(|v| *v = 0.0);
                for (c, a) in self.row(r) {
                    for (oi, xi) in o.iter_mut().zip(&x[c * dim..(c + 1) * dim]) {
                        *oi += a * xi;
                    }
                }
            });
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                d[r * self.cols + c] = v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_multiply() {
        let a = Csr::from_triplets(
            2,
            3,
            vec![(0, 1, 1.0), (1, 0, 2.0), (0, 1, 0.5), (1, 2, -1.0)],
        );
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.nnz(), 3);
        let mut out = vec![0.0; 2];
        a.mul_blocks(&[1.0, 2.0, 3.0], 1, &mut out);
        assert_eq!(out, vec![3.0, -1.0]);
        assert_eq!(a.transpose().get(2, 1), -1.0);
        assert_eq!(a.to_dense(), vec![0.0, 1.5, 0.0, 2.0, 0.0, -1.0]);
    }
}
