//! Dense row-major tensors and mode-`j` products, shared by grid evaluation
//! and mass-matrix assembly.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub(crate) struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<Complex64>,
}

impl Tensor {
    pub fn from_real(shape: Vec<usize>, data: impl IntoIterator<Item = f64>) -> Self {
        let data: Vec<Complex64> = data.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor { shape, data: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Mode-`axis` product with a `rows × shape[axis]` row-major matrix.
    pub fn contract_axis(&self, axis: usize, mat: &[Complex64], rows: usize) -> Tensor {
        let n = self.shape[axis];
        assert_eq!(mat.len(), rows * n, "matrix does not match axis length");
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut shape = self.shape.clone();
        shape[axis] = rows;
        let mut out = vec![Complex64::new(0.0, 0.0); outer * rows * inner];
        for o in 0..outer {
            for r in 0..rows {
                let dst = &mut out[(o * rows + r) * inner..(o * rows + r + 1) * inner];
                for j in 0..n {
                    let m = mat[r * n + j];
                    if m.re == 0.0 && m.im == 0.0 {
                        continue;
                    }
                    let src = &self.data[(o * n + j) * inner..(o * n + j + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += m * s;
                    }
                }
            }
        }
        Tensor { shape, data: out }
    }
}

/// Iterates all multi-indices of a box `shape` in row-major order.
pub(crate) fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.iter().any(|&n| n == 0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut axis = shape.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contract_matches_direct_sum() {
        let t = Tensor::from_real(vec![2, 3], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // sum along axis 1
        let ones = vec![Complex64::new(1.0, 0.0); 3];
        let s = t.contract_axis(1, &ones, 1);
        assert_eq!(s.shape, vec![2, 1]);
        assert_eq!(s.data[0].re, 6.0);
        assert_eq!(s.data[1].re, 15.0);
        let s0 = t.contract_axis(0, &ones[..2], 1);
        assert_eq!(s0.shape, vec![1, 3]);
        assert_eq!(s0.data.iter().map(|c| c.re).collect::<Vec<_>>(), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn index_iteration_is_row_major() {
        let mut seen = Vec::new();
        for_each_index(&[2, 2], |i| seen.push(i.to_vec()));
        assert_eq!(seen, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let mut count = 0;
        for_each_index(&[0, 3], |_| count += 1);
        assert_eq!(count, 0);
    }
}
