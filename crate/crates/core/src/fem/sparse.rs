/// Symmetric matrix in CSR form; both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Zero matrix on a given pattern; `pattern[i]` must be sorted and unique.
    pub fn with_pattern(pattern: &[Vec<usize>]) -> Self {
        let n = pattern.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for row in pattern {
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        SparseSymMatrix { n, row_ptr, cols, vals: vec![0.0; nnz] }
    }

    /// Builds from `(i, j, v)` triplets; duplicates are summed in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut pattern = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            pattern[i].push(j);
        }
        for row in &mut pattern {
            row.sort_unstable();
            row.dedup();
        }
        let mut a = Self::with_pattern(&pattern);
        for &(i, j, v) in triplets {
            a.add(i, j, v);
        }
        a
    }

    pub fn identity(n: usize) -> Self {
        let pattern: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut a = Self::with_pattern(&pattern);
        a.vals.iter_mut().for_each(|v| *v = 1.0);
        a
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.vals[k])
    }

    /// Adds `v` at `(i, j)`; panics if the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).unwrap_or_else(|| panic!("({i},{j}) outside sparsity pattern"));
        self.vals[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `xᵀ A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                x[i] * cols.iter().zip(vals).map(|(&j, &v)| v * y[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij − A_ji|`.
    pub fn symmetry_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                err = err.max((v - self.get(j, i)).abs());
            }
        }
        err
    }

    /// `a·self + b·other`; both must share the sparsity pattern.
    pub fn combine(&self, a: f64, other: &SparseSymMatrix, b: f64) -> SparseSymMatrix {
        assert!(self.row_ptr == other.row_ptr && self.cols == other.cols, "pattern mismatch");
        let vals = self.vals.iter().zip(&other.vals).map(|(x, y)| a * x + b * y).collect();
        SparseSymMatrix { n: self.n, row_ptr: self.row_ptr.clone(), cols: self.cols.clone(), vals }
    }

    /// Principal submatrix on the rows/columns with `map[i] = Some(new index)`.
    pub fn restrict(&self, keep: &[usize], map: &[Option<usize>]) -> SparseSymMatrix {
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &i in keep {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if let Some(jj) = map[j] {
                    cols.push(jj);
                    vals.push(x);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseSymMatrix { n: keep.len(), row_ptr, cols, vals }
    }

    /// `y = A[rows, cols] x` for index subsets, `x` indexed by `cols`.
    pub fn mul_block(&self, rows: &[usize], col_map: &[Option<usize>], x: &[f64]) -> Vec<f64> {
        rows.iter()
            .map(|&i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).filter_map(|(&j, &a)| col_map[j].map(|jj| a * x[jj])).sum()
            })
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
