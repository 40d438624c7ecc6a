//! Compressed-row matrices built from coordinate triplets.

/// Coordinate entry (row, column, value).
pub type Triplet = (u32, u32, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed in the order they appear across `blocks`, so the
    /// result depends only on block order, not on how blocks were produced.
    pub fn from_triplet_blocks(n_rows: usize, n_cols: usize, blocks: &[Vec<Triplet>]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for b in blocks {
            for t in b {
                counts[t.0 as usize + 1] += 1;
            }
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let total = counts[n_rows];
        let mut cols = vec![0u32; total];
        let mut vals = vec![0.0f64; total];
        let mut fill = counts.clone();
        for b in blocks {
            for &(r, c, v) in b {
                let k = fill[r as usize];
                cols[k] = c;
                vals[k] = v;
                fill[r as usize] += 1;
            }
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n_rows {
            let (s, e) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(s..e);
            // stable: equal columns keep insertion order
            order.sort_by_key(|&k| cols[k]);
            let mut last = u32::MAX;
            for &k in &order {
                if cols[k] == last {
                    *values.last_mut().expect("entry exists") += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                    last = cols[k];
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].iter().zip(&self.values[s..e]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[s..e].binary_search(&(j as u32)) {
            Ok(k) => self.values[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// max |A - Aᵀ| / max |A|.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            worst / m
        }
    }
}
