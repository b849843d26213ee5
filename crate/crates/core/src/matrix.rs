//! Square dense matrix that grows by one row and column at a time.
//!
//! Storage is row-major with a row stride equal to the allocated capacity, so
//! appending a border only reallocates when the capacity doubles.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Default)]
pub struct GrowMatrix {
    data: Vec<f64>,
    dim: usize,
    cap: usize,
}

impl GrowMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(cap: usize) -> Self {
        GrowMatrix {
            data: vec![0.0; cap * cap],
            dim: 0,
            cap,
        }
    }

    pub fn from_scalar(x: f64) -> Self {
        let mut m = Self::with_capacity(4);
        m.dim = 1;
        m.data[0] = x;
        m
    }

    /// Builds from row slices; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        let mut m = Self::with_capacity(n.max(4));
        m.dim = n;
        for (i, r) in rows.iter().enumerate() {
            m.row_mut(i).copy_from_slice(r);
        }
        Some(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::with_capacity(n.max(4));
        m.dim = n;
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i * self.cap + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i * self.cap + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let s = i * self.cap;
        &self.data[s..s + self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let s = i * self.cap;
        &mut self.data[s..s + self.dim]
    }

    /// `out = A x`
    pub fn mul_vec(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.dim);
        out.clear();
        out.extend((0..self.dim).map(|i| dot(self.row(i), x)));
    }

    /// `out = Aᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.dim);
        out.clear();
        out.resize(self.dim, 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            axpy(xi, self.row(i), out);
        }
    }

    /// `A += s · x yᵀ`
    pub fn rank_one_update(&mut self, s: f64, x: &[f64], y: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (i, &xi) in x.iter().enumerate() {
            let c = s * xi;
            if c == 0.0 {
                continue;
            }
            axpy(c, y, self.row_mut(i));
        }
    }

    /// Appends a border: `[[A, col], [rowᵀ, corner]]`.
    pub fn push_border(&mut self, col: &[f64], row: &[f64], corner: f64) {
        let k = self.dim;
        debug_assert_eq!(col.len(), k);
        debug_assert_eq!(row.len(), k);
        if k == self.cap {
            self.reserve_for(k + 1);
        }
        self.dim = k + 1;
        for (i, &c) in col.iter().enumerate() {
            self.data[i * self.cap + k] = c;
        }
        let last = self.row_mut(k);
        last[..k].copy_from_slice(row);
        last[k] = corner;
    }

    fn reserve_for(&mut self, need: usize) {
        let new_cap = need.max(self.cap * 2).max(4);
        let mut data = vec![0.0; new_cap * new_cap];
        for i in 0..self.dim {
            data[i * new_cap..i * new_cap + self.dim].copy_from_slice(self.row(i));
        }
        self.data = data;
        self.cap = new_cap;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).iter().all(|x| x.is_finite()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `‖A B − I‖∞` computed with plain loops.
pub fn identity_residual(a: &GrowMatrix, b: &GrowMatrix) -> f64 {
    let n = a.dim();
    debug_assert_eq!(b.dim(), n);
    let mut worst: f64 = 0.0;
    let mut row = vec![0.0; n];
    for i in 0..n {
        row.iter_mut().for_each(|x| *x = 0.0);
        for (k, &aik) in a.row(i).iter().enumerate() {
            axpy(aik, b.row(k), &mut row);
        }
        row[i] -= 1.0;
        worst = worst.max(row.iter().map(|x| x.abs()).sum());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn border_growth_past_capacity() {
        let mut m = GrowMatrix::from_scalar(1.0);
        let mut reference = DMatrix::from_element(1, 1, 1.0);
        for k in 1..20 {
            let col: Vec<f64> = (0..k).map(|i| (i * 7 + k) as f64).collect();
            let row: Vec<f64> = (0..k).map(|i| -((i + 3 * k) as f64)).collect();
            m.push_border(&col, &row, k as f64 * 0.5);
            let mut r = reference.clone().resize(k + 1, k + 1, 0.0);
            for i in 0..k {
                r[(i, k)] = col[i];
                r[(k, i)] = row[i];
            }
            r[(k, k)] = k as f64 * 0.5;
            reference = r;
            assert_eq!(m.to_dmatrix(), reference);
        }
    }

    #[test]
    fn products_match_nalgebra() {
        let rows = vec![
            vec![1.0, 2.0, 3.0],
            vec![-1.0, 0.5, 4.0],
            vec![0.0, 2.0, -2.0],
        ];
        let m = GrowMatrix::from_rows(&rows).unwrap();
        let d = m.to_dmatrix();
        let x = [0.3, -1.2, 2.0];
        let xv = nalgebra::DVector::from_column_slice(&x);
        let mut out = Vec::new();
        m.mul_vec(&x, &mut out);
        assert_eq!(out, (&d * &xv).as_slice());
        m.tr_mul_vec(&x, &mut out);
        let expect = d.transpose() * &xv;
        for (a, b) in out.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut m2 = m.clone();
        m2.rank_one_update(2.0, &x, &[1.0, 0.0, -1.0]);
        let expect = &d + 2.0 * &xv * nalgebra::DVector::from_column_slice(&[1.0, 0.0, -1.0]).transpose();
        assert_eq!(m2.to_dmatrix(), expect);
    }

    #[test]
    fn residual_of_identity_is_zero() {
        let i = GrowMatrix::identity(5);
        assert_eq!(identity_residual(&i, &i), 0.0);
        assert!(GrowMatrix::from_rows(&[vec![1.0], vec![2.0]]).is_none());
    }
}
