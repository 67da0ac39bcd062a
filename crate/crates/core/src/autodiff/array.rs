use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};

/// Dense row-major matrix. Vectors are stored as `1 × n` rows or `n × 1` columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Array {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Array {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(dim_err("array", format!("shape {rows}x{cols} has a zero extent")));
        }
        if rows * cols != data.len() {
            return Err(dim_err(
                "array",
                format!("shape {rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Array { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero extent");
        Array { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "zero extent");
        Array { rows, cols, data: vec![value; rows * cols] }
    }

    /// A `1 × n` row vector.
    pub fn row(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "empty row");
        Array { rows: 1, cols: data.len(), data }
    }

    /// An `n × 1` column vector.
    pub fn column(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "empty column");
        Array { rows: data.len(), cols: 1, data }
    }

    pub fn scalar(value: f64) -> Self {
        Array { rows: 1, cols: 1, data: vec![value] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(dim_err("array", "ragged rows".into()));
        }
        Array::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_vector(&self) -> bool {
        self.rows == 1 || self.cols == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|x| !x.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Array) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn add_assign_slice(&mut self, other: &[f64]) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(other) {
            *a += b;
        }
    }
}

/// `a · b` for row-major slices.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `out += g · bᵀ` where `g` is m×n and `b` is k×n.
pub(crate) fn matmul_bt_acc(g: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = 0.0;
            for (x, y) in grow.iter().zip(brow) {
                s += x * y;
            }
            out[i * k + p] += s;
        }
    }
}

/// `out += aᵀ · g` where `a` is m×k and `g` is m×n.
pub(crate) fn matmul_at_acc(a: &[f64], g: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += aip * gv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_product_must_match() {
        assert!(Array::new(2, 3, vec![0.0; 5]).is_err());
        assert!(Array::new(0, 3, vec![]).is_err());
        assert_eq!(Array::new(2, 3, vec![0.0; 6]).unwrap().shape(), (2, 3));
    }

    #[test]
    fn matmul_kernels_agree_with_definition() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let mut out = [0.0; 4];
        matmul_into(&a, &b, 2, 3, 2, &mut out);
        assert_eq!(out, [58.0, 64.0, 139.0, 154.0]);

        let mut ga = [0.0; 6];
        matmul_bt_acc(&[1.0, 0.0, 0.0, 1.0], &b, 2, 3, 2, &mut ga);
        assert_eq!(ga, [7.0, 9.0, 11.0, 8.0, 10.0, 12.0]);

        let mut gb = [0.0; 6];
        matmul_at_acc(&a, &[1.0, 0.0, 0.0, 1.0], 2, 3, 2, &mut gb);
        assert_eq!(gb, [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}
