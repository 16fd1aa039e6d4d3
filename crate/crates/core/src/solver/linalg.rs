//! Sparse matrices and the two linear solvers used by the θ-scheme.

use crate::{par, Error, Result};

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(col, val)` lists; duplicate columns are summed
    /// and columns are sorted.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b]
            .iter()
            .copied()
            .zip(self.vals[a..b].iter().copied())
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(rows)
    }

    /// `a·I + b·self`.
    pub fn shifted(&self, a: f64, b: f64) -> Self {
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = self.row(i).map(|(j, v)| (j, b * v)).collect();
                r.push((i, a));
                r
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |e| e.1))
            .collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        par::for_each_mut(y, |i, yi| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        });
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Sub-, main and super-diagonal bands, if the matrix is tridiagonal.
    pub fn bands(&self) -> Option<Tridiagonal> {
        let n = self.n;
        let mut t = Tridiagonal {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        };
        for i in 0..n {
            for (j, v) in self.row(i) {
                if j == i {
                    t.diag[i] = v;
                } else if j + 1 == i {
                    t.lower[i] = v;
                } else if j == i + 1 {
                    t.upper[i] = v;
                } else {
                    return None;
                }
            }
        }
        Some(t)
    }
}

/// `lower[i]` multiplies `x[i−1]`, `upper[i]` multiplies `x[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

/// LU factors of a tridiagonal matrix without pivoting.
#[derive(Debug, Clone)]
pub struct ThomasFactor {
    lower: Vec<f64>,
    inv_pivot: Vec<f64>,
    upper_scaled: Vec<f64>,
}

impl Tridiagonal {
    pub fn factor(&self) -> Result<ThomasFactor> {
        let n = self.diag.len();
        let mut inv_pivot = vec![0.0; n];
        let mut upper_scaled = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let piv = self.diag[i] - if i > 0 { self.lower[i] * prev } else { 0.0 };
            if !(piv.abs() > 1e-300) || !piv.is_finite() {
                return Err(Error::Solver(format!(
                    "zero pivot at row {i} in tridiagonal solve"
                )));
            }
            inv_pivot[i] = 1.0 / piv;
            upper_scaled[i] = self.upper[i] * inv_pivot[i];
            prev = upper_scaled[i];
        }
        Ok(ThomasFactor {
            lower: self.lower.clone(),
            inv_pivot,
            upper_scaled,
        })
    }
}

impl ThomasFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let prev = if i > 0 { self.lower[i] * y[i - 1] } else { 0.0 };
            y[i] = (rhs[i] - prev) * self.inv_pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= self.upper_scaled[i] * y[i + 1];
        }
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned BiCGSTAB; converged when `‖b − Ax‖ ≤ tol·‖b‖`.
pub fn bicgstab(a: &Csr, b: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = x0.to_vec();
    let mut r: Vec<f64> = a.mul(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..max_iter {
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok(x);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(Error::Solver("BiCGSTAB breakdown (rho = 0)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * inv_diag[i];
        }
        a.matvec(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        if dot(&s, &s).sqrt() <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(x);
        }
        for i in 0..n {
            z[i] = s[i] * inv_diag[i];
        }
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega == 0.0 {
            return Err(Error::Solver("BiCGSTAB breakdown (omega = 0)".into()));
        }
    }
    let res = dot(&r, &r).sqrt() / bnorm;
    Err(Error::Solver(format!(
        "BiCGSTAB did not converge in {max_iter} iterations (relative residual {res:.3e})"
    )))
}
