//! Dense matrices over a fixed ring. Everything here is exact mod p^k;
//! determinants use the division-free Berkowitz algorithm so zero divisors
//! in R/p^k never matter.

use crate::error::{Error, Result};
use crate::ring::{Elt, Ring};
use std::fmt;

#[derive(Clone, PartialEq, Eq)]
pub struct Mat {
    ring: Ring,
    rows: usize,
    cols: usize,
    data: Vec<Elt>,
}

impl Mat {
    pub fn zero(ring: &Ring, rows: usize, cols: usize) -> Mat {
        Mat {
            ring: ring.clone(),
            rows,
            cols,
            data: vec![ring.zero(); rows * cols],
        }
    }

    pub fn identity(ring: &Ring, n: usize) -> Mat {
        let mut m = Mat::zero(ring, n, n);
        for i in 0..n {
            m[(i, i)] = ring.one();
        }
        m
    }

    pub fn from_rows(ring: &Ring, rows: Vec<Vec<Elt>>) -> Result<Mat> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            for e in row {
                if e.ring() != ring {
                    return Err(Error::ShapeMismatch("entry from another ring".into()));
                }
                data.push(e);
            }
        }
        Ok(Mat {
            ring: ring.clone(),
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_int_rows(ring: &Ring, rows: &[&[i64]]) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Mat::zero(ring, r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = ring.from_int(v);
            }
        }
        m
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zero(&self.ring, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = Mat::zero(&self.ring, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = a.mul(&other[(k, j)]);
                    out[(i, j)] = out[(i, j)].add(&t);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = a.add(b);
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = a.sub(b);
        }
        out
    }

    pub fn scale(&self, s: &Elt) -> Mat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = a.mul(s);
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<Elt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[Elt]) {
        assert_eq!(col.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = col[i].clone();
        }
    }

    pub fn row(&self, i: usize) -> Vec<Elt> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    /// Columns of `self` followed by columns of `other`.
    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        let mut out = Mat::zero(&self.ring, self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)].clone();
            }
            for j in 0..other.cols {
                out[(i, self.cols + j)] = other[(i, j)].clone();
            }
        }
        out
    }

    /// Block diagonal sum.
    pub fn direct_sum(&self, other: &Mat) -> Mat {
        let mut out = Mat::zero(&self.ring, self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)].clone();
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out[(self.rows + i, self.cols + j)] = other[(i, j)].clone();
            }
        }
        out
    }

    pub fn submatrix(&self, row_idx: &[usize], col_idx: &[usize]) -> Mat {
        let mut out = Mat::zero(&self.ring, row_idx.len(), col_idx.len());
        for (i, &ri) in row_idx.iter().enumerate() {
            for (j, &cj) in col_idx.iter().enumerate() {
                out[(i, j)] = self[(ri, cj)].clone();
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self[(i, j)] != self[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    /// Determinant by the Berkowitz vector recurrence (division free, so
    /// zero divisors in R/p^k are harmless).
    pub fn det(&self) -> Elt {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        let ring = &self.ring;
        if n == 0 {
            return ring.one();
        }
        if n == 1 {
            return self[(0, 0)].clone();
        }
        // coeffs = characteristic polynomial of the leading principal block,
        // descending powers, leading coefficient 1.
        let mut coeffs: Vec<Elt> = vec![ring.one(), self[(0, 0)].neg()];
        for step in 1..n {
            let a = self[(step, step)].clone();
            let row: Vec<Elt> = (0..step).map(|j| self[(step, j)].clone()).collect();
            let col: Vec<Elt> = (0..step).map(|i| self[(i, step)].clone()).collect();
            // Toeplitz first column: 1, -a, -(R C), -(R M C), -(R M^2 C), ...
            let mut tvals: Vec<Elt> = Vec::with_capacity(step + 2);
            tvals.push(ring.one());
            tvals.push(a.neg());
            let mut vec_cur = col.clone();
            for _ in 0..step {
                let dot = row
                    .iter()
                    .zip(&vec_cur)
                    .fold(ring.zero(), |acc, (r, v)| acc.add(&r.mul(v)));
                tvals.push(dot.neg());
                let mut next = vec![ring.zero(); step];
                for (i, ni) in next.iter_mut().enumerate() {
                    for j in 0..step {
                        *ni = ni.add(&self[(i, j)].mul(&vec_cur[j]));
                    }
                }
                vec_cur = next;
            }
            let mut next_coeffs = vec![ring.zero(); coeffs.len() + 1];
            for (i, nc) in next_coeffs.iter_mut().enumerate() {
                for (t, tv) in tvals.iter().enumerate() {
                    if i >= t && i - t < coeffs.len() {
                        *nc = nc.add(&tv.mul(&coeffs[i - t]));
                    }
                }
            }
            coeffs = next_coeffs;
        }
        // char(0) = det(-A) = (-1)^n det A
        let constant = coeffs.last().unwrap().clone();
        if n % 2 == 0 {
            constant
        } else {
            constant.neg()
        }
    }

    /// Adjugate via cofactors; fine at the small sizes used here.
    pub fn adjugate(&self) -> Mat {
        assert!(self.is_square());
        let n = self.rows;
        let ring = &self.ring;
        if n == 0 {
            return Mat::zero(ring, 0, 0);
        }
        if n == 1 {
            return Mat::identity(ring, 1);
        }
        let mut adj = Mat::zero(ring, n, n);
        let all: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in 0..n {
                let ri: Vec<usize> = all.iter().copied().filter(|&r| r != i).collect();
                let cj: Vec<usize> = all.iter().copied().filter(|&c| c != j).collect();
                let minor = self.submatrix(&ri, &cj).det();
                adj[(j, i)] = if (i + j) % 2 == 0 { minor } else { minor.neg() };
            }
        }
        adj
    }

    /// Rank of the image over the residue field F_q.
    pub fn residue_rank(&self) -> usize {
        let rf = self.ring.residue_field();
        let mut m: Vec<Vec<Elt>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| rf.transport(&self[(i, j)])).collect())
            .collect();
        let mut rank = 0;
        for col in 0..self.cols {
            let mut pivot = None;
            for (r, mr) in m.iter().enumerate().skip(rank) {
                if !mr[col].is_zero() {
                    pivot = Some(r);
                    break;
                }
            }
            let Some(p) = pivot else { continue };
            m.swap(rank, p);
            let inv = m[rank][col].inv().expect("nonzero residue is a unit");
            for j in 0..self.cols {
                m[rank][j] = m[rank][j].mul(&inv);
            }
            for r in 0..self.rows {
                if r != rank && !m[r][col].is_zero() {
                    let c = m[r][col].clone();
                    for j in 0..self.cols {
                        let t = c.mul(&m[rank][j]);
                        m[r][j] = m[r][j].sub(&t);
                    }
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }

    /// Solve self * x = b when self is square with unit determinant.
    pub fn solve_unit(&self, b: &[Elt]) -> Result<Vec<Elt>> {
        let det = self.det();
        if !det.is_unit() {
            return Err(Error::DivisionByNonUnit);
        }
        let adj = self.adjugate();
        let det_inv = det.inv()?;
        let mut x = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = self.ring.zero();
            for j in 0..self.cols {
                acc = acc.add(&adj[(i, j)].mul(&b[j]));
            }
            x.push(acc.mul(&det_inv));
        }
        Ok(x)
    }

    pub fn map<F: Fn(&Elt) -> Elt>(&self, f: F) -> Mat {
        let mut out = self.clone();
        for e in out.data.iter_mut() {
            *e = f(e);
        }
        out
    }

    /// Minimum valuation over all entries (k for the zero matrix).
    pub fn content_ord(&self) -> u32 {
        let mut best = self.ring.precision();
        for e in &self.data {
            best = best.min(e.valuation());
            if best == 0 {
                break;
            }
        }
        best
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = Elt;
    fn index(&self, (i, j): (usize, usize)) -> &Elt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Elt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(w, "Mat {}x{} over {}", self.rows, self.cols, self.ring)?;
        for i in 0..self.rows {
            write!(w, "  [")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(w, ", ")?;
                }
                write!(w, "{}", self[(i, j)])?;
            }
            writeln!(w, "]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2() -> Ring {
        Ring::new(2, 1, 8).unwrap()
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let r = z2();
        let m = Mat::from_int_rows(&r, &[&[2, 1, 0], &[1, 2, 3], &[0, 3, 5]]);
        // cofactor: 2*(10-9) - 1*(5-0) + 0 = 2 - 5 = -3
        assert_eq!(m.det(), r.from_int(-3));
        let h = Mat::from_int_rows(&r, &[&[0, 1], &[1, 0]]);
        assert_eq!(h.det(), r.from_int(-1));
        assert_eq!(Mat::identity(&r, 4).det(), r.one());
    }

    #[test]
    fn adjugate_identity() {
        let r = z2();
        let m = Mat::from_int_rows(&r, &[&[2, 1, 0], &[1, 2, 3], &[0, 3, 5]]);
        let prod = m.mul(&m.adjugate());
        let det = m.det();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { det.clone() } else { r.zero() };
                assert_eq!(prod[(i, j)], want);
            }
        }
    }

    #[test]
    fn residue_rank_and_solve() {
        let r = z2();
        let m = Mat::from_int_rows(&r, &[&[1, 2], &[2, 4]]);
        assert_eq!(m.residue_rank(), 1);
        let a = Mat::from_int_rows(&r, &[&[3, 2], &[2, 3]]);
        let x = a.solve_unit(&[r.from_int(1), r.from_int(4)]).unwrap();
        let b0 = a[(0, 0)].mul(&x[0]).add(&a[(0, 1)].mul(&x[1]));
        let b1 = a[(1, 0)].mul(&x[0]).add(&a[(1, 1)].mul(&x[1]));
        assert_eq!(b0, r.from_int(1));
        assert_eq!(b1, r.from_int(4));
    }
}
