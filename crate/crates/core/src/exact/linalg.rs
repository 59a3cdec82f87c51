//! Dense Gaussian elimination shared by the exact (`BigRational`) and
//! floating (`f64`) paths.

use num_traits::{Num, Signed};

pub trait Scalar: Clone + Num + Signed + PartialOrd {}
impl<T: Clone + Num + Signed + PartialOrd> Scalar for T {}

fn pivot_row<T: Scalar>(a: &[Vec<T>], col: usize) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (r, row) in a.iter().enumerate().skip(col) {
        let v = row[col].abs();
        if v.is_zero() {
            continue;
        }
        match &best {
            Some((_, b)) if *b >= v => {}
            _ => best = Some((r, v)),
        }
    }
    best.map(|(r, _)| r)
}

/// Solves `a x = b` for square `a`. `None` when `a` is singular.
pub fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = a.len();
    for col in 0..n {
        let p = pivot_row(&a, col)?;
        a.swap(col, p);
        b.swap(col, p);
        let pivot = a[col][col].clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / pivot.clone();
            for c in col..n {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
            let delta = factor * b[col].clone();
            b[r] = b[r].clone() - delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            acc = acc - a[r][c].clone() * x[c].clone();
        }
        x[r] = acc / a[r][r].clone();
    }
    Some(x)
}

/// Determinant by elimination with partial pivoting.
pub fn determinant<T: Scalar>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut det = T::one();
    for col in 0..n {
        let Some(p) = pivot_row(&a, col) else {
            return T::zero();
        };
        if p != col {
            a.swap(col, p);
            det = -det;
        }
        let pivot = a[col][col].clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / pivot.clone();
            for c in col..n {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
        }
        det = det * pivot;
    }
    det
}
