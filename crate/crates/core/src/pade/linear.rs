//! Direct linear-algebra construction of the approximant and the Hankel
//! determinants of the tail sums. Used as an independent check on the
//! continued-fraction route and for the closed-form asymptote.

use super::{PadeError, RationalApproximant};
use crate::counts::TailSums;

/// Relative pivot size under which a system is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

/// LU factorisation with partial pivoting, in place. Returns the pivot
/// sign and the smallest relative pivot.
fn lu(a: &mut [Vec<f64>], perm: &mut [usize]) -> (f64, f64) {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sign = 1.0;
    let mut min_pivot = f64::INFINITY;
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if pivot_row != col {
            a.swap(pivot_row, col);
            perm.swap(pivot_row, col);
            sign = -sign;
        }
        let pivot = a[col][col];
        min_pivot = min_pivot.min(if scale > 0.0 { pivot.abs() / scale } else { 0.0 });
        if pivot == 0.0 {
            continue;
        }
        for row in col + 1..n {
            let factor = a[row][col] / pivot;
            a[row][col] = factor;
            for k in col + 1..n {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    (sign, min_pivot)
}

pub(crate) fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let mut perm = vec![0; n];
    let (sign, _) = lu(&mut a, &mut perm);
    (0..n).fold(sign, |acc, i| acc * a[i][i])
}

pub(crate) fn solve(mut a: Vec<Vec<f64>>, rhs: &[f64]) -> Result<Vec<f64>, PadeError> {
    let n = a.len();
    let mut perm = vec![0; n];
    let (_, min_pivot) = lu(&mut a, &mut perm);
    if !(min_pivot > PIVOT_TOLERANCE) {
        return Err(PadeError::Singular);
    }
    let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i][k] * y[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[i][k] * y[k];
        }
        y[i] /= a[i][i];
    }
    Ok(y)
}

/// Builds the approximant with numerator degree `m - 1` and denominator
/// degree `m` by solving the matching conditions directly:
///
/// ```text
/// sum_{j=1..m} b_j f_{k-j} = -f_k,   k = m..2m-1
/// a_k = sum_{j=0..k} b_j f_{k-j},    k = 0..m-1
/// ```
///
/// with `f_i = (-1)^i S_{i+1}` and `b_0 = 1`.
pub fn pade_linear_solve(tail: &TailSums, m: usize) -> Result<RationalApproximant, PadeError> {
    if m == 0 {
        return Err(PadeError::OddOrder(0));
    }
    if tail.len() < 2 * m {
        return Err(PadeError::InsufficientTerms {
            needed: 2 * m,
            available: tail.len(),
        });
    }
    let f = |i: isize| -> f64 {
        if i < 0 {
            0.0
        } else {
            let s = tail.get(i as usize + 1);
            if i % 2 == 0 {
                s
            } else {
                -s
            }
        }
    };
    let matrix: Vec<Vec<f64>> = (m..2 * m)
        .map(|k| (1..=m).map(|j| f(k as isize - j as isize)).collect())
        .collect();
    let rhs: Vec<f64> = (m..2 * m).map(|k| -f(k as isize)).collect();
    let b_tail = solve(matrix, &rhs)?;
    let mut denom = vec![1.0];
    denom.extend(b_tail);
    let numer: Vec<f64> = (0..m)
        .map(|k| (0..=k).map(|j| denom[j] * f((k - j) as isize)).sum())
        .collect();
    RationalApproximant::new(numer, denom)
}

/// `Delta_{i,j}`: determinant of the `j x j` Hankel matrix whose top-left
/// entry is `S_{i-j+2}`, with `S_k = 0` for `k < 1`.
pub fn hankel_det(tail: &TailSums, i: isize, j: usize) -> f64 {
    let s = |k: isize| if k < 1 { 0.0 } else { tail.get(k as usize) };
    let first = i - j as isize + 2;
    let matrix: Vec<Vec<f64>> = (0..j)
        .map(|row| {
            (0..j)
                .map(|col| s(first + row as isize + col as isize))
                .collect()
        })
        .collect();
    determinant(matrix)
}
