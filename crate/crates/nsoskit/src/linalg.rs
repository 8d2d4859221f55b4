//! Dense linear solver for the small flow-balance and SCV systems.

/// Tolerance below which a pivot is considered zero (relative to the
/// largest entry of the matrix).
const PIVOT_TOL: f64 = 1e-12;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when the matrix is singular to working precision.
/// The systems solved here are at most a few hundred rows, so a dense
/// direct factorization is plenty.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    if n == 0 {
        return Some(Vec::new());
    }

    let scale = a.iter().flat_map(|row| row.iter()).fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);

    for col in 0..n {
        // Partial pivot: bring the largest remaining entry to the diagonal.
        let pivot_row =
            (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[pivot_row][col].abs() < PIVOT_TOL * scale {
            return None;
        }
        if pivot_row != col {
            a.swap(col, pivot_row);
            b.swap(col, pivot_row);
        }
        let pivot = a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                let head = a[col][k];
                a[row][k] -= factor * head;
            }
            b[row] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
