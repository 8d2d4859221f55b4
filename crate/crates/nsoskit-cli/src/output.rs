//! Run manifests, CSV helpers and the least-squares fits used by the
//! complexity command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Reproducibility sidecar written next to every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            scenario: None,
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION"),
            config: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, body)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Ordinary least squares for y ~ a + b x; returns (a, b, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let b = (n * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / n;
    let r2 = r_squared(ys, &xs.iter().map(|&x| a + b * x).collect::<Vec<_>>());
    (a, b, r2)
}

/// Least squares for y ~ c0 + c1 x + c2 x^2; returns ([c0, c1, c2], r_squared).
pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> ([f64; 3], f64) {
    let n = xs.len() as f64;
    let mut s = [0.0f64; 5];
    for &x in xs {
        let mut p = 1.0;
        for slot in s.iter_mut() {
            *slot += p;
            p *= x;
        }
    }
    s[0] = n;
    let mut t = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        t[0] += y;
        t[1] += x * y;
        t[2] += x * x * y;
    }
    let a = vec![vec![s[0], s[1], s[2]], vec![s[1], s[2], s[3]], vec![s[2], s[3], s[4]]];
    let coeffs = solve3(a, [t[0], t[1], t[2]]);
    let fit: Vec<f64> = xs.iter().map(|&x| coeffs[0] + coeffs[1] * x + coeffs[2] * x * x).collect();
    let r2 = r_squared(ys, &fit);
    (coeffs, r2)
}

fn r_squared(ys: &[f64], fit: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = ys.iter().zip(fit).map(|(y, f)| (y - f).powi(2)).sum();
    if ss_tot <= 0.0 {
        return 1.0;
    }
    1.0 - ss_res / ss_tot
}

/// Gaussian elimination for the 3x3 normal equations.
fn solve3(mut a: Vec<Vec<f64>>, mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                let head = a[col][k];
                a[row][k] -= f * head;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for col in row + 1..3 {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_fit_recovers_exact_polynomial() {
        let xs: Vec<f64> = (1..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + 0.5 * x + 0.25 * x * x).collect();
        let (c, r2) = quadratic_fit(&xs, &ys);
        assert!((c[0] - 2.0).abs() < 1e-9);
        assert!((c[1] - 0.5).abs() < 1e-9);
        assert!((c[2] - 0.25).abs() < 1e-9);
        assert!(r2 > 0.999999);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert!((a - 1.0).abs() < 1e-12);
        assert!((b - 2.0).abs() < 1e-12);
        assert!(r2 > 0.999999);
    }
}
