//! Eigenvalues of general real matrices via Householder reduction to upper
//! Hessenberg form followed by the Francis double-shift QR iteration.
//!
//! The QR sweep follows the classic EISPACK `hqr` scheme (as in JAMA),
//! keeping the iterate real and deflating 1x1 and 2x2 blocks; complex
//! conjugate pairs come out of the 2x2 blocks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densela::Matrix;
use crate::error::{Error, Result};

/// Eigenvalues of a real square matrix, as (re, im) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.norm()).collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.norm()))
    }

    /// Eigenvalues sorted by (re, im), for multiset comparisons.
    pub fn sorted(&self) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

/// Reduces `a` to upper Hessenberg form by orthogonal similarity.
pub(crate) fn hessenberg(a: &Matrix) -> Vec<Vec<f64>> {
    let n = a.rows();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut ort = vec![0.0; n];
    let high = n - 1;
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let f = (m..=high).rev().map(|i| ort[i] * h[i][j]).sum::<f64>() / hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let f = (m..=high).rev().map(|j| ort[j] * row[j]).sum::<f64>() / hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }
    h
}

/// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only.
#[allow(unused_assignments)]
fn hqr(mut h: Vec<Vec<f64>>, max_sweeps: usize) -> Result<Vec<Complex64>> {
    let nn = h.len();
    let eps = f64::EPSILON;
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut w, mut x, mut y);

    let mut norm = 0.0;
    for (i, row) in h.iter().enumerate() {
        for v in row.iter().skip(i.saturating_sub(1)) {
            norm += v.abs();
        }
    }

    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    let mut sweeps = 0usize;
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l][l - 1].abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            h[nu][nu] += exshift;
            d[nu] = h[nu][nu];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu][nu] += exshift;
            h[nu - 1][nu - 1] += exshift;
            x = h[nu][nu];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::NoConvergence {
                    what: "Hessenberg QR iteration",
                    iterations: max_sweeps,
                });
            }
            x = h[nu][nu];
            y = h[nu - 1][nu - 1];
            w = h[nu][nu - 1] * h[nu - 1][nu];

            // exceptional shifts break cycles
            if iter == 10 {
                exshift += x;
                for (i, row) in h.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for (i, row) in h.iter_mut().enumerate().take(nu + 1) {
                        row[i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m][m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[i][i - 2] = 0.0;
                if i > m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for row in h.iter_mut().take(nu.min(k + 3) + 1) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                }
            }
        }
    }
    Ok(d.into_iter()
        .zip(e)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

pub(crate) fn eigenvalues(a: &Matrix) -> Result<Spectrum> {
    let n = a.ensure_square()?;
    if !a.all_finite() {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    let eigenvalues = if n == 1 {
        vec![Complex64::new(a.get(0, 0), 0.0)]
    } else {
        hqr(hessenberg(a), 100 * n)?
    };
    Ok(Spectrum { eigenvalues })
}

/// Dense complex matrix used for eigenvector work.
#[derive(Debug, Clone)]
pub(crate) struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// Solves `self · X = B` in place of `b` (n×m) by Gaussian elimination
    /// with partial pivoting. Returns `None` on an exactly zero pivot.
    pub fn solve(&self, b: &[Complex64], m: usize) -> Option<Vec<Complex64>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))?;
            if a[p * n + k].norm() == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                for j in 0..m {
                    x.swap(k * m + j, p * m + j);
                }
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                if f.norm() == 0.0 {
                    continue;
                }
                for j in k..n {
                    let v = a[k * n + j];
                    a[i * n + j] -= f * v;
                }
                for j in 0..m {
                    let v = x[k * m + j];
                    x[i * m + j] -= f * v;
                }
            }
        }
        for i in (0..n).rev() {
            for j in 0..m {
                let mut acc = x[i * m + j];
                for k in i + 1..n {
                    acc -= a[i * n + k] * x[k * m + j];
                }
                x[i * m + j] = acc / a[i * n + i];
            }
        }
        Some(x)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Right eigenvectors for the given eigenvalues by inverse iteration, one per
/// eigenvalue, stored as the columns of the returned matrix.
///
/// Repeated eigenvalues start from different deterministic vectors so that a
/// semisimple eigenvalue yields independent directions.
pub(crate) fn eigenvectors(a: &Matrix, spectrum: &Spectrum) -> CMatrix {
    let n = a.rows();
    let scale = a.max_abs().max(1.0);
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for (col, lambda) in spectrum.eigenvalues.iter().enumerate() {
        // shift slightly off the eigenvalue so the system stays solvable
        let shifted = lambda + Complex64::new(scale * 1e-10, scale * 1e-10 * 0.5);
        let shifted_mat = CMatrix {
            n,
            data: (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    let d = if i == j { shifted } else { Complex64::new(0.0, 0.0) };
                    Complex64::new(a.get(i, j), 0.0) - d
                })
                .collect(),
        };
        // deterministic, column-dependent start vector
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = ((i * 7 + col * 13 + 1) as f64 * 0.618_033_988_749_895).fract();
                Complex64::new(0.5 + t, 0.25 * t)
            })
            .collect();
        for _ in 0..3 {
            match shifted_mat.solve(&x, 1) {
                Some(y) => {
                    let nrm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if nrm == 0.0 || !nrm.is_finite() {
                        break;
                    }
                    x = y.into_iter().map(|z| z / nrm).collect();
                }
                None => break,
            }
        }
        for i in 0..n {
            v[i * n + col] = x[i];
        }
    }
    CMatrix { n, data: v }
}
