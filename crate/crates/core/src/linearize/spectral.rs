//! Eigenvalues, spectral radius and operator norm of small real matrices.
//!
//! Orders one and two use closed forms. Larger matrices are reduced to upper
//! Hessenberg form by stabilised elimination and then deflated with Francis
//! double-shift QR sweeps.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Cap on QR sweeps spent on any single eigenvalue.
pub const MAX_QR_SWEEPS: usize = 10_000;

/// An eigenvalue `re + i im`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

fn real(re: f64) -> Eigenvalue {
    Eigenvalue { re, im: 0.0 }
}

fn check_input(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!(
            "matrix is {}x{}, expected square",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFiniteMatrix(m.as_slice().to_vec()));
    }
    Ok(())
}

fn eigen_2x2(a: f64, b: f64, c: f64, d: f64) -> [Eigenvalue; 2] {
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // larger-magnitude root first, the other from the determinant
        let big = if half_tr >= 0.0 { half_tr + root } else { half_tr - root };
        let det = a * d - b * c;
        let small = if big != 0.0 { det / big } else { half_tr - root };
        [real(big), real(small)]
    } else {
        let im = (-disc).sqrt();
        [
            Eigenvalue { re: half_tr, im },
            Eigenvalue { re: half_tr, im: -im },
        ]
    }
}

pub fn eigenvalues(m: &Matrix) -> Result<Vec<Eigenvalue>> {
    check_input(m)?;
    match m.rows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![real(m[(0, 0)])]),
        2 => Ok(eigen_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]).to_vec()),
        n => {
            let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
            hessenberg(&mut a);
            hqr(&mut a)
        }
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    check_input(m)?;
    match m.rows() {
        0 => Ok(0.0),
        1 => Ok(m[(0, 0)].abs()),
        _ => Ok(eigenvalues(m)?
            .iter()
            .map(Eigenvalue::modulus)
            .fold(0.0, f64::max)),
    }
}

/// Largest real part of the eigenvalues; the growth rate of `v' = M v`.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Spectral (operator 2-) norm.
pub fn operator_norm(m: &Matrix) -> f64 {
    match (m.rows(), m.cols()) {
        (1, 1) => m[(0, 0)].abs(),
        (2, 2) => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let fro2 = a * a + b * b + c * c + d * d;
            let det = a * d - b * c;
            let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
            (0.5 * (fro2 + disc)).sqrt()
        }
        _ => {
            let scale = m.max_abs();
            if scale == 0.0 || !scale.is_finite() {
                return scale;
            }
            let s = m.scale(1.0 / scale);
            let gram = &s.transpose() * &s;
            let top = eigenvalues(&gram)
                .map(|ev| ev.iter().map(|e| e.re).fold(0.0, f64::max))
                .unwrap_or_else(|_| gram.frobenius_norm());
            scale * top.max(0.0).sqrt()
        }
    }
}

/// Reduction to upper Hessenberg form by Gaussian elimination with pivoting.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut pivot_val: f64 = 0.0;
        let mut pivot = m;
        for (j, row) in a.iter().enumerate().skip(m) {
            if row[m - 1].abs() > pivot_val.abs() {
                pivot_val = row[m - 1];
                pivot = j;
            }
        }
        if pivot != m {
            a.swap(pivot, m);
            for row in a.iter_mut() {
                row.swap(pivot, m);
            }
        }
        if pivot_val != 0.0 {
            for i in m + 1..n {
                let y = a[i][m - 1];
                if y != 0.0 {
                    let y = y / pivot_val;
                    a[i][m - 1] = 0.0;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix by shifted double QR.
#[allow(clippy::many_single_char_names, unused_assignments)]
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<Eigenvalue>> {
    let n = a.len();
    let mut out = vec![real(0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                let mut s = a[lu - 1][lu - 1].abs() + a[lu][lu].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[lu][lu - 1].abs() + s == s {
                    a[lu][lu - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nn {
                out[nu] = real(x + t);
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    out[nu - 1] = real(x + z);
                    out[nu] = real(if z != 0.0 { x - w / z } else { x + z });
                } else {
                    out[nu - 1] = Eigenvalue { re: x + p, im: -z };
                    out[nu] = Eigenvalue { re: x + p, im: z };
                }
                nn -= 2;
                break;
            }
            if its >= MAX_QR_SWEEPS {
                return Err(Error::NoConvergence(format!(
                    "QR iteration exceeded {MAX_QR_SWEEPS} sweeps"
                )));
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let lu = l as usize;
            let mut m = nu - 2;
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == lu {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                let mut xk = 0.0;
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != nu - 1 { a[k + 2][k - 1] } else { 0.0 };
                    xk = p.abs() + q.abs() + r.abs();
                    if xk != 0.0 {
                        p /= xk;
                        q /= xk;
                        r /= xk;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if lu != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * xk;
                    }
                    p += s;
                    let xs = p / s;
                    let ys = q / s;
                    let zs = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nu - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * zs;
                        }
                        a[k + 1][j] -= pp * ys;
                        a[k][j] -= pp * xs;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(lu) {
                        let mut pp = xs * row[k] + ys * row[k + 1];
                        if k != nu - 1 {
                            pp += zs * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_and_identity() {
        assert_eq!(spectral_radius(&Matrix::scalar(2.0)).unwrap(), 2.0);
        assert_eq!(spectral_radius(&Matrix::scalar(-3.0)).unwrap(), 3.0);
        assert_eq!(spectral_radius(&Matrix::identity(2)).unwrap(), 1.0);
    }

    #[test]
    fn swap_matrix_has_radius_one() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_has_complex_pair() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let ev = eigenvalues(&m).unwrap();
        assert!(ev.iter().all(|e| e.re == 0.0 && e.im.abs() == 2.0));
        assert_eq!(spectral_radius(&m).unwrap(), 2.0);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let m = Matrix::from_row_slice(3, 3, &[6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let mut re: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|e| e.re).collect();
        re.sort_by(f64::total_cmp);
        for (got, want) in re.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!((spectral_abscissa(&m).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn three_cycle_permutation() {
        let m = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let ev = eigenvalues(&m).unwrap();
        for e in ev {
            assert!((e.modulus() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_is_rejected() {
        let m = Matrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(spectral_radius(&m), Err(Error::NonFiniteMatrix(_))));
    }

    #[test]
    fn operator_norm_closed_form_matches_general_route() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let mut padded = Matrix::zeros(3, 3);
        for i in 0..2 {
            for j in 0..2 {
                padded[(i, j)] = m[(i, j)];
            }
        }
        assert!((operator_norm(&m) - operator_norm(&padded)).abs() < 1e-13);
    }
}
