//! Eigenvalues of small dense complex matrices.
//!
//! Closed chains are non-normal, so the solver makes no symmetry assumptions:
//! the matrix is balanced, reduced to upper Hessenberg form with Householder
//! reflections and then driven to triangular form by single-shift complex QR
//! steps with Wilkinson shifts and deflation. Only eigenvalues are produced.

use nalgebra::DMatrix;

use crate::krein::{CMatrix, C64};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// All eigenvalues of `a`, counted with algebraic multiplicity, in the order
/// they deflate.
pub fn eigenvalues(a: &CMatrix) -> Vec<C64> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    let n = a.nrows();
    match n {
        0 => Vec::new(),
        1 => vec![a[(0, 0)]],
        _ => {
            let mut h = a.clone();
            balance(&mut h);
            hessenberg(&mut h);
            hessenberg_qr(h)
        }
    }
}

/// Parlett-Reinsch balancing with powers of two, so the scaling is exact.
fn balance(a: &mut CMatrix) {
    let n = a.nrows();
    const RADIX: f64 = 2.0;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += a[(j, i)].l1_norm();
                    row += a[(i, j)].l1_norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let total = col + row;
            let mut scale = 1.0;
            let mut g = row / RADIX;
            while col < g {
                scale *= RADIX;
                col *= RADIX * RADIX;
            }
            g = row * RADIX;
            while col > g {
                scale /= RADIX;
                col /= RADIX * RADIX;
            }
            if (col + row) / scale < 0.95 * total {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= scale;
                    a[(j, i)] *= scale;
                }
            }
        }
    }
}

/// In-place Householder reduction to upper Hessenberg form.
fn hessenberg(a: &mut CMatrix) {
    let n = a.nrows();
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<C64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let alpha = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let phase = if v[0].norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            v[0] / v[0].norm()
        };
        v[0] += phase * alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A <- (I - 2 v v^H / |v|^2) A (I - 2 v v^H / |v|^2)
        for j in 0..n {
            let s: C64 = v
                .iter()
                .enumerate()
                .map(|(r, vr)| vr.conj() * a[(k + 1 + r, j)])
                .sum();
            let s = s * (2.0 / vnorm2);
            for (r, vr) in v.iter().enumerate() {
                a[(k + 1 + r, j)] -= vr * s;
            }
        }
        for i in 0..n {
            let s: C64 = v
                .iter()
                .enumerate()
                .map(|(r, vr)| a[(i, k + 1 + r)] * vr)
                .sum();
            let s = s * (2.0 / vnorm2);
            for (r, vr) in v.iter().enumerate() {
                a[(i, k + 1 + r)] -= s * vr.conj();
            }
        }
        for i in k + 2..n {
            a[(i, k)] = C64::new(0.0, 0.0);
        }
    }
}

fn eigen2(a: C64, b: C64, c: C64, d: C64) -> (C64, C64) {
    let half_tr = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let disc = (half_diff * half_diff + b * c).sqrt();
    // Avoid cancellation: compute the larger root first, the other from the determinant.
    let (p, q) = if (half_tr + disc).norm() >= (half_tr - disc).norm() {
        (half_tr + disc, half_tr - disc)
    } else {
        (half_tr - disc, half_tr + disc)
    };
    let det = a * d - b * c;
    if p.norm() > 0.0 && q.norm() < 1e-3 * p.norm() {
        (p, det / p)
    } else {
        (p, q)
    }
}

fn wilkinson_shift(h: &CMatrix, hi: usize) -> C64 {
    let a = h[(hi - 1, hi - 1)];
    let b = h[(hi - 1, hi)];
    let c = h[(hi, hi - 1)];
    let d = h[(hi, hi)];
    let (l1, l2) = eigen2(a, b, c, d);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Explicit shifted QR step on the window `lo..=hi` using Givens rotations.
fn qr_step(h: &mut CMatrix, lo: usize, hi: usize, shift: C64) {
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let x = h[(k, k)];
        let y = h[(k + 1, k)];
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (x / r, y / r)
        };
        // G = [[conj(c), conj(s)], [-s, c]] applied to rows k, k+1
        for j in k..=hi {
            let u = h[(k, j)];
            let v = h[(k + 1, j)];
            h[(k, j)] = c.conj() * u + s.conj() * v;
            h[(k + 1, j)] = -s * u + c * v;
        }
        rotations.push((c, s));
    }
    for (idx, (c, s)) in rotations.into_iter().enumerate() {
        let k = lo + idx;
        // right-multiply by G^H on columns k, k+1
        for i in lo..=(k + 1).min(hi) {
            let u = h[(i, k)];
            let v = h[(i, k + 1)];
            h[(i, k)] = u * c + v * s;
            h[(i, k + 1)] = -u * s.conj() + v * c.conj();
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}

fn hessenberg_qr(mut h: CMatrix) -> Vec<C64> {
    let n = h.nrows();
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(n);
    if scale == 0.0 {
        return vec![C64::new(0.0, 0.0); n];
    }
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    loop {
        if hi == 0 {
            out.push(h[(0, 0)]);
            break;
        }
        // find the start of the active unreduced block
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let loose = iter > MAX_SWEEPS_PER_EIGENVALUE / 2;
            if sub <= eps * diag || sub <= eps * eps * scale || (loose && sub <= eps * scale) {
                h[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            out.push(h[(hi, hi)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        if lo + 1 == hi {
            let (l1, l2) = eigen2(h[(lo, lo)], h[(lo, hi)], h[(hi, lo)], h[(hi, hi)]);
            out.push(l1);
            out.push(l2);
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if iter > MAX_SWEEPS_PER_EIGENVALUE || total > MAX_SWEEPS_PER_EIGENVALUE * n {
            // Give up on further deflation; read the remaining diagonal.
            for i in (0..=hi).rev() {
                out.push(h[(i, i)]);
            }
            break;
        }
        let shift = if iter % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75, 0.4375) * h[(hi, hi - 1)].norm()
        } else {
            wilkinson_shift(&h, hi)
        };
        qr_step(&mut h, lo, hi, shift);
    }
    out
}

/// `max_i |det(A - lambda_i)| / max(||A||_F, |lambda_i|)^n`, a cheap check
/// that every returned value is a root of the characteristic polynomial.
pub fn root_residual(a: &CMatrix, eigenvalues: &[C64]) -> f64 {
    let n = a.nrows();
    let norm = a.norm();
    eigenvalues
        .iter()
        .map(|&lambda| {
            let shifted: DMatrix<C64> =
                DMatrix::from_fn(n, n, |i, j| if i == j { a[(i, j)] - lambda } else { a[(i, j)] });
            let scale = norm.max(lambda.norm());
            if scale == 0.0 {
                0.0
            } else {
                shifted.determinant().norm() / scale.powi(n as i32)
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal_and_identity() {
        let id = CMatrix::identity(4, 4);
        assert!(eigenvalues(&id).iter().all(|l| (l - c(1.0, 0.0)).norm() < 1e-15));

        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(2.0, 0.0),
            c(2.0, 0.0),
            c(0.5, 0.0),
            c(0.5, 0.0),
        ]));
        let ev = sorted(eigenvalues(&d));
        let expect = [0.5, 0.5, 2.0, 2.0];
        for (l, e) in ev.iter().zip(expect) {
            assert!((l - c(e, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn jordan_block_and_zero() {
        let mut j = CMatrix::zeros(4, 4);
        for i in 0..3 {
            j[(i, i + 1)] = c(1.0, 0.0);
        }
        assert!(eigenvalues(&j).iter().all(|l| l.norm() < 1e-12));
        assert!(eigenvalues(&CMatrix::zeros(4, 4)).iter().all(|l| l.norm() == 0.0));
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let r = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let ev = sorted(eigenvalues(&r));
        assert!((ev[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((ev[1] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn triangular_matrix_reads_diagonal() {
        let t = CMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                c(i as f64 + 1.0, -(i as f64))
            } else if j > i {
                c(3.0, 1.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let ev = sorted(eigenvalues(&t));
        for (i, l) in ev.iter().enumerate() {
            assert!((l - c(i as f64 + 1.0, -(i as f64))).norm() < 1e-12);
        }
        assert!(root_residual(&t, &ev) < 1e-12);
    }

    #[test]
    fn companion_matrix_roots() {
        // (x-1)(x-2)(x+3)(x-i) expanded; companion matrix in Hessenberg form
        let roots = [c(1.0, 0.0), c(2.0, 0.0), c(-3.0, 0.0), c(0.0, 1.0)];
        let mut coeffs = vec![c(1.0, 0.0)];
        for r in roots {
            let mut next = vec![c(0.0, 0.0); coeffs.len() + 1];
            for (k, a) in coeffs.iter().enumerate() {
                next[k] += a;
                next[k + 1] -= a * r;
            }
            coeffs = next;
        }
        let mut comp = CMatrix::zeros(4, 4);
        for j in 0..4 {
            comp[(0, j)] = -coeffs[j + 1];
        }
        for i in 1..4 {
            comp[(i, i - 1)] = c(1.0, 0.0);
        }
        let ev = eigenvalues(&comp);
        for r in roots {
            assert!(ev.iter().any(|l| (l - r).norm() < 1e-10), "missing {r}");
        }
    }
}
