//! Batched layer kernels. Activations of conv layers are stored channel-major
//! as a `[C × (B·L)]` matrix; dense activations as `[B × D]`.

use matrixmultiply::dgemm;

/// `C = A·B + beta·C` for strided row/column layouts.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index dgemm touches.
    unsafe {
        dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds `[C × (B·l_in)]` into `[(C·k) × (B·l_out)]`.
pub(crate) fn im2col(a: &[f64], c_in: usize, batch: usize, l_in: usize, k: usize) -> Vec<f64> {
    let l_out = l_in - k + 1;
    let n = batch * l_out;
    let mut cols = vec![0.0; c_in * k * n];
    for c in 0..c_in {
        for j in 0..k {
            let dst = &mut cols[(c * k + j) * n..(c * k + j + 1) * n];
            for b in 0..batch {
                let src = &a[c * batch * l_in + b * l_in + j..][..l_out];
                dst[b * l_out..(b + 1) * l_out].copy_from_slice(src);
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
pub(crate) fn col2im(cols: &[f64], c_in: usize, batch: usize, l_in: usize, k: usize) -> Vec<f64> {
    let l_out = l_in - k + 1;
    let n = batch * l_out;
    let mut a = vec![0.0; c_in * batch * l_in];
    for c in 0..c_in {
        for j in 0..k {
            let src = &cols[(c * k + j) * n..(c * k + j + 1) * n];
            for b in 0..batch {
                let dst = &mut a[c * batch * l_in + b * l_in + j..][..l_out];
                for (d, s) in dst.iter_mut().zip(&src[b * l_out..(b + 1) * l_out]) {
                    *d += s;
                }
            }
        }
    }
    a
}

/// Width-2 max-pool over each row segment of length `l`. Returns the pooled
/// matrix and, per output, the index of the winning input.
pub(crate) fn max_pool2(z: &[f64], rows: usize, batch: usize, l: usize) -> (Vec<f64>, Vec<usize>) {
    let lp = l / 2;
    let mut out = vec![0.0; rows * batch * lp];
    let mut arg = vec![0usize; rows * batch * lp];
    for r in 0..rows {
        for b in 0..batch {
            let base = r * batch * l + b * l;
            for t in 0..lp {
                let i = base + 2 * t;
                let o = r * batch * lp + b * lp + t;
                let (v, w) = if z[i + 1] > z[i] { (z[i + 1], i + 1) } else { (z[i], i) };
                out[o] = v;
                arg[o] = w;
            }
        }
    }
    (out, arg)
}

/// `[F × (B·L)]` channel-major to `[B × (F·L)]` sample-major.
pub(crate) fn flatten(a: &[f64], f: usize, batch: usize, l: usize) -> Vec<f64> {
    let d = f * l;
    let mut x = vec![0.0; batch * d];
    for c in 0..f {
        for b in 0..batch {
            x[b * d + c * l..b * d + (c + 1) * l].copy_from_slice(&a[c * batch * l + b * l..][..l]);
        }
    }
    x
}

pub(crate) fn unflatten(x: &[f64], f: usize, batch: usize, l: usize) -> Vec<f64> {
    let d = f * l;
    let mut a = vec![0.0; f * batch * l];
    for c in 0..f {
        for b in 0..batch {
            a[c * batch * l + b * l..][..l].copy_from_slice(&x[b * d + c * l..b * d + (c + 1) * l]);
        }
    }
    a
}
