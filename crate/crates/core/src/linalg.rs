//! Small dense kernels: dot products, normalisation and a Householder
//! least-squares solver for tall, thin column systems.

use crate::error::{Error, Result};

/// Largest Gram-matrix condition number accepted by [`lstsq_columns`].
pub const MAX_GRAM_CONDITION: f64 = 1e8;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // eight independent accumulators let the compiler keep several vector
    // lanes busy without reassociating the sum
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Scale `v` to unit norm in place, returning the original norm.
pub fn normalize(v: &mut [f64]) -> f64 {
    let nrm = norm(v);
    if nrm > 0.0 {
        let inv = 1.0 / nrm;
        v.iter_mut().for_each(|x| *x *= inv);
    }
    nrm
}

/// Least-squares solution of `min ||[c_0 .. c_{s-1}] x - y||` via Householder QR.
///
/// Fails when the system is rank deficient or when the Gram condition number,
/// estimated from the diagonal of R, exceeds [`MAX_GRAM_CONDITION`].
pub fn lstsq_columns(columns: &[&[f64]], y: &[f64]) -> Result<Vec<f64>> {
    let s = columns.len();
    let n = y.len();
    if s == 0 {
        return Ok(Vec::new());
    }
    if s > n {
        return Err(Error::InvalidParameter(format!(
            "least squares with {s} columns in dimension {n}"
        )));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "column length {} vs rhs length {n}",
            c.len()
        )));
    }
    // column-major working copy
    let mut a: Vec<f64> = Vec::with_capacity(n * s);
    for c in columns {
        a.extend_from_slice(c);
    }
    let mut b = y.to_vec();
    let mut diag = vec![0.0; s];

    for j in 0..s {
        let col = &mut a[j * n..(j + 1) * n];
        let tail_norm = norm(&col[j..]);
        if tail_norm == 0.0 {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let alpha = if col[j] > 0.0 { -tail_norm } else { tail_norm };
        // v = x - alpha e1, stored in place
        col[j] -= alpha;
        let vnorm2 = dot(&col[j..], &col[j..]);
        diag[j] = alpha;
        let v: Vec<f64> = col[j..].to_vec();
        for k in j + 1..s {
            let ck = &mut a[k * n + j..(k + 1) * n];
            let f = 2.0 * dot(&v, ck) / vnorm2;
            axpy(-f, &v, ck);
        }
        let f = 2.0 * dot(&v, &b[j..]) / vnorm2;
        axpy(-f, &v, &mut b[j..]);
    }

    let (mut dmax, mut dmin) = (0.0f64, f64::INFINITY);
    for d in &diag {
        dmax = dmax.max(d.abs());
        dmin = dmin.min(d.abs());
    }
    let cond = if dmin > 0.0 {
        (dmax / dmin).powi(2)
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }

    // back substitution with R: diag on the diagonal, a[k*n + j] above it
    let mut x = vec![0.0; s];
    for j in (0..s).rev() {
        let mut acc = b[j];
        for k in j + 1..s {
            acc -= a[k * n + j] * x[k];
        }
        x[j] = acc / diag[j];
    }
    Ok(x)
}
