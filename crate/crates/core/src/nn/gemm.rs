//! Small dense matrix kernels for the lowered convolution.
//!
//! `C[i][j]` always accumulates its products in ascending inner-index
//! order starting from the value already stored in `C`, regardless of
//! tiling, so results do not depend on the blocking constants.
//!
//! On x86-64 the same code is also compiled with AVX2 and AVX-512 enabled
//! and picked at run time. Multiplies and adds stay separate (no fused
//! multiply-add), so every path produces bit-identical results.

/// `C (m x n) += A (m x k) * B (k x n)`, all row-major.
pub(crate) fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required CPU feature was detected at run time.
            unsafe { gemm_avx512(m, k, n, a, b, c) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: as above.
            unsafe { gemm_avx2(m, k, n, a, b, c) };
            return;
        }
    }
    gemm_body::<4, 8>(m, k, n, a, b, c);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn gemm_avx512(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_body::<4, 16>(m, k, n, a, b, c);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gemm_avx2(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_body::<4, 8>(m, k, n, a, b, c);
}

#[inline(always)]
fn gemm_body<const MR: usize, const NR: usize>(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    let m_full = m - m % MR;
    let n_full = n - n % NR;
    for i0 in (0..m_full).step_by(MR) {
        for j0 in (0..n_full).step_by(NR) {
            tile::<MR, NR>(i0, j0, k, n, a, b, c);
        }
        for i in i0..i0 + MR {
            edge(i, n_full..n, k, n, a, b, c);
        }
    }
    for i in m_full..m {
        edge(i, 0..n, k, n, a, b, c);
    }
}

#[inline(always)]
fn tile<const MR: usize, const NR: usize>(i0: usize, j0: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    let mut acc = [[0.0; NR]; MR];
    for (i, row) in acc.iter_mut().enumerate() {
        row.copy_from_slice(&c[(i0 + i) * n + j0..(i0 + i) * n + j0 + NR]);
    }
    for kk in 0..k {
        let brow: &[f64; NR] = b[kk * n + j0..kk * n + j0 + NR].try_into().unwrap();
        for (i, row) in acc.iter_mut().enumerate() {
            let av = a[(i0 + i) * k + kk];
            for j in 0..NR {
                row[j] += av * brow[j];
            }
        }
    }
    for (i, row) in acc.iter().enumerate() {
        c[(i0 + i) * n + j0..(i0 + i) * n + j0 + NR].copy_from_slice(row);
    }
}

#[inline(always)]
fn edge(i: usize, cols: std::ops::Range<usize>, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    if cols.is_empty() {
        return;
    }
    let (j0, j1) = (cols.start, cols.end);
    let crow = &mut c[i * n + j0..i * n + j1];
    for kk in 0..k {
        let av = a[i * k + kk];
        for (cv, bv) in crow.iter_mut().zip(&b[kk * n + j0..kk * n + j1]) {
            *cv += av * bv;
        }
    }
}

/// Writes the transpose of the `rows x cols` matrix `src` into `dst`.
pub(crate) fn transpose(rows: usize, cols: usize, src: &[f64], dst: &mut [f64]) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        for i in 0..m {
            for j in 0..n {
                let mut s = c[i * n + j];
                for kk in 0..k {
                    s += a[i * k + kk] * b[kk * n + j];
                }
                c[i * n + j] = s;
            }
        }
    }

    #[test]
    fn matches_naive_bitwise_on_ragged_shapes() {
        for &(m, k, n) in &[(1, 1, 1), (4, 3, 8), (5, 7, 13), (9, 2, 17), (3, 11, 5)] {
            let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
            let mut c1: Vec<f64> = (0..m * n).map(|i| i as f64 * 0.01).collect();
            let mut c2 = c1.clone();
            gemm_nn(m, k, n, &a, &b, &mut c1);
            naive(m, k, n, &a, &b, &mut c2);
            assert_eq!(c1, c2, "{m}x{k}x{n}");
        }
    }

    #[test]
    fn portable_path_matches_dispatched_path() {
        let (m, k, n) = (9, 21, 37);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.91).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.29).cos()).collect();
        let mut c1 = vec![0.5; m * n];
        let mut c2 = c1.clone();
        gemm_nn(m, k, n, &a, &b, &mut c1);
        gemm_body::<4, 8>(m, k, n, &a, &b, &mut c2);
        assert_eq!(c1, c2);
    }

    #[test]
    fn transpose_round_trip() {
        let src: Vec<f64> = (0..35).map(f64::from).collect();
        let mut t = vec![0.0; 35];
        let mut back = vec![0.0; 35];
        transpose(5, 7, &src, &mut t);
        assert_eq!(t[6], src[8]);
        transpose(7, 5, &t, &mut back);
        assert_eq!(back, src);
    }
}
