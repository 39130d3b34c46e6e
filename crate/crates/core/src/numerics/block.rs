//! Kernels that stream one weight row against a block of samples, so each
//! weight is loaded once per block instead of once per sample.
//!
//! `dot_block` and `axpy_block` produce exactly the bits of `dot` and `axpy`
//! applied sample by sample.

use super::LANES;

pub(crate) const BLOCK: usize = 4;

#[inline(always)]
pub(crate) fn dot_block<const K: usize>(w: &[f64], xs: &[&[f64]; K]) -> [f64; K] {
    let n = w.len();
    for x in xs {
        assert_eq!(x.len(), n, "dot_block: length mismatch");
    }
    let mut acc = [[0.0f64; LANES]; K];
    let full = n / LANES * LANES;
    let mut base = 0;
    while base < full {
        let wc = &w[base..base + LANES];
        for k in 0..K {
            let xc = &xs[k][base..base + LANES];
            for l in 0..LANES {
                acc[k][l] += wc[l] * xc[l];
            }
        }
        base += LANES;
    }
    let mut out = [0.0; K];
    for k in 0..K {
        let mut tail = 0.0;
        for j in full..n {
            tail += w[j] * xs[k][j];
        }
        let a = &acc[k];
        out[k] = ((a[0] + a[4]) + (a[1] + a[5])) + ((a[2] + a[6]) + (a[3] + a[7])) + tail;
    }
    out
}

/// `ys[k] += alphas[k] · w` for every k.
#[inline(always)]
pub(crate) fn axpy_block<const K: usize>(alphas: [f64; K], w: &[f64], ys: &mut [&mut [f64]; K]) {
    let n = w.len();
    for y in ys.iter() {
        assert_eq!(y.len(), n, "axpy_block: length mismatch");
    }
    let full = n / LANES * LANES;
    let mut base = 0;
    while base < full {
        let wc = &w[base..base + LANES];
        for k in 0..K {
            let yc = &mut ys[k][base..base + LANES];
            for l in 0..LANES {
                yc[l] += alphas[k] * wc[l];
            }
        }
        base += LANES;
    }
    for k in 0..K {
        for j in full..n {
            ys[k][j] += alphas[k] * w[j];
        }
    }
}

/// `row += Σ_k (a[k] · us[k] + b[k] · vs[k])`, summing the block's terms
/// in k order before touching `row`.
#[inline(always)]
pub(crate) fn rank_update_block<const K: usize>(
    row: &mut [f64],
    a: [f64; K],
    us: &[&[f64]; K],
    b: [f64; K],
    vs: &[&[f64]; K],
) {
    let n = row.len();
    for k in 0..K {
        assert_eq!(us[k].len(), n, "rank_update_block: length mismatch");
        assert_eq!(vs[k].len(), n, "rank_update_block: length mismatch");
    }
    let full = n / LANES * LANES;
    let mut base = 0;
    while base < full {
        let mut t = [0.0f64; LANES];
        for k in 0..K {
            let uc = &us[k][base..base + LANES];
            let vc = &vs[k][base..base + LANES];
            for l in 0..LANES {
                t[l] += a[k] * uc[l] + b[k] * vc[l];
            }
        }
        let rc = &mut row[base..base + LANES];
        for l in 0..LANES {
            rc[l] += t[l];
        }
        base += LANES;
    }
    for j in full..n {
        let mut t = 0.0;
        for k in 0..K {
            t += a[k] * us[k][j] + b[k] * vs[k][j];
        }
        row[j] += t;
    }
}
