//! Four-point Lagrange interpolation on uniform periodic samples.

const SNAP: f64 = 1e-10;

/// Weights for nodes `-1, 0, 1, 2` at fractional offset `s` from node 0.
pub(crate) fn cubic_weights(s: f64) -> [f64; 4] {
    let sm1 = s - 1.0;
    let sm2 = s - 2.0;
    let sp1 = s + 1.0;
    [
        -s * sm1 * sm2 / 6.0,
        sp1 * sm1 * sm2 / 2.0,
        -sp1 * s * sm2 / 2.0,
        sp1 * s * sm1 / 6.0,
    ]
}

/// Splits a fractional index into its base node and offset, snapping offsets
/// within rounding distance of a node onto the node.
pub(crate) fn split_index(x: f64) -> (i64, f64) {
    let base = x.floor();
    let mut s = x - base;
    let mut i = base as i64;
    if s < SNAP {
        s = 0.0;
    } else if s > 1.0 - SNAP {
        s = 0.0;
        i += 1;
    }
    (i, s)
}

#[inline]
fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Writes `out[i] = input(i - shift)` for a periodic row, i.e. translates the
/// row by `shift` cells. Integer shifts are exact permutations.
pub(crate) fn shift_periodic_row(input: &[f64], shift: f64, out: &mut [f64]) {
    let n = input.len();
    debug_assert_eq!(n, out.len());
    let (i0, s) = split_index(-shift);
    if s == 0.0 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = input[wrap(i as i64 + i0, n)];
        }
        return;
    }
    let w = cubic_weights(s);
    for (i, o) in out.iter_mut().enumerate() {
        let base = i as i64 + i0 - 1;
        *o = w[0] * input[wrap(base, n)]
            + w[1] * input[wrap(base + 1, n)]
            + w[2] * input[wrap(base + 2, n)]
            + w[3] * input[wrap(base + 3, n)];
    }
}

/// Bicubic value of a periodic row-major field (`nx` columns) at fractional
/// indices `(x, y)`.
pub(crate) fn periodic_bicubic(values: &[f64], nx: usize, ny: usize, x: f64, y: f64) -> f64 {
    let (ix, sx) = split_index(x);
    let (iy, sy) = split_index(y);
    let wx = if sx == 0.0 { [0.0, 1.0, 0.0, 0.0] } else { cubic_weights(sx) };
    let wy = if sy == 0.0 { [0.0, 1.0, 0.0, 0.0] } else { cubic_weights(sy) };
    let mut acc = 0.0;
    for (ky, &wyk) in wy.iter().enumerate() {
        if wyk == 0.0 {
            continue;
        }
        let row = wrap(iy - 1 + ky as i64, ny) * nx;
        let mut r = 0.0;
        for (kx, &wxk) in wx.iter().enumerate() {
            if wxk != 0.0 {
                r += wxk * values[row + wrap(ix - 1 + kx as i64, nx)];
            }
        }
        acc += wyk * r;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_partition_unity_and_reproduce_cubics() {
        for &s in &[0.1, 0.37, 0.5, 0.93] {
            let w = cubic_weights(s);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let p = |x: f64| 2.0 - x + 0.5 * x * x - 0.25 * x * x * x;
            let interp: f64 = (0..4).map(|k| w[k] * p(k as f64 - 1.0)).sum();
            assert!((interp - p(s)).abs() < 1e-13);
        }
    }

    #[test]
    fn integer_shift_is_rotation() {
        let row: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let mut out = vec![0.0; 8];
        shift_periodic_row(&row, 3.0, &mut out);
        assert_eq!(out, vec![5.0, 6.0, 7.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        shift_periodic_row(&row, -2.0, &mut out);
        assert_eq!(out, vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 0.0, 1.0]);
    }

    #[test]
    fn fractional_shift_conserves_row_sum() {
        let row: Vec<f64> = (0..16).map(|i| ((i as f64) * 0.4).sin() + 2.0).collect();
        let mut out = vec![0.0; 16];
        shift_periodic_row(&row, 2.37, &mut out);
        let a: f64 = row.iter().sum();
        let b: f64 = out.iter().sum();
        assert!((a - b).abs() < 1e-12);
    }
}
