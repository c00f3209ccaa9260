//! Sliding-window extrema over dense arrays.

use std::collections::VecDeque;

/// Max and min of `v[i..i+len]` for each start `i` with `i + len <= v.len()`.
pub(crate) fn forward_extrema(v: &[f64], len: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(len >= 1 && len <= v.len());
    let count = v.len() - len + 1;
    let mut maxs = Vec::with_capacity(count);
    let mut mins = Vec::with_capacity(count);
    let mut hi: VecDeque<usize> = VecDeque::new();
    let mut lo: VecDeque<usize> = VecDeque::new();
    for i in 0..v.len() {
        while hi.back().is_some_and(|&j| v[j] <= v[i]) {
            hi.pop_back();
        }
        hi.push_back(i);
        while lo.back().is_some_and(|&j| v[j] >= v[i]) {
            lo.pop_back();
        }
        lo.push_back(i);
        if i + 1 >= len {
            let start = i + 1 - len;
            while hi.front().is_some_and(|&j| j < start) {
                hi.pop_front();
            }
            while lo.front().is_some_and(|&j| j < start) {
                lo.pop_front();
            }
            maxs.push(v[*hi.front().expect("non-empty")]);
            mins.push(v[*lo.front().expect("non-empty")]);
        }
    }
    (maxs, mins)
}

/// Max and min over `[i - r, i + r]` clipped to the array, for every `i`.
pub(crate) fn centered_extrema(v: &[f64], r: usize) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut padded_hi = Vec::with_capacity(n + 2 * r);
    let mut padded_lo = Vec::with_capacity(n + 2 * r);
    padded_hi.extend(std::iter::repeat(f64::NEG_INFINITY).take(r));
    padded_lo.extend(std::iter::repeat(f64::INFINITY).take(r));
    padded_hi.extend_from_slice(v);
    padded_lo.extend_from_slice(v);
    padded_hi.extend(std::iter::repeat(f64::NEG_INFINITY).take(r));
    padded_lo.extend(std::iter::repeat(f64::INFINITY).take(r));
    let (maxs, _) = forward_extrema(&padded_hi, 2 * r + 1);
    let (_, mins) = forward_extrema(&padded_lo, 2 * r + 1);
    (maxs, mins)
}

/// Centered window extrema of a row-major `m × m` array with radius `r`
/// along the axes in `axes`.
pub(crate) fn grid_extrema(
    v: &[f64],
    m: usize,
    dim: usize,
    r: usize,
    axes: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let mut hi = v.to_vec();
    let mut lo = v.to_vec();
    for &axis in axes {
        if dim == 1 {
            hi = centered_extrema(&hi, r).0;
            lo = centered_extrema(&lo, r).1;
            continue;
        }
        let (stride, lines, step) = if axis == 0 { (1, m, m) } else { (m, m, 1) };
        let mut nh = vec![0.0; v.len()];
        let mut nl = vec![0.0; v.len()];
        let mut buf = vec![0.0; m];
        for line in 0..lines {
            let base = line * step;
            for i in 0..m {
                buf[i] = hi[base + i * stride];
            }
            let mx = centered_extrema(&buf, r).0;
            for i in 0..m {
                buf[i] = lo[base + i * stride];
            }
            let mn = centered_extrema(&buf, r).1;
            for i in 0..m {
                nh[base + i * stride] = mx[i];
                nl[base + i * stride] = mn[i];
            }
        }
        hi = nh;
        lo = nl;
    }
    (hi, lo)
}
