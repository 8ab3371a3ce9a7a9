//! Walsh–Hadamard transform and XOR convolution of symbol distributions.
//!
//! Addition in GF(2^p) is XOR of the integer representations, so the
//! distribution of a sum of independent symbols is an XOR convolution,
//! which the Walsh–Hadamard transform diagonalises.

/// In-place unnormalised Walsh–Hadamard transform. Applying it twice
/// multiplies the input by `len`; [`ifwht`] folds that factor back in.
///
/// The butterflies are the plain radix-2 ones, grouped three levels at a
/// time in registers and then two levels per pass, so the result is
/// bit-identical to the textbook loop.
pub fn fwht(values: &mut [f64]) {
    let n = values.len();
    assert!(n.is_power_of_two(), "length {n} is not a power of two");
    let mut h = 1;
    if n >= 8 {
        for c in values.chunks_exact_mut(8) {
            let (a0, a1) = (c[0] + c[1], c[0] - c[1]);
            let (a2, a3) = (c[2] + c[3], c[2] - c[3]);
            let (a4, a5) = (c[4] + c[5], c[4] - c[5]);
            let (a6, a7) = (c[6] + c[7], c[6] - c[7]);
            let (b0, b2) = (a0 + a2, a0 - a2);
            let (b1, b3) = (a1 + a3, a1 - a3);
            let (b4, b6) = (a4 + a6, a4 - a6);
            let (b5, b7) = (a5 + a7, a5 - a7);
            c[0] = b0 + b4;
            c[4] = b0 - b4;
            c[1] = b1 + b5;
            c[5] = b1 - b5;
            c[2] = b2 + b6;
            c[6] = b2 - b6;
            c[3] = b3 + b7;
            c[7] = b3 - b7;
        }
        h = 8;
    }
    while 4 * h <= n {
        for chunk in values.chunks_exact_mut(4 * h) {
            let (lo, hi) = chunk.split_at_mut(2 * h);
            let (a, b) = lo.split_at_mut(h);
            let (c, d) = hi.split_at_mut(h);
            for i in 0..h {
                let (s0, d0) = (a[i] + b[i], a[i] - b[i]);
                let (s1, d1) = (c[i] + d[i], c[i] - d[i]);
                a[i] = s0 + s1;
                c[i] = s0 - s1;
                b[i] = d0 + d1;
                d[i] = d0 - d1;
            }
        }
        h <<= 2;
    }
    while h < n {
        for chunk in values.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h <<= 1;
    }
}

/// Inverse of [`fwht`]: the same butterflies followed by a `1 / len` scale.
pub fn ifwht(values: &mut [f64]) {
    fwht(values);
    let scale = 1.0 / values.len() as f64;
    values.iter_mut().for_each(|v| *v *= scale);
}

/// Rescales `v` to sum to one after clamping every entry to at least
/// `floor`.
pub fn normalize(v: &mut [f64], floor: f64) {
    let inv = 1.0 / clamp_sum(v, floor);
    v.iter_mut().for_each(|x| *x *= inv);
}

/// Clamps entries (NaN included) to `floor` and returns their sum. The sum
/// uses eight interleaved partial sums in a fixed order.
#[inline]
pub fn clamp_sum(v: &mut [f64], floor: f64) -> f64 {
    let mut acc = [0.0f64; 8];
    let mut chunks = v.chunks_exact_mut(8);
    for c in &mut chunks {
        for (x, a) in c.iter_mut().zip(acc.iter_mut()) {
            if !(*x >= floor) {
                *x = floor;
            }
            *a += *x;
        }
    }
    for (x, a) in chunks.into_remainder().iter_mut().zip(acc.iter_mut()) {
        if !(*x >= floor) {
            *x = floor;
        }
        *a += *x;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// `(m1 ⊗ m2)(a) = sum over a1 ^ a2 = a of m1(a1) m2(a2)`, computed in the
/// transform domain, clamped at zero and renormalised.
pub fn convolve(m1: &[f64], m2: &[f64]) -> Vec<f64> {
    assert_eq!(m1.len(), m2.len());
    let mut a = m1.to_vec();
    let mut b = m2.to_vec();
    fwht(&mut a);
    fwht(&mut b);
    a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
    ifwht(&mut a);
    normalize(&mut a, 0.0);
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct(m1: &[f64], m2: &[f64]) -> Vec<f64> {
        let q = m1.len();
        let mut out = vec![0.0; q];
        for a in 0..q {
            for b in 0..q {
                out[a ^ b] += m1[a] * m2[b];
            }
        }
        out
    }

    fn random_message(q: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
        normalize(&mut v, 0.0);
        v
    }

    #[test]
    fn two_point_butterfly() {
        let mut v = [3.0, 5.0];
        fwht(&mut v);
        assert_eq!(v, [8.0, -2.0]);
    }

    #[test]
    fn delta_transforms_to_ones() {
        let mut v = vec![0.0; 64];
        v[0] = 1.0;
        fwht(&mut v);
        assert!(v.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn double_application_is_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..1024).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut w = v.clone();
        fwht(&mut w);
        ifwht(&mut w);
        let err = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn point_masses_and_uniform() {
        let q = 16;
        for a in 0..q {
            for b in 0..q {
                let mut da = vec![0.0; q];
                let mut db = vec![0.0; q];
                da[a] = 1.0;
                db[b] = 1.0;
                let c = convolve(&da, &db);
                for (i, &v) in c.iter().enumerate() {
                    let want = if i == a ^ b { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-15);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_message(q, &mut rng);
        let u = vec![1.0 / q as f64; q];
        assert!(convolve(&u, &m).iter().all(|&v| (v - 1.0 / q as f64).abs() < 1e-15));
    }

    #[test]
    fn matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for q in [4usize, 16, 256, 1024] {
            for _ in 0..10 {
                let a = random_message(q, &mut rng);
                let b = random_message(q, &mut rng);
                let fast = convolve(&a, &b);
                let slow = direct(&a, &b);
                let err = fast.iter().zip(&slow).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(err < 1e-10, "q={q} err={err}");
            }
        }
    }

    #[test]
    fn grouped_butterflies_match_textbook() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 0..=12 {
            let n = 1usize << p;
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut fast = v.clone();
            fwht(&mut fast);
            let mut slow = v;
            let mut h = 1;
            while h < n {
                for i in (0..n).step_by(2 * h) {
                    for j in i..i + h {
                        let (x, y) = (slow[j], slow[j + h]);
                        slow[j] = x + y;
                        slow[j + h] = x - y;
                    }
                }
                h *= 2;
            }
            assert_eq!(fast, slow, "n = {n}");
        }
    }

    #[test]
    #[should_panic]
    fn rejects_non_power_of_two() {
        fwht(&mut [1.0, 2.0, 3.0]);
    }
}
