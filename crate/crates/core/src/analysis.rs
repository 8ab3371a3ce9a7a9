//! Reconciliation efficiency `beta = R / C` and the normal-approximation
//! upper bound on it at finite block length.
//!
//! Throughout, `s` is the linear signal-to-noise ratio of a BPSK input in
//! Gaussian noise of variance `1 / s`. The joint density of input and output
//! is
//!
//! ```text
//! f_XY(x, y) = sqrt(s / 8 pi) exp(-s (y - x)^2 / 2),   x in {-1, +1}
//! f_Y(y)     = f_XY(1, y) + f_XY(-1, y)
//! ```
//!
//! and the bound is
//!
//! ```text
//! beta(n, eps, s) = 1 - sqrt(v(s) / n) / (1 - h(s)) * Phi^-1(1 - eps)
//! ```
//!
//! with `h = 1 - C` the conditional entropy of the input given the output,
//! `e = E[(log2 f_XY(X, Y) / f_Y(Y))^2]` and `v = e - h^2` its variance.

use std::f64::consts::{LN_2, PI};

use crate::channel::{awgn_capacity, biawgn_capacity, softplus};
use crate::error::{Error, Result};
use crate::quad;

/// Standard deviations of noise kept on each side of the mean.
const TAIL: f64 = 12.0;
const QUAD_TOL: f64 = 1e-13;

/// One measured operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyPoint {
    pub rate: f64,
    pub snr: f64,
    pub capacity: f64,
    pub beta: f64,
    /// Frame error rate at which `snr` was measured.
    pub fer: f64,
    /// Binary length of the transmitted word, `p * L`.
    pub n_bits: usize,
}

impl EfficiencyPoint {
    /// Efficiency computed with the binary-input capacity.
    pub fn new(rate: f64, snr: f64, fer: f64, n_bits: usize) -> Result<Self> {
        let capacity = capacity(snr, true)?;
        Ok(EfficiencyPoint {
            rate,
            snr,
            capacity,
            beta: rate / capacity,
            fer,
            n_bits,
        })
    }

    /// An efficiency above one contradicts the coding theorem and points at
    /// a measurement problem.
    pub fn is_suspicious(&self) -> bool {
        !(self.beta > 0.0 && self.beta <= 1.0)
    }
}

fn check_snr(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "snr must be positive and finite, got {s}"
        )))
    }
}

/// Binary-input capacity when `exact`, else `1/2 log2(1 + s)`.
pub fn capacity(s: f64, exact: bool) -> Result<f64> {
    check_snr(s)?;
    Ok(if exact { biawgn_capacity(s) } else { awgn_capacity(s) })
}

/// `beta = R / C(s)`.
pub fn efficiency(rate: f64, s: f64, exact: bool) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(Error::InvalidParameter(format!("rate must be nonnegative, got {rate}")));
    }
    Ok(rate / capacity(s, exact)?)
}

/// SNR at which a code of rate `rate` runs at efficiency `beta`.
///
/// The Gaussian form inverts in closed form, `s = 2^(2R / beta) - 1`; the
/// binary-input capacity is inverted by bisection on `log s`.
pub fn snr_for_efficiency(rate: f64, beta: f64, exact: bool) -> Result<f64> {
    if !(rate > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter("rate and beta must be positive".into()));
    }
    let target = rate / beta;
    if !exact {
        return Ok((2.0 * target * LN_2).exp_m1());
    }
    if target >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "R / beta = {target} is not below the binary-input capacity limit of 1"
        )));
    }
    let (mut lo, mut hi) = (-60.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if biawgn_capacity(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Joint density of input `x` and output `y` at SNR `s`.
pub fn f_xy(x: f64, y: f64, s: f64) -> f64 {
    let d = y - x;
    (s / (8.0 * PI)).sqrt() * (-0.5 * s * d * d).exp()
}

/// Output density at SNR `s`.
pub fn f_y(y: f64, s: f64) -> f64 {
    f_xy(1.0, y, s) + f_xy(-1.0, y, s)
}

/// Conditional entropy `h(s) = 1 - C(s)` of the input given the output.
pub fn conditional_entropy(s: f64) -> Result<f64> {
    check_snr(s)?;
    Ok(1.0 - biawgn_capacity(s))
}

/// Second moment `e(s)` of the information density `-log2 P(X | Y)`.
///
/// By symmetry only `x = +1` is integrated. Substituting `y = 1 + z / sqrt(s)`
/// the posterior of the sent symbol is `1 / (1 + exp(-L))` with
/// `L = 2 s + 2 sqrt(s) z`, and `z` is standard normal.
pub fn entropy_second_moment(s: f64) -> Result<f64> {
    check_snr(s)?;
    let root = s.sqrt();
    let norm = 1.0 / (2.0 * PI).sqrt();
    let integral = quad::integrate(
        |z| {
            let info = softplus(-(2.0 * s + 2.0 * root * z)) / LN_2;
            norm * (-0.5 * z * z).exp() * info * info
        },
        -TAIL,
        TAIL,
        QUAD_TOL,
    );
    Ok(integral)
}

/// Conditional entropy variance `v(s) = e(s) - h(s)^2`.
pub fn dispersion(s: f64) -> Result<f64> {
    let h = conditional_entropy(s)?;
    let e = entropy_second_moment(s)?;
    Ok((e - h * h).max(0.0))
}

/// Inverse of the standard normal distribution function.
///
/// Wichura's algorithm AS 241 (PPND16), relative accuracy about 1e-16.
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
pub fn norm_inv(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r + 67265.770_927_008_7) * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r + 39307.895_800_092_71) * r
            + 21213.794_301_586_597)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den =
            ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r + 1.519_866_656_361_645_7e-2) * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den =
            ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5) * r
                + 7.868_691_311_456_133e-4)
                * r
                + 1.487_536_129_085_061_5e-2)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Upper bound on the efficiency of any code of `n_bits` binary symbols
/// decoding with frame error rate `epsilon` at SNR `s`.
pub fn finite_length_beta(n_bits: f64, epsilon: f64, s: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(n_bits >= 1.0) {
        return Err(Error::InvalidParameter(format!("n_bits must be >= 1, got {n_bits}")));
    }
    let h = conditional_entropy(s)?;
    let v = dispersion(s)?;
    Ok(1.0 - (v / n_bits).sqrt() / (1.0 - h) * norm_inv(1.0 - epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efficiency_at_capacity_is_one() {
        for &s in &[1e-3, 0.017, 0.5, 3.0] {
            let c = biawgn_capacity(s);
            assert!((efficiency(c, s, true).unwrap() - 1.0).abs() < 1e-15);
            let c = awgn_capacity(s);
            assert!((efficiency(c, s, false).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(efficiency(0.1, 0.0, true).is_err());
    }

    #[test]
    fn inversion_round_trips() {
        for &(r, b) in &[(0.0111, 0.9079), (0.0333, 0.9112), (0.2, 0.8)] {
            for exact in [false, true] {
                let s = snr_for_efficiency(r, b, exact).unwrap();
                assert!((efficiency(r, s, exact).unwrap() - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn half_error_rate_gives_one() {
        assert_eq!(norm_inv(0.5), 0.0);
        for &n in &[1.0, 1e3, 3e5] {
            for &s in &[1e-3, 0.02, 1.0] {
                assert_eq!(finite_length_beta(n, 0.5, s).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn epsilon_domain() {
        assert!(finite_length_beta(1e4, 0.0, 0.1).is_err());
        assert!(finite_length_beta(1e4, 1.0, 0.1).is_err());
        assert!(finite_length_beta(0.5, 0.1, 0.1).is_err());
        assert!(finite_length_beta(1e4, 0.1, -1.0).is_err());
    }

    #[test]
    fn norm_inv_symmetry_and_tails() {
        for &p in &[1e-300, 1e-20, 1e-5, 0.01, 0.2, 0.4] {
            assert!((norm_inv(p) + norm_inv(1.0 - p)).abs() < 1e-9 || p < 1e-16);
        }
        assert!((norm_inv(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert_eq!(norm_inv(0.0), f64::NEG_INFINITY);
        assert!(norm_inv(1.5).is_nan());
    }

    #[test]
    fn densities() {
        let s = 0.3;
        assert!((f_xy(1.0, 1.0, s) - (s / (8.0 * PI)).sqrt()).abs() < 1e-16);
        assert!(f_xy(1.0, 40.0, s) < f_xy(1.0, 1.0, s));
        assert_eq!(f_y(0.7, s), f_y(-0.7, s));
    }
}
