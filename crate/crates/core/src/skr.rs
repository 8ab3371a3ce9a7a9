//! Finite-size secret-key rate of Gaussian-modulated CV-QKD with homodyne
//! detection and reverse reconciliation, under collective attacks:
//!
//! ```text
//! K = (n / N) (1 - F) (beta I_AB - chi_BE - Delta(n))
//! ```
//!
//! Detector inefficiency and electronic noise are trusted (not attributed
//! to the eavesdropper). All variances are in shot-noise units.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Link and detector parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkParams {
    pub alpha_db_per_km: f64,
    pub length_km: f64,
    pub excess_noise: f64,
    pub eta: f64,
    pub v_el: f64,
    /// Alice's modulation variance `V_A`.
    pub va: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            alpha_db_per_km: 0.2,
            length_km: 0.0,
            excess_noise: 0.005,
            eta: 0.606,
            v_el: 0.041,
            va: 10.0,
        }
    }
}

pub const VA_MIN: f64 = 1.0;
pub const VA_MAX: f64 = 100.0;

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_db_per_km", self.alpha_db_per_km),
            ("excess_noise", self.excess_noise),
            ("eta", self.eta),
            ("v_el", self.v_el),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "length_km must be >= 0, got {}",
                self.length_km
            )));
        }
        if self.eta > 1.0 {
            return Err(Error::InvalidParameter(format!("eta must be <= 1, got {}", self.eta)));
        }
        if !(VA_MIN..=VA_MAX).contains(&self.va) {
            return Err(Error::InvalidParameter(format!(
                "va must lie in [{VA_MIN}, {VA_MAX}], got {}",
                self.va
            )));
        }
        Ok(())
    }

    /// Channel transmittance `10^(-alpha L / 10)`.
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.alpha_db_per_km * self.length_km / 10.0)
    }

    /// `eta T V_A / (1 + eta T eps + V_el)`.
    pub fn snr(&self) -> f64 {
        let et = self.eta * self.transmittance();
        et * self.va / (1.0 + et * self.excess_noise + self.v_el)
    }

    pub fn with_length(self, length_km: f64) -> Self {
        LinkParams { length_km, ..self }
    }

    pub fn with_va(self, va: f64) -> Self {
        LinkParams { va, ..self }
    }
}

/// Block sizes and reconciliation performance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteSizeParams {
    /// Raw key bits entering privacy amplification, `n`.
    pub n_raw: f64,
    /// Exchanged signals, `N`.
    pub n_signals: f64,
    pub eps_bar: f64,
    /// Reconciliation frame error rate.
    pub fer: f64,
    pub beta: f64,
}

impl FiniteSizeParams {
    /// `n = 10^12`, `N = 2n`, `eps_bar = 10^-10`.
    pub fn new(beta: f64, fer: f64) -> Self {
        FiniteSizeParams {
            n_raw: 1e12,
            n_signals: 2e12,
            eps_bar: 1e-10,
            fer,
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_raw >= 1e4) {
            return Err(Error::InvalidParameter(format!(
                "n_raw must be >= 1e4, got {}",
                self.n_raw
            )));
        }
        if !(self.n_signals >= self.n_raw) {
            return Err(Error::InvalidParameter("n_signals must be >= n_raw".into()));
        }
        if !(self.eps_bar > 0.0 && self.eps_bar < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps_bar must lie in (0, 1), got {}",
                self.eps_bar
            )));
        }
        if !(0.0..1.0).contains(&self.fer) {
            return Err(Error::InvalidParameter(format!(
                "fer must lie in [0, 1), got {}",
                self.fer
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Privacy-amplification penalty `7 sqrt(log2(2 / eps_bar) / n)`.
pub fn delta_n(n: f64, eps_bar: f64) -> f64 {
    7.0 * ((2.0 / eps_bar).log2() / n).sqrt()
}

/// `G(x) = (x + 1) log2(x + 1) - x log2 x`, the entropy of a thermal state
/// with mean photon number `x`.
pub fn g(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

fn g_of_eigen(lambda: f64) -> f64 {
    g((lambda - 1.0) / 2.0)
}

fn eigen_pair(sum: f64, prod: f64) -> (f64, f64) {
    let disc = (sum * sum - 4.0 * prod).max(0.0).sqrt();
    ((0.5 * (sum + disc)).sqrt(), (0.5 * (sum - disc).max(0.0)).sqrt())
}

/// Mutual information between Alice and Bob in bits per symbol.
pub fn mutual_information(link: &LinkParams) -> f64 {
    let t = link.transmittance();
    let v = link.va + 1.0;
    let chi_line = 1.0 / t - 1.0 + link.excess_noise;
    let chi_hom = (1.0 + link.v_el) / link.eta - 1.0;
    let chi_tot = chi_line + chi_hom / t;
    0.5 * ((v + chi_tot) / (1.0 + chi_tot)).log2()
}

/// Holevo bound on Eve's information about Bob's data.
pub fn holevo_bound(link: &LinkParams) -> f64 {
    let t = link.transmittance();
    let v = link.va + 1.0;
    let chi_line = 1.0 / t - 1.0 + link.excess_noise;
    let chi_hom = (1.0 + link.v_el) / link.eta - 1.0;
    let chi_tot = chi_line + chi_hom / t;

    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = (t * (v * chi_line + 1.0)).powi(2);
    let (l1, l2) = eigen_pair(a, b);

    let rb = b.sqrt();
    let denom = t * (v + chi_tot);
    let c = (v * rb + t * (v + chi_line) + a * chi_hom) / denom;
    let d = rb * (v + rb * chi_hom) / denom;
    let (l3, l4) = eigen_pair(c, d);

    let chi = g_of_eigen(l1) + g_of_eigen(l2) - g_of_eigen(l3) - g_of_eigen(l4);
    chi.max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyRate {
    /// Key rate clamped at zero.
    pub key: f64,
    pub raw: f64,
    pub i_ab: f64,
    pub chi_be: f64,
    pub snr: f64,
}

pub fn key_rate(link: &LinkParams, fs: &FiniteSizeParams) -> KeyRate {
    let i_ab = mutual_information(link);
    let chi_be = holevo_bound(link);
    let delta = delta_n(fs.n_raw, fs.eps_bar);
    let raw = fs.n_raw / fs.n_signals * (1.0 - fs.fer) * (fs.beta * i_ab - chi_be - delta);
    KeyRate {
        key: raw.max(0.0),
        raw,
        i_ab,
        chi_be,
        snr: link.snr(),
    }
}

/// Search grid for the modulation variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VaGrid {
    pub min: f64,
    pub max: f64,
    pub coarse: f64,
    pub fine: f64,
}

impl Default for VaGrid {
    fn default() -> Self {
        VaGrid {
            min: VA_MIN,
            max: VA_MAX,
            coarse: 1.0,
            fine: 0.01,
        }
    }
}

fn grid_points(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VaOptimum {
    pub va: f64,
    pub rate: KeyRate,
    /// False when the coarse profile has more than one local maximum.
    pub unimodal: bool,
}

/// Coarse grid search over `V_A`, then a fine search within one coarse step
/// of the best point. Ties go to the smaller variance.
pub fn optimize_va(link: &LinkParams, fs: &FiniteSizeParams, grid: &VaGrid) -> VaOptimum {
    let eval = |va: f64| key_rate(&link.with_va(va), fs);
    let coarse: Vec<(f64, KeyRate)> = grid_points(grid.min, grid.max, grid.coarse)
        .into_iter()
        .map(|va| (va, eval(va)))
        .collect();

    let peaks = (0..coarse.len())
        .filter(|&i| {
            let k = coarse[i].1.raw;
            let left = i == 0 || coarse[i - 1].1.raw < k;
            let right = i + 1 == coarse.len() || coarse[i + 1].1.raw < k;
            left && right
        })
        .count();

    let mut best = coarse[0];
    for &c in &coarse[1..] {
        if c.1.raw > best.1.raw {
            best = c;
        }
    }
    let lo = (best.0 - grid.coarse).max(grid.min);
    let hi = (best.0 + grid.coarse).min(grid.max);
    for va in grid_points(lo, hi, grid.fine) {
        let k = eval(va);
        if k.raw > best.1.raw {
            best = (va, k);
        }
    }
    VaOptimum {
        va: best.0,
        rate: best.1,
        unimodal: peaks <= 1,
    }
}

/// One row of a distance sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkrRow {
    pub length_km: f64,
    pub alpha_db: f64,
    pub beta: f64,
    pub fer: f64,
    pub va_opt: f64,
    pub snr: f64,
    pub key: f64,
    pub key_raw: f64,
}

pub const SKR_CSV_HEADER: &str = "L_km,alpha_db,beta,fer,va_opt,snr,K_bits_per_symbol,K_raw";

impl SkrRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.2},{:.6e},{:.6e},{:.6e}",
            self.length_km, self.alpha_db, self.beta, self.fer, self.va_opt, self.snr, self.key, self.key_raw
        )
    }
}

/// Optimised key rate for every `(fs, L)` pair, ordered by `fs` then `L`.
pub fn sweep_distance(link: &LinkParams, settings: &[FiniteSizeParams], lengths: &[f64], grid: &VaGrid) -> Vec<SkrRow> {
    let jobs: Vec<(FiniteSizeParams, f64)> = settings
        .iter()
        .flat_map(|fs| lengths.iter().map(move |&l| (*fs, l)))
        .collect();
    jobs.par_iter()
        .map(|(fs, l)| {
            let at = link.with_length(*l);
            let opt = optimize_va(&at, fs, grid);
            SkrRow {
                length_km: *l,
                alpha_db: link.alpha_db_per_km,
                beta: fs.beta,
                fer: fs.fer,
                va_opt: opt.va,
                snr: at.with_va(opt.va).snr(),
                key: opt.rate.key,
                key_raw: opt.rate.raw,
            }
        })
        .collect()
}

/// Distance at which the optimised raw key rate reaches zero, found by
/// bisection to within `tol_km`. `None` when no key is possible at
/// `lo_km` or the key is still positive at `hi_km`.
pub fn max_distance(
    link: &LinkParams,
    fs: &FiniteSizeParams,
    grid: &VaGrid,
    lo_km: f64,
    hi_km: f64,
    tol_km: f64,
) -> Option<f64> {
    let positive = |l: f64| optimize_va(&link.with_length(l), fs, grid).rate.raw > 0.0;
    if !positive(lo_km) || positive(hi_km) {
        return None;
    }
    let (mut lo, mut hi) = (lo_km, hi_km);
    while hi - lo > tol_km {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_closed_form() {
        let d = delta_n(1e12, 1e-10);
        assert!((d - 4.0948e-5).abs() < 1e-8, "{d}");
        assert!((delta_n(4e12, 1e-10) - d / 2.0).abs() < 1e-18);
        assert!(delta_n(1e12, 1e-12) > d);
    }

    #[test]
    fn full_error_rate_gives_no_key() {
        let link = LinkParams {
            length_km: 20.0,
            ..Default::default()
        };
        let mut fs = FiniteSizeParams::new(0.9, 0.0);
        fs.fer = 1.0;
        let k = key_rate(&link, &fs);
        assert_eq!(k.raw, 0.0);
        assert_eq!(k.key, 0.0);
    }

    #[test]
    fn g_values() {
        assert_eq!(g(0.0), 0.0);
        assert!((g(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(LinkParams::default().validate().is_ok());
        assert!(LinkParams::default().with_va(0.5).validate().is_err());
        assert!(LinkParams {
            eta: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(FiniteSizeParams::new(0.9, 1.0).validate().is_err());
        let mut fs = FiniteSizeParams::new(0.9, 0.1);
        fs.n_raw = 100.0;
        assert!(fs.validate().is_err());
    }

    #[test]
    fn snr_convention() {
        let link = LinkParams {
            length_km: 0.0,
            va: 2.0,
            ..Default::default()
        };
        let expect = 0.606 * 2.0 / (1.0 + 0.606 * 0.005 + 0.041);
        assert!((link.snr() - expect).abs() < 1e-15);
    }
}
