//! BIAWGN channel: BPSK transmission, bit posteriors and the aggregation of
//! all copies of a mother symbol into one symbol prior.
//!
//! Conventions: unit signal power per bit, `snr = 1 / sigma^2`; bit 0 maps
//! to +1 and bit 1 to -1; each symbol is sent most-significant coefficient
//! first.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::code::RepCode;
use crate::error::{Error, Result};
use crate::quad;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(s: f64) -> f64 {
    10.0 * s.log10()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    snr: f64,
    sigma: f64,
}

impl ChannelParams {
    pub fn from_snr(snr: f64) -> Result<Self> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::InvalidParameter(format!("snr must be positive, got {snr}")));
        }
        Ok(ChannelParams {
            snr,
            sigma: 1.0 / snr.sqrt(),
        })
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::from_snr(db_to_linear(db))
    }

    /// Noise standard deviation; `sigma -> 0` is allowed for noiseless tests.
    pub fn from_sigma(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(ChannelParams {
            snr: if sigma == 0.0 {
                f64::INFINITY
            } else {
                1.0 / (sigma * sigma)
            },
            sigma,
        })
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn snr_db(&self) -> f64 {
        linear_to_db(self.snr)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// BPSK-modulates `word` (p bits per symbol, MSB first) and adds Gaussian
/// noise of standard deviation `params.sigma()`.
pub fn transmit<R: Rng + ?Sized>(word: &[u16], p: u32, params: &ChannelParams, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(word.len() * p as usize);
    for &s in word {
        for b in (0..p).rev() {
            let x = if (s >> b) & 1 == 0 { 1.0 } else { -1.0 };
            let n: f64 = rng.sample(StandardNormal);
            out.push(x + params.sigma * n);
        }
    }
    out
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// P(b = 0 | y).
pub fn bit_prior(y: f64, sigma: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * y / (sigma * sigma)).exp())
}

/// `(ln P(b=0|y), ln P(b=1|y))`. With `sigma == 0` the observation is taken
/// as a hard decision.
#[inline]
pub fn bit_log_probs(y: f64, sigma: f64) -> (f64, f64) {
    if sigma == 0.0 {
        return if y > 0.0 {
            (0.0, f64::NEG_INFINITY)
        } else if y < 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (-std::f64::consts::LN_2, -std::f64::consts::LN_2)
        };
    }
    let llr = 2.0 * y / (sigma * sigma);
    (-softplus(-llr), -softplus(llr))
}

/// Symbol prior distributions, one length-q row per mother symbol, stored
/// contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct Priors {
    q: usize,
    probs: Vec<f64>,
}

impl Priors {
    pub fn new(q: usize, probs: Vec<f64>) -> Result<Self> {
        if q == 0 || !probs.len().is_multiple_of(q) {
            return Err(Error::LengthMismatch {
                expected: q * (probs.len() / q.max(1) + 1),
                actual: probs.len(),
            });
        }
        Ok(Priors { q, probs })
    }

    pub fn uniform(q: usize, n: usize) -> Self {
        Priors {
            q,
            probs: vec![1.0 / q as f64; q * n],
        }
    }

    /// Point masses at `x`.
    pub fn certain(q: usize, x: &[u16]) -> Self {
        let mut probs = vec![0.0; q * x.len()];
        for (n, &s) in x.iter().enumerate() {
            probs[n * q + s as usize] = 1.0;
        }
        Priors { q, probs }
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.probs[n * self.q..(n + 1) * self.q]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.probs[n * self.q..(n + 1) * self.q]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

// ll[v] = sum of bit log-probabilities for symbol value v, bits given MSB first.
fn symbol_log_likelihoods(bits: &[f64], sigma: f64, ll: &mut [f64]) {
    let p = bits.len();
    ll[0] = 0.0;
    for (pos, &y) in bits.iter().enumerate() {
        let j = p - 1 - pos;
        let (l0, l1) = bit_log_probs(y, sigma);
        let half = 1usize << j;
        // Entries so far only involve value bits above j: walk them by stride.
        let stride = half << 1;
        let mut base = 0;
        while base < ll.len() {
            let v = ll[base];
            ll[base + half] = v + l1;
            ll[base] = v + l0;
            base += stride;
        }
    }
}

/// A-priori symbol distributions of the mother symbols given every copy.
///
/// For mother symbol `n`,
/// `p_n(a) ∝ P(obs of x_n | a) * prod_t P(obs of x_{tN+n} | r_{tN+n} a)`,
/// accumulated in the log domain and normalised after max-subtraction.
pub fn symbol_priors(code: &RepCode, observations: &[f64], params: &ChannelParams) -> Result<Priors> {
    let field = code.field();
    let p = field.degree() as usize;
    let q = field.order();
    let n = code.mother().n_symbols();
    let expected = code.len_symbols() * p;
    if observations.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: observations.len(),
        });
    }
    let sigma = params.sigma();
    let log = field.log_table();
    let exp = field.exp_table();
    let order = q - 1;

    let mut acc = vec![0.0f64; n * q];
    let mut ll = vec![0.0f64; q];
    for s in 0..n {
        let bits = &observations[s * p..(s + 1) * p];
        symbol_log_likelihoods(bits, sigma, &mut ll);
        acc[s * q..(s + 1) * q].copy_from_slice(&ll);
    }
    for (j, &r) in code.coefs().iter().enumerate() {
        let s = j % n;
        let pos = n + j;
        let bits = &observations[pos * p..(pos + 1) * p];
        symbol_log_likelihoods(bits, sigma, &mut ll);
        let row = &mut acc[s * q..(s + 1) * q];
        row[0] += ll[0];
        let lr = log[r as usize] as usize;
        for a in 1..q {
            let mut e = log[a] as usize + lr;
            if e >= order {
                e -= order;
            }
            row[a] += ll[exp[e] as usize];
        }
    }

    for row in acc.chunks_exact_mut(q) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        row.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(Priors { q, probs: acc })
}

/// `C = 1/2 log2(1 + s)`.
pub fn awgn_capacity(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

/// Capacity of the binary-input AWGN channel at linear SNR `s`, in bits per
/// channel use: `1 - E[log2(1 + exp(-L))]` with `L = 2 s y`, `y ~ N(1, 1/s)`.
/// Integrated over `|z| <= 12` standard deviations to an absolute tolerance
/// of 1e-12.
pub fn biawgn_capacity(snr: f64) -> f64 {
    if snr <= 0.0 {
        return 0.0;
    }
    let root = snr.sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let loss = quad::integrate(
        |z| {
            let llr = 2.0 * snr + 2.0 * root * z;
            norm * (-0.5 * z * z).exp() * softplus(-llr)
        },
        -12.0,
        12.0,
        1e-13,
    );
    1.0 - loss / std::f64::consts::LN_2
}
