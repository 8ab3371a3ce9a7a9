//! Syndrome-based sum-product decoding on the mother graph.
//!
//! Flooding schedule: every check node is updated from the previous
//! symbol-to-check messages, then every symbol node from the new
//! check-to-symbol messages. Repetition symbols only enter through the
//! priors (see [`crate::channel::symbol_priors`]) and are regenerated from
//! the mother estimate at the end.
//!
//! Check update for edge `(m, n)` with coefficient `h`:
//!
//! 1. permute each incoming message so it describes `h' x_n'`:
//!    `qt(h' a) = q(a)`;
//! 2. XOR-convolve the extrinsic ones via the Walsh–Hadamard transform;
//! 3. read back through the syndrome: `r(a) = rt(h a + z_m)` (subtraction
//!    is XOR in characteristic two).

pub mod wht;

use crate::channel::Priors;
use crate::code::{MotherCode, RepCode};
use crate::error::{Error, Result};
use crate::gf::Symbol;

pub use wht::{convolve, fwht, ifwht};

/// Lower bound applied to message entries before normalisation.
pub const MESSAGE_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderConfig {
    pub max_iters: usize,
    /// Stop at the first iteration whose hard decision satisfies the
    /// syndrome. When false, exactly `max_iters` iterations run.
    pub validate_each_iter: bool,
    /// Record one [`TraceRow`] per iteration.
    pub trace: bool,
}

impl DecoderConfig {
    pub fn new(max_iters: usize) -> Self {
        DecoderConfig {
            max_iters,
            validate_each_iter: true,
            trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub iteration: usize,
    pub unsatisfied: usize,
    pub changed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub success: bool,
    /// Hard decision on the N mother symbols.
    pub estimate: Vec<Symbol>,
    /// Repetition symbols recomputed from `estimate` (empty unless decoded
    /// through [`Decoder::decode_repcode`]).
    pub repetitions: Vec<Symbol>,
    pub iterations: usize,
    /// Normalised posteriors from the last iteration.
    pub posteriors: Priors,
    pub trace: Vec<TraceRow>,
}

/// Decoder state for one mother code. Message buffers are kept between
/// calls, so one decoder per worker thread avoids reallocating them for
/// every frame.
pub struct Decoder<'a> {
    code: &'a MotherCode,
    q: usize,
    // mul[c * q + a] = c * a
    mul: Vec<Symbol>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    max_check_degree: usize,
    transforms: Vec<f64>,
    products: Vec<f64>,
    running: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Decoder<'a> {
    pub fn new(code: &'a MotherCode) -> Self {
        let field = code.field();
        let q = field.order();
        let mut mul = vec![0 as Symbol; q * q];
        for c in 1..q {
            let row = field.mul_row(c as Symbol);
            mul[c * q..(c + 1) * q].copy_from_slice(&row);
        }
        let e = code.edges().len();
        let max_check_degree = (0..code.n_checks())
            .map(|m| code.check_edges(m).len())
            .max()
            .unwrap_or(0);
        Decoder {
            code,
            q,
            mul,
            v2c: vec![0.0; e * q],
            c2v: vec![0.0; e * q],
            max_check_degree,
            transforms: vec![0.0; max_check_degree * q],
            products: vec![0.0; max_check_degree * q],
            running: vec![0.0; q],
            scratch: vec![0.0; q],
        }
    }

    pub fn code(&self) -> &MotherCode {
        self.code
    }

    fn validate(&self, priors: &Priors, syndrome: &[Symbol], config: &DecoderConfig) -> Result<()> {
        let code = self.code;
        if config.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if syndrome.len() != code.n_checks() {
            return Err(Error::LengthMismatch {
                expected: code.n_checks(),
                actual: syndrome.len(),
            });
        }
        if let Some(&z) = syndrome.iter().find(|&&z| z as usize >= self.q) {
            return Err(Error::ElementOutOfRange {
                value: z as u32,
                order: self.q,
            });
        }
        if priors.order() != self.q || priors.len() != code.n_symbols() {
            return Err(Error::LengthMismatch {
                expected: code.n_symbols() * self.q,
                actual: priors.as_slice().len(),
            });
        }
        for n in 0..code.n_symbols() {
            let row = priors.row(n);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidPrior { symbol: n, sum });
            }
        }
        Ok(())
    }

    /// Decodes the mother word closest to `priors` within the coset of
    /// `syndrome`.
    pub fn decode(&mut self, priors: &Priors, syndrome: &[Symbol], config: &DecoderConfig) -> Result<DecodeResult> {
        self.validate(priors, syndrome, config)?;
        let code = self.code;
        let q = self.q;
        let n_symbols = code.n_symbols();

        // Step 1: every symbol sends its prior on all of its edges.
        for n in 0..n_symbols {
            let p = priors.row(n);
            for &e in code.symbol_edges(n) {
                self.v2c[e * q..(e + 1) * q].copy_from_slice(p);
            }
        }

        let mut estimate: Vec<Symbol> = (0..n_symbols).map(|n| argmax(priors.row(n))).collect();
        let mut trace = Vec::new();
        let mut success = false;
        let mut iterations = 0;

        for it in 1..=config.max_iters {
            iterations = it;
            self.check_update(syndrome);
            let changed = self.symbol_update(priors, &mut estimate);

            if config.validate_each_iter || config.trace || it == config.max_iters {
                let unsatisfied = code.unsatisfied_checks(&estimate, syndrome);
                if config.trace {
                    trace.push(TraceRow {
                        iteration: it,
                        unsatisfied,
                        changed,
                    });
                }
                success = unsatisfied == 0;
                if success && config.validate_each_iter {
                    break;
                }
            }
        }

        Ok(DecodeResult {
            success,
            estimate,
            repetitions: Vec::new(),
            iterations,
            posteriors: self.posteriors(priors),
            trace,
        })
    }

    /// [`Decoder::decode`] followed by regeneration of every repetition
    /// symbol `x[N + j] = r[N + j] x[j % N]`.
    pub fn decode_repcode(
        &mut self,
        rep: &RepCode,
        priors: &Priors,
        syndrome: &[Symbol],
        config: &DecoderConfig,
    ) -> Result<DecodeResult> {
        if rep.mother() != self.code {
            return Err(Error::InvalidParameter(
                "decoder built for a different mother code".into(),
            ));
        }
        let mut res = self.decode(priors, syndrome, config)?;
        let full = rep.encode(&res.estimate)?;
        res.repetitions = full[rep.mother().n_symbols()..].to_vec();
        Ok(res)
    }

    // Step 2: check-to-symbol messages.
    fn check_update(&mut self, syndrome: &[Symbol]) {
        let q = self.q;
        let scale = 1.0 / q as f64;
        let edges = self.code.edges();
        for (m, &z) in syndrome.iter().enumerate() {
            let range = self.code.check_edges(m);
            let first = range.start;
            let d = range.len();
            if d == 0 {
                continue;
            }

            // transforms[i] = W{ qt_i }, where qt_i(h_i a) = q_i(a)
            for (i, e) in range.clone().enumerate() {
                let c = edges[e].coef as usize;
                let row = &self.mul[c * q..(c + 1) * q];
                let src = &self.v2c[e * q..(e + 1) * q];
                let dst = &mut self.transforms[i * q..(i + 1) * q];
                for (&to, &v) in row.iter().zip(src) {
                    dst[to as usize] = v;
                }
                fwht(dst);
            }

            // products[i] = prod_{j != i} transforms[j]
            if d == 3 {
                let (t0, rest) = self.transforms.split_at(q);
                let (t1, t2) = rest.split_at(q);
                let (p0, rest) = self.products.split_at_mut(q);
                let (p1, p2) = rest.split_at_mut(q);
                for a in 0..q {
                    p0[a] = t1[a] * t2[a];
                    p1[a] = t0[a] * t2[a];
                    p2[a] = t0[a] * t1[a];
                }
            } else {
                self.running.iter_mut().for_each(|v| *v = 1.0);
                for i in 0..d {
                    self.products[i * q..(i + 1) * q].copy_from_slice(&self.running);
                    let t = &self.transforms[i * q..(i + 1) * q];
                    self.running.iter_mut().zip(t).for_each(|(r, x)| *r *= x);
                }
                self.running.iter_mut().for_each(|v| *v = 1.0);
                for i in (0..d).rev() {
                    let p = &mut self.products[i * q..(i + 1) * q];
                    p.iter_mut().zip(&self.running).for_each(|(x, r)| *x *= r);
                    let t = &self.transforms[i * q..(i + 1) * q];
                    self.running.iter_mut().zip(t).for_each(|(r, x)| *r *= x);
                }
            }

            // inverse transform, then r(a) = rt(h a + z)
            for i in 0..d {
                let e = first + i;
                let rt = &mut self.products[i * q..(i + 1) * q];
                fwht(rt);
                let c = edges[e].coef as usize;
                let row = &self.mul[c * q..(c + 1) * q];
                let out = &mut self.c2v[e * q..(e + 1) * q];
                let z = z as usize;
                for (o, &ha) in out.iter_mut().zip(row) {
                    *o = rt[ha as usize ^ z] * scale;
                }
                wht::normalize(out, MESSAGE_FLOOR);
            }
        }
    }

    // Steps 3 and 4: symbol-to-check messages and the hard decision on the
    // unnormalised posterior. Returns how many decisions changed.
    fn symbol_update(&mut self, priors: &Priors, estimate: &mut [Symbol]) -> usize {
        let q = self.q;
        let mut changed = 0;
        for n in 0..self.code.n_symbols() {
            let edges = self.code.symbol_edges(n);
            let prior = priors.row(n);
            if let &[e0, e1] = edges {
                let r0 = &self.c2v[e0 * q..(e0 + 1) * q];
                let r1 = &self.c2v[e1 * q..(e1 + 1) * q];
                let (out0, out1) = two_rows_mut(&mut self.v2c, q, e0, e1);
                for a in 0..q {
                    let t0 = prior[a] * r1[a];
                    out0[a] = t0;
                    out1[a] = prior[a] * r0[a];
                    self.scratch[a] = t0 * r0[a];
                }
                wht::normalize(out0, MESSAGE_FLOOR);
                wht::normalize(out1, MESSAGE_FLOOR);
            } else {
                for (i, &e) in edges.iter().enumerate() {
                    self.running.copy_from_slice(prior);
                    for (j, &other) in edges.iter().enumerate() {
                        if j != i {
                            let r = &self.c2v[other * q..(other + 1) * q];
                            self.running.iter_mut().zip(r).for_each(|(s, x)| *s *= x);
                        }
                    }
                    wht::normalize(&mut self.running, MESSAGE_FLOOR);
                    self.v2c[e * q..(e + 1) * q].copy_from_slice(&self.running);
                }
                self.scratch.copy_from_slice(prior);
                for &e in edges {
                    let r = &self.c2v[e * q..(e + 1) * q];
                    self.scratch.iter_mut().zip(r).for_each(|(s, x)| *s *= x);
                }
            }
            let x = argmax(&self.scratch);
            if x != estimate[n] {
                changed += 1;
                estimate[n] = x;
            }
        }
        changed
    }

    // p_n * prod over all incoming check messages, normalised.
    fn posteriors(&self, priors: &Priors) -> Priors {
        let q = self.q;
        let mut post = priors.clone();
        for n in 0..self.code.n_symbols() {
            let row = post.row_mut(n);
            for &e in self.code.symbol_edges(n) {
                let r = &self.c2v[e * q..(e + 1) * q];
                row.iter_mut().zip(r).for_each(|(s, x)| *s *= x);
            }
            wht::normalize(row, MESSAGE_FLOOR);
        }
        post
    }

    /// Check-to-symbol message on edge `e` from the last iteration.
    pub fn check_message(&self, e: usize) -> &[f64] {
        &self.c2v[e * self.q..(e + 1) * self.q]
    }

    pub fn max_check_degree(&self) -> usize {
        self.max_check_degree
    }
}

fn two_rows_mut(buf: &mut [f64], q: usize, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert_ne!(a, b);
    if a < b {
        let (lo, hi) = buf.split_at_mut(b * q);
        (&mut lo[a * q..(a + 1) * q], &mut hi[..q])
    } else {
        let (lo, hi) = buf.split_at_mut(a * q);
        (&mut hi[..q], &mut lo[b * q..(b + 1) * q])
    }
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(v: &[f64]) -> Symbol {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best as Symbol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{symbol_priors, transmit, ChannelParams};
    use crate::code::Edge;
    use crate::gf::Field;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_priors(q: usize, n: usize, rng: &mut ChaCha8Rng) -> Priors {
        let mut probs: Vec<f64> = (0..q * n).map(|_| rng.random::<f64>() + 0.01).collect();
        for row in probs.chunks_exact_mut(q) {
            wht::normalize(row, 0.0);
        }
        Priors::new(q, probs).unwrap()
    }

    #[test]
    fn noiseless_decodes_in_one_iteration() {
        let f = Field::new(6).unwrap();
        let code = MotherCode::build(f, 90, 3, 0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Symbol> = (0..90).map(|_| rng.random_range(0..64)).collect();
        let z = code.syndrome(&x).unwrap();
        let mut dec = Decoder::new(&code);
        let res = dec
            .decode(&Priors::certain(64, &x), &z, &DecoderConfig::new(10))
            .unwrap();
        assert!(res.success);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.estimate, x);
    }

    #[test]
    fn uniform_priors_zero_syndrome() {
        let f = Field::new(4).unwrap();
        let code = MotherCode::build(f, 30, 3, 0, 3).unwrap();
        let z = vec![0; code.n_checks()];
        let mut dec = Decoder::new(&code);
        let res = dec
            .decode(&Priors::uniform(16, 30), &z, &DecoderConfig::new(5))
            .unwrap();
        // all-zero is a valid decision with the smallest-index tie-break
        assert!(res.success);
        assert_eq!(code.syndrome(&res.estimate).unwrap(), z);
    }

    #[test]
    fn input_validation() {
        let f = Field::new(2).unwrap();
        let code = MotherCode::build(f, 3, 3, 0, 3).unwrap();
        let mut dec = Decoder::new(&code);
        let cfg = DecoderConfig::new(5);
        let good = Priors::uniform(4, 3);
        assert!(dec.decode(&good, &[0], &cfg).is_err());
        assert!(dec.decode(&good, &[0, 9], &cfg).is_err());
        assert!(dec.decode(&Priors::uniform(4, 2), &[0, 0], &cfg).is_err());
        let mut bad = good.clone();
        bad.row_mut(1)[0] = 0.9;
        assert!(matches!(
            dec.decode(&bad, &[0, 0], &cfg),
            Err(Error::InvalidPrior { symbol: 1, .. })
        ));
        assert!(dec.decode(&good, &[0, 0], &DecoderConfig::new(0)).is_err());
    }

    #[test]
    fn extrinsic_messages_ignore_destination_prior() {
        let f = Field::new(3).unwrap();
        let code = MotherCode::build(f, 12, 3, 0, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let priors = random_priors(8, 12, &mut rng);
        let z: Vec<Symbol> = (0..code.n_checks()).map(|_| rng.random_range(0..8)).collect();
        let cfg = DecoderConfig {
            max_iters: 1,
            validate_each_iter: false,
            trace: false,
        };
        let target = 5;
        let mut dec = Decoder::new(&code);
        dec.decode(&priors, &z, &cfg).unwrap();
        let before: Vec<Vec<f64>> = code
            .symbol_edges(target)
            .iter()
            .map(|&e| dec.check_message(e).to_vec())
            .collect();

        let mut perturbed = priors.clone();
        let row = perturbed.row_mut(target);
        row.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = if i == 6 { 0.93 } else { 0.01 });
        dec.decode(&perturbed, &z, &cfg).unwrap();
        for (k, &e) in code.symbol_edges(target).iter().enumerate() {
            assert_eq!(dec.check_message(e), &before[k][..]);
        }
        // but messages to other symbols of the same check do change
        let e = code.symbol_edges(target)[0];
        let m = code.edges()[e].check as usize;
        let other = code.check_edges(m).find(|&o| o != e).unwrap();
        let mut again = Decoder::new(&code);
        again.decode(&priors, &z, &cfg).unwrap();
        assert_ne!(dec.check_message(other), again.check_message(other));
    }

    #[test]
    fn repetitions_regenerated() {
        let f = Field::new(5).unwrap();
        let mother = MotherCode::build(f, 30, 3, 0, 1).unwrap();
        let rep = RepCode::with_stages(mother, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<Symbol> = (0..30).map(|_| rng.random_range(0..32)).collect();
        let z = rep.syndrome(&x).unwrap();
        let params = ChannelParams::from_db(-4.0).unwrap();
        let y = transmit(&rep.encode(&x).unwrap(), 5, &params, &mut rng);
        let pri = symbol_priors(&rep, &y, &params).unwrap();
        let mut dec = Decoder::new(rep.mother());
        let res = dec.decode_repcode(&rep, &pri, &z, &DecoderConfig::new(50)).unwrap();
        let mut full = res.estimate.clone();
        full.extend_from_slice(&res.repetitions);
        assert!(rep.repetitions_consistent(&full));
        if res.success {
            assert_eq!(rep.syndrome(&res.estimate).unwrap(), z);
        }
    }

    #[test]
    fn trace_and_fixed_iterations() {
        let f = Field::new(4).unwrap();
        let mother = MotherCode::build(f, 60, 3, 0, 1).unwrap();
        let rep = RepCode::with_stages(mother, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Symbol> = (0..60).map(|_| rng.random_range(0..16)).collect();
        let z = rep.syndrome(&x).unwrap();
        let params = ChannelParams::from_db(-1.0).unwrap();
        let y = transmit(&rep.encode(&x).unwrap(), 4, &params, &mut rng);
        let pri = symbol_priors(&rep, &y, &params).unwrap();
        let mut dec = Decoder::new(rep.mother());
        let cfg = DecoderConfig {
            max_iters: 7,
            validate_each_iter: false,
            trace: true,
        };
        let res = dec.decode(&pri, &z, &cfg).unwrap();
        assert_eq!(res.iterations, 7);
        assert_eq!(res.trace.len(), 7);
        assert_eq!(res.trace.last().unwrap().unsatisfied == 0, res.success);
    }

    #[test]
    fn posteriors_stay_normalized_at_very_low_snr() {
        let f = Field::new(6).unwrap();
        let mother = MotherCode::build(f, 60, 3, 0, 1).unwrap();
        let rep = RepCode::with_stages(mother, 10, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x: Vec<Symbol> = (0..60).map(|_| rng.random_range(0..64)).collect();
        let z = rep.syndrome(&x).unwrap();
        let params = ChannelParams::from_db(-30.0).unwrap();
        let y = transmit(&rep.encode(&x).unwrap(), 6, &params, &mut rng);
        let pri = symbol_priors(&rep, &y, &params).unwrap();
        let mut dec = Decoder::new(rep.mother());
        let res = dec.decode(&pri, &z, &DecoderConfig::new(20)).unwrap();
        for n in 0..60 {
            let row = res.posteriors.row(n);
            assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for e in 0..rep.mother().edges().len() {
            let m = dec.check_message(e);
            assert!(m.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn degree_one_check() {
        // a lone check on one symbol pins that symbol: h x = z
        let f = Field::new(3).unwrap();
        let edges = vec![Edge {
            check: 0,
            symbol: 0,
            coef: 5,
        }];
        let code = MotherCode::from_edges(f.clone(), 1, 1, 1, 0, edges).unwrap();
        let mut dec = Decoder::new(&code);
        let res = dec
            .decode(&Priors::uniform(8, 1), &[3], &DecoderConfig::new(3))
            .unwrap();
        assert!(res.success);
        assert_eq!(f.mul(5, res.estimate[0]), 3);
    }
}
