//! Monte Carlo frame error rate measurement over the binary-input AWGN
//! channel, and extraction of efficiency points from it.
//!
//! Every frame draws its data and noise from its own ChaCha8 stream keyed by
//! `(seed, point, frame)`. Frames run in fixed-size batches on the current
//! rayon pool and stopping decisions are taken on the ordered outcomes, so
//! results do not depend on the number of worker threads.

use std::sync::Mutex;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{finite_length_beta, snr_for_efficiency, EfficiencyPoint};
use crate::channel::{db_to_linear, linear_to_db, symbol_priors, transmit, ChannelParams, Priors};
use crate::code::{MotherCode, RepCode};
use crate::decoder::{Decoder, DecoderConfig};
use crate::error::{Error, Result};
use crate::gf::Symbol;

/// No measurement point is reported on fewer frames.
pub const MIN_FRAMES: usize = 100;

const Z95: f64 = 1.959_963_984_540_054;

/// Random stream for one frame.
pub fn frame_rng(seed: u64, point: u64, frame: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&point.to_le_bytes());
    key[16..24].copy_from_slice(&frame.to_le_bytes());
    key[24..].copy_from_slice(b"nbldpc.f");
    ChaCha8Rng::from_seed(key)
}

/// `+inf` dB means a noiseless channel.
pub fn channel_at(snr_db: f64) -> Result<ChannelParams> {
    if snr_db == f64::INFINITY {
        ChannelParams::from_sigma(0.0)
    } else {
        ChannelParams::from_db(snr_db)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameOutcome {
    /// Decoder stopped without satisfying the syndrome.
    pub detected: bool,
    /// Syndrome satisfied by a word other than the one sent.
    pub undetected: bool,
    pub iterations: usize,
}

impl FrameOutcome {
    pub fn is_error(&self) -> bool {
        self.detected || self.undetected
    }
}

/// Everything the two parties hold for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// Mother word, uniform over all symbols.
    pub x: Vec<Symbol>,
    /// Its syndrome, sent to the decoder.
    pub z: Vec<Symbol>,
    /// Decoder-side priors from the channel output of the full word.
    pub priors: Priors,
}

pub fn draw_frame(rep: &RepCode, params: &ChannelParams, rng: &mut ChaCha8Rng) -> Result<Frame> {
    let field = rep.field();
    let q = field.order() as u32;
    let x: Vec<Symbol> = (0..rep.mother().n_symbols())
        .map(|_| rng.random_range(0..q) as Symbol)
        .collect();
    let z = rep.syndrome(&x)?;
    let y = transmit(&rep.encode(&x)?, field.degree(), params, rng);
    let priors = symbol_priors(rep, &y, params)?;
    Ok(Frame { x, z, priors })
}

/// Sends one uniformly random word through the channel and decodes it.
pub fn simulate_frame(
    rep: &RepCode,
    decoder: &mut Decoder<'_>,
    params: &ChannelParams,
    config: &DecoderConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FrameOutcome> {
    let Frame { x, z, priors } = draw_frame(rep, params, rng)?;
    let res = decoder.decode(&priors, &z, config)?;
    Ok(FrameOutcome {
        detected: !res.success,
        undetected: res.success && res.estimate != x,
        iterations: res.iterations,
    })
}

/// Decoders are large (two messages per edge), so they are recycled
/// between batches rather than rebuilt per frame.
struct DecoderPool<'a> {
    code: &'a MotherCode,
    free: Mutex<Vec<Decoder<'a>>>,
}

impl<'a> DecoderPool<'a> {
    fn new(code: &'a MotherCode) -> Self {
        DecoderPool {
            code,
            free: Mutex::new(Vec::new()),
        }
    }

    fn run_batch(
        &self,
        rep: &RepCode,
        params: &ChannelParams,
        config: &DecoderConfig,
        seed: u64,
        point: u64,
        frames: std::ops::Range<usize>,
    ) -> Result<Vec<FrameOutcome>> {
        frames
            .into_par_iter()
            .map(|f| {
                let popped = self.free.lock().unwrap().pop();
                let mut dec = popped.unwrap_or_else(|| Decoder::new(self.code));
                let mut rng = frame_rng(seed, point, f as u64);
                let out = simulate_frame(rep, &mut dec, params, config, &mut rng);
                self.free.lock().unwrap().push(dec);
                out
            })
            .collect()
    }
}

/// One measured SNR point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimRecord {
    pub snr_db: f64,
    pub frames: usize,
    pub errors: usize,
    pub fer: f64,
    /// Half-width of the normal-approximation 95% interval on `fer`.
    pub ci95: f64,
    pub mean_iters: f64,
    pub detected: usize,
    pub undetected: usize,
}

pub const SIM_CSV_HEADER: &str = "snr_db,frames,errors,fer,ci95,mean_iters,detected,undetected";

impl SimRecord {
    pub fn from_outcomes(snr_db: f64, outcomes: &[FrameOutcome]) -> Self {
        let frames = outcomes.len();
        let detected = outcomes.iter().filter(|o| o.detected).count();
        let undetected = outcomes.iter().filter(|o| o.undetected).count();
        let errors = detected + undetected;
        let iters: usize = outcomes.iter().map(|o| o.iterations).sum();
        let n = frames.max(1) as f64;
        let fer = errors as f64 / n;
        SimRecord {
            snr_db,
            frames,
            errors,
            fer,
            ci95: Z95 * (fer * (1.0 - fer) / n).sqrt(),
            mean_iters: iters as f64 / n,
            detected,
            undetected,
        }
    }

    /// Wilson score interval at 95%.
    pub fn wilson95(&self) -> (f64, f64) {
        wilson(self.errors, self.frames, Z95)
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{:.4},{},{},{:.6},{:.6},{:.3},{},{}",
            self.snr_db, self.frames, self.errors, self.fer, self.ci95, self.mean_iters, self.detected, self.undetected
        )
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSpec {
    pub snr_db: Vec<f64>,
    pub max_frames: usize,
    /// Stop a point once this many frame errors are seen (and at least
    /// [`MIN_FRAMES`] frames have run).
    pub target_errors: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Frames decoded between stopping checks.
    pub batch: usize,
}

impl SimSpec {
    pub fn new(snr_db: Vec<f64>, max_iters: usize, seed: u64) -> Self {
        SimSpec {
            snr_db,
            max_frames: 10_000,
            target_errors: 50,
            max_iters,
            seed,
            batch: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::InvalidParameter("snr grid is empty".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::InvalidParameter("snr grid contains NaN or -inf".into()));
        }
        if self.max_frames < MIN_FRAMES {
            return Err(Error::InvalidParameter(format!("max_frames must be >= {MIN_FRAMES}")));
        }
        if self.target_errors == 0 || self.max_iters == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter(
                "target_errors, max_iters and batch must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Frames until the stop rule fires: `max_frames`, or the first frame at
/// which `target_errors` errors have been seen, but never below
/// [`MIN_FRAMES`].
fn stop_index(outcomes: &[FrameOutcome], target_errors: usize, max_frames: usize) -> Option<usize> {
    let mut errors = 0;
    for (i, o) in outcomes.iter().enumerate() {
        errors += o.is_error() as usize;
        let frames = i + 1;
        if frames == max_frames || (frames >= MIN_FRAMES && errors >= target_errors) {
            return Some(frames);
        }
    }
    None
}

fn measure_point(rep: &RepCode, pool: &DecoderPool<'_>, spec: &SimSpec, point: u64, snr_db: f64) -> Result<SimRecord> {
    let params = channel_at(snr_db)?;
    let config = DecoderConfig::new(spec.max_iters);
    let mut outcomes = Vec::new();
    loop {
        let start = outcomes.len();
        let end = (start + spec.batch).min(spec.max_frames);
        outcomes.extend(pool.run_batch(rep, &params, &config, spec.seed, point, start..end)?);
        if let Some(stop) = stop_index(&outcomes, spec.target_errors, spec.max_frames) {
            outcomes.truncate(stop);
            break;
        }
    }
    let rec = SimRecord::from_outcomes(snr_db, &outcomes);
    info!(
        "snr {:.3} dB: {} / {} errors, fer {:.4}",
        rec.snr_db, rec.errors, rec.frames, rec.fer
    );
    Ok(rec)
}

/// Frame error rate at every point of the grid.
pub fn run_fer(rep: &RepCode, spec: &SimSpec) -> Result<Vec<SimRecord>> {
    run_fer_with(rep, spec, |_| Ok(()))
}

/// [`run_fer`], handing each record to `on_record` as soon as it is done.
pub fn run_fer_with<F>(rep: &RepCode, spec: &SimSpec, mut on_record: F) -> Result<Vec<SimRecord>>
where
    F: FnMut(&SimRecord) -> Result<()>,
{
    spec.validate()?;
    let pool = DecoderPool::new(rep.mother());
    let mut records = Vec::with_capacity(spec.snr_db.len());
    for (i, &s) in spec.snr_db.iter().enumerate() {
        let rec = measure_point(rep, &pool, spec, i as u64, s)?;
        on_record(&rec)?;
        records.push(rec);
    }
    Ok(records)
}

/// Search settings for [`find_snr_at_fer`].
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec {
    pub target_fer: f64,
    /// A point is accepted once its 95% interval lies inside this range.
    pub accept: (f64, f64),
    pub max_iters: usize,
    pub seed: u64,
    /// Stop bisecting when the bracket is narrower than this (dB).
    pub tol_db: f64,
    /// Frame budget per probed point.
    pub max_frames: usize,
    /// Efficiency at which the upper end of the initial bracket is placed.
    pub beta_hi: f64,
}

impl SearchSpec {
    pub fn new(max_iters: usize, seed: u64) -> Self {
        SearchSpec {
            target_fer: 0.1,
            accept: (0.05, 0.2),
            max_iters,
            seed,
            tol_db: 0.005,
            max_frames: 2000,
            beta_hi: 0.7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.accept;
        if !(0.0 < lo && lo < self.target_fer && self.target_fer < hi && hi < 1.0) {
            return Err(Error::InvalidParameter(
                "need 0 < accept.0 < target_fer < accept.1 < 1".into(),
            ));
        }
        if self.max_iters == 0 || self.max_frames < MIN_FRAMES || !(self.tol_db > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "max_iters must be >= 1, max_frames >= {MIN_FRAMES}, tol_db > 0"
            )));
        }
        if !(self.beta_hi > 0.0 && self.beta_hi < 1.0) {
            return Err(Error::InvalidParameter("beta_hi must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// FER above target: move to higher SNR.
    TooNoisy,
    /// FER below target: move to lower SNR.
    TooClean,
    Accepted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub record: SimRecord,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub snr_db: f64,
    /// Measurement at `snr_db`.
    pub record: SimRecord,
    /// Whether the final interval lies inside the acceptance range.
    pub accepted: bool,
    pub probes: Vec<Probe>,
}

fn probe_point(rep: &RepCode, pool: &DecoderPool<'_>, spec: &SearchSpec, point: u64, snr_db: f64) -> Result<Probe> {
    let params = channel_at(snr_db)?;
    let config = DecoderConfig::new(spec.max_iters);
    let mut outcomes = Vec::new();
    // Small first batches so that far-off points are dismissed cheaply.
    let mut batch = 4;
    loop {
        let start = outcomes.len();
        let end = (start + batch).min(spec.max_frames);
        outcomes.extend(pool.run_batch(rep, &params, &config, spec.seed, point, start..end)?);
        batch = (batch * 2).min(64);

        let rec = SimRecord::from_outcomes(snr_db, &outcomes);
        let (lo, hi) = rec.wilson95();
        let verdict = if rec.frames >= MIN_FRAMES && lo >= spec.accept.0 && hi <= spec.accept.1 {
            Some(Verdict::Accepted)
        } else if lo > spec.target_fer {
            Some(Verdict::TooNoisy)
        } else if hi < spec.target_fer {
            Some(Verdict::TooClean)
        } else if rec.frames >= spec.max_frames {
            Some(if rec.fer >= spec.target_fer {
                Verdict::TooNoisy
            } else {
                Verdict::TooClean
            })
        } else {
            None
        };
        if let Some(verdict) = verdict {
            debug!(
                "probe {point} at {snr_db:.4} dB: {} / {} -> {verdict:?}",
                rec.errors, rec.frames
            );
            return Ok(Probe { record: rec, verdict });
        }
    }
}

/// SNR (dB) at which the frame error rate is `target_fer`.
///
/// Bisection in dB. The low end of the initial bracket is the Shannon limit
/// of the code rate, where the normal-approximation converse already puts
/// the error rate of any code near one half, so it is not simulated. The
/// high end starts at efficiency `beta_hi` and is moved up in 1 dB steps
/// until it measures below target. Each probe runs until its Wilson interval
/// settles on one side of the target or falls inside the acceptance range.
pub fn find_snr_at_fer(rep: &RepCode, spec: &SearchSpec) -> Result<SearchResult> {
    spec.validate()?;
    let rate = rep.rate();
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter("code rate must be positive".into()));
    }
    let pool = DecoderPool::new(rep.mother());
    let mut probes: Vec<Probe> = Vec::new();
    let mut next_point = 0u64;
    let mut probe = |snr_db: f64, probes: &mut Vec<Probe>| -> Result<Probe> {
        let p = probe_point(rep, &pool, spec, next_point, snr_db)?;
        next_point += 1;
        probes.push(p);
        Ok(p)
    };

    let mut lo = linear_to_db(snr_for_efficiency(rate, 1.0, true)?);
    let mut hi = linear_to_db(snr_for_efficiency(rate, spec.beta_hi, true)?);
    let mut hi_probe = probe(hi, &mut probes)?;
    let mut steps = 0;
    while hi_probe.verdict == Verdict::TooNoisy {
        steps += 1;
        if steps > 20 {
            return Err(Error::InvalidParameter(format!(
                "frame error rate still above target at {hi:.2} dB"
            )));
        }
        lo = hi;
        hi += 1.0;
        hi_probe = probe(hi, &mut probes)?;
    }
    if hi_probe.verdict == Verdict::Accepted {
        return Ok(SearchResult {
            snr_db: hi,
            record: hi_probe.record,
            accepted: true,
            probes,
        });
    }

    let mut best: Option<Probe> = None;
    while hi - lo > spec.tol_db {
        let mid = 0.5 * (lo + hi);
        let p = probe(mid, &mut probes)?;
        match p.verdict {
            Verdict::Accepted => {
                return Ok(SearchResult {
                    snr_db: mid,
                    record: p.record,
                    accepted: true,
                    probes,
                });
            }
            Verdict::TooNoisy => lo = mid,
            Verdict::TooClean => hi = mid,
        }
        let closer =
            best.is_none_or(|b| (p.record.fer - spec.target_fer).abs() < (b.record.fer - spec.target_fer).abs());
        if closer {
            best = Some(p);
        }
    }
    let best = best.unwrap_or(hi_probe);
    Ok(SearchResult {
        snr_db: best.record.snr_db,
        record: best.record,
        accepted: false,
        probes,
    })
}

/// One point of an efficiency-versus-T curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyRow {
    pub stages: usize,
    pub point: EfficiencyPoint,
    pub snr_db: f64,
    /// Upper bound at `(n_bits, epsilon = target_fer, snr)`.
    pub bound: f64,
    pub accepted: bool,
    pub frames: usize,
}

pub const EFFICIENCY_CSV_HEADER: &str = "T,rate,snr_db,fer,frames,beta,bound,n_bits,accepted";

impl EfficiencyRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.6},{:.4},{:.6},{},{:.5},{:.5},{},{}",
            self.stages,
            self.point.rate,
            self.snr_db,
            self.point.fer,
            self.frames,
            self.point.beta,
            self.bound,
            self.point.n_bits,
            self.accepted
        )
    }
}

/// Measured efficiency and its finite-length bound for a code built from
/// `rep` and a single search.
pub fn efficiency_point(rep: &RepCode, spec: &SearchSpec) -> Result<EfficiencyRow> {
    let res = find_snr_at_fer(rep, spec)?;
    let snr = db_to_linear(res.snr_db);
    let n_bits = rep.len_bits();
    let point = EfficiencyPoint::new(rep.rate(), snr, res.record.fer, n_bits)?;
    if point.is_suspicious() {
        log::warn!("efficiency {:.4} at T = {} is not in (0, 1]", point.beta, rep.stages());
    }
    Ok(EfficiencyRow {
        stages: rep.stages(),
        point,
        snr_db: res.snr_db,
        bound: finite_length_beta(n_bits as f64, spec.target_fer, snr)?,
        accepted: res.accepted,
        frames: res.record.frames,
    })
}

/// [`efficiency_point`] for each repetition parameter in `stages`, with
/// repetition coefficients drawn from `coef_seed`.
pub fn efficiency_curve(
    mother: &MotherCode,
    stages: &[usize],
    coef_seed: u64,
    spec: &SearchSpec,
) -> Result<Vec<EfficiencyRow>> {
    stages
        .iter()
        .map(|&t| {
            let rep = RepCode::with_stages(mother.clone(), t, coef_seed)?;
            efficiency_point(&rep, spec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.0370).abs() < 1e-3);
        let (lo, hi) = wilson(10, 100, Z95);
        assert!(lo < 0.1 && hi > 0.1);
        assert_eq!(wilson(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn stop_rule_cuts_at_exact_frame() {
        let err = FrameOutcome {
            detected: true,
            undetected: false,
            iterations: 1,
        };
        let ok = FrameOutcome {
            detected: false,
            undetected: false,
            iterations: 1,
        };
        // errors everywhere: never fewer than MIN_FRAMES
        assert_eq!(stop_index(&vec![err; 150], 5, 1000), Some(MIN_FRAMES));
        let mut v = vec![ok; 120];
        v.extend([err; 10]);
        assert_eq!(stop_index(&v, 3, 1000), Some(123));
        assert_eq!(stop_index(&vec![ok; 150], 3, 140), Some(140));
        assert_eq!(stop_index(&vec![ok; 50], 3, 140), None);
    }

    #[test]
    fn frame_streams_differ() {
        let a: u64 = frame_rng(1, 0, 0).random();
        let b: u64 = frame_rng(1, 0, 1).random();
        let c: u64 = frame_rng(1, 1, 0).random();
        let d: u64 = frame_rng(1, 0, 0).random();
        assert!(a != b && a != c && b != c);
        assert_eq!(a, d);
    }
}
