//! `nbldpc`: construct, extend, simulate and analyse multiplicatively
//! repeated non-binary LDPC codes.
//!
//! Every command reads `key = value` settings from `--config` and `--set`,
//! writes its result to `--out` (stdout otherwise) and a manifest of the
//! resolved settings to `<out>.manifest`, which `--config` accepts as is.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use nbldpc::analysis::{conditional_entropy, dispersion, finite_length_beta};
use nbldpc::channel::db_to_linear;
use nbldpc::decoder::{Decoder, DecoderConfig};
use nbldpc::sim::{
    self, channel_at, draw_frame, frame_rng, SearchSpec, SimSpec, EFFICIENCY_CSV_HEADER, SIM_CSV_HEADER,
};
use nbldpc::skr::{self, FiniteSizeParams, LinkParams, VaGrid, SKR_CSV_HEADER};
use nbldpc::{Field, MotherCode, RepCode};

use config::{key, Config, Key};
use output::CsvSink;

#[derive(Parser, Debug)]
#[command(name = "nbldpc", version, about = "Multiplicatively repeated non-binary LDPC codes")]
struct Cli {
    /// Settings file of `key = value` lines (a manifest works too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; same as `--set seed=<u64>`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Does not change results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override one setting, `key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// List the settings of the command and exit.
    #[arg(long, global = true)]
    keys: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build a mother code and its repetition stages.
    Construct,
    /// Add repetition symbols to an existing code.
    Extend,
    /// Frame error rate over a grid of SNRs.
    Simulate,
    /// SNR at which the frame error rate reaches a target.
    FindSnr,
    /// Efficiency and finite-length bound versus repetition parameter.
    Efficiency,
    /// Finite-length upper bound on efficiency.
    Bound,
    /// Secret-key rate versus distance.
    Skr,
    /// Decode a single frame and trace each iteration.
    Decode,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Construct => "construct",
            Command::Extend => "extend",
            Command::Simulate => "simulate",
            Command::FindSnr => "find-snr",
            Command::Efficiency => "efficiency",
            Command::Bound => "bound",
            Command::Skr => "skr",
            Command::Decode => "decode",
        }
    }

    fn keys(self) -> &'static [Key] {
        match self {
            Command::Construct => CONSTRUCT_KEYS,
            Command::Extend => EXTEND_KEYS,
            Command::Simulate => SIMULATE_KEYS,
            Command::FindSnr => FIND_SNR_KEYS,
            Command::Efficiency => EFFICIENCY_KEYS,
            Command::Bound => BOUND_KEYS,
            Command::Skr => SKR_KEYS,
            Command::Decode => DECODE_KEYS,
        }
    }
}

const CONSTRUCT_KEYS: &[Key] = &[
    key("p", "10", "bits per symbol, field GF(2^p)"),
    key(
        "modulus",
        "0",
        "field modulus as an integer bit mask, 0 for the default",
    ),
    key("n", "1000", "mother code length in symbols"),
    key("k", "3", "check degree; mother rate 1 - 2/k"),
    key("girth", "0", "target Tanner girth, 0 for best effort"),
    key("seed", "1", "graph and coefficient seed"),
    key("stages", "1", "repetition parameter T (1 = mother code only)"),
    key("extra", "0", "repetition symbols beyond the full stages"),
    key("coef_seed", "2", "seed of the repetition coefficients"),
];

const EXTEND_KEYS: &[Key] = &[
    key("code", "", "input code file"),
    key("stages", "1", "full repetition stages wanted"),
    key("extra", "0", "repetition symbols beyond the full stages"),
    key("coef_seed", "2", "seed of the repetition coefficients"),
];

const SIMULATE_KEYS: &[Key] = &[
    key("code", "", "code file"),
    key("snr_db", "", "comma-separated SNR grid in dB (inf = noiseless)"),
    key("max_frames", "10000", "frame budget per point"),
    key("target_errors", "50", "stop a point after this many frame errors"),
    key("max_iters", "200", "decoder iteration limit"),
    key("batch", "32", "frames between stopping checks"),
    key("seed", "1", "master seed of the frame streams"),
];

const SEARCH_KEYS: [Key; 8] = [
    key("target_fer", "0.1", "frame error rate to locate"),
    key("accept_lo", "0.05", "accept when the 95% interval is above this"),
    key("accept_hi", "0.2", "... and below this"),
    key("max_iters", "200", "decoder iteration limit"),
    key("tol_db", "0.005", "smallest bisection bracket in dB"),
    key("max_frames", "2000", "frame budget per probed SNR"),
    key("beta_hi", "0.7", "efficiency of the first high-SNR probe"),
    key("seed", "1", "master seed of the frame streams"),
];

const FIND_SNR_KEYS: &[Key] = &[
    key("code", "", "code file"),
    SEARCH_KEYS[0],
    SEARCH_KEYS[1],
    SEARCH_KEYS[2],
    SEARCH_KEYS[3],
    SEARCH_KEYS[4],
    SEARCH_KEYS[5],
    SEARCH_KEYS[6],
    SEARCH_KEYS[7],
];

const EFFICIENCY_KEYS: &[Key] = &[
    key("code", "", "code file; only its mother code is used"),
    key("stages", "20,30,45,60,90", "repetition parameters T"),
    key("coef_seed", "2", "seed of the repetition coefficients"),
    SEARCH_KEYS[0],
    SEARCH_KEYS[1],
    SEARCH_KEYS[2],
    SEARCH_KEYS[3],
    SEARCH_KEYS[4],
    SEARCH_KEYS[5],
    SEARCH_KEYS[6],
    SEARCH_KEYS[7],
];

const BOUND_KEYS: &[Key] = &[
    key("snr_db", "", "comma-separated SNRs in dB"),
    key("n_bits", "", "comma-separated block lengths in bits"),
    key("epsilon", "0.1", "frame error rate"),
];

const SKR_KEYS: &[Key] = &[
    key("alpha", "0.2", "fiber loss in dB/km"),
    key("excess_noise", "0.005", "excess noise, shot-noise units"),
    key("eta", "0.606", "detector efficiency"),
    key("v_el", "0.041", "electronic noise, shot-noise units"),
    key("n_raw", "1e12", "raw key bits n"),
    key("n_signals", "2e12", "exchanged signals N"),
    key("eps_bar", "1e-10", "security parameter"),
    key("settings", "0.9:0.1,0.935:0.8", "comma-separated beta:fer pairs"),
    key("l_start", "0", "first distance in km"),
    key("l_stop", "200", "last distance in km"),
    key("l_step", "5", "distance step in km"),
    key("va_min", "1", "smallest modulation variance"),
    key("va_max", "100", "largest modulation variance"),
    key("va_coarse", "1", "coarse grid step"),
    key("va_fine", "0.01", "refinement step"),
];

const DECODE_KEYS: &[Key] = &[
    key("code", "", "code file"),
    key("snr_db", "", "SNR in dB (inf = noiseless)"),
    key("frame", "0", "frame index within the seed's stream"),
    key("max_iters", "200", "decoder iteration limit"),
    key("seed", "1", "master seed of the frame streams"),
];

fn load_code(cfg: &Config) -> Result<RepCode> {
    let path = Path::new(cfg.raw("code"));
    RepCode::load(path).with_context(|| format!("loading code {}", path.display()))
}

fn search_spec(cfg: &Config) -> Result<SearchSpec> {
    let spec = SearchSpec {
        target_fer: cfg.get("target_fer")?,
        accept: (cfg.get("accept_lo")?, cfg.get("accept_hi")?),
        max_iters: cfg.get("max_iters")?,
        seed: cfg.get("seed")?,
        tol_db: cfg.get("tol_db")?,
        max_frames: cfg.get("max_frames")?,
        beta_hi: cfg.get("beta_hi")?,
    };
    spec.validate()?;
    Ok(spec)
}

fn degree_summary(hist: &[usize]) -> String {
    hist.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(d, c)| format!("{d}:{c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn code_summary(rep: &RepCode) -> String {
    let m = rep.mother();
    let girth = m.girth().map_or("none".to_string(), |g| g.to_string());
    format!(
        "field GF(2^{}) modulus {:#x}\nsymbols {} checks {} stages {} extra {}\nrate {:.6} (1/{:.3})\ngirth {}\ncheck degrees {}\nsymbol degrees {}\n",
        rep.field().degree(),
        rep.field().modulus(),
        m.n_symbols(),
        m.n_checks(),
        rep.stages(),
        rep.extra(),
        rep.rate(),
        1.0 / rep.rate(),
        girth,
        degree_summary(&m.check_degree_histogram()),
        degree_summary(&m.symbol_degree_histogram()),
    )
}

fn repetitions(n: usize, stages: usize, extra: usize) -> Result<usize> {
    if stages == 0 {
        bail!("stages must be >= 1");
    }
    if extra > n || (extra > 0 && extra == n) {
        bail!("extra must be below the mother length {n}");
    }
    Ok((stages - 1) * n + extra)
}

fn write_code(out: Option<&Path>, rep: &RepCode) -> Result<()> {
    let summary = code_summary(rep);
    match out {
        Some(path) => {
            output::write_atomic(path, &rep.to_text())?;
            print!("{summary}");
        }
        None => {
            print!("{}", rep.to_text());
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn cmd_construct(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let p: u32 = cfg.get("p")?;
    let modulus: u32 = cfg.get("modulus")?;
    let field = if modulus == 0 {
        Field::new(p)?
    } else {
        Field::with_modulus(p, modulus)?
    };
    let n: usize = cfg.get("n")?;
    let mother = MotherCode::build(field, n, cfg.get("k")?, cfg.get("girth")?, cfg.get("seed")?)?;
    let total = repetitions(n, cfg.get("stages")?, cfg.get("extra")?)?;
    let rep = RepCode::new(mother).extend_to(total, cfg.get("coef_seed")?)?;
    write_code(out, &rep)
}

fn cmd_extend(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let rep = load_code(cfg)?;
    let total = repetitions(rep.mother().n_symbols(), cfg.get("stages")?, cfg.get("extra")?)?;
    let rep = rep.extend_to(total, cfg.get("coef_seed")?)?;
    write_code(out, &rep)
}

fn cmd_simulate(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let rep = load_code(cfg)?;
    let spec = SimSpec {
        snr_db: cfg.list("snr_db")?,
        max_frames: cfg.get("max_frames")?,
        target_errors: cfg.get("target_errors")?,
        max_iters: cfg.get("max_iters")?,
        seed: cfg.get("seed")?,
        batch: cfg.get("batch")?,
    };
    spec.validate()?;
    let mut sink = CsvSink::create(out, cfg, SIM_CSV_HEADER)?;
    sim::run_fer_with(&rep, &spec, |rec| {
        sink.row(&rec.to_csv())
            .map_err(|e| nbldpc::Error::InvalidParameter(format!("{e:#}")))
    })?;
    sink.finish()
}

fn cmd_find_snr(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let rep = load_code(cfg)?;
    let spec = search_spec(cfg)?;
    let res = sim::find_snr_at_fer(&rep, &spec)?;
    let mut sink = CsvSink::create(out, cfg, &format!("{SIM_CSV_HEADER},verdict"))?;
    for p in &res.probes {
        sink.row(&format!("{},{:?}", p.record.to_csv(), p.verdict))?;
    }
    sink.finish()?;
    let beta = rep.rate() / nbldpc::channel::biawgn_capacity(db_to_linear(res.snr_db));
    eprintln!(
        "snr {:.4} dB, fer {:.4} over {} frames, rate {:.6}, beta {:.4}, accepted {}",
        res.snr_db,
        res.record.fer,
        res.record.frames,
        rep.rate(),
        beta,
        res.accepted
    );
    Ok(())
}

fn cmd_efficiency(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let rep = load_code(cfg)?;
    let spec = search_spec(cfg)?;
    let stages: Vec<usize> = cfg.list("stages")?;
    let coef_seed: u64 = cfg.get("coef_seed")?;
    let mut sink = CsvSink::create(out, cfg, EFFICIENCY_CSV_HEADER)?;
    for t in stages {
        let code = RepCode::with_stages(rep.mother().clone(), t, coef_seed)?;
        let row = sim::efficiency_point(&code, &spec)?;
        info!("T = {t}: beta {:.4}, bound {:.4}", row.point.beta, row.bound);
        sink.row(&row.to_csv())?;
    }
    sink.finish()
}

fn cmd_bound(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let snrs: Vec<f64> = cfg.list("snr_db")?;
    let lengths: Vec<f64> = cfg.list("n_bits")?;
    let eps: f64 = cfg.get("epsilon")?;
    let mut sink = CsvSink::create(out, cfg, "n_bits,epsilon,snr_db,h,v,bound")?;
    for &db in &snrs {
        let s = db_to_linear(db);
        let h = conditional_entropy(s)?;
        let v = dispersion(s)?;
        for &n in &lengths {
            let b = finite_length_beta(n, eps, s)?;
            sink.row(&format!("{n},{eps},{db},{h:.9e},{v:.9e},{b:.9}"))?;
        }
    }
    sink.finish()
}

fn parse_settings(raw: &str, base: FiniteSizeParams) -> Result<Vec<FiniteSizeParams>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (b, f) = s
                .split_once(':')
                .ok_or_else(|| anyhow!("settings entry {s:?} is not beta:fer"))?;
            let fs = FiniteSizeParams {
                beta: b.trim().parse().with_context(|| format!("beta in {s:?}"))?,
                fer: f.trim().parse().with_context(|| format!("fer in {s:?}"))?,
                ..base
            };
            fs.validate()?;
            Ok(fs)
        })
        .collect()
}

fn cmd_skr(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let link = LinkParams {
        alpha_db_per_km: cfg.get("alpha")?,
        length_km: 0.0,
        excess_noise: cfg.get("excess_noise")?,
        eta: cfg.get("eta")?,
        v_el: cfg.get("v_el")?,
        va: skr::VA_MIN,
    };
    link.validate()?;
    let base = FiniteSizeParams {
        n_raw: cfg.get("n_raw")?,
        n_signals: cfg.get("n_signals")?,
        eps_bar: cfg.get("eps_bar")?,
        fer: 0.0,
        beta: 1.0,
    };
    let settings = parse_settings(cfg.raw("settings"), base)?;
    let grid = VaGrid {
        min: cfg.get("va_min")?,
        max: cfg.get("va_max")?,
        coarse: cfg.get("va_coarse")?,
        fine: cfg.get("va_fine")?,
    };
    if !(skr::VA_MIN <= grid.min && grid.min < grid.max && grid.max <= skr::VA_MAX) {
        bail!("need {} <= va_min < va_max <= {}", skr::VA_MIN, skr::VA_MAX);
    }
    if !(grid.coarse > 0.0 && grid.fine > 0.0) {
        bail!("va_coarse and va_fine must be positive");
    }
    let (start, stop, step): (f64, f64, f64) = (cfg.get("l_start")?, cfg.get("l_stop")?, cfg.get("l_step")?);
    if !(step > 0.0 && start >= 0.0 && stop >= start) {
        bail!("need 0 <= l_start <= l_stop and l_step > 0");
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    let lengths: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();

    let rows = skr::sweep_distance(&link, &settings, &lengths, &grid);
    let mut sink = CsvSink::create(out, cfg, SKR_CSV_HEADER)?;
    for r in &rows {
        sink.row(&r.to_csv())?;
    }
    sink.finish()?;
    for fs in &settings {
        match skr::max_distance(&link, fs, &grid, 1.0, 1000.0, 0.01) {
            Some(d) => eprintln!("beta {} fer {}: zero key at {d:.2} km", fs.beta, fs.fer),
            None => eprintln!(
                "beta {} fer {}: no key-distance crossing in [1, 1000] km",
                fs.beta, fs.fer
            ),
        }
    }
    Ok(())
}

fn cmd_decode(cfg: &Config, out: Option<&Path>) -> Result<()> {
    let rep = load_code(cfg)?;
    let snr_db: f64 = cfg.get("snr_db")?;
    let params = channel_at(snr_db)?;
    let mut rng = frame_rng(cfg.get("seed")?, 0, cfg.get("frame")?);
    let frame = draw_frame(&rep, &params, &mut rng)?;
    let config = DecoderConfig {
        max_iters: cfg.get("max_iters")?,
        validate_each_iter: true,
        trace: true,
    };
    let mut decoder = Decoder::new(rep.mother());
    let res = decoder.decode_repcode(&rep, &frame.priors, &frame.z, &config)?;
    let mut sink = CsvSink::create(out, cfg, "iteration,unsatisfied,changed")?;
    for t in &res.trace {
        sink.row(&format!("{},{},{}", t.iteration, t.unsatisfied, t.changed))?;
    }
    sink.finish()?;
    let wrong = res.estimate.iter().zip(&frame.x).filter(|(a, b)| a != b).count();
    eprintln!(
        "snr {} dB ({:.6} linear): success {}, iterations {}, wrong symbols {wrong} of {}",
        snr_db,
        params.snr(),
        res.success,
        res.iterations,
        frame.x.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let command = cli.command;
    let keys = command.keys();
    if cli.keys {
        for k in keys {
            println!("{} = {}    # {}", k.name, k.default, k.doc);
        }
        return Ok(());
    }
    let mut overrides = cli
        .set
        .iter()
        .map(|s| config::parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = cli.seed {
        if !keys.iter().any(|k| k.name == "seed") {
            bail!("{} takes no seed", command.name());
        }
        overrides.push(("seed".into(), seed.to_string()));
    }
    let cfg = Config::resolve(command.name(), keys, cli.config.as_deref(), &overrides)?;

    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        bail!("--workers must be >= 1");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let out = cli.out.as_deref();
    output::emit_manifest(out, &cfg, workers)?;
    info!("{} with {} workers, config {}", command.name(), workers, cfg.hash());

    pool.install(|| match command {
        Command::Construct => cmd_construct(&cfg, out),
        Command::Extend => cmd_extend(&cfg, out),
        Command::Simulate => cmd_simulate(&cfg, out),
        Command::FindSnr => cmd_find_snr(&cfg, out),
        Command::Efficiency => cmd_efficiency(&cfg, out),
        Command::Bound => cmd_bound(&cfg, out),
        Command::Skr => cmd_skr(&cfg, out),
        Command::Decode => cmd_decode(&cfg, out),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NBLDPC_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
