//! Monte Carlo sweeps over SNR, metrics and CSV output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{snr_to_n0, Fading, SnrConvention};
use crate::codebook::{load_codebook, Codebook};
use crate::detector::{DetectorConfig, JointDetector};
use crate::error::{Error, Result};
use crate::harq::{run_group, GroupSetup, GroupStreams};
use crate::interleave::{interleaver_bank, Interleaver};
use crate::ldpc::{load_alist, LdpcCode};
use crate::schedule::{build_schedule, derive_config, Layout, Schedule};
use crate::seed::{trial_stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub k_eq: usize,
    /// Packets per group `T`.
    pub t: usize,
    pub k_in: usize,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub codebook: PathBuf,
    pub ldpc: PathBuf,
    pub scheme: SchemeConfig,
    /// Maximum number of retransmission rounds.
    pub n_re: usize,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub fading: Fading,
    #[serde(default)]
    pub snr_convention: SnrConvention,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub detector: DetectorConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reads a JSON config; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Field-level checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("snr_db must list at least one point".into()));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("snr_db contains {bad}")));
        }
        self.detector.validate()
    }
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_snr_range(range: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("SNR range {range:?} is not start:stop:step"));
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if step.is_nan() || step <= 0.0 || stop < start || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Loaded and checked ingredients of an experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub codebook: Codebook,
    pub code: LdpcCode,
    pub schedule: Schedule,
    pub interleavers: Vec<Vec<Interleaver>>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let codebook = load_codebook(config.resolve(&config.codebook))?;
        let code = load_alist(config.resolve(&config.ldpc))?;
        let s = config.scheme;
        let nck = derive_config(s.k_eq, s.t, s.k_in, code.len(), codebook.bits_per_symbol())?;
        let schedule = build_schedule(&nck, s.layout)?;
        let interleavers = interleaver_bank(code.len(), codebook.users(), s.t, config.seed);
        Ok(Experiment {
            config,
            codebook,
            code,
            schedule,
            interleavers,
        })
    }

    pub fn n0(&self, snr_db: f64) -> f64 {
        snr_to_n0(
            snr_db,
            self.config.snr_convention,
            self.code.rate(),
            self.codebook.bits_per_symbol(),
        )
    }
}

/// Aggregates of one SNR point. Counters are exact integers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointMetrics {
    pub snr_db: f64,
    pub trials: u64,
    pub t_total: u64,
    pub t_correct: u64,
    pub rounds: u64,
    pub iterations: u64,
    pub ttis: u64,
    /// Packet slots per group (`T`), for per-packet resource accounting.
    pub packets_per_group: u64,
}

impl PointMetrics {
    pub fn throughput(&self) -> f64 {
        compute_throughput(self.t_correct, self.t_total).unwrap_or(0.0)
    }

    pub fn per(&self) -> f64 {
        1.0 - self.throughput()
    }

    /// Detector iterations per detected round.
    pub fn mean_iters(&self) -> f64 {
        self.iterations as f64 / self.rounds.max(1) as f64
    }

    /// TTIs spent per packet slot: `Σ TTIs / (trials · T)`.
    pub fn mean_ttis_per_packet(&self) -> f64 {
        self.ttis as f64 / (self.trials * self.packets_per_group).max(1) as f64
    }

    /// Half-width of the normal-approximation 95% interval on PER.
    pub fn ci95_per(&self) -> f64 {
        let p = self.per();
        1.96 * (p * (1.0 - p) / self.t_total.max(1) as f64).sqrt()
    }

    /// Correctly decoded packets (all users) per TTI.
    pub fn throughput_per_tti(&self) -> f64 {
        self.t_correct as f64 / self.ttis.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub points: Vec<PointMetrics>,
}

/// One row of the per-iteration diagnostic trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub snr_index: usize,
    pub trial: u64,
    pub round: usize,
    pub iteration: usize,
    pub failed_syndromes: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub trace: Vec<TraceRow>,
}

/// θ = `T_correct / T_total`.
pub fn compute_throughput(correct: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Invalid("throughput of zero packets".into()));
    }
    if correct > total {
        return Err(Error::Invalid(format!("{correct} correct out of {total}")));
    }
    Ok(correct as f64 / total as f64)
}

#[derive(Debug, Default)]
struct TrialSum {
    correct: u64,
    total: u64,
    rounds: u64,
    iterations: u64,
    ttis: u64,
    trace: Vec<TraceRow>,
}

fn run_trial(exp: &Experiment, snr_index: usize, n0: f64, trial: u64, keep_trace: bool) -> Result<TrialSum> {
    let setup = GroupSetup {
        codebook: &exp.codebook,
        code: &exp.code,
        schedule: &exp.schedule,
        interleavers: &exp.interleavers,
        fading: exp.config.fading,
        n0,
        max_retx: exp.config.n_re,
    };
    let seed = exp.config.seed;
    let mut streams = GroupStreams {
        payload: trial_stream(seed, snr_index, trial, Purpose::Payload),
        fading: trial_stream(seed, snr_index, trial, Purpose::Fading),
        noise: trial_stream(seed, snr_index, trial, Purpose::Noise),
    };
    let mut det = JointDetector::new(exp.config.detector)?;
    let rep = run_group(&setup, &mut det, &mut streams)?;
    let mut trace = Vec::new();
    if keep_trace {
        for (round, t) in rep.traces.iter().enumerate() {
            for (i, &failed) in t.iter().enumerate() {
                trace.push(TraceRow {
                    snr_index,
                    trial,
                    round: round + 1,
                    iteration: i + 1,
                    failed_syndromes: failed,
                });
            }
        }
    }
    Ok(TrialSum {
        correct: rep.correct() as u64,
        total: rep.outcomes.len() as u64,
        rounds: rep.rounds as u64,
        iterations: rep.iterations as u64,
        ttis: rep.ttis as u64,
        trace,
    })
}

/// Runs every SNR point of a prepared experiment. `threads = 0` uses all
/// available cores. Results do not depend on the thread count.
pub fn run_prepared(exp: &Experiment, threads: usize, keep_trace: bool) -> Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut out = RunOutput::default();
    for (snr_index, &snr_db) in exp.config.snr_db.iter().enumerate() {
        let n0 = exp.n0(snr_db);
        let sums: Vec<TrialSum> = pool.install(|| {
            (0..exp.config.trials)
                .into_par_iter()
                .map(|trial| run_trial(exp, snr_index, n0, trial, keep_trace))
                .collect::<Result<_>>()
        })?;
        let mut p = PointMetrics {
            snr_db,
            trials: exp.config.trials,
            t_total: 0,
            t_correct: 0,
            rounds: 0,
            iterations: 0,
            ttis: 0,
            packets_per_group: exp.schedule.config.packets as u64,
        };
        for s in sums {
            p.t_total += s.total;
            p.t_correct += s.correct;
            p.rounds += s.rounds;
            p.iterations += s.iterations;
            p.ttis += s.ttis;
            out.trace.extend(s.trace);
        }
        log::info!(
            "snr {snr_db} dB: {}/{} correct, mean {:.2} iterations",
            p.t_correct,
            p.t_total,
            p.mean_iters()
        );
        out.metrics.points.push(p);
    }
    Ok(out)
}

pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Metrics> {
    let exp = Experiment::prepare(cfg.clone())?;
    Ok(run_prepared(&exp, threads, false)?.metrics)
}

pub const CSV_COLUMNS: &str = "snr_db,trials,t_total,t_correct,throughput,per,mean_iters,mean_ttis_per_packet,ci95_per,throughput_per_tti";

/// CSV text with a `#` metadata header.
pub fn render_csv(metrics: &Metrics, cfg: &ExperimentConfig) -> Result<String> {
    if metrics.points.is_empty() {
        return Err(Error::Invalid("no metrics to write".into()));
    }
    let mut s = String::new();
    let echo = serde_json::to_string(cfg).map_err(|e| Error::Invalid(e.to_string()))?;
    let _ = writeln!(s, "# nck-scma {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# config: {echo}");
    let _ = writeln!(s, "# seed: {}", cfg.seed);
    let conv = match cfg.snr_convention {
        SnrConvention::EsN0 => "Es/N0 per resource element, unit average codeword energy".to_string(),
        SnrConvention::EbN0 => "Eb/N0, N0 scaled by 1/(code rate * bits per symbol)".to_string(),
    };
    let _ = writeln!(s, "# snr: {conv}");
    let _ = writeln!(s, "{CSV_COLUMNS}");
    for p in &metrics.points {
        let theta = p.throughput();
        let per = p.per();
        assert!((theta + per - 1.0).abs() < 1e-12);
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{:.6},{:.4},{:.4},{:.6},{:.6}",
            p.snr_db,
            p.trials,
            p.t_total,
            p.t_correct,
            theta,
            per,
            p.mean_iters(),
            p.mean_ttis_per_packet(),
            p.ci95_per(),
            p.throughput_per_tti()
        );
    }
    Ok(s)
}

pub fn emit_csv(metrics: &Metrics, cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let text = render_csv(metrics, cfg)?;
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_trace(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("snr_index,trial,round,iteration,failed_syndromes\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.snr_index, r.trial, r.round, r.iteration, r.failed_syndromes);
    }
    let path = path.as_ref();
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn point(correct: u64, total: u64) -> PointMetrics {
        PointMetrics {
            snr_db: 3.0,
            trials: total / 4,
            t_total: total,
            t_correct: correct,
            rounds: total / 4,
            iterations: total,
            ttis: total,
            packets_per_group: 2,
        }
    }

    #[test]
    fn throughput_arithmetic() {
        assert_eq!(compute_throughput(8, 10).unwrap(), 0.8);
        assert_eq!(compute_throughput(0, 7).unwrap(), 0.0);
        assert_eq!(compute_throughput(7, 7).unwrap(), 1.0);
        assert!(compute_throughput(0, 0).is_err());
        assert!(compute_throughput(3, 2).is_err());
    }

    #[test]
    fn snr_ranges() {
        assert_eq!(parse_snr_range("0:10:2").unwrap(), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(parse_snr_range("1:1:1").unwrap(), vec![1.0]);
        assert_eq!(parse_snr_range("0:1:0.25").unwrap().len(), 5);
        for bad in ["0:1", "a:b:c", "0:5:0", "5:0:1", "0:1:-1"] {
            assert!(parse_snr_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn ci_shrinks_with_sqrt_trials() {
        let a = point(300, 400);
        let b = point(1200, 1600);
        assert_abs_diff_eq!(a.ci95_per() / b.ci95_per(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn per_and_throughput_are_complementary() {
        for (c, t) in [(0, 8), (3, 8), (8, 8)] {
            let p = point(c, t);
            assert_abs_diff_eq!(p.throughput() + p.per(), 1.0, epsilon = 1e-15);
        }
    }
}
