//! Monte Carlo experiment harness: accuracy sweeps, fault-injection sweeps
//! and the carry-canceler direction experiment.
//!
//! Every random quantity of trial `t` comes from sub-streams of
//! `RandomSource::new(seed).derive(t)`, so results do not depend on the
//! number of worker threads or on which other grid points are evaluated.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{encode_sm_lanes, run_tree_on_streams};
use crate::engine::{
    encode_lanes, run_engine_on_streams, EngineConfig, FaultPlan, InputShiftRegisters,
    ShiftDirection, MAX_LANES,
};
use crate::error::{domain, Error, Result};
use crate::rng::RandomSource;

/// Accuracy thresholds reported by the accuracy sweep.
pub const RMSE_THRESHOLDS: [f64; 3] = [0.1, 0.05, 0.02];

const INPUT_STREAM: u64 = 0;
const ENCODER_STREAM: u64 = 1;
const FAULT_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    /// sqrt(mean((ẑ − z)²))
    #[default]
    #[serde(rename = "standard")]
    Standard,
    /// sqrt(mean(|ẑ − z|))
    #[serde(rename = "paper")]
    PaperLiteral,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Standard => "standard",
            Metric::PaperLiteral => "paper",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" | "standard_rmse" => Ok(Metric::Standard),
            "paper" | "paper_literal" => Ok(Metric::PaperLiteral),
            other => Err(domain(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Sequential engine with carry shift registers.
    #[default]
    Novel,
    /// Counter-based adder tree.
    Baseline,
}

impl Design {
    pub fn as_str(self) -> &'static str {
        match self {
            Design::Novel => "novel",
            Design::Baseline => "baseline",
        }
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "novel" => Ok(Design::Novel),
            "baseline" => Ok(Design::Baseline),
            other => Err(domain(format!("unknown design `{other}`"))),
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn rmse(estimates: &[f64], truths: &[f64], metric: Metric) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truths.len(),
        });
    }
    if estimates.is_empty() {
        return Err(domain("metric needs at least one estimate"));
    }
    let n = estimates.len() as f64;
    let errors = estimates.iter().zip(truths).map(|(e, t)| e - t);
    let mean = match metric {
        Metric::Standard => errors.map(|d| d * d).sum::<f64>() / n,
        Metric::PaperLiteral => errors.map(f64::abs).sum::<f64>() / n,
    };
    Ok(mean.sqrt())
}

/// Experiment parameters, also the schema of the JSON config file. Scalar
/// fields describe a single operating point; the `*_grid` fields span the
/// sweeps and fall back to the scalar when empty. Missing fields take the
/// `Default` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub design: Design,
    pub lanes: usize,
    pub carry_len: usize,
    pub counter_bits: u32,
    pub len: usize,
    pub trials: usize,
    pub p_flip: f64,
    pub seed: u64,
    /// Upper bound on |⟨x, y⟩| for drawn inputs.
    pub input_scale: f64,
    pub metric: Metric,
    pub cc: bool,
    pub direction: ShiftDirection,
    pub designs: Vec<Design>,
    pub lanes_grid: Vec<usize>,
    pub carry_len_grid: Vec<usize>,
    pub counter_bits_grid: Vec<u32>,
    pub p_flip_grid: Vec<f64>,
    pub canceler_lanes: Vec<usize>,
    pub canceler_trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            design: Design::Novel,
            lanes: 16,
            carry_len: 6,
            counter_bits: 4,
            len: 10_000,
            trials: 200,
            p_flip: 0.0,
            seed: 1,
            input_scale: 0.9,
            metric: Metric::Standard,
            cc: true,
            direction: ShiftDirection::Opposite,
            designs: vec![Design::Novel, Design::Baseline],
            lanes_grid: Vec::new(),
            carry_len_grid: (1..=8).collect(),
            counter_bits_grid: (2..=8).collect(),
            p_flip_grid: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            canceler_lanes: (1..=64).collect(),
            canceler_trials: 100_000,
        }
    }
}

fn check_probability(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("{name} = {p} outside [0, 1]")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(domain("trials must be at least 1"));
        }
        if self.len == 0 {
            return Err(domain("stream length must be at least 1"));
        }
        check_probability(self.p_flip, "p_flip")?;
        for &p in &self.p_flip_grid {
            check_probability(p, "p_flip_grid entry")?;
        }
        if !(self.input_scale > 0.0 && self.input_scale <= 1.0) {
            return Err(domain(format!("input_scale {} outside (0, 1]", self.input_scale)));
        }
        for &k in self.lanes_grid.iter().chain([&self.lanes]) {
            if !(1..=MAX_LANES).contains(&k) {
                return Err(domain(format!("lane count {k} outside 1..={MAX_LANES}")));
            }
        }
        if self.carry_len == 0 || self.carry_len_grid.contains(&0) {
            return Err(domain("carry register length must be at least 1"));
        }
        for &b in self.counter_bits_grid.iter().chain([&self.counter_bits]) {
            if !(1..=31).contains(&b) {
                return Err(domain(format!("counter width {b} outside 1..=31")));
            }
        }
        if self.canceler_trials == 0 {
            return Err(domain("canceler_trials must be at least 1"));
        }
        if self.canceler_lanes.iter().any(|&k| !(1..=MAX_LANES).contains(&k)) {
            return Err(domain(format!("canceler lane counts must lie in 1..={MAX_LANES}")));
        }
        Ok(())
    }

    fn lanes_points(&self) -> Vec<usize> {
        if self.lanes_grid.is_empty() {
            vec![self.lanes]
        } else {
            self.lanes_grid.clone()
        }
    }

    fn size_points(&self, design: Design) -> Vec<usize> {
        match design {
            Design::Novel if !self.carry_len_grid.is_empty() => self.carry_len_grid.clone(),
            Design::Novel => vec![self.carry_len],
            Design::Baseline if !self.counter_bits_grid.is_empty() => {
                self.counter_bits_grid.iter().map(|&b| b as usize).collect()
            }
            Design::Baseline => vec![self.counter_bits as usize],
        }
    }

    fn size_for(&self, design: Design) -> usize {
        match design {
            Design::Novel => self.carry_len,
            Design::Baseline => self.counter_bits as usize,
        }
    }
}

/// Draws x and y with entries uniform in [−1, 1], then rescales y so that
/// |⟨x, y⟩| ≤ `scale`. Returns the exact inner product as well.
pub fn draw_inputs(lanes: usize, scale: f64, rng: &mut RandomSource) -> (Vec<f64>, Vec<f64>, f64) {
    let x: Vec<f64> = (0..lanes).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let mut y: Vec<f64> = (0..lanes).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let z: f64 = dot(&x, &y);
    if z.abs() > scale {
        let factor = scale / z.abs();
        y.iter_mut().for_each(|v| *v *= factor);
    }
    let z = dot(&x, &y);
    (x, y, z)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// One operating point of either design.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSpec {
    pub design: Design,
    pub lanes: usize,
    /// Carry register length (novel) or counter width (baseline).
    pub size: usize,
    pub len: usize,
    pub cc: bool,
    pub direction: ShiftDirection,
    pub p_flip: f64,
    pub input_scale: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrialOutcome {
    pub estimate: f64,
    pub truth: f64,
    /// Carry overflows (novel) or counter saturations (baseline).
    pub overflow_events: u64,
    pub cc_cancellations: u64,
    pub faults_injected: u64,
}

pub fn run_trial(spec: &TrialSpec, trial: u64) -> Result<TrialOutcome> {
    let base = RandomSource::new(spec.seed).derive(trial);
    let (x, y, truth) = draw_inputs(spec.lanes, spec.input_scale, &mut base.derive(INPUT_STREAM));
    let encoders = base.derive(ENCODER_STREAM);
    let mut fault_rng = base.derive(FAULT_STREAM);
    let faults = (spec.p_flip > 0.0).then_some(spec.p_flip);
    match spec.design {
        Design::Novel => {
            let cfg = EngineConfig::new(spec.lanes, spec.size, spec.len)
                .with_cc(spec.cc)
                .with_direction(spec.direction);
            let (xs, ys) = encode_lanes(&x, &y, spec.len, &encoders)?;
            let plan = faults.map(|p_flip| FaultPlan {
                p_flip,
                rng: &mut fault_rng,
            });
            let (z, d) = run_engine_on_streams(&xs, &ys, cfg, plan, None)?;
            Ok(TrialOutcome {
                estimate: z.decode()?,
                truth,
                overflow_events: d.overflow_events,
                cc_cancellations: d.cc_cancellations,
                faults_injected: d.faults_injected,
            })
        }
        Design::Baseline => {
            let bits = u32::try_from(spec.size).map_err(|_| domain("counter width too large"))?;
            let (xs, ys) = encode_sm_lanes(&x, &y, spec.len, &encoders)?;
            let plan = faults.map(|p| (p, &mut fault_rng));
            let (z, d) = run_tree_on_streams(&xs, &ys, bits, spec.len, plan)?;
            Ok(TrialOutcome {
                estimate: z.decode()?,
                truth,
                overflow_events: d.saturation_events,
                cc_cancellations: 0,
                faults_injected: d.faults_injected,
            })
        }
    }
}

/// Runs `trials` independent trials in parallel; results are in trial order.
pub fn run_trials(spec: &TrialSpec, trials: usize) -> Result<Vec<TrialOutcome>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(spec, t))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub design: Design,
    pub lanes: usize,
    pub size: usize,
    pub len: usize,
    pub p_flip: f64,
    pub trials: usize,
    pub metric: Metric,
    pub rmse: f64,
    /// Overflow or saturation events per main cycle, averaged over trials.
    pub overflow_rate: f64,
    pub cc_cancellations_mean: f64,
    pub seed: u64,
}

pub const SWEEP_CSV_HEADER: &str =
    "design,K,M_or_B,L,p_flip,trials,metric,rmse,overflow_rate,cc_cancellations_mean,seed";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.design,
            self.lanes,
            self.size,
            self.len,
            self.p_flip,
            self.trials,
            self.metric,
            self.rmse,
            self.overflow_rate,
            self.cc_cancellations_mean,
            self.seed
        )
    }
}

/// Smallest register size reaching an RMSE threshold at one (design, K).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub design: Design,
    pub lanes: usize,
    pub threshold: f64,
    pub min_size: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub thresholds: Vec<ThresholdRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(out, "{}", row.csv_line())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

pub fn evaluate_point(spec: &TrialSpec, trials: usize, metric: Metric) -> Result<SweepRow> {
    let outcomes = run_trials(spec, trials)?;
    let estimates: Vec<f64> = outcomes.iter().map(|o| o.estimate).collect();
    let truths: Vec<f64> = outcomes.iter().map(|o| o.truth).collect();
    let n = outcomes.len() as f64;
    Ok(SweepRow {
        design: spec.design,
        lanes: spec.lanes,
        size: spec.size,
        len: spec.len,
        p_flip: spec.p_flip,
        trials,
        metric,
        rmse: rmse(&estimates, &truths, metric)?,
        overflow_rate: outcomes.iter().map(|o| o.overflow_events as f64).sum::<f64>()
            / (n * spec.len as f64),
        cc_cancellations_mean: outcomes.iter().map(|o| o.cc_cancellations as f64).sum::<f64>() / n,
        seed: spec.seed,
    })
}

fn spec_for(cfg: &ExperimentConfig, design: Design, lanes: usize, size: usize, p_flip: f64) -> TrialSpec {
    TrialSpec {
        design,
        lanes,
        size,
        len: cfg.len,
        cc: cfg.cc,
        direction: cfg.direction,
        p_flip,
        input_scale: cfg.input_scale,
        seed: cfg.seed,
    }
}

/// RMSE over every (design, K, register size) grid point, plus the smallest
/// size reaching each of [`RMSE_THRESHOLDS`].
pub fn run_accuracy_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut result = SweepResult::default();
    for &design in &cfg.designs {
        for lanes in cfg.lanes_points() {
            let mut sizes = cfg.size_points(design);
            sizes.sort_unstable();
            sizes.dedup();
            let first = result.rows.len();
            for size in sizes {
                let spec = spec_for(cfg, design, lanes, size, cfg.p_flip);
                result.rows.push(evaluate_point(&spec, cfg.trials, cfg.metric)?);
            }
            let rows = &result.rows[first..];
            for &threshold in &RMSE_THRESHOLDS {
                result.thresholds.push(ThresholdRow {
                    design,
                    lanes,
                    threshold,
                    min_size: rows.iter().find(|r| r.rmse <= threshold).map(|r| r.size),
                });
            }
        }
    }
    Ok(result)
}

/// RMSE of every design at its configured register size over the flip grid.
pub fn run_fault_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut result = SweepResult::default();
    let grid = if cfg.p_flip_grid.is_empty() {
        vec![cfg.p_flip]
    } else {
        cfg.p_flip_grid.clone()
    };
    for &design in &cfg.designs {
        for &p_flip in &grid {
            let spec = spec_for(cfg, design, cfg.lanes, cfg.size_for(design), p_flip);
            result.rows.push(evaluate_point(&spec, cfg.trials, cfg.metric)?);
        }
    }
    Ok(result)
}

/// Probability that a one reaches the accumulation stage, per line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CancelerRow {
    pub lanes: usize,
    pub direction: ShiftDirection,
    pub cc: bool,
    pub trials: usize,
    pub p_pos: f64,
    pub p_neg: f64,
    pub stderr_pos: f64,
    pub stderr_neg: f64,
    pub seed: u64,
}

pub const CANCELER_CSV_HEADER: &str = "K,direction,cc,trials,p_pos,p_neg,stderr_pos,stderr_neg,seed";

impl CancelerRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.lanes,
            self.direction.as_str(),
            if self.cc { "on" } else { "off" },
            self.trials,
            self.p_pos,
            self.p_neg,
            self.stderr_pos,
            self.stderr_neg,
            self.seed
        )
    }
}

pub fn write_canceler_csv<W: Write>(rows: &[CancelerRow], mut out: W) -> Result<()> {
    writeln!(out, "{CANCELER_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

/// Per-trial fractions of the K reads where the front pair nets to +1 and to −1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CancelerSample {
    pub pos: f64,
    pub neg: f64,
}

/// Loads one pair of hold masks and drains the input registers, counting
/// the reads where a one reaches the accumulation stage on each line.
pub fn canceler_sample(
    lanes: usize,
    direction: ShiftDirection,
    cc: bool,
    hold_p: u128,
    hold_n: u128,
) -> CancelerSample {
    let mut regs = InputShiftRegisters::new(lanes, direction, cc);
    regs.load_masks(hold_p, hold_n);
    let (mut pos, mut neg) = (0u32, 0u32);
    for _ in 0..lanes {
        match regs.fronts() {
            (true, false) => pos += 1,
            (false, true) => neg += 1,
            _ => {}
        }
        regs.shift();
    }
    CancelerSample {
        pos: pos as f64 / lanes as f64,
        neg: neg as f64 / lanes as f64,
    }
}

const CANCELER_BLOCK: usize = 4096;

fn random_mask(rng: &mut RandomSource) -> u128 {
    ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128
}

/// Paired samples for both directions from the same Bernoulli(0.5) loads.
pub fn canceler_samples(lanes: usize, cc: bool, trials: usize, seed: u64) -> Vec<(CancelerSample, CancelerSample)> {
    let root = RandomSource::new(seed).derive(lanes as u64);
    let blocks = trials.div_ceil(CANCELER_BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = root.derive(b as u64);
            let count = CANCELER_BLOCK.min(trials - b * CANCELER_BLOCK);
            (0..count)
                .map(|_| {
                    let (p, n) = (random_mask(&mut rng), random_mask(&mut rng));
                    (
                        canceler_sample(lanes, ShiftDirection::Opposite, cc, p, n),
                        canceler_sample(lanes, ShiftDirection::Same, cc, p, n),
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean probability of ones reaching the accumulation stage for each K in
/// `cfg.canceler_lanes`, for both shift directions.
pub fn run_canceler_experiment(cfg: &ExperimentConfig) -> Result<Vec<CancelerRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(2 * cfg.canceler_lanes.len());
    for &lanes in &cfg.canceler_lanes {
        let samples = canceler_samples(lanes, cfg.cc, cfg.canceler_trials, cfg.seed);
        for direction in [ShiftDirection::Opposite, ShiftDirection::Same] {
            let pick = |s: &(CancelerSample, CancelerSample)| match direction {
                ShiftDirection::Opposite => s.0,
                ShiftDirection::Same => s.1,
            };
            let (p_pos, stderr_pos) = mean_and_stderr(samples.iter().map(|s| pick(s).pos));
            let (p_neg, stderr_neg) = mean_and_stderr(samples.iter().map(|s| pick(s).neg));
            rows.push(CancelerRow {
                lanes,
                direction,
                cc: cfg.cc,
                trials: cfg.canceler_trials,
                p_pos,
                p_neg,
                stderr_pos,
                stderr_neg,
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

/// Paired difference P_same − P_opposite on the positive line, with its
/// standard error.
pub fn canceler_gap(lanes: usize, cc: bool, trials: usize, seed: u64) -> (f64, f64) {
    let samples = canceler_samples(lanes, cc, trials, seed);
    mean_and_stderr(samples.iter().map(|(o, s)| s.pos - o.pos))
}

/// Provenance written next to every experiment output.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentMeta {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub metric: Metric,
    pub rng: &'static str,
    pub input_distribution: &'static str,
    pub fault_model: &'static str,
    pub baseline_model: &'static str,
    pub shift_direction_model: &'static str,
    pub canceler_event: &'static str,
    pub crate_version: &'static str,
}

impl ExperimentMeta {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            config: config.clone(),
            metric: config.metric,
            rng: "ChaCha8 per sub-stream; sub-seeds by SplitMix64 mixing of (seed, trial, stream)",
            input_distribution: "x, y uniform in [-1, 1]; y rescaled so |<x, y>| <= input_scale",
            fault_model: "per main cycle, with probability p_flip, flip one uniformly chosen bit of one uniformly chosen storage element (carry register cell or counter bit)",
            baseline_model: "reconstruction: binary tree of pending-carry counter adders, symmetric saturating clamp at 2^(B-1)-1, zero-padded to a power of two",
            shift_direction_model: "opposite: negative line loaded reversed, diagonal cancel p[j+1] vs n[K-1-j]; same: identity load, aligned cancel p[j+1] vs n[j+1]",
            canceler_event: "a read where the front pair nets to +1 (positive line) or -1 (negative line), averaged over the K reads",
            crate_version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.1, 0.2], &[0.1, 0.2], Metric::Standard).unwrap(), 0.0);
        assert!((rmse(&[0.5], &[0.4], Metric::Standard).unwrap() - 0.1).abs() < 1e-12);
        assert!((rmse(&[0.5], &[0.4], Metric::PaperLiteral).unwrap() - 0.1f64.sqrt()).abs() < 1e-12);
        assert!(rmse(&[], &[], Metric::Standard).is_err());
        assert!(rmse(&[0.1], &[0.1, 0.2], Metric::Standard).is_err());
    }

    #[test]
    fn drawn_inputs_respect_scale() {
        let mut rng = RandomSource::new(3);
        for _ in 0..200 {
            let (x, y, z) = draw_inputs(16, 0.9, &mut rng);
            assert!(z.abs() <= 0.9 + 1e-12);
            assert!(x.iter().chain(&y).all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"lanes": 8, "design": "baseline"}"#).unwrap();
        assert_eq!(cfg.lanes, 8);
        assert_eq!(cfg.design, Design::Baseline);
        assert_eq!(cfg.carry_len, 6);
        assert_eq!(cfg.metric, Metric::Standard);
        cfg.validate().unwrap();

        let bad = ExperimentConfig { trials: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { p_flip: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { carry_len_grid: vec![0, 1], ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"lanez": 8}"#).is_err());
    }

    #[test]
    fn canceler_k1_matches_enumeration() {
        // Four equiprobable (p, n) loads; only (1, 0) nets to +1.
        for (p, n, expect) in [(0, 0, 0.0), (1, 0, 1.0), (0, 1, 0.0), (1, 1, 0.0)] {
            for dir in [ShiftDirection::Opposite, ShiftDirection::Same] {
                assert_eq!(canceler_sample(1, dir, true, p, n).pos, expect);
            }
        }
    }

    #[test]
    fn small_sweep_is_reproducible() {
        let cfg = ExperimentConfig {
            lanes: 4,
            len: 200,
            trials: 8,
            carry_len_grid: vec![1, 3],
            counter_bits_grid: vec![2, 3],
            ..Default::default()
        };
        let a = run_accuracy_sweep(&cfg).unwrap();
        let b = run_accuracy_sweep(&cfg).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.thresholds.len(), 2 * RMSE_THRESHOLDS.len());
    }

    #[test]
    fn zero_flip_fault_sweep_matches_accuracy_point() {
        let cfg = ExperimentConfig {
            lanes: 4,
            len: 300,
            trials: 6,
            p_flip_grid: vec![0.0, 0.05],
            carry_len_grid: vec![6],
            counter_bits_grid: vec![4],
            ..Default::default()
        };
        let acc = run_accuracy_sweep(&cfg).unwrap();
        let fault = run_fault_sweep(&cfg).unwrap();
        let novel0 = fault.rows.iter().find(|r| r.design == Design::Novel && r.p_flip == 0.0).unwrap();
        let base0 = fault.rows.iter().find(|r| r.design == Design::Baseline && r.p_flip == 0.0).unwrap();
        assert_eq!(novel0.rmse, acc.rows[0].rmse);
        assert_eq!(base0.rmse, acc.rows[1].rmse);
    }

    #[test]
    fn csv_has_expected_columns() {
        let row = SweepRow {
            design: Design::Novel,
            lanes: 16,
            size: 6,
            len: 10_000,
            p_flip: 0.01,
            trials: 200,
            metric: Metric::Standard,
            rmse: 0.0125,
            overflow_rate: 0.0,
            cc_cancellations_mean: 3.5,
            seed: 1,
        };
        assert_eq!(row.csv_line().split(',').count(), SWEEP_CSV_HEADER.split(',').count());
        assert!(row.csv_line().starts_with("novel,16,6,10000,0.01,200,standard,"));
    }
}
