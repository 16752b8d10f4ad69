//! Trial orchestration, parameter sweeps and the power-split search.
//!
//! Every trial draws its messages, channel and noise from streams keyed by
//! `(seed, trial)`, so a point's results do not depend on how many worker
//! threads ran it or in which order trials finished.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_noise, draw_channel, ReceivedFrame};
use crate::codebooks::CodebookSet;
use crate::config::{SicMode, SystemConfig};
use crate::error::{Error, Result};
use crate::fec::PolarCode;
use crate::linalg::CMatrix;
use crate::metrics::{compute_pupe, wilson_interval, TrialOutcome, Z95_ONE_SIDED};
use crate::receiver::{count_iterations, DecodeOutput, Genie, IterationTrace, Receiver};
use crate::rng::{stream, Domain};
use crate::transmitter::{draw_messages, superimpose, Transmitter, UserMessage};

/// One output line: aggregate metrics of a simulated operating point.
///
/// Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub ka: usize,
    pub m: usize,
    pub pp: f64,
    pub pd: f64,
    pub ebn0_db: f64,
    pub trials: usize,
    pub pmd: f64,
    pub pfa: f64,
    pub pe: f64,
    pub mean_iterations: f64,
    /// Mean first-iteration channel MSE over trials that had any matched
    /// detection; empty when no trial had one.
    pub mean_mse: Option<f64>,
    /// Mean fraction of users involved in an index collision.
    pub collision_rate: f64,
    pub wall_clock_per_trial_s: f64,
}

/// Per-trial result kept alongside the aggregate row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub outcome: TrialOutcome,
    pub iterations: Vec<IterationTrace>,
    pub detected: usize,
}

impl TrialRecord {
    /// First-iteration pilot-based MSE of the decoded users and of their
    /// data-aided re-estimates, when both are defined.
    pub fn first_decoded_mse(&self) -> Option<(f64, f64)> {
        let first = self.iterations.first()?;
        Some((first.mse_decoded_initial?, first.mse_decoded_reest?))
    }
}

/// Full result of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub row: ResultRow,
    pub records: Vec<TrialRecord>,
    /// Trials that returned an error and were left out of `row`.
    pub skipped: usize,
}

/// Everything needed to simulate frames for one configuration.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SystemConfig,
    codebooks: CodebookSet,
    code: PolarCode,
}

impl Simulation {
    pub fn new(cfg: SystemConfig) -> Result<Self> {
        cfg.check()?;
        let codebooks = CodebookSet::build(&cfg)?;
        let code = PolarCode::from_config(&cfg)?;
        Ok(Simulation {
            cfg,
            codebooks,
            code,
        })
    }

    /// Uses previously built (for example loaded) codebooks.
    pub fn with_codebooks(cfg: SystemConfig, codebooks: CodebookSet) -> Result<Self> {
        cfg.check()?;
        codebooks.check_against(&cfg)?;
        let code = PolarCode::from_config(&cfg)?;
        Ok(Simulation {
            cfg,
            codebooks,
            code,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn codebooks(&self) -> &CodebookSet {
        &self.codebooks
    }

    pub fn code(&self) -> &PolarCode {
        &self.code
    }

    /// Messages of trial `trial`.
    pub fn messages(&self, trial: u64) -> Vec<UserMessage> {
        draw_messages(
            &self.cfg,
            &mut stream(self.cfg.seed, Domain::Messages, trial),
        )
    }

    /// Simulates trial `trial` with its own random messages.
    pub fn run_trial(&self, trial: u64) -> Result<TrialRecord> {
        self.run_messages(trial, &self.messages(trial))
    }

    /// Simulates trial `trial` with the given messages; the channel and
    /// noise still come from the trial's streams.
    pub fn run_messages(&self, trial: u64, messages: &[UserMessage]) -> Result<TrialRecord> {
        let (out, _) = self.decode_messages(trial, messages)?;
        Ok(TrialRecord {
            trial,
            outcome: TrialOutcome::evaluate(messages, &out.messages),
            detected: out.detected.len(),
            iterations: out.iterations,
        })
    }

    /// Runs the transmit chain and receiver, returning the receiver output
    /// and the true channel.
    pub fn decode_messages(
        &self,
        trial: u64,
        messages: &[UserMessage],
    ) -> Result<(DecodeOutput, CMatrix)> {
        let cfg = &self.cfg;
        let tx = Transmitter::new(cfg, &self.codebooks, &self.code);
        let frames = messages
            .iter()
            .map(|m| tx.encode_user(m))
            .collect::<Result<Vec<_>>>()?;
        let channel = draw_channel(
            messages.len(),
            cfg.m,
            &mut stream(cfg.seed, Domain::Channel, trial),
        );
        let clean = superimpose(&frames, &channel)?;
        let y = add_noise(clean, cfg.n0, &mut stream(cfg.seed, Domain::Noise, trial));
        let frame = ReceivedFrame::new(y, cfg.np_prime);
        let receiver = Receiver::new(cfg, &self.codebooks, &self.code);
        let genie = Genie {
            messages,
            channel: &channel,
        };
        let out = receiver.decode(&frame, Some(genie))?;
        Ok((out, channel.matrix().clone()))
    }

    /// Runs trials `0..trials` on `threads` workers (0 uses all cores).
    pub fn run(&self, trials: usize, threads: usize) -> Result<PointReport> {
        self.run_range(0, trials as u64, threads)
    }

    /// Runs trials `start..end`; disjoint ranges give independent samples.
    pub fn run_range(&self, start: u64, end: u64, threads: usize) -> Result<PointReport> {
        let began = Instant::now();
        let results: Vec<Result<TrialRecord>> = pool(threads)?.install(|| {
            (start..end)
                .into_par_iter()
                .map(|t| self.run_trial(t))
                .collect()
        });
        let elapsed = began.elapsed().as_secs_f64();
        let mut records = Vec::with_capacity(results.len());
        let mut skipped = 0;
        for (t, r) in (start..end).zip(results) {
            match r {
                Ok(rec) => records.push(rec),
                Err(e) => {
                    log::warn!("trial {t} skipped: {e}");
                    skipped += 1;
                }
            }
        }
        let attempted = (end - start).max(1) as f64;
        let row = self.aggregate(&records, elapsed / attempted)?;
        Ok(PointReport {
            row,
            records,
            skipped,
        })
    }

    /// Runs trials in batches until the 95% Wilson bound on `Pe` settles on
    /// one side of `epsilon` or `rule.max_trials` is reached.
    pub fn run_sequential(&self, rule: &SequentialRule, threads: usize) -> Result<PointReport> {
        let mut report: Option<PointReport> = None;
        let mut done = 0u64;
        let mut wall = 0.0;
        while (done as usize) < rule.max_trials {
            let next = (done + rule.batch.max(1) as u64).min(rule.max_trials as u64);
            let part = self.run_range(done, next, threads)?;
            wall += part.row.wall_clock_per_trial_s * (next - done) as f64;
            done = next;
            report = Some(match report {
                None => part,
                Some(mut acc) => {
                    acc.records.extend(part.records);
                    acc.skipped += part.skipped;
                    acc
                }
            });
            let acc = report.as_mut().expect("set above");
            acc.row = self.aggregate(&acc.records, wall / done as f64)?;
            if (done as usize) >= rule.min_trials
                && pe_decision(&acc.row, self.cfg.epsilon) != Decision::Undecided
            {
                break;
            }
        }
        report.ok_or_else(|| Error::InvalidArgument("sequential rule with zero trials".into()))
    }

    fn aggregate(&self, records: &[TrialRecord], wall_per_trial: f64) -> Result<ResultRow> {
        let cfg = &self.cfg;
        let outcomes: Vec<TrialOutcome> = records.iter().map(|r| r.outcome.clone()).collect();
        let pupe = compute_pupe(&outcomes)?;
        let n = records.len() as f64;
        let mses: Vec<f64> = records
            .iter()
            .filter_map(|r| r.iterations.first().and_then(|i| i.mse))
            .collect();
        Ok(ResultRow {
            ka: cfg.ka,
            m: cfg.m,
            pp: cfg.pp,
            pd: cfg.pd,
            ebn0_db: cfg.energy_per_bit().db,
            trials: records.len(),
            pmd: pupe.pmd,
            pfa: pupe.pfa,
            pe: pupe.pe,
            mean_iterations: records
                .iter()
                .map(|r| count_iterations(&r.iterations) as f64)
                .sum::<f64>()
                / n,
            mean_mse: if mses.is_empty() {
                None
            } else {
                Some(mses.iter().sum::<f64>() / mses.len() as f64)
            },
            collision_rate: outcomes
                .iter()
                .map(|o| o.collisions as f64 / o.ka as f64)
                .sum::<f64>()
                / n,
            wall_clock_per_trial_s: wall_per_trial,
        })
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Simulates `trials` frames of `cfg` and aggregates them.
pub fn run_point(cfg: &SystemConfig, trials: usize, threads: usize) -> Result<ResultRow> {
    Ok(Simulation::new(cfg.clone())?.run(trials, threads)?.row)
}

/// Early-stopping policy for `Pe` estimation at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialRule {
    pub min_trials: usize,
    pub max_trials: usize,
    pub batch: usize,
}

/// Outcome of comparing an estimated `Pe` with the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Upper 95% bound at or below the target.
    Meets,
    /// Lower 95% bound above the target.
    Fails,
    Undecided,
}

/// One-sided 95% Wilson decision on `Pe <= epsilon`, counting every user
/// of every trial as a Bernoulli observation.
pub fn pe_decision(row: &ResultRow, epsilon: f64) -> Decision {
    let n = (row.trials * row.ka) as f64;
    if n == 0.0 {
        return Decision::Undecided;
    }
    let (lo, hi) = wilson_interval(row.pe.min(1.0), n, Z95_ONE_SIDED);
    if hi <= epsilon {
        Decision::Meets
    } else if lo > epsilon {
        Decision::Fails
    } else {
        Decision::Undecided
    }
}

/// Which SIC variants to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SicChoice {
    Initial,
    Reest,
    Both,
}

impl SicChoice {
    pub fn modes(self) -> &'static [SicMode] {
        match self {
            SicChoice::Initial => &[SicMode::InitialEstimates],
            SicChoice::Reest => &[SicMode::DataAidedReestimation],
            SicChoice::Both => &[SicMode::InitialEstimates, SicMode::DataAidedReestimation],
        }
    }
}

/// Both SIC variants at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SicComparison {
    pub initial: ResultRow,
    pub reest: ResultRow,
    pub chosen: SicMode,
}

/// Runs `cfg` under both SIC variants on identical trial streams and keeps
/// the one with lower `Pe`; ties go to initial estimates.
pub fn try_both_sic(cfg: &SystemConfig, trials: usize, threads: usize) -> Result<SicComparison> {
    let with = |mode| {
        run_point(
            &SystemConfig {
                sic_mode: mode,
                ..cfg.clone()
            },
            trials,
            threads,
        )
    };
    let initial = with(SicMode::InitialEstimates)?;
    let reest = with(SicMode::DataAidedReestimation)?;
    let chosen = if reest.pe < initial.pe {
        SicMode::DataAidedReestimation
    } else {
        SicMode::InitialEstimates
    };
    Ok(SicComparison {
        initial,
        reest,
        chosen,
    })
}

/// Power settings to evaluate at every `(Ka, M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerGrid {
    /// Explicit `(Pp, Pd)` pairs.
    Points(Vec<(f64, f64)>),
    /// Every Eb/N0 in dB combined with every pilot energy fraction.
    Split {
        ebn0_db: Vec<f64>,
        pilot_fraction: Vec<f64>,
    },
}

impl PowerGrid {
    fn is_empty(&self) -> bool {
        match self {
            PowerGrid::Points(p) => p.is_empty(),
            PowerGrid::Split {
                ebn0_db,
                pilot_fraction,
            } => ebn0_db.is_empty() || pilot_fraction.is_empty(),
        }
    }
}

/// How the search walks the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStrategy {
    /// Evaluate every grid point.
    Exhaustive,
    /// For `Split` grids, binary search along Eb/N0 for each pilot fraction,
    /// assuming `Pe` is non-increasing in Eb/N0. Falls back to exhaustive
    /// for explicit point grids.
    Bisection,
}

/// A sweep or search over `(Ka, M)` and transmit powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub base: SystemConfig,
    pub ka: Vec<usize>,
    pub m: Vec<usize>,
    pub grid: PowerGrid,
    pub trials: usize,
    /// Early stopping; `None` runs exactly `trials` per point.
    pub sequential: Option<SequentialRule>,
    pub sic: SicChoice,
    pub strategy: SearchStrategy,
    pub threads: usize,
}

impl ExperimentPlan {
    /// Plan with one `(Ka, M, Pp, Pd)` point taken from `base`.
    pub fn single(base: SystemConfig, trials: usize) -> Self {
        ExperimentPlan {
            ka: vec![base.ka],
            m: vec![base.m],
            grid: PowerGrid::Points(vec![(base.pp, base.pd)]),
            trials,
            sequential: None,
            sic: SicChoice::Initial,
            strategy: SearchStrategy::Exhaustive,
            threads: 1,
            base,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.ka.is_empty() || self.m.is_empty() || self.grid.is_empty() {
            return Err(Error::InvalidArgument("empty sweep axis".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if let Some(rule) = &self.sequential {
            if rule.max_trials == 0 || rule.min_trials > rule.max_trials {
                return Err(Error::InvalidArgument(
                    "sequential rule needs 0 < max_trials and min_trials <= max_trials".into(),
                ));
            }
        }
        Ok(())
    }

    fn config(&self, ka: usize, m: usize, mode: SicMode) -> SystemConfig {
        SystemConfig {
            ka,
            m,
            sic_mode: mode,
            ..self.base.clone()
        }
    }

    fn evaluate(&self, cfg: SystemConfig, sink: &mut dyn FnMut(&PointReport)) -> Result<ResultRow> {
        let sim = Simulation::new(cfg)?;
        let report = match &self.sequential {
            Some(rule) => sim.run_sequential(rule, self.threads)?,
            None => sim.run(self.trials, self.threads)?,
        };
        sink(&report);
        Ok(report.row)
    }
}

/// Evaluates every `(Ka, M, SIC mode, grid point)` of the plan in order.
pub fn run_sweep(
    plan: &ExperimentPlan,
    sink: &mut dyn FnMut(&PointReport),
) -> Result<Vec<ResultRow>> {
    plan.check()?;
    let mut rows = Vec::new();
    for &ka in &plan.ka {
        for &m in &plan.m {
            for &mode in plan.sic.modes() {
                let cfg = plan.config(ka, m, mode);
                for point in grid_configs(&cfg, &plan.grid) {
                    rows.push(plan.evaluate(point, sink)?);
                }
            }
        }
    }
    Ok(rows)
}

fn grid_configs(cfg: &SystemConfig, grid: &PowerGrid) -> Vec<SystemConfig> {
    match grid {
        PowerGrid::Points(points) => points
            .iter()
            .map(|&(pp, pd)| SystemConfig {
                pp,
                pd,
                ..cfg.clone()
            })
            .collect(),
        PowerGrid::Split {
            ebn0_db,
            pilot_fraction,
        } => pilot_fraction
            .iter()
            .flat_map(|&rho| ebn0_db.iter().map(move |&e| cfg.with_energy_split(e, rho)))
            .collect(),
    }
}

/// Minimal energy per bit meeting the target at one `(Ka, M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub ka: usize,
    pub m: usize,
    pub sic_mode: SicMode,
    /// Feasible row with the smallest Eb/N0; `None` when no evaluated
    /// point met `Pe <= epsilon`.
    pub best: Option<ResultRow>,
    /// Every evaluated point.
    pub rows: Vec<ResultRow>,
}

impl SearchResult {
    pub fn is_feasible(&self) -> bool {
        self.best.is_some()
    }

    pub fn required_ebn0_db(&self) -> Option<f64> {
        self.best.as_ref().map(|r| r.ebn0_db)
    }
}

/// For every `(Ka, M)`, the minimal Eb/N0 over the grid with estimated
/// `Pe <= epsilon`. With `SicChoice::Both` the better mode is kept, ties
/// going to initial estimates.
pub fn search_min_ebn0(
    plan: &ExperimentPlan,
    sink: &mut dyn FnMut(&PointReport),
) -> Result<Vec<SearchResult>> {
    plan.check()?;
    let mut out = Vec::new();
    for &ka in &plan.ka {
        for &m in &plan.m {
            let mut best: Option<SearchResult> = None;
            for &mode in plan.sic.modes() {
                let cfg = plan.config(ka, m, mode);
                let rows = match (&plan.grid, plan.strategy) {
                    (
                        PowerGrid::Split {
                            ebn0_db,
                            pilot_fraction,
                        },
                        SearchStrategy::Bisection,
                    ) => bisect_split(plan, &cfg, ebn0_db, pilot_fraction, sink)?,
                    (grid, _) => grid_configs(&cfg, grid)
                        .into_iter()
                        .map(|c| plan.evaluate(c, sink))
                        .collect::<Result<_>>()?,
                };
                let eps = cfg.epsilon;
                let feasible = rows
                    .iter()
                    .filter(|r| r.pe <= eps)
                    .min_by(|a, b| a.ebn0_db.total_cmp(&b.ebn0_db))
                    .cloned();
                let result = SearchResult {
                    ka,
                    m,
                    sic_mode: mode,
                    best: feasible,
                    rows,
                };
                best = Some(match best {
                    Some(prev) if !better(&result, &prev) => prev,
                    _ => result,
                });
            }
            out.push(best.expect("at least one SIC mode"));
        }
    }
    Ok(out)
}

fn better(a: &SearchResult, b: &SearchResult) -> bool {
    match (a.required_ebn0_db(), b.required_ebn0_db()) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        _ => false,
    }
}

fn bisect_split(
    plan: &ExperimentPlan,
    cfg: &SystemConfig,
    ebn0_db: &[f64],
    pilot_fraction: &[f64],
    sink: &mut dyn FnMut(&PointReport),
) -> Result<Vec<ResultRow>> {
    let mut grid = ebn0_db.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut rows = Vec::new();
    for &rho in pilot_fraction {
        // Smallest index whose point meets the target, assuming monotonicity.
        let (mut lo, mut hi) = (0usize, grid.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            let row = plan.evaluate(cfg.with_energy_split(grid[mid], rho), sink)?;
            let ok = row.pe <= cfg.epsilon;
            rows.push(row);
            if ok {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
    }
    Ok(rows)
}

/// Sweep axes parsed from a spec such as `ka=16,32;m=8,50;ebn0=0:0.5:6;rho=0.3`.
///
/// Each axis takes a comma-separated list or an inclusive `start:step:stop`
/// range. Unlisted axes keep the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSpec {
    pub ka: Option<Vec<usize>>,
    pub m: Option<Vec<usize>>,
    pub ebn0_db: Option<Vec<f64>>,
    pub pilot_fraction: Option<Vec<f64>>,
}

impl std::str::FromStr for SweepSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut spec = SweepSpec::default();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (axis, values) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("sweep axis without '=': {part}")))?;
            let values = parse_values(values.trim())?;
            let ints = || -> Result<Vec<usize>> {
                values
                    .iter()
                    .map(|&v| {
                        if v >= 0.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(Error::InvalidArgument(format!(
                                "{axis} needs whole numbers, got {v}"
                            )))
                        }
                    })
                    .collect()
            };
            match axis.trim() {
                "ka" => spec.ka = Some(ints()?),
                "m" => spec.m = Some(ints()?),
                "ebn0" => spec.ebn0_db = Some(values),
                "rho" => spec.pilot_fraction = Some(values),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown sweep axis {other}"
                    )))
                }
            }
        }
        Ok(spec)
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("not a number: {s}")))
    };
    let values = if let [start, step, stop] = text.split(':').collect::<Vec<_>>()[..] {
        let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
        if !(step > 0.0) || stop < start {
            return Err(Error::InvalidArgument(format!("bad range {text}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| start + k as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sweep axis".into()));
    }
    Ok(values)
}

/// Writes rows as CSV with a header line.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the per-iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLine<'a> {
    pub ka: usize,
    pub m: usize,
    pub pp: f64,
    pub pd: f64,
    pub trial: u64,
    #[serde(flatten)]
    pub iteration: &'a IterationTrace,
}

/// Appends the per-iteration trace of a point as JSON lines.
pub fn write_trace<W: Write>(report: &PointReport, mut out: W) -> Result<()> {
    for rec in &report.records {
        for it in &rec.iterations {
            let line = TraceLine {
                ka: report.row.ka,
                m: report.row.m,
                pp: report.row.pp,
                pd: report.row.pd,
                trial: rec.trial,
                iteration: it,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
