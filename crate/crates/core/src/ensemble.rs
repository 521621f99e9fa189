//! Discrete-time propagation of an income population.
//!
//! Each step, every slot independently resets to `x0` with probability
//! `r * dt`; otherwise its income takes one Euler–Maruyama step
//! `x <- x + x (mu dt + sigma sqrt(dt) eta)`. A slot keeps its index across
//! resets, so two snapshots of the same population can be compared slot by
//! slot.
//!
//! Each slot owns its random stream and consumes exactly one uniform and one
//! normal per step, whether or not it resets. Results are therefore
//! bit-identical for any number of worker threads. Because the draws do not
//! depend on `mu` or `sigma`, a block of noise can be drawn once and replayed
//! under many candidate growth parameters ([`NoiseBlock`]).

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{self, ModelError, ModelParams};
use crate::rng::{self, domain, open_unit, Stream};

pub const DEFAULT_DT: f64 = 0.01;
pub const MAX_DT: f64 = 0.1;

/// Slots per parallel work item. Fixed so chunking never depends on thread count.
const CHUNK: usize = 2048;
/// Redraws allowed when an Euler step would leave the positive half-line.
const MAX_GUARD_DRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("population needs at least {min} slots, got {got}")]
    TooFewSlots { min: usize, got: usize },
    #[error("invalid step size dt = {dt}: {reason}")]
    InvalidStep { dt: f64, reason: &'static str },
    #[error("horizon {0} is negative or not a multiple of dt")]
    InvalidHorizon(f64),
    #[error("snapshot time {time} is not on the dt = {dt} grid")]
    MisalignedSnapshot { time: f64, dt: f64 },
    #[error("snapshot time {time} outside [{start}, {end}]")]
    SnapshotOutOfRange { time: f64, start: f64, end: f64 },
    #[error("snapshot times must be strictly increasing")]
    SnapshotsNotIncreasing,
    #[error("income of slot {slot} is {value}; incomes must be positive and finite")]
    NonPositiveIncome { slot: usize, value: f64 },
    #[error("noise block does not belong to this population state")]
    ForeignBlock,
    #[error("malformed panel: {0}")]
    Panel(String),
}

/// How the initial incomes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Independent draws from the stationary law.
    Stationary,
    /// Every income starts at `x0`.
    AllAtX0,
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Stationary => "stationary",
            InitMode::AllAtX0 => "x0",
        })
    }
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "stationary" => Ok(InitMode::Stationary),
            "x0" | "all_at_x0" => Ok(InitMode::AllAtX0),
            other => Err(format!("unknown init mode {other:?} (expected stationary or x0)")),
        }
    }
}

/// A population of `N` incomes with per-slot random streams.
#[derive(Debug, Clone)]
pub struct PopulationState {
    origin: f64,
    steps: u64,
    dt: f64,
    params: ModelParams,
    master_seed: u64,
    incomes: Vec<f64>,
    streams: Vec<Stream>,
    resets: Vec<u32>,
}

pub fn init_population(
    params: ModelParams,
    n: usize,
    mode: InitMode,
    seed: u64,
) -> Result<PopulationState, EnsembleError> {
    if n < 2 {
        return Err(EnsembleError::TooFewSlots { min: 2, got: n });
    }
    let incomes = match mode {
        InitMode::AllAtX0 => vec![params.x0(); n],
        InitMode::Stationary => {
            let law = model::stationary_law(&params)?;
            model::sample_stationary(&law, n, rng::derive_seed(seed, domain::INIT))?
        }
    };
    PopulationState::from_incomes(params, incomes, seed)
}

impl PopulationState {
    /// Wraps explicit incomes; slot `i` gets the stream derived from `(seed, i)`.
    pub fn from_incomes(
        params: ModelParams,
        incomes: Vec<f64>,
        seed: u64,
    ) -> Result<Self, EnsembleError> {
        if incomes.len() < 2 {
            return Err(EnsembleError::TooFewSlots {
                min: 2,
                got: incomes.len(),
            });
        }
        if let Some((slot, &value)) = incomes
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x > 0.0))
        {
            return Err(EnsembleError::NonPositiveIncome { slot, value });
        }
        let streams = (0..incomes.len() as u64)
            .map(|i| rng::slot_stream(seed, i))
            .collect();
        let resets = vec![0; incomes.len()];
        let state = Self {
            origin: 0.0,
            steps: 0,
            dt: DEFAULT_DT,
            params,
            master_seed: seed,
            incomes,
            streams,
            resets,
        };
        check_step(state.dt, &params)?;
        Ok(state)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self, EnsembleError> {
        check_step(dt, &self.params)?;
        self.origin = self.t();
        self.steps = 0;
        self.dt = dt;
        Ok(self)
    }

    /// Replaces the model parameters for subsequent steps.
    pub fn set_params(&mut self, params: ModelParams) -> Result<(), EnsembleError> {
        check_step(self.dt, &params)?;
        self.params = params;
        Ok(())
    }

    pub fn t(&self) -> f64 {
        self.origin + self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn n(&self) -> usize {
        self.incomes.len()
    }

    pub fn slot_ids(&self) -> Range<usize> {
        0..self.incomes.len()
    }

    /// Resets experienced by each slot since the state was created.
    pub fn reset_counts(&self) -> &[u32] {
        &self.resets
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn kernel(&self, mu: f64, sigma: f64) -> Kernel {
        Kernel {
            drift_dt: mu * self.dt,
            vol_dt: sigma * self.dt.sqrt(),
            reset_prob: self.params.r() * self.dt,
            x0: self.params.x0(),
            guard_seed: rng::derive_seed(self.master_seed, domain::GUARD),
        }
    }

    pub fn step(&mut self) {
        self.advance(1);
    }

    /// Applies `steps` consecutive steps to every slot.
    pub fn advance(&mut self, steps: u64) {
        if steps == 0 {
            return;
        }
        let kernel = self.kernel(self.params.mu(), self.params.sigma());
        let first = self.steps;
        self.incomes
            .par_chunks_mut(CHUNK)
            .zip(self.streams.par_chunks_mut(CHUNK))
            .zip(self.resets.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, ((xs, streams), counts))| {
                for (i, ((x, rng), count)) in xs
                    .iter_mut()
                    .zip(streams.iter_mut())
                    .zip(counts.iter_mut())
                    .enumerate()
                {
                    let slot = (c * CHUNK + i) as u64;
                    for k in 0..steps {
                        let u = open_unit(rng);
                        let eta: f64 = rng.sample(StandardNormal);
                        if u < kernel.reset_prob {
                            *x = kernel.x0;
                            *count += 1;
                        } else {
                            *x = kernel.euler(*x, eta, slot, first + k);
                        }
                    }
                }
            });
        self.steps += steps;
    }

    /// Draws the noise of the next `steps` steps without advancing the state.
    pub fn draw_block(&self, steps: u64) -> NoiseBlock {
        let reset_prob = self.params.r() * self.dt;
        let chunks = self
            .streams
            .par_chunks(CHUNK)
            .map(|streams| {
                let mut chunk = BlockChunk {
                    reset: Vec::with_capacity(streams.len()),
                    tail_end: Vec::with_capacity(streams.len()),
                    etas: Vec::with_capacity(streams.len() * steps as usize),
                    resets: Vec::with_capacity(streams.len()),
                    streams: streams.to_vec(),
                };
                for rng in chunk.streams.iter_mut() {
                    let start = chunk.etas.len();
                    let mut reset = false;
                    let mut count = 0;
                    for _ in 0..steps {
                        let u = open_unit(rng);
                        let eta: f64 = rng.sample(StandardNormal);
                        if u < reset_prob {
                            reset = true;
                            count += 1;
                            chunk.etas.truncate(start);
                        } else {
                            chunk.etas.push(eta);
                        }
                    }
                    chunk.reset.push(reset);
                    chunk.tail_end.push(chunk.etas.len());
                    chunk.resets.push(count);
                }
                chunk
            })
            .collect();
        NoiseBlock {
            first_step: self.steps,
            steps,
            dt: self.dt,
            reset_prob,
            n: self.n(),
            chunks,
        }
    }

    /// Incomes after replaying `block` under growth parameters `(mu, sigma)`.
    pub fn evaluate_block(
        &self,
        block: &NoiseBlock,
        mu: f64,
        sigma: f64,
    ) -> Result<Vec<f64>, EnsembleError> {
        let mut out = Vec::new();
        self.evaluate_block_into(block, mu, sigma, &mut out)?;
        Ok(out)
    }

    pub fn evaluate_block_into(
        &self,
        block: &NoiseBlock,
        mu: f64,
        sigma: f64,
        out: &mut Vec<f64>,
    ) -> Result<(), EnsembleError> {
        self.check_block(block)?;
        let kernel = self.kernel(mu, sigma);
        let end_step = block.first_step + block.steps;
        out.resize(self.n(), 0.0);
        out.par_chunks_mut(CHUNK)
            .zip(self.incomes.par_chunks(CHUNK))
            .zip(block.chunks.par_iter())
            .enumerate()
            .for_each(|(c, ((dest, start), chunk))| {
                let mut begin = 0;
                for (i, (d, &x_start)) in dest.iter_mut().zip(start).enumerate() {
                    let end = chunk.tail_end[i];
                    let tail = &chunk.etas[begin..end];
                    let slot = (c * CHUNK + i) as u64;
                    let mut x = if chunk.reset[i] { kernel.x0 } else { x_start };
                    let first = end_step - tail.len() as u64;
                    for (j, &eta) in tail.iter().enumerate() {
                        x = kernel.euler(x, eta, slot, first + j as u64);
                    }
                    *d = x;
                    begin = end;
                }
            });
        Ok(())
    }

    /// Advances the state through `block` under growth parameters `(mu, sigma)`,
    /// which also become the state's parameters.
    pub fn commit_block(
        &mut self,
        block: NoiseBlock,
        mu: f64,
        sigma: f64,
    ) -> Result<(), EnsembleError> {
        let params = self.params.with_growth(mu, sigma)?;
        let incomes = self.evaluate_block(&block, mu, sigma)?;
        self.params = params;
        self.incomes = incomes;
        let mut offset = 0;
        for chunk in block.chunks {
            let len = chunk.streams.len();
            for (count, add) in self.resets[offset..offset + len].iter_mut().zip(&chunk.resets) {
                *count += add;
            }
            self.streams[offset..offset + len].clone_from_slice(&chunk.streams);
            offset += len;
        }
        self.steps += block.steps;
        Ok(())
    }

    fn check_block(&self, block: &NoiseBlock) -> Result<(), EnsembleError> {
        if block.n != self.n()
            || block.first_step != self.steps
            || block.dt != self.dt
            || block.reset_prob != self.params.r() * self.dt
        {
            return Err(EnsembleError::ForeignBlock);
        }
        Ok(())
    }
}

fn check_step(dt: f64, params: &ModelParams) -> Result<(), EnsembleError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(EnsembleError::InvalidStep {
            dt,
            reason: "must lie in (0, 0.1]",
        });
    }
    if params.r() * dt > 1.0 {
        return Err(EnsembleError::InvalidStep {
            dt,
            reason: "r * dt exceeds 1",
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Kernel {
    drift_dt: f64,
    vol_dt: f64,
    reset_prob: f64,
    x0: f64,
    guard_seed: u64,
}

impl Kernel {
    #[inline]
    fn euler(&self, x: f64, eta: f64, slot: u64, step: u64) -> f64 {
        let next = x + x * (self.drift_dt + self.vol_dt * eta);
        if next > 0.0 {
            next
        } else {
            self.redraw(x, slot, step)
        }
    }

    /// Rejection guard: redraw eta from a stream keyed by (slot, step) until
    /// the update stays positive. Never touches the slot's main stream.
    #[cold]
    fn redraw(&self, x: f64, slot: u64, step: u64) -> f64 {
        let mut rng = rng::stream(rng::derive_path(self.guard_seed, &[slot, step]));
        for _ in 0..MAX_GUARD_DRAWS {
            let eta: f64 = rng.sample(StandardNormal);
            let next = x + x * (self.drift_dt + self.vol_dt * eta);
            if next > 0.0 {
                return next;
            }
        }
        x
    }
}

/// Pre-drawn noise for a run of steps, replayable under any `(mu, sigma)`.
///
/// Only the normals after each slot's last reset inside the block are kept;
/// earlier ones cannot influence the end state.
#[derive(Debug, Clone)]
pub struct NoiseBlock {
    first_step: u64,
    steps: u64,
    dt: f64,
    reset_prob: f64,
    n: usize,
    chunks: Vec<BlockChunk>,
}

#[derive(Debug, Clone)]
struct BlockChunk {
    reset: Vec<bool>,
    tail_end: Vec<usize>,
    etas: Vec<f64>,
    resets: Vec<u32>,
    streams: Vec<Stream>,
}

impl NoiseBlock {
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of slots that reset at least once inside the block.
    pub fn reset_slots(&self) -> usize {
        self.chunks
            .iter()
            .map(|c| c.reset.iter().filter(|&&r| r).count())
            .sum()
    }
}

/// Incomes per (snapshot, slot).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPanel {
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl SnapshotPanel {
    pub fn new(times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self, EnsembleError> {
        if times.len() != rows.len() {
            return Err(EnsembleError::Panel(format!(
                "{} times but {} rows",
                times.len(),
                rows.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EnsembleError::SnapshotsNotIncreasing);
        }
        if let Some(first) = rows.first() {
            if first.is_empty() {
                return Err(EnsembleError::Panel("empty row".into()));
            }
            for row in &rows {
                if row.len() != first.len() {
                    return Err(EnsembleError::Panel("rows differ in length".into()));
                }
                if let Some((slot, &value)) =
                    row.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0))
                {
                    return Err(EnsembleError::NonPositiveIncome { slot, value });
                }
            }
        }
        Ok(Self { times, rows })
    }

    pub fn empty() -> Self {
        Self {
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_slots(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Index of the snapshot at time `t`, matched to within 1e-9 relative.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }
}

/// Number of `dt` steps in `span`, or `None` when `span` is off the grid.
fn grid_steps(span: f64, dt: f64) -> Option<u64> {
    let k = (span / dt).round();
    if k < 0.0 || (k * dt - span).abs() > 1e-9 * span.abs().max(1.0) {
        return None;
    }
    Some(k as u64)
}

/// Advances `state` by `horizon` years, recording incomes at `snapshot_times`.
pub fn propagate(
    state: &mut PopulationState,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<SnapshotPanel, EnsembleError> {
    let dt = state.dt();
    let total = grid_steps(horizon, dt).ok_or(EnsembleError::InvalidHorizon(horizon))?;
    let start = state.t();
    let end = start + horizon;
    let mut targets = Vec::with_capacity(snapshot_times.len());
    for &time in snapshot_times {
        let tol = 1e-9 * time.abs().max(1.0);
        if time < start - tol || time > end + tol {
            return Err(EnsembleError::SnapshotOutOfRange { time, start, end });
        }
        let k = grid_steps((time - start).max(0.0), dt)
            .ok_or(EnsembleError::MisalignedSnapshot { time, dt })?;
        if targets.last().is_some_and(|&last| k <= last) {
            return Err(EnsembleError::SnapshotsNotIncreasing);
        }
        targets.push(k);
    }
    let mut rows = Vec::with_capacity(targets.len());
    let mut done = 0;
    for &k in &targets {
        state.advance(k - done);
        done = k;
        rows.push(state.incomes().to_vec());
    }
    state.advance(total - done);
    SnapshotPanel::new(snapshot_times.to_vec(), rows)
}

/// End states of a coarse (`dt`) and a fine (`dt / 2`) scheme driven by
/// coupled noise, for step-size convergence checks.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
}

/// Runs the coarse and fine schemes side by side from the same incomes.
///
/// Per coarse step each slot draws two fine-step normals `eta1, eta2` and
/// three uniforms. The coarse normal is `(eta1 + eta2) / sqrt(2)`. Fine
/// sub-step `i` resets when `u_i < r dt / 2`; the coarse step resets when
/// either fine sub-step does or when `u3 < p^2 / (1 - p)^2` with `p = r dt / 2`,
/// which gives the coarse reset probability exactly `r dt`. Both schemes keep
/// their exact marginal laws.
pub fn coupled_refinement(
    params: ModelParams,
    incomes: &[f64],
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<CoupledRun, EnsembleError> {
    let state = PopulationState::from_incomes(params, incomes.to_vec(), seed)?.with_dt(dt)?;
    let steps = grid_steps(horizon, dt).ok_or(EnsembleError::InvalidHorizon(horizon))?;
    let half = dt / 2.0;
    let p_fine = params.r() * half;
    let p_extra = if p_fine < 1.0 {
        p_fine * p_fine / ((1.0 - p_fine) * (1.0 - p_fine))
    } else {
        1.0
    };
    let coarse_k = state.kernel(params.mu(), params.sigma());
    let fine_k = Kernel {
        drift_dt: params.mu() * half,
        vol_dt: params.sigma() * half.sqrt(),
        reset_prob: p_fine,
        ..coarse_k
    };
    let x0 = params.x0();
    let pairs: Vec<(f64, f64)> = incomes
        .par_iter()
        .enumerate()
        .map(|(slot, &x_init)| {
            let slot = slot as u64;
            let mut rng = rng::slot_stream(seed, slot);
            let (mut coarse, mut fine) = (x_init, x_init);
            for k in 0..steps {
                let u1 = open_unit(&mut rng);
                let u2 = open_unit(&mut rng);
                let u3 = open_unit(&mut rng);
                let e1: f64 = rng.sample(StandardNormal);
                let e2: f64 = rng.sample(StandardNormal);
                let (r1, r2) = (u1 < p_fine, u2 < p_fine);
                fine = if r1 { x0 } else { fine_k.euler(fine, e1, slot, 2 * k) };
                fine = if r2 { x0 } else { fine_k.euler(fine, e2, slot, 2 * k + 1) };
                coarse = if r1 || r2 || u3 < p_extra {
                    x0
                } else {
                    coarse_k.euler(coarse, (e1 + e2) / std::f64::consts::SQRT_2, slot, k)
                };
            }
            (coarse, fine)
        })
        .collect();
    let (coarse, fine) = pairs.into_iter().unzip();
    Ok(CoupledRun { coarse, fine })
}
