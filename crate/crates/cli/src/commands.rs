use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use srgbm_core::calibration::{self, CalibrationInput, FitConfig};
use srgbm_core::ensemble::{self, InitMode, SnapshotPanel};
use srgbm_core::io::{self, fmt_sig, Schema};
use srgbm_core::measures::{self, SweepConfig};
use srgbm_core::model::{self, ModelParams};

use crate::config::Resolver;
use crate::error::CliError;
use crate::{CalibrateArgs, GatsbyArgs, Global, MeasureArgs, ModelArgs, SimArgs, SimulateArgs};

const DEFAULT_R_GRID: &str = "0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1,0.11,0.12";

fn params(mu: f64, sigma2: f64, r: f64, x0: f64) -> Result<ModelParams, CliError> {
    Ok(ModelParams::from_sigma2(mu, sigma2, r)?.with_x0(x0)?)
}

fn model_params(args: &ModelArgs, res: &mut Resolver) -> Result<ModelParams, CliError> {
    let mu = res.get("mu", args.mu, 0.02)?;
    let sigma2 = res.get("sigma2", args.sigma2, 0.02)?;
    let r = res.get("r", args.r, 0.06)?;
    let x0 = res.get("x0", args.x0, 1.0)?;
    params(mu, sigma2, r, x0)
}

struct SimSettings {
    n: usize,
    dt: f64,
    horizon: f64,
    every: f64,
    init: InitMode,
}

impl SimSettings {
    fn resolve(args: &SimArgs, res: &mut Resolver) -> Result<Self, CliError> {
        let n = res.get("n", args.n, 10_000usize)?;
        let dt = res.get("dt", args.dt, ensemble::DEFAULT_DT)?;
        let horizon = res.get("horizon", args.horizon, 100.0)?;
        let every = res.get("every", args.every, 1.0)?;
        let init: String = res.get("init", args.init.clone(), "stationary".to_string())?;
        let init = init.parse().map_err(|e| CliError::Config(format!("--init: {e}")))?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(CliError::Config(format!("--horizon: {horizon} must be non-negative")));
        }
        if !(every > 0.0 && every.is_finite()) {
            return Err(CliError::Config(format!("--every: {every} must be positive")));
        }
        Ok(Self {
            n,
            dt,
            horizon,
            every,
            init,
        })
    }

    fn snapshot_times(&self) -> Vec<f64> {
        let count = (self.horizon / self.every + 1e-9).floor() as usize;
        (0..=count).map(|k| k as f64 * self.every).collect()
    }

    fn run(&self, p: ModelParams, seed: u64) -> Result<SnapshotPanel, CliError> {
        let mut state = ensemble::init_population(p, self.n, self.init, seed)?.with_dt(self.dt)?;
        Ok(ensemble::propagate(&mut state, self.horizon, &self.snapshot_times())?)
    }
}

fn prepare_out(global: &Global) -> Result<&Path, CliError> {
    fs::create_dir_all(&global.out_dir)
        .map_err(|e| CliError::Data(format!("--out-dir {}: {e}", global.out_dir.display())))?;
    Ok(&global.out_dir)
}

fn write_manifest(dir: &Path, res: &Resolver, command: &str, outputs: &[PathBuf]) -> Result<(), CliError> {
    let mut text = res.manifest(command);
    for path in outputs {
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        text.push_str(&format!("# output: {name}\n"));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn classify(args: ModelArgs, res: &mut Resolver) -> Result<(), CliError> {
    let p = model_params(&args, res)?;
    res.check_unused(&["command", "seed", "workers", "out-dir"])?;
    let regime = model::classify_regime(&p);
    let r1 = fmt_sig(model::moment_threshold(&p, 1));
    let r2 = fmt_sig(model::moment_threshold(&p, 2));
    let mut report = format!("regime: {regime}\n");
    match model::stationary_law(&p) {
        Ok(law) => {
            let mean = law.mean().map_or_else(|| "diverges".to_string(), fmt_sig);
            let _ = write!(
                report,
                "alpha: {}\nr1 (mean threshold, 1/year): {r1}\nr2 (variance threshold, 1/year): {r2}\n\
                 theoretical_gini: {}\nlong_time_mean (income units): {mean}\n\
                 long_time_median (income units): {}\n",
                fmt_sig(law.alpha),
                fmt_sig(model::theoretical_gini(law.alpha)?),
                fmt_sig(law.quantile(0.5)),
            );
        }
        Err(e) => {
            let _ = write!(
                report,
                "alpha: undefined ({e})\nr1 (mean threshold, 1/year): {r1}\nr2 (variance threshold, 1/year): {r2}\n"
            );
        }
    }
    // a closed pipe is not an error worth reporting
    let _ = std::io::stdout().write_all(report.as_bytes());
    Ok(())
}

pub fn simulate(args: SimulateArgs, global: &Global, res: &mut Resolver) -> Result<(), CliError> {
    let mu = res.get("mu", args.mu, 0.02)?;
    let sigma2 = res.get("sigma2", args.sigma2, 0.02)?;
    let rates = res.get_list("r", args.r.as_deref(), "0.01,0.04,0.12")?;
    let x0 = res.get("x0", args.x0, 1.0)?;
    let sim = SimSettings::resolve(&args.sim, res)?;
    let write_panel = res.get("write-panel", args.write_panel.then_some(true), false)?;
    res.check_unused(&["command"])?;
    let dir = prepare_out(global)?;

    let mut out = String::from("r,regime,time,mean,median\n");
    let mut outputs = vec![dir.join("simulate_summary.csv")];
    for &r in &rates {
        let p = params(mu, sigma2, r, x0)?;
        let panel = sim.run(p, srgbm_core::rng::derive_seed(global.seed, r.to_bits()))?;
        let regime = model::classify_regime(&p);
        for row in measures::summarize(&panel) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_sig(r),
                regime,
                fmt_sig(row.time),
                fmt_sig(row.mean),
                fmt_sig(row.median)
            ));
        }
        if write_panel {
            let path = dir.join(format!("panel_r{}.csv", fmt_sig(r)));
            io::write_panel(&path, &panel)?;
            outputs.push(path);
        }
    }
    fs::write(&outputs[0], out).map_err(|e| CliError::Data(format!("{}: {e}", outputs[0].display())))?;
    write_manifest(dir, res, "simulate", &outputs)
}

pub fn measure(args: MeasureArgs, global: &Global, res: &mut Resolver) -> Result<(), CliError> {
    let fractions = res.get_list("p-list", args.p_list.as_deref(), "0.01,0.1")?;
    let delta = res.get("delta", args.delta, 10.0)?;
    let panel_path = res.get_opt("panel", args.panel.map(|p| p.display().to_string()))?;
    let panel = match panel_path {
        Some(path) => io::read_panel(&path)?,
        None => {
            let p = model_params(&args.model, res)?;
            let sim = SimSettings::resolve(&args.sim, res)?;
            sim.run(p, global.seed)?
        }
    };
    res.check_unused(&["command"])?;
    let dir = prepare_out(global)?;
    let table = measures::measure_panel(&panel, &fractions, Some(delta))?;
    let path = dir.join("measures.csv");
    io::write_measures(&path, &table)?;
    write_manifest(dir, res, "measure", &[path])
}

pub fn gatsby(args: GatsbyArgs, global: &Global, res: &mut Resolver) -> Result<(), CliError> {
    let mu = res.get("mu", args.mu, 0.02)?;
    let sigma2 = res.get("sigma2", args.sigma2, 0.02)?;
    let x0 = res.get("x0", args.x0, 1.0)?;
    let grid = res.get_list("r-grid", args.r_grid.as_deref(), DEFAULT_R_GRID)?;
    let cfg = SweepConfig {
        n: res.get("n", args.n, 10_000usize)?,
        reps: res.get("reps", args.reps, 100usize)?,
        delta: res.get("delta", args.delta, 10.0)?,
        dt: res.get("dt", args.dt, ensemble::DEFAULT_DT)?,
    };
    res.check_unused(&["command"])?;
    // the rate of the base set is replaced per grid point
    let base = params(mu, sigma2, 0.1, x0)?;
    let dir = prepare_out(global)?;
    let points = measures::gatsby_sweep(&base, &grid, &cfg, global.seed)?;
    let path = dir.join("gatsby.csv");
    io::write_gatsby(&path, &points)?;
    write_manifest(dir, res, "gatsby", &[path])
}

pub fn calibrate(args: CalibrateArgs, global: &Global, res: &mut Resolver) -> Result<(), CliError> {
    let shares_path: Option<String> = res.get_opt("shares", args.shares.map(|p| p.display().to_string()))?;
    let reset_path: Option<String> = res.get_opt("resetting", args.resetting.map(|p| p.display().to_string()))?;
    let shares_path = shares_path.ok_or_else(|| CliError::Config("--shares: required".into()))?;
    let reset_path = reset_path.ok_or_else(|| CliError::Config("--resetting: required".into()))?;
    let percentile = res.get("percentile", args.percentile, 0.01)?;
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(CliError::Config(format!("--percentile: {percentile} outside (0, 1)")));
    }
    let n = res.get("n", args.n, 100_000usize)?;
    if (n as f64) * percentile < 1.0 {
        return Err(CliError::Config(format!("--n: {n} too small for percentile {percentile}")));
    }
    let reps = res.get("reps", args.reps, 25usize)?;
    if reps == 0 {
        return Err(CliError::Config("--reps: must be at least 1".into()));
    }
    let dt = res.get("dt", args.dt, ensemble::DEFAULT_DT)?;
    let defaults = FitConfig::default();
    let fit = FitConfig {
        trust_mu: res.get("trust-mu", args.trust_mu, defaults.trust_mu)?,
        trust_sigma: res.get("trust-sigma", args.trust_sigma, defaults.trust_sigma)?,
        floor: res.get("floor", args.floor, defaults.floor)?,
        ..defaults
    };
    let from = res.get_opt("from", args.from)?;
    let to = res.get_opt("to", args.to)?;
    res.check_unused(&["command"])?;

    let shares = io::load_series(&shares_path, Schema::Share)?;
    let rates = io::load_series(&reset_path, Schema::Resetting)?;
    let (mut shares, mut rates) = io::align(&shares, &rates)?;
    if from.is_some() || to.is_some() {
        let lo = from.unwrap_or(shares.first_year());
        let hi = to.unwrap_or(shares.last_year());
        shares = shares.window(lo, hi);
        rates = rates.window(lo, hi);
        if shares.len() < 2 {
            return Err(CliError::Config(format!("--from/--to: window {lo}..{hi} leaves fewer than 2 years")));
        }
    }
    let input = CalibrationInput {
        n,
        reps,
        dt,
        fit,
        ..CalibrationInput::new(shares.years.clone(), rates.values.clone(), shares.values.clone(), percentile)
    };
    let dir = prepare_out(global)?;
    let result = calibration::calibrate(&input, global.seed)?;
    let outputs = [
        dir.join("calibration_result.csv"),
        dir.join("calibration_summary.json"),
        dir.join("calibration_thresholds.csv"),
    ];
    io::write_calibration(&outputs[0], &result)?;
    io::write_calibration_summary(&outputs[1], &result)?;
    io::write_thresholds(&outputs[2], &result)?;
    let _ = writeln!(std::io::stdout(), "r_squared: {}", fmt_sig(result.r_squared));
    write_manifest(dir, res, "calibrate", &outputs)
}
