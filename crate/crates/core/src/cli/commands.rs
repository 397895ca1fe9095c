//! Per-command execution: runs the experiment, writes reports and CSVs,
//! and evaluates the embedded pass/fail checks.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use super::{CheckOutcome, CliError, CommandKind, RunConfig};
use crate::asymptotics::{
    estimate_sigma2, exp_integrability_check, lil_running_statistic, mdp_tail_profile,
    run_ensemble, semigroup_decay_check, EnsembleConfig, MdpConfig, Thresholds,
    REVERSIBLE_NOTE,
};
use crate::model::{InitialLaw, OUModel};
use crate::parallel;
use crate::simulate::{
    derive_seed, em_integrate, em_path_with_epr, fmt_f64, initial_state, RngStream,
};

/// Bands applied by the embedded checks.
const KS_LEVEL: f64 = 0.01;
const MEAN_SE_LIMIT: f64 = 4.0;
const SIGMA2_STABILITY: f64 = 0.15;
const MDP_RATIO_BAND: (f64, f64) = (0.5, 1.8);
const MDP_MIN_TAIL_COUNT: usize = 20;
const LIL_BAND: (f64, f64) = (0.2, 1.5);
const LIL_ENVELOPE: f64 = 2.0;
const EXP_LINEARITY: f64 = 0.25;

pub(super) struct CommandResult {
    pub summary: String,
    pub checks: Vec<CheckOutcome>,
    pub outputs: Vec<String>,
}

/// Output sink; files are only written when an output directory is set.
struct Sink<'a> {
    dir: Option<&'a Path>,
    names: Vec<String>,
}

impl Sink<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
            self.names.push(name.to_string());
        }
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<String, CliError> {
        let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
        self.write(name, &text)?;
        Ok(text)
    }
}

pub(super) fn dispatch(
    cfg: &RunConfig,
    model: &OUModel,
    out: Option<&Path>,
) -> Result<CommandResult, CliError> {
    let mut sink = Sink {
        dir: out,
        names: Vec::new(),
    };
    let (summary, checks) = match cfg.command {
        CommandKind::Info => info(model, &mut sink)?,
        CommandKind::Simulate => simulate(cfg, model, &mut sink)?,
        CommandKind::Clt => clt(cfg, model, &mut sink)?,
        CommandKind::Mdp => mdp(cfg, model, &mut sink)?,
        CommandKind::Lil => lil(cfg, model, &mut sink)?,
        CommandKind::Check => check(cfg, model, &mut sink)?,
    };
    Ok(CommandResult {
        summary,
        checks,
        outputs: sink.names,
    })
}

type Step = Result<(String, Vec<CheckOutcome>), CliError>;

fn info(model: &OUModel, sink: &mut Sink<'_>) -> Step {
    let residual = model.lyapunov_relative_residual();
    let ep = model.entropy_production_rate();
    let report = json!({
        "dim": model.dim(),
        "B": model.b().to_rows(),
        "Sigma": model.sigma().to_rows(),
        "Q": model.q().to_rows(),
        "Gamma": model.gamma().to_rows(),
        "e_p": ep,
        "reversible": model.reversible(),
        "constants": model.functional_constants(),
        "spectral_abscissa": model.spectral_abscissa(),
        "lyapunov_relative_residual": residual,
    });
    let text = sink.write_json("info.json", &report)?;
    let checks = vec![
        CheckOutcome::new("lyapunov_residual", residual <= 1e-10, format!("{residual:.3e}")),
        CheckOutcome::new(
            "reversibility_consistent",
            model.reversible() == (ep <= model.ep_zero_threshold()),
            format!("e_p = {ep:.6e}"),
        ),
    ];
    Ok((text.trim_end().to_string(), checks))
}

fn simulate(cfg: &RunConfig, model: &OUModel, sink: &mut Sink<'_>) -> Step {
    let samples = parallel::map_indexed(cfg.n_paths, |i| {
        let stream = RngStream::new(cfg.seed, i as u64);
        let x0 = initial_state(model, &cfg.initial_law, stream)?;
        em_integrate(model, &x0, cfg.t, cfg.dt, stream, |_| {})
    })
    .map_err(CliError::from_run)?;

    let mut jsonl = String::new();
    for s in &samples {
        jsonl.push_str(&s.to_json_record());
        jsonl.push('\n');
    }
    sink.write("samples.jsonl", &jsonl)?;

    let mut trace_file = None;
    if let Some(every) = cfg.trace_every.filter(|&e| e > 0) {
        let stream = RngStream::new(cfg.seed, 0);
        let x0 = initial_state(model, &cfg.initial_law, stream).map_err(CliError::from_run)?;
        let (_, trace) = em_path_with_epr(model, &x0, cfg.t, cfg.dt, stream, every)
            .map_err(CliError::from_run)?;
        let mut buf = Vec::new();
        trace
            .expect("trace requested")
            .write_csv(&mut buf)
            .expect("in-memory write");
        sink.write("trace.csv", &String::from_utf8(buf).expect("utf-8 csv"))?;
        trace_file = Some("trace.csv");
    }

    let eps: Vec<f64> = samples.iter().map(|s| s.ep_t).collect();
    let (mean, var) = crate::asymptotics::mean_and_variance(&eps);
    let report = json!({
        "n_paths": cfg.n_paths,
        "t": cfg.t,
        "dt": samples[0].dt,
        "initial_law": cfg.initial_law.to_string(),
        "e_p": model.entropy_production_rate(),
        "mean_ep_t": mean,
        "se_ep_t": (var / eps.len() as f64).sqrt(),
        "samples_file": "samples.jsonl",
        "trace_file": trace_file,
    });
    let text = sink.write_json("simulate_report.json", &report)?;
    Ok((text.trim_end().to_string(), Vec::new()))
}

fn ensemble_config(cfg: &RunConfig, law: InitialLaw, n_paths: usize, t: f64, seed: u64) -> EnsembleConfig {
    EnsembleConfig {
        initial_law: law,
        n_paths,
        t,
        dt: cfg.dt,
        master_seed: seed,
    }
}

fn clt(cfg: &RunConfig, model: &OUModel, sink: &mut Sink<'_>) -> Step {
    let ens = ensemble_config(cfg, cfg.initial_law.clone(), cfg.n_paths, cfg.t, cfg.seed);
    let stats = run_ensemble(model, &ens).map_err(CliError::from_run)?;

    let mut csv = String::from("path_id,z\n");
    for (i, z) in stats.z_samples.iter().enumerate() {
        writeln!(csv, "{i},{}", fmt_f64(*z)).unwrap();
    }
    sink.write("z_samples.csv", &csv)?;

    let mut checks = Vec::new();
    let mut sigma2_grid = None;
    if let Some(note) = &stats.degenerate {
        checks.push(CheckOutcome::new("degenerate", true, note.clone()));
    } else {
        checks.push(CheckOutcome::new(
            "ks_pvalue",
            stats.ks_pvalue > KS_LEVEL,
            format!("p = {:.4} (D = {:.5})", stats.ks_pvalue, stats.ks_stat),
        ));
        let dev = stats.mean_deviation_in_se();
        checks.push(CheckOutcome::new(
            "mean_within_4se",
            dev <= MEAN_SE_LIMIT,
            format!("|mean - e_p| = {dev:.3} SE"),
        ));
    }
    if !cfg.t_grid.is_empty() {
        let grid = estimate_sigma2(model, cfg.n_paths, &cfg.t_grid, cfg.dt, cfg.seed)
            .map_err(CliError::from_run)?;
        let mut csv = String::from("t,sigma2_hat,n_paths\n");
        for p in &grid {
            writeln!(csv, "{},{},{}", fmt_f64(p.t), fmt_f64(p.sigma2_hat), p.n_paths).unwrap();
        }
        sink.write("sigma2.csv", &csv)?;
        if grid.len() >= 2 && stats.degenerate.is_none() {
            let first = grid[0].sigma2_hat;
            let last = grid[grid.len() - 1].sigma2_hat;
            let rel = (first - last).abs() / last;
            checks.push(CheckOutcome::new(
                "sigma2_stabilization",
                rel <= SIGMA2_STABILITY,
                format!("relative change {rel:.4}"),
            ));
        }
        sigma2_grid = Some(grid);
    }

    let report = json!({
        "n_paths": stats.n_paths,
        "t": stats.t,
        "dt": stats.dt,
        "initial_law": stats.initial_law.to_string(),
        "e_p": stats.e_p,
        "sigma2_hat": stats.sigma2_hat,
        "ks_stat": stats.ks_stat,
        "ks_pvalue": stats.ks_pvalue,
        "z_samples_file": "z_samples.csv",
        "mean_z": stats.mean_z,
        "mean_ep_t": stats.mean_ep_t,
        "se_ep_t": stats.se_ep_t,
        "sigma2_grid": sigma2_grid,
        "note": stats.degenerate,
        "variance_source": "sigma2_hat is the sample variance of this ensemble",
    });
    let text = sink.write_json("clt_report.json", &report)?;
    Ok((text.trim_end().to_string(), checks))
}

fn mdp(cfg: &RunConfig, model: &OUModel, sink: &mut Sink<'_>) -> Step {
    let thresholds = if cfg.sigma_units {
        Thresholds::SigmaMultiples(cfg.thresholds.clone())
    } else {
        Thresholds::Absolute(cfg.thresholds.clone())
    };
    let mcfg = MdpConfig {
        lambda_exponent: cfg.lambda_exponent,
        thresholds,
        ensemble: ensemble_config(cfg, cfg.initial_law.clone(), cfg.n_paths, cfg.t, cfg.seed),
    };
    let p = mdp_tail_profile(model, &mcfg).map_err(CliError::from_run)?;

    let mut csv = String::from("x,empirical_rate,theoretical_rate,flag\n");
    for i in 0..p.thresholds.len() {
        writeln!(
            csv,
            "{},{},{},{}",
            fmt_f64(p.thresholds[i]),
            fmt_f64(p.empirical_rates[i]),
            fmt_f64(p.theoretical_rates[i]),
            p.flags[i].as_deref().unwrap_or("")
        )
        .unwrap();
    }
    sink.write("mdp.csv", &csv)?;

    let mut checks = vec![CheckOutcome::new(
        "monotone_rates",
        p.unflagged_monotone(),
        "unflagged empirical rates nondecreasing in x",
    )];
    if p.note.is_none() {
        let ratios: Vec<f64> = p.rate_ratios().into_iter().flatten().collect();
        let in_band = !ratios.is_empty()
            && ratios.iter().all(|r| (MDP_RATIO_BAND.0..=MDP_RATIO_BAND.1).contains(r));
        checks.push(CheckOutcome::new(
            "rate_ratio_band",
            in_band,
            format!("empirical/theoretical = {ratios:.4?}"),
        ));
        let smallest = p
            .thresholds
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| p.tail_counts[i])
            .unwrap_or(0);
        checks.push(CheckOutcome::new(
            "min_tail_count",
            smallest >= MDP_MIN_TAIL_COUNT,
            format!("{smallest} events at the smallest threshold"),
        ));
    }

    let report = json!({
        "n_paths": p.n_paths,
        "t": p.t,
        "dt": cfg.dt,
        "initial_law": cfg.initial_law.to_string(),
        "e_p": model.entropy_production_rate(),
        "lambda_exponent": p.lambda_exponent,
        "lambda": p.lambda,
        "sigma2_hat": p.sigma2_hat,
        "thresholds": p.thresholds,
        "tail_counts": p.tail_counts,
        "empirical_rates": p.empirical_rates,
        "theoretical_rates": p.theoretical_rates,
        "flags": p.flags,
        "csv_file": "mdp.csv",
        "note": p.note,
        "variance_source": "theoretical rates use sigma2_hat of this ensemble",
    });
    let text = sink.write_json("mdp_report.json", &report)?;
    Ok((text.trim_end().to_string(), checks))
}

fn lil(cfg: &RunConfig, model: &OUModel, sink: &mut Sink<'_>) -> Step {
    let (sigma2, source) = match cfg.sigma2 {
        Some(s2) => (s2, "given".to_string()),
        None if model.reversible() => (0.0, REVERSIBLE_NOTE.to_string()),
        None => {
            let relax = 1.0 / model.functional_constants().decay_rate;
            let t_pilot = 50f64.max(10.0 * relax);
            let ens = ensemble_config(
                cfg,
                InitialLaw::Stationary,
                cfg.pilot_paths,
                t_pilot,
                derive_seed(cfg.seed, 1),
            );
            let stats = run_ensemble(model, &ens).map_err(CliError::from_run)?;
            (
                stats.sigma2_hat,
                format!("pilot ensemble: {} paths, t = {t_pilot}", cfg.pilot_paths),
            )
        }
    };
    let tr = lil_running_statistic(model, cfg.gamma_checkpoint, cfg.t, cfg.dt, cfg.seed)
        .map_err(CliError::from_run)?;

    let mut csv = String::from("k,t_k,S_t,R_t\n");
    for i in 0..tr.ks.len() {
        writeln!(
            csv,
            "{},{},{},{}",
            tr.ks[i],
            fmt_f64(tr.checkpoints[i]),
            fmt_f64(tr.s_values[i]),
            fmt_f64(tr.r_values[i])
        )
        .unwrap();
    }
    sink.write("lil.csv", &csv)?;

    let mut checks = Vec::new();
    if tr.note.is_some() {
        checks.push(CheckOutcome::new("degenerate", true, REVERSIBLE_NOTE));
    } else {
        let s = sigma2.sqrt();
        let (lo, hi) = LIL_BAND;
        checks.push(CheckOutcome::new(
            "running_max_band",
            tr.running_max > lo * s && tr.running_max < hi * s,
            format!("running_max = {:.4} sigma_hat", tr.running_max / s),
        ));
        checks.push(CheckOutcome::new(
            "running_min_band",
            tr.running_min < -lo * s && tr.running_min > -hi * s,
            format!("running_min = {:.4} sigma_hat", tr.running_min / s),
        ));
        checks.push(CheckOutcome::new(
            "envelope",
            tr.max_abs() <= LIL_ENVELOPE * s,
            format!("max |R| = {:.4} sigma_hat", tr.max_abs() / s),
        ));
    }

    let report = json!({
        "gamma_checkpoint": tr.gamma_checkpoint,
        "t_max": tr.t_max,
        "dt": tr.dt,
        "seed": tr.seed,
        "e_p": model.entropy_production_rate(),
        "sigma2_hat": sigma2,
        "sigma2_source": source,
        "n_checkpoints": tr.ks.len(),
        "running_max": tr.running_max,
        "running_min": tr.running_min,
        "csv_file": "lil.csv",
        "note": tr.note,
    });
    let text = sink.write_json("lil_report.json", &report)?;
    Ok((text.trim_end().to_string(), checks))
}

fn check(cfg: &RunConfig, model: &OUModel, sink: &mut Sink<'_>) -> Step {
    let mut csv = String::from("direction,t,lhs,bound,pass\n");
    let mut decay_ok = true;
    let mut n_rows = 0;
    for (j, v) in cfg.directions.iter().enumerate() {
        let rows = semigroup_decay_check(model, v, &cfg.t_grid).map_err(CliError::from_run)?;
        for r in rows {
            decay_ok &= r.pass;
            n_rows += 1;
            writeln!(csv, "{j},{},{},{},{}", fmt_f64(r.t), fmt_f64(r.lhs), fmt_f64(r.bound), r.pass)
                .unwrap();
        }
    }
    sink.write("decay.csv", &csv)?;

    let eta_max = model.functional_constants().eta_max;
    let eta = cfg.eta.unwrap_or(0.5 * eta_max);
    let full = exp_integrability_check(model, eta, cfg.t, cfg.n_paths, cfg.dt, cfg.seed)
        .map_err(CliError::from_run)?;
    let half = exp_integrability_check(model, eta, 0.5 * cfg.t, cfg.n_paths, cfg.dt, cfg.seed)
        .map_err(CliError::from_run)?;
    let linear_rel = if full.log_mgf_rate != 0.0 {
        (full.log_mgf_rate - half.log_mgf_rate).abs() / full.log_mgf_rate.abs()
    } else {
        (half.log_mgf_rate).abs()
    };

    let mut checks = vec![CheckOutcome::new(
        "semigroup_decay",
        decay_ok,
        format!("{n_rows} (direction, t) pairs"),
    )];
    // the bound is sufficient, not necessary: nothing is asserted at or above eta_max
    if eta < eta_max {
        checks.push(CheckOutcome::new(
            "exp_finite",
            full.finite && half.finite,
            full.diagnostic.clone().unwrap_or_else(|| "stable under doubling".into()),
        ));
        checks.push(CheckOutcome::new(
            "exp_within_bound",
            full.within_bound(),
            format!("rate {:.5} vs bound {:.5?}", full.log_mgf_rate, full.bound),
        ));
        checks.push(CheckOutcome::new(
            "exp_rate_linear_in_t",
            linear_rel <= EXP_LINEARITY,
            format!("relative difference t vs t/2: {linear_rel:.4}"),
        ));
    }

    let report = json!({
        "t_grid": cfg.t_grid,
        "directions": cfg.directions,
        "decay_file": "decay.csv",
        "decay_rate": model.functional_constants().decay_rate,
        "eta": eta,
        "eta_max": eta_max,
        "exp_integrability": [half, full],
        "rate_relative_difference": linear_rel,
    });
    let text = sink.write_json("check_report.json", &report)?;
    Ok((text.trim_end().to_string(), checks))
}
