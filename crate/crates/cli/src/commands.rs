use std::f64::consts::PI;
use std::path::PathBuf;

use holonomic_noise::bath::composite_k;
use holonomic_noise::functionals::{
    c1_breakdown, delta_pd_meridian, delta_pd_parallel, delta_tr_path, fit_powerlaw, PowerLawFit,
};
use holonomic_noise::geometry::{theta_m_for_time, C1Loop};
use holonomic_noise::optimize::{self, AppendixReport, BruteForceResult, OptimizedLoop};
use holonomic_noise::oracle::{average_error_oracle, stirap_error, OracleOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{pretty, write_artifact, Table};
use crate::{CliError, Format};

pub struct Out {
    pub path: Option<PathBuf>,
    pub format: Format,
}

impl Out {
    fn table(&self, t: &Table) -> Result<(), CliError> {
        write_artifact(self.path.as_deref(), &t.render(self.format))
    }

    /// Records are always JSON; `--format` only affects tables.
    fn record<T: Serialize>(&self, v: &T) -> Result<(), CliError> {
        write_artifact(self.path.as_deref(), &pretty(v))
    }
}

pub fn sweep_theta(cfg: &RunConfig, out: &Out) -> Result<(), CliError> {
    let grid = cfg.theta_grid();
    let sw = optimize::sweep_theta(&cfg.gate, &cfg.params, &cfg.bath, cfg.temperature(), &grid)?;
    let mut t = Table::new(&["theta_m", "delta_tr", "delta_tr_meridian", "delta_tr_parallel"]);
    for p in &sw.points {
        let b = &p.breakdown;
        t.push(vec![p.x, b.delta_tr(), b.delta_tr_meridian, b.delta_tr_parallel]);
    }
    out.table(&t)
}

fn critical_time_bounds(cfg: &RunConfig, lo: f64, hi: f64) -> Result<(f64, f64), CliError> {
    let kc = optimize::critical_k(&cfg.gate)?;
    Ok((lo * kc / cfg.params.v_max, hi * kc / cfg.params.v_max))
}

pub fn sweep_time(cfg: &RunConfig, out: &Out) -> Result<(), CliError> {
    let (lo, hi) = critical_time_bounds(cfg, 0.25, 50.0)?;
    let grid = cfg.time_grid(lo, hi);
    let sw = optimize::sweep_time(&cfg.gate, &cfg.params, &cfg.bath, cfg.temperature(), &grid)?;
    let mut t = Table::new(&["v_t", "delta_tr", "reference_line"]);
    for p in &sw.points {
        t.push(vec![cfg.params.v_max * p.x, p.breakdown.delta_tr(), sw.reference_line]);
    }
    out.table(&t)
}

#[derive(Serialize)]
struct OptimizeRecord<'a> {
    gate: &'a holonomic_noise::model::GateSpec,
    temperature_mev: f64,
    t_ad_ps: f64,
    result: OptimizedLoop,
}

pub fn optimize(cfg: &RunConfig, out: &Out) -> Result<(), CliError> {
    let result = optimize::optimize_loop(
        &cfg.gate,
        &cfg.params,
        &cfg.bath,
        cfg.temperature(),
        cfg.run.t_ad_ps,
        cfg.run.pd_window,
    )?;
    if !result.breakdown.perturbative {
        eprintln!("warning: error breakdown is outside the perturbative range");
    }
    let rec = OptimizeRecord { gate: &cfg.gate, temperature_mev: cfg.temperature(), t_ad_ps: cfg.run.t_ad_ps, result };
    out.record(&rec)
}

#[derive(Serialize)]
struct CriticalRecord {
    gate: String,
    solid_angle: f64,
    k_c: f64,
    asymptotic_k_c: f64,
    critical_time_ps: f64,
}

pub fn critical_k(cfg: &RunConfig, out: &Out) -> Result<(), CliError> {
    let a = cfg.gate.solid_angle;
    let k_c = optimize::critical_k(&cfg.gate)?;
    let rec = CriticalRecord {
        gate: cfg.gate.label.to_string(),
        solid_angle: a,
        k_c,
        asymptotic_k_c: 32.0 * a * a / PI,
        critical_time_ps: k_c / cfg.params.v_max,
    };
    out.record(&rec)
}

#[derive(Serialize)]
struct ScalingFits {
    delta_tr: Option<PowerLawFit>,
    delta_pd_meridian: Option<PowerLawFit>,
    delta_pd_parallel: Option<PowerLawFit>,
}

pub fn scaling(cfg: &RunConfig, out: &Out) -> Result<(), CliError> {
    let (lo, hi) = critical_time_bounds(cfg, 2.0, 20.0)?;
    let grid = cfg.time_grid(lo, hi);
    let a = cfg.gate.solid_angle;
    let v = cfg.params.v_max;
    let k = composite_k(&cfg.params, &cfg.bath, cfg.temperature())?.k_per_ps();
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&t| {
            let l = C1Loop::for_solid_angle(a, theta_m_for_time(a, v, t)?, v)?;
            let b = c1_breakdown(&l, &cfg.gate, k, &cfg.bath, cfg.temperature(), cfg.run.pd_window)?;
            Ok(vec![t, b.delta_tr(), b.delta_pd_meridian, b.delta_pd_parallel])
        })
        .collect::<Result<_, holonomic_noise::Error>>()?;
    let fit = |col: usize| fit_powerlaw(&rows.iter().map(|r| (r[0], r[col])).collect::<Vec<_>>()).ok();
    let fits = ScalingFits { delta_tr: fit(1), delta_pd_meridian: fit(2), delta_pd_parallel: fit(3) };
    let mut t = Table::new(&["t_ad_ps", "delta_tr", "delta_pd_meridian", "delta_pd_parallel"]);
    rows.into_iter().for_each(|r| t.push(r));
    match out.format {
        Format::Json => {
            let rec = serde_json::json!({ "rows": t.to_json(), "fits": fits });
            write_artifact(out.path.as_deref(), &pretty(&rec))
        }
        Format::Csv => {
            out.table(&t)?;
            let text = pretty(&fits);
            match &out.path {
                Some(p) => {
                    let mut side = p.clone().into_os_string();
                    side.push(".fits.json");
                    std::fs::write(PathBuf::from(side), text)?;
                }
                None => eprint!("{text}"),
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct AppendixRecord {
    seed: u64,
    samples: usize,
    passed_samples: usize,
    failures: Vec<AppendixReport>,
    brute_force: BruteForceResult,
    brute_force_within_cell: bool,
    passed: bool,
}

pub fn verify_appendix(cfg: &RunConfig, out: &Out) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let v = cfg.params.v_max;
    let loops: Vec<_> = (0..cfg.run.samples).map(|_| optimize::random_c2(&mut rng, v, 4.0 * PI)).collect();
    let reports: Vec<AppendixReport> =
        loops.iter().map(optimize::verify_appendix_inequalities).collect::<Result<_, _>>()?;
    let passed_samples = reports.iter().filter(|r| r.passed()).count();
    let failures: Vec<AppendixReport> = reports.into_iter().filter(|r| !r.passed()).take(10).collect();
    let bf = optimize::brute_force_minimizer(
        &cfg.gate,
        cfg.run.resolution,
        cfg.run.max_parallels,
        cfg.run.splits,
        cfg.run.t_budget_ps.map(|t| t * v),
    )?;
    let gap = bf.best_c1_delta_tr - bf.delta_tr;
    let within = gap >= 0.0 && gap < bf.grid_cell_error.max(f64::EPSILON);
    let passed = passed_samples == cfg.run.samples && within;
    let rec = AppendixRecord {
        seed: cfg.run.seed,
        samples: cfg.run.samples,
        passed_samples,
        failures,
        brute_force: bf,
        brute_force_within_cell: within,
        passed,
    };
    out.record(&rec)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{passed_samples}/{} loops satisfy the inequalities, brute force within one cell: {within}",
            cfg.run.samples
        )))
    }
}

pub fn oracle_check(cfg: &RunConfig, out: &Out) -> Result<(), CliError> {
    let p = &cfg.params;
    let b = &cfg.bath;
    let temp = cfg.temperature();
    let k = composite_k(p, b, temp)?.k_per_ps();
    let opts = OracleOptions { steps: cfg.run.steps, sign: cfg.run.kernel_sign };
    let mut t = Table::new(&["theta_m", "delta_phi", "t_ad_ps", "closed_form", "oracle", "relative_gap"]);
    let mut worst = 0.0f64;
    for &(th, dphi) in &cfg.run.oracle_loops {
        let c = C1Loop::new(th, dphi, p.v_max)?;
        let path = c.to_path();
        let closed = delta_tr_path(&path, k).delta_tr()
            + delta_pd_meridian(&c, b, temp)?
            + delta_pd_parallel(&c, b, temp, cfg.run.pd_window)?;
        let o = average_error_oracle(&path, cfg.run.noise, p, b, temp, opts)?;
        let gap = (o.delta - closed) / closed;
        worst = worst.max(gap.abs());
        t.push(vec![th, dphi, c.total_time(), closed, o.delta, gap]);
    }
    out.table(&t)?;
    if worst > 0.1 {
        return Err(CliError::Verification(format!("largest relative gap {worst:.3} exceeds 0.1")));
    }
    Ok(())
}

pub fn compare_stirap(cfg: &RunConfig, out: &Out) -> Result<(), CliError> {
    let t_min = 2.0 * PI / cfg.params.v_max;
    let grid = cfg.time_grid(t_min, 10.0 * t_min);
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&t| {
            let h = optimize::optimize_loop(&cfg.gate, &cfg.params, &cfg.bath, cfg.temperature(), t, cfg.run.pd_window)?;
            let s = stirap_error(&cfg.gate, &cfg.params, &cfg.bath, cfg.temperature(), t, cfg.run.stirap_fill)?;
            let tr = h.breakdown.delta_tr();
            Ok(vec![t, tr, h.breakdown.total, s, tr / s])
        })
        .collect::<Result<_, holonomic_noise::Error>>()?;
    let mut t = Table::new(&["t_ad_ps", "delta_holonomic_tr", "delta_holonomic_total", "delta_stirap_tr", "ratio_tr"]);
    rows.into_iter().for_each(|r| t.push(r));
    out.table(&t)
}
