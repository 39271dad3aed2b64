//! Loop selection for a fixed gate: parameter sweeps, the critical
//! time-speed product, the optimal C1 loop, and numerical checks that
//! staircase loops with more parallels never beat the best C1 loop.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{composite_k, BathSpec};
use crate::functionals::{
    c1_breakdown, delta_tr_meridian, delta_tr_parallel, delta_tr_path, ErrorBreakdown, PdWindow,
};
use crate::geometry::{theta_m_for_time, C1Loop, CnLoop};
use crate::model::{GateSpec, PhysicalParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub breakdown: ErrorBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
    pub gate: GateSpec,
    pub params: PhysicalParams,
    pub bath: BathSpec,
    pub temperature: f64,
    /// K in 1/ps used for every point.
    pub k_per_ps: f64,
    /// Kπ/(2 v_max), the error of the equatorial loop.
    pub reference_line: f64,
}

fn check_increasing(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// δ_tr/(K/v) of the C1 loop at `theta_m` enclosing `a`:
/// θ − sin4θ/4 + a sinθ sin²2θ/(1 − cosθ).
pub fn reduced_delta_tr(theta_m: f64, a: f64) -> Result<f64> {
    Ok(delta_tr_meridian(theta_m, 1.0, 1.0) + delta_tr_parallel(theta_m, a, 1.0, 1.0)?)
}

fn setup(gate: &GateSpec, params: &PhysicalParams, spec: &BathSpec, temperature: f64) -> Result<f64> {
    gate.validate()?;
    params.validate()?;
    spec.validate()?;
    Ok(composite_k(params, spec, temperature)?.k_per_ps())
}

/// δ_tr of the C1 loop against θ_M at v = v_max.
pub fn sweep_theta(
    gate: &GateSpec,
    params: &PhysicalParams,
    spec: &BathSpec,
    temperature: f64,
    grid: &[f64],
) -> Result<SweepResult> {
    check_increasing(grid)?;
    if grid.iter().any(|&t| !(t > 0.0 && t <= PI)) {
        return Err(Error::InvalidParameter("θ_M grid must lie in (0, π]".into()));
    }
    let k = setup(gate, params, spec, temperature)?;
    let v = params.v_max;
    let points = grid
        .iter()
        .map(|&th| {
            Ok(SweepPoint {
                x: th,
                breakdown: ErrorBreakdown::transition(
                    delta_tr_meridian(th, v, k),
                    delta_tr_parallel(th, gate.solid_angle, v, k)?,
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis: "theta_m".into(),
        points,
        gate: *gate,
        params: *params,
        bath: *spec,
        temperature,
        k_per_ps: k,
        reference_line: k * PI / (2.0 * v),
    })
}

/// δ_tr against gate time (ps), with θ_M from [`theta_m_for_time`].
pub fn sweep_time(
    gate: &GateSpec,
    params: &PhysicalParams,
    spec: &BathSpec,
    temperature: f64,
    grid_ps: &[f64],
) -> Result<SweepResult> {
    check_increasing(grid_ps)?;
    let k = setup(gate, params, spec, temperature)?;
    let v = params.v_max;
    let points = grid_ps
        .iter()
        .map(|&t| {
            let th = theta_m_for_time(gate.solid_angle, v, t)?;
            Ok(SweepPoint {
                x: t,
                breakdown: ErrorBreakdown::transition(
                    delta_tr_meridian(th, v, k),
                    delta_tr_parallel(th, gate.solid_angle, v, k)?,
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis: "t_ad_ps".into(),
        points,
        gate: *gate,
        params: *params,
        bath: *spec,
        temperature,
        k_per_ps: k,
        reference_line: k * PI / (2.0 * v),
    })
}

/// Product k = v·t above which the shrinking loop beats the equatorial one:
/// the crossing of δ_tr(θ_M(k)) with Kπ/(2v) past the first minimum at
/// k = a. Depends on the solid angle only.
pub fn critical_k(gate: &GateSpec) -> Result<f64> {
    gate.validate()?;
    let a = gate.solid_angle;
    let h = |k: f64| -> Result<f64> { Ok(reduced_delta_tr(theta_m_for_time(a, 1.0, k)?, a)? - PI / 2.0) };
    let mut lo = 1.5 * a;
    if h(lo)? <= 0.0 {
        return Err(Error::NoCrossing(format!(
            "error at v·t = {lo} is already below the equatorial value"
        )));
    }
    let mut hi = lo;
    loop {
        hi *= 1.5;
        if h(hi)? < 0.0 {
            break;
        }
        if hi > 1e8 {
            return Err(Error::NoCrossing(format!("no crossing below v·t = {hi}")));
        }
        lo = hi;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if h(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopChoice {
    /// θ_M = π/2.
    Equatorial,
    /// θ_M from the time budget.
    Scheduled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedLoop {
    pub choice: LoopChoice,
    #[serde(rename = "loop")]
    pub c1: C1Loop,
    pub breakdown: ErrorBreakdown,
    pub k_c: f64,
    pub k_per_ps: f64,
    pub v_t: f64,
}

/// Best C1 loop for a gate within `t_budget_ps`, with the full error
/// breakdown. Below the critical product the equatorial loop wins, above it
/// the loop whose θ_M the budget allows.
pub fn optimize_loop(
    gate: &GateSpec,
    params: &PhysicalParams,
    spec: &BathSpec,
    temperature: f64,
    t_budget_ps: f64,
    window: PdWindow,
) -> Result<OptimizedLoop> {
    let k = setup(gate, params, spec, temperature)?;
    let v = params.v_max;
    let a = gate.solid_angle;
    let vt = v * t_budget_ps;
    if !(vt.is_finite() && vt >= a) {
        return Err(Error::Infeasible(format!(
            "time budget {t_budget_ps} ps gives v·t = {vt}, below the solid angle {a} needed by the equatorial loop"
        )));
    }
    let k_c = critical_k(gate)?;
    let th_sched = theta_m_for_time(a, v, t_budget_ps)?;
    let eq = reduced_delta_tr(PI / 2.0, a)?;
    let sched = reduced_delta_tr(th_sched, a)?;
    let (choice, th) = if vt >= k_c && sched <= eq {
        (LoopChoice::Scheduled, th_sched)
    } else {
        (LoopChoice::Equatorial, PI / 2.0)
    };
    let c1 = C1Loop::for_solid_angle(a, th, v)?;
    let breakdown = c1_breakdown(&c1, gate, k, spec, temperature, window)?;
    Ok(OptimizedLoop { choice, c1, breakdown, k_c, k_per_ps: k, v_t: vt })
}

/// Draws a C2 loop with θ₁ < θ₂ in (0, π) and Δφ₁, Δφ₂ in (0, `max_dphi`).
pub fn random_c2<R: Rng>(rng: &mut R, speed: f64, max_dphi: f64) -> CnLoop {
    let mut a: f64 = rng.random_range(1e-3..PI - 1e-3);
    let mut b: f64 = rng.random_range(1e-3..PI - 1e-3);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let d1 = rng.random_range(1e-3..max_dphi);
    let d2 = rng.random_range(1e-3..max_dphi);
    CnLoop { levels: vec![(a, d1), (b, d2)], speed }
}

/// Comparison of a C2 loop with the two C1 loops of equal solid angle at
/// its two polar angles. Errors are in units of K/v.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub theta_1: f64,
    pub theta_2: f64,
    pub solid_angle: f64,
    pub c2: ErrorBreakdown,
    pub c1_at_theta_1: ErrorBreakdown,
    pub c1_at_theta_2: ErrorBreakdown,
    /// δᴾ(C2) − δᴾ(C1 at θ₂) = Δφ₁[sinθ₁ sin²2θ₁ − (1−cosθ₁)/(1−cosθ₂) sinθ₂ sin²2θ₂].
    pub parallel_gap_vs_theta_2: f64,
    /// δᴾ(C2) − δᴾ(C1 at θ₁) = Δφ₂[sinθ₂ sin²2θ₂ − (1−cosθ₂)/(1−cosθ₁) sinθ₁ sin²2θ₁].
    pub parallel_gap_vs_theta_1: f64,
    /// δᴹ(C1 at θ₁) ≤ δᴹ(C1 at θ₂) = δᴹ(C2).
    pub meridian_ordering: bool,
    /// The two parallel gaps are not both negative.
    pub gaps_not_both_negative: bool,
    /// min over the two C1 loops ≤ δ(C2).
    pub c1_dominates: bool,
}

impl AppendixReport {
    pub fn passed(&self) -> bool {
        self.meridian_ordering && self.gaps_not_both_negative && self.c1_dominates
    }
}

/// Checks the C2 → C1 replacement argument on one loop.
pub fn verify_appendix_inequalities(c2: &CnLoop) -> Result<AppendixReport> {
    let [(t1, d1), (t2, d2)] = match c2.levels.as_slice() {
        [x, y] => [*x, *y],
        _ => return Err(Error::InvalidParameter("expected a loop with two parallels".into())),
    };
    if !(t1 > 0.0 && t1 <= t2 && t2 < PI) || !(d1 >= 0.0 && d2 >= 0.0) {
        return Err(Error::Infeasible(format!(
            "need 0 < θ₁ ≤ θ₂ < π and Δφ ≥ 0, got θ = ({t1}, {t2}), Δφ = ({d1}, {d2})"
        )));
    }
    let a = c2.solid_angle();
    let unit = 1.0;
    let path = c2.to_path()?;
    let c2_err = delta_tr_path(&path, unit * c2.speed);
    let one = |th: f64| -> Result<ErrorBreakdown> {
        let l = C1Loop::for_solid_angle(a, th, c2.speed)?;
        Ok(delta_tr_path(&l.to_path(), c2.speed))
    };
    let (e1, e2) = (one(t1)?, one(t2)?);
    let s = |th: f64| th.sin() * (2.0 * th).sin().powi(2);
    let omc = |th: f64| 2.0 * (0.5 * th).sin().powi(2);
    let gap2 = d1 * (s(t1) - omc(t1) / omc(t2) * s(t2));
    let gap1 = d2 * (s(t2) - omc(t2) / omc(t1) * s(t1));
    let tol = 1e-12 * (1.0 + c2_err.total);
    let meridian_ordering = e1.delta_tr_meridian <= e2.delta_tr_meridian + tol
        && (e2.delta_tr_meridian - c2_err.delta_tr_meridian).abs() <= tol;
    let gaps_not_both_negative = gap1 >= -tol || gap2 >= -tol;
    let c1_dominates = e1.total.min(e2.total) <= c2_err.total + tol;
    Ok(AppendixReport {
        theta_1: t1,
        theta_2: t2,
        solid_angle: a,
        c2: c2_err,
        c1_at_theta_1: e1,
        c1_at_theta_2: e2,
        parallel_gap_vs_theta_2: gap2,
        parallel_gap_vs_theta_1: gap1,
        meridian_ordering,
        gaps_not_both_negative,
        c1_dominates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub best: CnLoop,
    /// δ_tr/(K/v) of `best`.
    pub delta_tr: f64,
    pub best_c1: C1Loop,
    pub best_c1_delta_tr: f64,
    /// Largest change of the C1 error between the best grid angle and its
    /// neighbours.
    pub grid_cell_error: f64,
    pub evaluated: usize,
}

/// Exhaustive search over monotone staircase loops with up to `max_n`
/// parallels on the polar grid kπ/`resolution`, k = 1…resolution − 1, with
/// the solid angle shared between the parallels in steps of 1/`splits`.
/// With `time_budget` (in units of 1/v, i.e. a bound on v·t) only loops
/// whose total duration fits are considered. Errors are in units of K/v.
pub fn brute_force_minimizer(
    gate: &GateSpec,
    resolution: usize,
    max_n: usize,
    splits: usize,
    time_budget: Option<f64>,
) -> Result<BruteForceResult> {
    gate.validate()?;
    if resolution < 4 || !(1..=3).contains(&max_n) || splits < 2 {
        return Err(Error::InvalidParameter(
            "brute force needs resolution >= 4, 1 <= n <= 3 and splits >= 2".into(),
        ));
    }
    let a = gate.solid_angle;
    let grid: Vec<f64> = (1..resolution).map(|k| k as f64 * PI / resolution as f64).collect();
    let omc = |th: f64| 2.0 * (0.5 * th).sin().powi(2);
    let s = |th: f64| th.sin() * (2.0 * th).sin().powi(2);
    let fm = |th: f64| th - (4.0 * th).sin() / 4.0;

    // Score of a staircase at v = K = 1: meridian weight fixed by the top
    // level, parallel weight Σ aᵢ sᵢ/(1 − cosθᵢ); duration 2θ_top + Σ Δφᵢ sinθᵢ.
    let score = |levels: &[(usize, f64)]| -> Option<(f64, Vec<(f64, f64)>)> {
        let top = grid[levels.last()?.0];
        let mut err = fm(top);
        let mut time = 2.0 * top;
        let mut out = Vec::with_capacity(levels.len());
        for &(i, frac) in levels {
            let th = grid[i];
            let dphi = frac * a / omc(th);
            err += dphi * s(th);
            time += dphi * th.sin();
            out.push((th, dphi));
        }
        if let Some(b) = time_budget {
            if time > b * (1.0 + 1e-12) {
                return None;
            }
        }
        Some((err, out))
    };

    let fractions: Vec<f64> = (1..splits).map(|j| j as f64 / splits as f64).collect();
    let m = grid.len();
    let per_first: Vec<(Option<(f64, Vec<(f64, f64)>)>, usize)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, Vec<(f64, f64)>)> = None;
            let mut count = 0usize;
            let mut consider = |cand: Option<(f64, Vec<(f64, f64)>)>, count: &mut usize| {
                *count += 1;
                if let Some(c) = cand {
                    if best.as_ref().is_none_or(|b| c.0 < b.0) {
                        best = Some(c);
                    }
                }
            };
            consider(score(&[(i, 1.0)]), &mut count);
            if max_n >= 2 {
                for j in i + 1..m {
                    for &f in &fractions {
                        consider(score(&[(i, f), (j, 1.0 - f)]), &mut count);
                    }
                    if max_n >= 3 {
                        for k in j + 1..m {
                            for &f1 in &fractions {
                                for &f2 in &fractions {
                                    if f1 + f2 < 1.0 - 1e-12 {
                                        consider(
                                            score(&[(i, f1), (j, f2), (k, 1.0 - f1 - f2)]),
                                            &mut count,
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
            (best, count)
        })
        .collect();
    let evaluated = per_first.iter().map(|x| x.1).sum();
    let (delta_tr, levels) = per_first
        .into_iter()
        .filter_map(|x| x.0)
        .fold(None::<(f64, Vec<(f64, f64)>)>, |acc, c| match acc {
            Some(b) if b.0 <= c.0 => Some(b),
            _ => Some(c),
        })
        .ok_or_else(|| Error::Infeasible("no staircase loop fits the time budget".into()))?;

    let c1_scores: Vec<Option<f64>> = (0..m).map(|i| score(&[(i, 1.0)]).map(|x| x.0)).collect();
    let (bi, bv) = c1_scores
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None::<(usize, f64)>, |acc, (i, v)| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((i, v)),
        })
        .ok_or_else(|| Error::Infeasible("no C1 loop fits the time budget".into()))?;
    let neighbours = [bi.checked_sub(1), Some(bi + 1)];
    let grid_cell_error = neighbours
        .iter()
        .flatten()
        .filter_map(|&j| c1_scores.get(j).copied().flatten())
        .map(|v| (v - bv).abs())
        .fold(0.0, f64::max);
    Ok(BruteForceResult {
        best: CnLoop { levels, speed: 1.0 },
        delta_tr,
        best_c1: C1Loop::for_solid_angle(a, grid[bi], 1.0)?,
        best_c1_delta_tr: bv,
        grid_cell_error,
        evaluated,
    })
}
