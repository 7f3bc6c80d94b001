//! Run orchestration: single runs that march exactly onto the storage
//! cadence while accumulating the energy functional, viscosity sweeps
//! that reuse one ideal run, the viscous-vs-ideal gap series, and the
//! power-law fit of the gap against the viscosity scale. All report
//! files are written deterministically (fixed ordering, 17 significant
//! digits), so identical configurations give byte-identical artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{fmt_f64, to_canonical_json, Config};
use crate::conormal::{
    conormal_l2_field, energy_nm, ConormalError, MultiIndex, TimeRing,
};
use crate::diagnostics::{
    residual_div_identity, residual_dyp, residual_dyv1, residual_dyv2, wall_trace_drift,
};
use crate::dynamics::{cfl, div_b, dump_state, step, SolverError, SolverKind, StepControl};
use crate::grid::{ddy, Grid};
use crate::state::{make_initial, State, StateError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error("solver abort at t={time}: {source}")]
    Solver { time: f64, source: SolverError },
    #[error(transparent)]
    Conormal(#[from] ConormalError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("gap series needs runs on identical grids and cadences")]
    MismatchedRuns,
    #[error("rate fit needs at least 3 positive pairs, got {0}")]
    TooFewPairs(usize),
    #[error("rate fit inputs must be positive (gap series is degenerate)")]
    DegenerateFit,
}

/// One row of norms.csv: instantaneous blocks of the energy functional
/// at a report time plus the running accumulation up to that time.
#[derive(Debug, Clone)]
pub struct NormRow {
    pub time: f64,
    pub m: usize,
    pub kinetic: f64,
    pub magnetic: f64,
    pub acoustic: f64,
    pub dy1: f64,
    pub dy2: f64,
    pub grad_v: f64,
    pub div_v: f64,
    pub visc_v1: f64,
    pub visc_v2: f64,
    pub sup_core: f64,
    pub int_dy1: f64,
    pub int_dy2: f64,
    pub int_grad_v: f64,
    pub int_div_v: f64,
    pub int_visc_v1: f64,
    pub int_visc_v2: f64,
    pub nm_total: f64,
}

/// One row of diagnostics.csv.
#[derive(Debug, Clone)]
pub struct DiagRow {
    pub time: f64,
    pub name: &'static str,
    pub max_norm: f64,
    pub conormal_norm: f64,
}

/// Everything a single run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub label: String,
    pub epsilon: Option<f64>,
    /// Snapshot times (t = 0 plus every report time up to the horizon).
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<State>,
    pub norm_rows: Vec<NormRow>,
    pub diag_rows: Vec<DiagRow>,
    /// max over report times of the accumulated energy functional.
    pub nm_max: f64,
    pub wall_drift_max: f64,
}

pub fn epsilon_label(eps: Option<f64>) -> String {
    match eps {
        None => "ideal".to_string(),
        Some(e) => format!("eps_{e:e}"),
    }
}

/// Integrate one run to the horizon (plus the ring-centering margin),
/// landing exactly on every storage time, maintaining the running
/// supremum of the core energy blocks per multi-index and the time
/// integrals of the derivative blocks at the report cadence.
pub fn run_single(cfg: &Config, eps: Option<f64>) -> Result<RunOutput, RunError> {
    let grid = Grid::build(cfg.grid)?;
    let kind = match eps {
        Some(_) => SolverKind::Viscous,
        None => SolverKind::Ideal,
    };
    let params = cfg.physics.with_epsilon(eps.unwrap_or(0.0));
    let mut state = make_initial(&grid, params, &cfg.initial)?;
    let ctl = StepControl {
        cfl_adv: cfg.time.cfl_adv,
        cfl_visc: cfg.time.cfl_visc,
        dt_cap: cfg.time.dt_cap,
    };
    let store_dt = cfg.time.store_dt;
    let q = (cfg.time.report_dt / store_dt).round() as usize;
    let n_store_h = (cfg.time.horizon / store_dt + 1e-9).floor() as usize;
    let n_store_total = n_store_h + 2;
    let m = cfg.norms.m;
    let a0max = cfg.norms.alpha0_max;
    let alphas = MultiIndex::enumerate(m, a0max);

    let mut ring = TimeRing::new(5);
    ring.push(state.clone())?;
    let mut snapshots = vec![state.clone()];
    let mut snapshot_times = vec![0.0];
    let wall0: Vec<f64> = (0..grid.nx()).map(|i| state.b2.at(i, 0)).collect();

    let mut sup_core = vec![0.0f64; alphas.len()];
    let mut integrals = [0.0f64; 6];
    let mut prev_eval: Option<(f64, [f64; 6])> = None;
    let mut norm_rows = Vec::new();
    let mut diag_rows = Vec::new();
    let mut nm_max = 0.0f64;
    let mut wall_drift_max = 0.0f64;

    let solver_err = |time: f64| move |source: SolverError| RunError::Solver { time, source };

    for k in 1..=n_store_total {
        let target = k as f64 * store_dt;
        while state.time < target - 1e-13 {
            let dt_raw = cfl(&state, &ctl).map_err(solver_err(state.time))?;
            let dt = dt_raw.min(target - state.time);
            state = step(&state, dt, kind, None, cfg.filter_coeff)
                .map_err(solver_err(state.time))?;
            wall_drift_max = wall_drift_max.max(wall_trace_drift(&wall0, &state.b2));
        }
        state.time = target;
        ring.push(state.clone())?;

        if k % q == 0 && target <= cfg.time.horizon + 1e-9 {
            snapshots.push(state.clone());
            snapshot_times.push(target);
        }

        if !ring.is_full() {
            continue;
        }
        let k_mid = k - 2;
        if k_mid == 0 || k_mid % q != 0 || k_mid > n_store_h {
            continue;
        }
        let t_mid = k_mid as f64 * store_dt;
        let report = energy_nm(&ring, m, a0max)?;
        for (slot, (_, v)) in sup_core.iter_mut().zip(report.per_alpha_core.iter()) {
            *slot = slot.max(*v);
        }
        let inst = [
            report.dy1,
            report.dy2,
            report.grad_v,
            report.div_v,
            report.visc_v1,
            report.visc_v2,
        ];
        if let Some((t_prev, prev)) = prev_eval {
            let h = t_mid - t_prev;
            for (acc, (a, b)) in integrals.iter_mut().zip(prev.iter().zip(inst.iter())) {
                *acc += 0.5 * h * (a + b);
            }
        }
        prev_eval = Some((t_mid, inst));

        let sup_total: f64 = sup_core.iter().sum();
        let nm_total = sup_total + integrals.iter().sum::<f64>();
        nm_max = nm_max.max(nm_total);
        norm_rows.push(NormRow {
            time: t_mid,
            m,
            kinetic: report.kinetic,
            magnetic: report.magnetic,
            acoustic: report.acoustic,
            dy1: report.dy1,
            dy2: report.dy2,
            grad_v: report.grad_v,
            div_v: report.div_v,
            visc_v1: report.visc_v1,
            visc_v2: report.visc_v2,
            sup_core: sup_total,
            int_dy1: integrals[0],
            int_dy2: integrals[1],
            int_grad_v: integrals[2],
            int_div_v: integrals[3],
            int_visc_v1: integrals[4],
            int_visc_v2: integrals[5],
            nm_total,
        });

        let norm_order = m.saturating_sub(1);
        let mid_state = ring.middle();
        let residuals: [(&'static str, crate::grid::Field); 4] = [
            ("div_identity", residual_div_identity(&ring)?),
            ("dyv1", residual_dyv1(&ring)?),
            ("dyv2", residual_dyv2(&ring)?),
            ("dyp", residual_dyp(&ring)?),
        ];
        for (name, field) in residuals {
            diag_rows.push(DiagRow {
                time: t_mid,
                name,
                max_norm: field.max_abs(),
                conormal_norm: conormal_l2_field(&field, norm_order).sqrt(),
            });
        }
        let (_, div_max) = div_b(mid_state);
        diag_rows.push(DiagRow {
            time: t_mid,
            name: "div_b",
            max_norm: div_max,
            conormal_norm: div_max,
        });
        diag_rows.push(DiagRow {
            time: t_mid,
            name: "wall_trace",
            max_norm: wall_drift_max,
            conormal_norm: wall_drift_max,
        });
    }

    Ok(RunOutput {
        label: epsilon_label(eps),
        epsilon: eps,
        snapshot_times,
        snapshots,
        norm_rows,
        diag_rows,
        nm_max,
        wall_drift_max,
    })
}

/// One row of gaps.csv.
#[derive(Debug, Clone)]
pub struct GapRow {
    pub time: f64,
    pub eps: f64,
    pub gap_sup: f64,
    pub gap_dy_sup: f64,
}

impl GapRow {
    pub fn combined(&self) -> f64 {
        self.gap_sup.max(self.gap_dy_sup)
    }
}

/// Sup-norm gap between a viscous and the ideal run at every shared
/// snapshot time: max over the five fields of |difference| and of
/// |d_y difference|.
pub fn gap_series(viscous: &RunOutput, ideal: &RunOutput) -> Result<Vec<GapRow>, RunError> {
    if viscous.snapshot_times.len() != ideal.snapshot_times.len() {
        return Err(RunError::MismatchedRuns);
    }
    let eps = viscous.epsilon.ok_or(RunError::MismatchedRuns)?;
    let mut rows = Vec::new();
    for (k, (sv, si)) in viscous
        .snapshots
        .iter()
        .zip(ideal.snapshots.iter())
        .enumerate()
    {
        if sv.grid().spec != si.grid().spec
            || (viscous.snapshot_times[k] - ideal.snapshot_times[k]).abs() > 1e-12
        {
            return Err(RunError::MismatchedRuns);
        }
        let mut gap_sup = 0.0f64;
        let mut gap_dy = 0.0f64;
        for (fv, fi) in sv.fields().iter().zip(si.fields().iter()) {
            let d = fv.sub(fi);
            gap_sup = gap_sup.max(d.max_abs());
            gap_dy = gap_dy.max(ddy(&d).max_abs());
        }
        rows.push(GapRow {
            time: viscous.snapshot_times[k],
            eps,
            gap_sup,
            gap_dy_sup: gap_dy,
        });
    }
    Ok(rows)
}

/// Least-squares power law G = C eps^q in log space.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub q: f64,
    pub c: f64,
    /// RMS residual of log G around the fit.
    pub log_residual: f64,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit, RunError> {
    if pairs.len() < 3 {
        return Err(RunError::TooFewPairs(pairs.len()));
    }
    if pairs.iter().any(|&(e, g)| !(e > 0.0) || !(g > 0.0)) {
        return Err(RunError::DegenerateFit);
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|&(e, _)| e.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(_, g)| g.ln()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    let q = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let b = (sy - q * sx) / n;
    let mut rss = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let r = y - (q * x + b);
        rss += r * r;
    }
    Ok(RateFit {
        q,
        c: b.exp(),
        log_residual: (rss / n).sqrt(),
    })
}

/// Aggregated sweep results.
#[derive(Debug)]
pub struct SweepResult {
    pub uniformity_ratio: f64,
    pub g_max: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
    pub fit: Option<RateFit>,
    pub per_run_nm_max: Vec<(String, f64)>,
    pub wall_drift_max: f64,
}

fn write_norms_csv(path: &Path, rows: &[NormRow]) -> Result<(), RunError> {
    let mut out = String::new();
    out.push_str("time,m,kinetic,magnetic,acoustic,dy1,dy2,grad_v,div_v,visc_v1,visc_v2,sup_core,int_dy1,int_dy2,int_grad_v,int_div_v,int_visc_v1,int_visc_v2,nm_total\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.time),
            r.m,
            fmt_f64(r.kinetic),
            fmt_f64(r.magnetic),
            fmt_f64(r.acoustic),
            fmt_f64(r.dy1),
            fmt_f64(r.dy2),
            fmt_f64(r.grad_v),
            fmt_f64(r.div_v),
            fmt_f64(r.visc_v1),
            fmt_f64(r.visc_v2),
            fmt_f64(r.sup_core),
            fmt_f64(r.int_dy1),
            fmt_f64(r.int_dy2),
            fmt_f64(r.int_grad_v),
            fmt_f64(r.int_div_v),
            fmt_f64(r.int_visc_v1),
            fmt_f64(r.int_visc_v2),
            fmt_f64(r.nm_total),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_diag_csv(path: &Path, rows: &[DiagRow]) -> Result<(), RunError> {
    let mut out = String::new();
    out.push_str("time,residual,max_norm,conormal_norm\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.time),
            r.name,
            fmt_f64(r.max_norm),
            fmt_f64(r.conormal_norm)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_gaps_csv(path: &Path, rows: &[GapRow]) -> Result<(), RunError> {
    let mut out = String::new();
    out.push_str("time,eps,gap_sup,gap_dy_sup\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.time),
            fmt_f64(r.eps),
            fmt_f64(r.gap_sup),
            fmt_f64(r.gap_dy_sup)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write the artifacts of one completed run under dir/label/.
pub fn write_run(dir: &Path, cfg: &Config, run: &RunOutput) -> Result<PathBuf, RunError> {
    let run_dir = dir.join(&run.label);
    fs::create_dir_all(&run_dir)?;
    write_norms_csv(&run_dir.join("norms.csv"), &run.norm_rows)?;
    write_diag_csv(&run_dir.join("diagnostics.csv"), &run.diag_rows)?;
    if cfg.output.dump_fields {
        let mut f = fs::File::create(run_dir.join("fields_final.bin"))?;
        let last = run.snapshots.last().expect("runs snapshot t=0");
        dump_state(&mut f, last).map_err(|e| RunError::Solver {
            time: last.time,
            source: e,
        })?;
    }
    Ok(run_dir)
}

fn write_sweep_json(path: &Path, cfg: &Config, result: &SweepResult) -> Result<(), RunError> {
    let mut s = String::new();
    s.push_str("{\n\"config\": ");
    let canonical = to_canonical_json(cfg);
    s.push_str(canonical.trim_end());
    s.push_str(",\n\"results\": {\n");
    s.push_str(&format!(
        "  \"uniformity_ratio\": {},\n",
        fmt_f64(result.uniformity_ratio)
    ));
    s.push_str(&format!(
        "  \"gap_strictly_decreasing\": {},\n",
        result.strictly_decreasing
    ));
    match &result.fit {
        Some(f) => s.push_str(&format!(
            "  \"fit\": {{\"q\": {}, \"c\": {}, \"log_residual\": {}}},\n",
            fmt_f64(f.q),
            fmt_f64(f.c),
            fmt_f64(f.log_residual)
        )),
        None => s.push_str("  \"fit\": \"degenerate\",\n"),
    }
    s.push_str("  \"g_max\": [");
    for (k, (eps, g)) in result.g_max.iter().enumerate() {
        if k > 0 {
            s.push_str(", ");
        }
        s.push_str(&format!(
            "{{\"epsilon\": {}, \"g_max\": {}}}",
            fmt_f64(*eps),
            fmt_f64(*g)
        ));
    }
    s.push_str("],\n  \"nm_max\": [");
    for (k, (label, v)) in result.per_run_nm_max.iter().enumerate() {
        if k > 0 {
            s.push_str(", ");
        }
        s.push_str(&format!("{{\"run\": \"{label}\", \"nm_max\": {}}}", fmt_f64(*v)));
    }
    s.push_str("],\n");
    s.push_str(&format!(
        "  \"wall_drift_max\": {}\n",
        fmt_f64(result.wall_drift_max)
    ));
    s.push_str("}\n}\n");
    fs::write(path, s)?;
    Ok(())
}

/// Run the ideal solver once and each viscous epsilon once, assemble
/// the gap series and the uniformity/convergence summary, and write all
/// artifacts under `outdir`. Partial artifacts survive a member-run
/// failure.
pub fn run_sweep(cfg: &Config, outdir: &Path) -> Result<SweepResult, RunError> {
    fs::create_dir_all(outdir)?;
    let ideal = run_single(cfg, None)?;
    write_run(outdir, cfg, &ideal)?;

    let mut all_gaps: Vec<GapRow> = Vec::new();
    let mut g_max = Vec::new();
    let mut per_run_nm_max = vec![("ideal".to_string(), ideal.nm_max)];
    let mut nm_lo = f64::INFINITY;
    let mut nm_hi = 0.0f64;
    let mut wall_drift_max = ideal.wall_drift_max;
    for &eps in &cfg.epsilon_list {
        let run = run_single(cfg, Some(eps))?;
        write_run(outdir, cfg, &run)?;
        let gaps = gap_series(&run, &ideal)?;
        let gm = gaps.iter().fold(0.0f64, |m, r| m.max(r.combined()));
        g_max.push((eps, gm));
        per_run_nm_max.push((run.label.clone(), run.nm_max));
        nm_lo = nm_lo.min(run.nm_max);
        nm_hi = nm_hi.max(run.nm_max);
        wall_drift_max = wall_drift_max.max(run.wall_drift_max);
        all_gaps.extend(gaps);
    }
    write_gaps_csv(&outdir.join("gaps.csv"), &all_gaps)?;

    let uniformity_ratio = if nm_hi == 0.0 { 1.0 } else { nm_hi / nm_lo };
    let strictly_decreasing = g_max.windows(2).all(|w| w[1].1 < w[0].1);
    let fit = fit_rate(&g_max).ok();
    let result = SweepResult {
        uniformity_ratio,
        g_max,
        strictly_decreasing,
        fit,
        per_run_nm_max,
        wall_drift_max,
    };
    write_sweep_json(&outdir.join("sweep.json"), cfg, &result)?;
    Ok(result)
}

/// Convenience: run one configuration with the writer, used by the CLI.
pub fn run_and_write(cfg: &Config, eps: Option<f64>, outdir: &Path) -> Result<RunOutput, RunError> {
    fs::create_dir_all(outdir)?;
    let run = run_single(cfg, eps)?;
    write_run(outdir, cfg, &run)?;
    Ok(run)
}

/// Echo helper for humans watching a sweep.
pub fn print_sweep_summary(w: &mut dyn Write, result: &SweepResult) -> std::io::Result<()> {
    writeln!(w, "uniformity ratio R = {:.6}", result.uniformity_ratio)?;
    for (eps, g) in &result.g_max {
        writeln!(w, "  eps = {eps:10.4e}  G_max = {g:.6e}")?;
    }
    writeln!(
        w,
        "gap strictly decreasing: {}",
        result.strictly_decreasing
    )?;
    match &result.fit {
        Some(f) => writeln!(
            w,
            "fit: G ~ {:.4e} * eps^{:.4} (log residual {:.4})",
            f.c, f.q, f.log_residual
        )?,
        None => writeln!(w, "fit: degenerate (all gaps zero)")?,
    }
    Ok(())
}
