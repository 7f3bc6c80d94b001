//! Right-hand sides and time integration for the viscous and ideal
//! systems in non-conservative variables (rho, v, B).
//!
//! The induction equation is discretized in EMF-curl form,
//! d_t b1 = d_y E, d_t b2 = -d_x E with E = v1 b2 - v2 b1, so the
//! discrete divergence of B has no evolution mechanism of its own and
//! the wall row of b2 is frozen exactly under no-slip. Time stepping is
//! classical four-stage Runge-Kutta with boundary rows reimposed after
//! every stage. A truncated top boundary is pinned to the background
//! (or to the manufactured solution) and backed by a quadratic sponge
//! over the top tenth of the domain.

pub mod mms;

use std::io::{Read as IoRead, Write as IoWrite};

use thiserror::Error;

use crate::grid::{ddx, ddx2, ddy, ddy2, Field};
use crate::state::{pressure, State};

use mms::MmsSolution;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("non-finite field values after RK stage {stage} at t={time}")]
    NonFinite { stage: usize, time: f64 },
    #[error("density lost positivity at node ({i}, {j}) at t={time}: rho={value}")]
    NonPositiveDensity {
        i: usize,
        j: usize,
        time: f64,
        value: f64,
    },
    #[error("non-finite wave speed in the CFL bound at t={time}")]
    BadWaveSpeed { time: f64 },
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("viscous solver needs epsilon > 0, got {0}")]
    ZeroViscosity(f64),
    #[error("field dump i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("field dump header malformed: {0}")]
    BadDump(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Viscous,
    Ideal,
}

/// Courant numbers and optional hard cap for the explicit step.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub cfl_adv: f64,
    pub cfl_visc: f64,
    pub dt_cap: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl_adv: 0.4,
            cfl_visc: 0.25,
            dt_cap: None,
        }
    }
}

/// Time derivatives of the five fields.
#[derive(Debug, Clone)]
pub struct RhsBundle {
    pub d_rho: Field,
    pub d_v1: Field,
    pub d_v2: Field,
    pub d_b1: Field,
    pub d_b2: Field,
}

/// External forcing added to the bundle component-wise (the method of
/// manufactured solutions drives the solver through this).
#[derive(Debug, Clone)]
pub struct Forcing {
    pub rho: Field,
    pub v1: Field,
    pub v2: Field,
    pub b1: Field,
    pub b2: Field,
}

/// Background values (rho, v1, v2, b1, b2) of the truncated far field.
pub const BACKGROUND: [f64; 5] = [1.0, 0.0, 0.0, 0.0, 1.0];

/// Sponge occupies the top tenth of the strip.
pub const SPONGE_DEPTH: f64 = 0.1;
/// Relaxation rate at the very top of the sponge (ramps quadratically
/// from zero at its lower edge).
pub const SPONGE_RATE_MAX: f64 = 5.0;

/// Sponge relaxation rate at height y.
pub fn sponge_rate(y: f64, ymax: f64) -> f64 {
    let ys = (1.0 - SPONGE_DEPTH) * ymax;
    if y <= ys {
        0.0
    } else {
        let r = (y - ys) / (ymax - ys);
        SPONGE_RATE_MAX * r * r
    }
}

/// Planar Lorentz force (curl B) x B: with j = d_x b2 - d_y b1 the
/// components are (-j b2, j b1).
pub fn lorentz_force(b1: &Field, b2: &Field) -> (Field, Field) {
    let j = ddx(b2).sub(&ddy(b1));
    let f1 = j.mul(b2).scale(-1.0);
    let f2 = j.mul(b1);
    (f1, f2)
}

/// Induction equation in EMF-curl form: E = v1 b2 - v2 b1,
/// (d_t b1, d_t b2) = (d_y E, -d_x E).
pub fn induction_emf(v1: &Field, v2: &Field, b1: &Field, b2: &Field) -> (Field, Field) {
    let emf = v1.mul(b2).sub(&v2.mul(b1));
    (ddy(&emf), ddx(&emf).scale(-1.0))
}

/// Discrete div B = d_x b1 + d_y b2 and its max-norm.
pub fn div_b(s: &State) -> (Field, f64) {
    let d = ddx(&s.b1).add(&ddy(&s.b2));
    let m = d.max_abs();
    (d, m)
}

fn check_density(s: &State) -> Result<(), SolverError> {
    let g = s.grid().clone();
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let r = s.rho.at(i, j);
            if !(r > 0.0) {
                return Err(SolverError::NonPositiveDensity {
                    i,
                    j,
                    time: s.time,
                    value: r,
                });
            }
        }
    }
    Ok(())
}

/// Assemble the right-hand side of the chosen system, including sponge
/// and optional forcing, with the boundary rows of the bundle zeroed
/// (wall velocity rows per the solver kind, top rows entirely).
pub fn rhs(s: &State, kind: SolverKind, forcing: Option<&Forcing>) -> Result<RhsBundle, SolverError> {
    if kind == SolverKind::Viscous && !(s.params.epsilon > 0.0) {
        return Err(SolverError::ZeroViscosity(s.params.epsilon));
    }
    check_density(s)?;
    let g = s.grid().clone();
    let params = s.params;
    let p = pressure(&s.rho, params.gamma).expect("density checked above");

    let rho_x = ddx(&s.rho);
    let rho_y = ddy(&s.rho);
    let v1x = ddx(&s.v1);
    let v1y = ddy(&s.v1);
    let v2x = ddx(&s.v2);
    let v2y = ddy(&s.v2);
    let px = ddx(&p);
    let py = ddy(&p);
    let divv = v1x.add(&v2y);

    let d_rho = s
        .v1
        .mul(&rho_x)
        .add(&s.v2.mul(&rho_y))
        .add(&s.rho.mul(&divv))
        .scale(-1.0);

    let (f1, f2) = lorentz_force(&s.b1, &s.b2);

    // rho (v . grad) v
    let adv1 = s.rho.mul(&s.v1.mul(&v1x).add(&s.v2.mul(&v1y)));
    let adv2 = s.rho.mul(&s.v1.mul(&v2x).add(&s.v2.mul(&v2y)));

    let mut num1 = f1.sub(&adv1).sub(&px);
    let mut num2 = f2.sub(&adv2).sub(&py);
    if kind == SolverKind::Viscous {
        let eps_mu = params.epsilon * params.mu;
        let eps_ml = params.epsilon * (params.mu + params.lambda);
        let lap1 = ddx2(&s.v1).add(&ddy2(&s.v1));
        let lap2 = ddx2(&s.v2).add(&ddy2(&s.v2));
        num1 = num1.add(&lap1.scale(eps_mu)).add(&ddx(&divv).scale(eps_ml));
        num2 = num2.add(&lap2.scale(eps_mu)).add(&ddy(&divv).scale(eps_ml));
    }
    let d_v1 = num1.zip(&s.rho, |n, r| n / r);
    let d_v2 = num2.zip(&s.rho, |n, r| n / r);

    let (d_b1, d_b2) = induction_emf(&s.v1, &s.v2, &s.b1, &s.b2);

    let mut bundle = RhsBundle {
        d_rho,
        d_v1,
        d_v2,
        d_b1,
        d_b2,
    };

    // sponge toward the background over the top tenth
    let fields = [&s.rho, &s.v1, &s.v2, &s.b1, &s.b2];
    let targets = BACKGROUND;
    let outs = [
        &mut bundle.d_rho,
        &mut bundle.d_v1,
        &mut bundle.d_v2,
        &mut bundle.d_b1,
        &mut bundle.d_b2,
    ];
    for (out, (f, target)) in outs.into_iter().zip(fields.into_iter().zip(targets)) {
        for j in 0..g.ny() {
            let k = sponge_rate(g.ys[j], g.spec.ymax);
            if k == 0.0 {
                continue;
            }
            for i in 0..g.nx() {
                let v = out.at(i, j) - k * (f.at(i, j) - target);
                out.set(i, j, v);
            }
        }
    }

    if let Some(fr) = forcing {
        bundle.d_rho = bundle.d_rho.add(&fr.rho);
        bundle.d_v1 = bundle.d_v1.add(&fr.v1);
        bundle.d_v2 = bundle.d_v2.add(&fr.v2);
        bundle.d_b1 = bundle.d_b1.add(&fr.b1);
        bundle.d_b2 = bundle.d_b2.add(&fr.b2);
    }

    // no-slip rows stay constant; top rows are pinned by the stepper.
    // The wall admits both velocity conditions for the ideal system as
    // well: the transverse field carries an incoming Alfven
    // characteristic, and the inviscid-limit solution keeps v = 0 there.
    let nx = g.nx();
    let top = g.ny() - 1;
    for i in 0..nx {
        bundle.d_v1.set(i, 0, 0.0);
        bundle.d_v2.set(i, 0, 0.0);
        bundle.d_rho.set(i, top, 0.0);
        bundle.d_v1.set(i, top, 0.0);
        bundle.d_v2.set(i, top, 0.0);
        bundle.d_b1.set(i, top, 0.0);
        bundle.d_b2.set(i, top, 0.0);
    }
    Ok(bundle)
}

/// Right-hand side of the viscous system (epsilon > 0 required).
pub fn viscous_rhs(s: &State, forcing: Option<&Forcing>) -> Result<RhsBundle, SolverError> {
    rhs(s, SolverKind::Viscous, forcing)
}

/// Right-hand side of the ideal system (epsilon terms absent).
pub fn ideal_rhs(s: &State, forcing: Option<&Forcing>) -> Result<RhsBundle, SolverError> {
    rhs(s, SolverKind::Ideal, forcing)
}

/// Largest stable explicit step: advective bound from the fast wave
/// speed |v| + c + |B|/sqrt(rho) and, for epsilon > 0, the diffusive
/// bound h^2 cfl_visc / (eps (2 mu + lambda)).
pub fn cfl(s: &State, ctl: &StepControl) -> Result<f64, SolverError> {
    let params = s.params;
    let gamma = params.gamma;
    let mut speed_max = 0.0f64;
    let g = s.grid().clone();
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let r = s.rho.at(i, j);
            let c2 = gamma * r.powf(gamma - 1.0);
            let v = (s.v1.at(i, j).powi(2) + s.v2.at(i, j).powi(2)).sqrt();
            let b2 = s.b1.at(i, j).powi(2) + s.b2.at(i, j).powi(2);
            let speed = v + c2.sqrt() + (b2 / r).sqrt();
            speed_max = speed_max.max(speed);
        }
    }
    if !speed_max.is_finite() || speed_max <= 0.0 {
        return Err(SolverError::BadWaveSpeed { time: s.time });
    }
    let mut dt = ctl.cfl_adv * g.h_min / speed_max;
    if params.epsilon > 0.0 {
        let diff = params.epsilon * (2.0 * params.mu + params.lambda);
        dt = dt.min(ctl.cfl_visc * g.h_min * g.h_min / diff);
    }
    if let Some(cap) = ctl.dt_cap {
        dt = dt.min(cap);
    }
    Ok(dt)
}

/// Top-row pinning source.
#[derive(Clone, Copy)]
pub enum TopBc<'a> {
    Background,
    Manufactured(&'a MmsSolution),
}

/// Reimpose the boundary rows on a state: no-slip (or impermeability)
/// at the wall, Dirichlet pin at the truncation row.
pub fn apply_bc(s: &mut State, _kind: SolverKind, top: TopBc) {
    let g = s.grid().clone();
    let nx = g.nx();
    let topj = g.ny() - 1;
    for i in 0..nx {
        s.v1.set(i, 0, 0.0);
        s.v2.set(i, 0, 0.0);
        match top {
            TopBc::Background => {
                s.rho.set(i, topj, BACKGROUND[0]);
                s.v1.set(i, topj, BACKGROUND[1]);
                s.v2.set(i, topj, BACKGROUND[2]);
                s.b1.set(i, topj, BACKGROUND[3]);
                s.b2.set(i, topj, BACKGROUND[4]);
            }
            TopBc::Manufactured(m) => {
                let x = g.xs[i];
                let y = g.ys[topj];
                let vals = m.values(s.time, x, y);
                s.rho.set(i, topj, vals[0]);
                s.v1.set(i, topj, vals[1]);
                s.v2.set(i, topj, vals[2]);
                s.b1.set(i, topj, vals[3]);
                s.b2.set(i, topj, vals[4]);
            }
        }
    }
}

fn state_combine(base: &State, a: f64, k: &RhsBundle, new_time: f64) -> State {
    let mut out = base.clone();
    out.rho.axpy(a, &k.d_rho);
    out.v1.axpy(a, &k.d_v1);
    out.v2.axpy(a, &k.d_v2);
    out.b1.axpy(a, &k.d_b1);
    out.b2.axpy(a, &k.d_b2);
    out.time = new_time;
    out
}

fn check_stage(s: &State, stage: usize) -> Result<(), SolverError> {
    for f in s.fields() {
        if !f.is_finite() {
            return Err(SolverError::NonFinite {
                stage,
                time: s.time,
            });
        }
    }
    check_density(s)
}

/// One classical RK4 step driven by an arbitrary right-hand side and
/// boundary reimposition; aborts with the stage index if any field
/// loses finiteness (or density its positivity).
pub fn rk4_step_with(
    s: &State,
    dt: f64,
    rhs_fn: &dyn Fn(&State) -> Result<RhsBundle, SolverError>,
    bc_fn: &dyn Fn(&mut State),
) -> Result<State, SolverError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SolverError::BadStep(dt));
    }
    let t = s.time;
    let k1 = rhs_fn(s)?;
    let mut u1 = state_combine(s, 0.5 * dt, &k1, t + 0.5 * dt);
    bc_fn(&mut u1);
    check_stage(&u1, 1)?;
    let k2 = rhs_fn(&u1)?;
    let mut u2 = state_combine(s, 0.5 * dt, &k2, t + 0.5 * dt);
    bc_fn(&mut u2);
    check_stage(&u2, 2)?;
    let k3 = rhs_fn(&u2)?;
    let mut u3 = state_combine(s, dt, &k3, t + dt);
    bc_fn(&mut u3);
    check_stage(&u3, 3)?;
    let k4 = rhs_fn(&u3)?;

    let mut out = s.clone();
    let w = dt / 6.0;
    out.rho.axpy(w, &k1.d_rho);
    out.rho.axpy(2.0 * w, &k2.d_rho);
    out.rho.axpy(2.0 * w, &k3.d_rho);
    out.rho.axpy(w, &k4.d_rho);
    out.v1.axpy(w, &k1.d_v1);
    out.v1.axpy(2.0 * w, &k2.d_v1);
    out.v1.axpy(2.0 * w, &k3.d_v1);
    out.v1.axpy(w, &k4.d_v1);
    out.v2.axpy(w, &k1.d_v2);
    out.v2.axpy(2.0 * w, &k2.d_v2);
    out.v2.axpy(2.0 * w, &k3.d_v2);
    out.v2.axpy(w, &k4.d_v2);
    out.b1.axpy(w, &k1.d_b1);
    out.b1.axpy(2.0 * w, &k2.d_b1);
    out.b1.axpy(2.0 * w, &k3.d_b1);
    out.b1.axpy(w, &k4.d_b1);
    out.b2.axpy(w, &k1.d_b2);
    out.b2.axpy(2.0 * w, &k2.d_b2);
    out.b2.axpy(2.0 * w, &k3.d_b2);
    out.b2.axpy(w, &k4.d_b2);
    out.time = t + dt;
    bc_fn(&mut out);
    check_stage(&out, 4)?;
    Ok(out)
}

/// One physics step of the chosen solver: RK4 with boundary rows
/// reimposed per stage, manufactured forcing evaluated at the stage
/// times when present, then the optional fourth-difference filter.
pub fn step(
    s: &State,
    dt: f64,
    kind: SolverKind,
    manufactured: Option<&MmsSolution>,
    filter_coeff: f64,
) -> Result<State, SolverError> {
    let top = match manufactured {
        Some(m) => TopBc::Manufactured(m),
        None => TopBc::Background,
    };
    let rhs_fn = |u: &State| -> Result<RhsBundle, SolverError> {
        let forcing = manufactured.map(|m| m.forcing(u.grid(), u.params, kind, u.time));
        rhs(u, kind, forcing.as_ref())
    };
    let bc_fn = |u: &mut State| apply_bc(u, kind, top);
    let mut out = rk4_step_with(s, dt, &rhs_fn, &bc_fn)?;
    if filter_coeff > 0.0 {
        for f in [
            &mut out.rho,
            &mut out.v1,
            &mut out.v2,
            &mut out.b1,
            &mut out.b2,
        ] {
            apply_filter(f, filter_coeff);
        }
        apply_bc(&mut out, kind, top);
        check_stage(&out, 5)?;
    }
    Ok(out)
}

/// Mild fourth-difference filter: f -= coeff * (D4x + D4y) f, periodic
/// in x, vanishing within two rows of the wall and the top.
pub fn apply_filter(f: &mut Field, coeff: f64) {
    let g = f.grid().clone();
    let nx = g.nx() as isize;
    let ny = g.ny();
    let mut delta = vec![0.0; g.nx() * ny];
    for j in 0..ny {
        for i in 0..nx {
            let at = |ii: isize| f.at(ii.rem_euclid(nx) as usize, j);
            let d4 = at(i - 2) - 4.0 * at(i - 1) + 6.0 * at(i) - 4.0 * at(i + 1) + at(i + 2);
            delta[i as usize + g.nx() * j] += d4;
        }
    }
    for j in 2..ny.saturating_sub(2) {
        for i in 0..g.nx() {
            let d4 = f.at(i, j - 2) - 4.0 * f.at(i, j - 1) + 6.0 * f.at(i, j)
                - 4.0 * f.at(i, j + 1)
                + f.at(i, j + 2);
            delta[i + g.nx() * j] += d4;
        }
    }
    for j in 0..ny {
        for i in 0..g.nx() {
            let v = f.at(i, j) - coeff * delta[i + g.nx() * j];
            f.set(i, j, v);
        }
    }
}

/// Raw field dump: ASCII header "MHDC1 nx ny time" then the five fields
/// rho, v1, v2, b1, b2 as little-endian f64, x-fastest row-major.
pub fn dump_state(w: &mut dyn IoWrite, s: &State) -> Result<(), SolverError> {
    let g = s.grid().clone();
    writeln!(w, "MHDC1 {} {} {:.16e}", g.nx(), g.ny(), s.time)?;
    for f in s.fields() {
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                w.write_all(&f.at(i, j).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Shape, time and raw field data of a dump: (nx, ny, time, fields).
pub type DumpContents = (usize, usize, f64, Vec<Vec<f64>>);

/// Read back a dump produced by `dump_state` (shape and time header plus
/// the five fields).
pub fn read_dump(r: &mut dyn IoRead) -> Result<DumpContents, SolverError> {
    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 256 {
            return Err(SolverError::BadDump("header too long".into()));
        }
    }
    let text = String::from_utf8(header).map_err(|e| SolverError::BadDump(e.to_string()))?;
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "MHDC1" {
        return Err(SolverError::BadDump(format!("unexpected header '{text}'")));
    }
    let nx: usize = parts[1]
        .parse()
        .map_err(|_| SolverError::BadDump("bad nx".into()))?;
    let ny: usize = parts[2]
        .parse()
        .map_err(|_| SolverError::BadDump("bad ny".into()))?;
    let time: f64 = parts[3]
        .parse()
        .map_err(|_| SolverError::BadDump("bad time".into()))?;
    let mut fields = Vec::with_capacity(5);
    for _ in 0..5 {
        let mut data = vec![0.0; nx * ny];
        for v in data.iter_mut() {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        fields.push(data);
    }
    Ok((nx, ny, time, fields))
}
