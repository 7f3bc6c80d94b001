//! Physical parameters, the five-field MHD state, the pressure law and
//! initial-data generation.
//!
//! Initial data is the uniform background (rho, v, B) = (1, 0, e_y)
//! plus amplitude-scaled smooth modes. Magnetic perturbations come from
//! a scalar potential, (db1, db2) = (dpsi/dy, -dpsi/dx), so div B = 0
//! analytically. All wall-normal profiles vanish at y = 0, which keeps
//! the no-slip rows and the wall trace b2 = 1 exact (bitwise) and makes
//! the data compatible with the wall conditions: the momentum equation
//! evaluated on the wall row vanishes at t = 0, so neither solver sees
//! an artificial initial layer.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{Field, Grid};

#[derive(Debug, Error)]
pub enum StateError {
    #[error("physical parameters invalid: {0}")]
    BadParams(String),
    #[error("density must be positive everywhere; min was {min}")]
    NonPositiveDensity { min: f64 },
    #[error("initial amplitude must be non-negative, got {0}")]
    NegativeAmplitude(f64),
}

/// Viscosity scaling, viscosity coefficients and adiabatic exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Viscosity scale; (0, 1] for the viscous solver, 0 on the ideal path.
    pub epsilon: f64,
    /// Shear viscosity coefficient, > 0.
    pub mu: f64,
    /// Bulk viscosity coefficient, with mu + lambda > 0.
    pub lambda: f64,
    /// Adiabatic exponent in p = rho^gamma, >= 1.
    pub gamma: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), StateError> {
        if !(self.mu > 0.0) {
            return Err(StateError::BadParams(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.mu + self.lambda > 0.0) {
            return Err(StateError::BadParams(format!(
                "mu + lambda must be > 0, got {}",
                self.mu + self.lambda
            )));
        }
        if !(self.gamma >= 1.0) {
            return Err(StateError::BadParams(format!(
                "gamma must be >= 1, got {}",
                self.gamma
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon <= 1.0) {
            return Err(StateError::BadParams(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// The five physical fields at one time.
#[derive(Debug, Clone)]
pub struct State {
    pub rho: Field,
    pub v1: Field,
    pub v2: Field,
    pub b1: Field,
    pub b2: Field,
    pub params: PhysicalParams,
    pub time: f64,
}

impl State {
    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }

    pub fn fields(&self) -> [&Field; 5] {
        [&self.rho, &self.v1, &self.v2, &self.b1, &self.b2]
    }

    /// Pressure field of this state.
    pub fn pressure(&self) -> Field {
        pressure(&self.rho, self.params.gamma).expect("state density positive")
    }

    pub fn check_density(&self) -> Result<(), StateError> {
        let min = self.rho.min_value();
        if !(min > 0.0) {
            return Err(StateError::NonPositiveDensity { min });
        }
        Ok(())
    }
}

/// p = rho^gamma, pointwise. Rejects non-positive density.
pub fn pressure(rho: &Field, gamma: f64) -> Result<Field, StateError> {
    let min = rho.min_value();
    if !(min > 0.0) {
        return Err(StateError::NonPositiveDensity { min });
    }
    if gamma == 1.0 {
        Ok(rho.clone())
    } else {
        Ok(rho.map(|r| r.powf(gamma)))
    }
}

/// The uniform background (rho, v, B) = (1, 0, e_y) at t = 0.
pub fn equilibrium(grid: &Arc<Grid>, params: PhysicalParams) -> State {
    State {
        rho: Field::constant(grid, 1.0),
        v1: Field::zeros(grid),
        v2: Field::zeros(grid),
        b1: Field::zeros(grid),
        b2: Field::constant(grid, 1.0),
        params,
        time: 0.0,
    }
}

/// Wall-normal profile families for the perturbation modes.
///
/// Every profile used for v, psi (and hence b2) is exactly zero on the
/// wall row. `Bump` is additionally flat near the wall to round-off
/// levels, which keeps the wall quiet until a signal physically arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// y^2 e^{-y}: vanishes to second order at the wall.
    Wall2,
    /// y^3 e^{-y}: vanishes to third order at the wall.
    Wall3,
    /// e^{-y^2}: order-one at the wall (density/tangential-field shape).
    Gauss,
    /// (1 - e^{-y^2}) exp(-((y-3)/0.8)^2): an interior bump, zero at the
    /// wall and below round-off for y < 1.
    Bump,
}

pub const BUMP_CENTER: f64 = 3.0;
pub const BUMP_WIDTH: f64 = 0.8;

impl ProfileKind {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            ProfileKind::Wall2 => y * y * (-y).exp(),
            ProfileKind::Wall3 => y * y * y * (-y).exp(),
            ProfileKind::Gauss => (-y * y).exp(),
            ProfileKind::Bump => {
                let r = (y - BUMP_CENTER) / BUMP_WIDTH;
                (1.0 - (-y * y).exp()) * (-r * r).exp()
            }
        }
    }

    /// d/dy of the profile (used for b1 = dpsi/dy).
    pub fn eval_dy(&self, y: f64) -> f64 {
        match self {
            ProfileKind::Wall2 => (2.0 * y - y * y) * (-y).exp(),
            ProfileKind::Wall3 => (3.0 * y * y - y * y * y) * (-y).exp(),
            ProfileKind::Gauss => -2.0 * y * (-y * y).exp(),
            ProfileKind::Bump => {
                let r = (y - BUMP_CENTER) / BUMP_WIDTH;
                let g = (-r * r).exp();
                let taper = 1.0 - (-y * y).exp();
                2.0 * y * (-y * y).exp() * g + taper * g * (-2.0 * r / BUMP_WIDTH)
            }
        }
    }

    /// Profile used for the velocity components of a mode with this
    /// selector: must vanish at the wall so no-slip holds exactly.
    pub fn velocity_variant(&self) -> ProfileKind {
        match self {
            ProfileKind::Bump => ProfileKind::Bump,
            ProfileKind::Wall3 => ProfileKind::Wall3,
            _ => ProfileKind::Wall2,
        }
    }

    /// Profile used for the magnetic potential of a mode with this
    /// selector: must vanish at the wall (keeps b2 = 1 there) and have
    /// vanishing second derivative (keeps the wall Lorentz force zero).
    pub fn potential_variant(&self) -> ProfileKind {
        match self {
            ProfileKind::Bump => ProfileKind::Bump,
            _ => ProfileKind::Wall3,
        }
    }
}

/// Per-field coefficients of one perturbation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoeffs {
    pub rho: f64,
    pub v1: f64,
    pub v2: f64,
    /// Magnetic potential amplitude; drives (b1, b2) = (dpsi/dy, -dpsi/dx).
    pub psi: f64,
}

/// One perturbation mode: integer wavenumber, wall-normal profile
/// selector (applied to the density; velocity and potential use their
/// wall-safe variants) and per-field coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub kx: usize,
    pub profile: ProfileKind,
    pub coeffs: ModeCoeffs,
}

/// Amplitude-scaled sum of modes on top of the background.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataSpec {
    pub amplitude: f64,
    pub modes: Vec<Mode>,
}

impl InitialDataSpec {
    pub fn background() -> Self {
        InitialDataSpec {
            amplitude: 0.0,
            modes: Vec::new(),
        }
    }
}

/// Build the initial state. The perturbation of every field is linear
/// in `amplitude`, and the wall row carries v = 0, b2 = 1 bitwise.
pub fn make_initial(
    grid: &Arc<Grid>,
    params: PhysicalParams,
    spec: &InitialDataSpec,
) -> Result<State, StateError> {
    params.validate()?;
    if !(spec.amplitude >= 0.0) {
        return Err(StateError::NegativeAmplitude(spec.amplitude));
    }
    let mut s = equilibrium(grid, params);
    let a = spec.amplitude;
    let k_base = 2.0 * std::f64::consts::PI / grid.spec.length_x;

    for mode in &spec.modes {
        let k = mode.kx as f64 * k_base;
        let prof_rho = mode.profile;
        let prof_v = mode.profile.velocity_variant();
        let prof_psi = mode.profile.potential_variant();
        let c = mode.coeffs;
        for j in 0..grid.ny() {
            let y = grid.ys[j];
            let pr = prof_rho.eval(y);
            let pv = prof_v.eval(y);
            let pp = prof_psi.eval(y);
            let ppd = prof_psi.eval_dy(y);
            for i in 0..grid.nx() {
                let x = grid.xs[i];
                let (sin, cos) = (k * x).sin_cos();
                let drho = a * c.rho * cos * pr;
                let dv1 = a * c.v1 * cos * pv;
                let dv2 = a * c.v2 * sin * pv;
                // psi = a c.psi sin(kx) P(y): b1 = psi_y, b2 = -psi_x
                let db1 = a * c.psi * sin * ppd;
                let db2 = -a * c.psi * k * cos * pp;
                s.rho.set(i, j, s.rho.at(i, j) + drho);
                s.v1.set(i, j, s.v1.at(i, j) + dv1);
                s.v2.set(i, j, s.v2.at(i, j) + dv2);
                s.b1.set(i, j, s.b1.at(i, j) + db1);
                s.b2.set(i, j, s.b2.at(i, j) + db2);
            }
        }
    }
    s.check_density()?;
    Ok(s)
}
