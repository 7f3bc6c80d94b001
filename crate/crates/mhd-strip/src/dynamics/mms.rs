//! Manufactured solutions: closed-form fields periodic in x and
//! wall-compatible in y, plus the forcing that makes them exact
//! solutions of either system. The forcing is the analytic time
//! derivative minus the analytic right-hand side (sponge included), so
//! it is grid-independent and the solver must reproduce the fields to
//! the accuracy of its stencils.

use std::sync::Arc;

use crate::grid::{Field, Grid};
use crate::state::{PhysicalParams, State};

use super::{sponge_rate, Forcing, SolverKind, BACKGROUND};

/// Value and derivatives of one scalar at a point.
#[derive(Debug, Clone, Copy, Default)]
struct PointEval {
    v: f64,
    dt: f64,
    dx: f64,
    dy: f64,
    dxx: f64,
    dyy: f64,
    dxy: f64,
}

#[derive(Debug, Clone, Copy)]
enum Osc {
    Sin(f64),
    Cos(f64),
}

impl Osc {
    /// (value, first derivative, second derivative) at u.
    fn eval(&self, u: f64) -> (f64, f64, f64) {
        match *self {
            Osc::Sin(w) => {
                let (s, c) = (w * u).sin_cos();
                (s, w * c, -w * w * s)
            }
            Osc::Cos(w) => {
                let (s, c) = (w * u).sin_cos();
                (c, -w * s, -w * w * c)
            }
        }
    }
}

/// Wall-normal envelopes with two derivatives.
#[derive(Debug, Clone, Copy)]
enum Envelope {
    /// y^2 e^{-y}.
    W2,
    /// y^3 e^{-y}.
    W3,
    /// (y^3 e^{-y})' = (3y^2 - y^3) e^{-y}.
    W3Prime,
}

impl Envelope {
    fn eval(&self, y: f64) -> (f64, f64, f64) {
        let e = (-y).exp();
        match self {
            Envelope::W2 => (
                y * y * e,
                (2.0 * y - y * y) * e,
                (2.0 - 4.0 * y + y * y) * e,
            ),
            Envelope::W3 => (
                y * y * y * e,
                (3.0 * y * y - y * y * y) * e,
                (6.0 * y - 6.0 * y * y + y * y * y) * e,
            ),
            Envelope::W3Prime => (
                (3.0 * y * y - y * y * y) * e,
                (6.0 * y - 6.0 * y * y + y * y * y) * e,
                (6.0 - 18.0 * y + 9.0 * y * y - y * y * y) * e,
            ),
        }
    }
}

/// One separable term amp * T(t) * X(x) * Y(y).
#[derive(Debug, Clone, Copy)]
struct Term {
    amp: f64,
    time: Osc,
    x: Osc,
    env: Envelope,
}

impl Term {
    fn eval(&self, t: f64, x: f64, y: f64) -> PointEval {
        let (tv, td, _) = self.time.eval(t);
        let (xv, xd, xdd) = self.x.eval(x);
        let (yv, yd, ydd) = self.env.eval(y);
        let a = self.amp;
        PointEval {
            v: a * tv * xv * yv,
            dt: a * td * xv * yv,
            dx: a * tv * xd * yv,
            dy: a * tv * xv * yd,
            dxx: a * tv * xdd * yv,
            dyy: a * tv * xv * ydd,
            dxy: a * tv * xd * yd,
        }
    }
}

/// The documented manufactured solution: a single x-harmonic with
/// oscillation in time; the magnetic part comes from a potential so it
/// is divergence-free, and every envelope vanishes at the wall (no-slip
/// compatible for both solvers).
#[derive(Debug, Clone, Copy)]
pub struct MmsSolution {
    pub amplitude: f64,
    pub k_hat: f64,
    pub omega: f64,
}

impl MmsSolution {
    pub fn standard(length_x: f64) -> MmsSolution {
        MmsSolution {
            amplitude: 0.05,
            k_hat: 2.0 * std::f64::consts::PI / length_x,
            omega: 1.0,
        }
    }

    /// The zero perturbation (background everywhere, zero forcing).
    pub fn equilibrium(length_x: f64) -> MmsSolution {
        MmsSolution {
            amplitude: 0.0,
            ..MmsSolution::standard(length_x)
        }
    }

    fn terms(&self) -> [Term; 5] {
        let a = self.amplitude;
        let k = self.k_hat;
        let w = self.omega;
        [
            // rho - 1
            Term {
                amp: a,
                time: Osc::Cos(w),
                x: Osc::Cos(k),
                env: Envelope::W2,
            },
            // v1
            Term {
                amp: a,
                time: Osc::Sin(w),
                x: Osc::Cos(k),
                env: Envelope::W2,
            },
            // v2
            Term {
                amp: a,
                time: Osc::Sin(w),
                x: Osc::Sin(k),
                env: Envelope::W2,
            },
            // b1 = d_y psi with psi = (a/k) cos(wt) sin(kx) y^3 e^{-y}
            Term {
                amp: a / k,
                time: Osc::Cos(w),
                x: Osc::Sin(k),
                env: Envelope::W3Prime,
            },
            // b2 - 1 = -d_x psi
            Term {
                amp: -a,
                time: Osc::Cos(w),
                x: Osc::Cos(k),
                env: Envelope::W3,
            },
        ]
    }

    fn eval_all(&self, t: f64, x: f64, y: f64) -> [PointEval; 5] {
        let terms = self.terms();
        let mut out = [PointEval::default(); 5];
        for (k, term) in terms.iter().enumerate() {
            out[k] = term.eval(t, x, y);
            out[k].v += BACKGROUND[k];
        }
        out
    }

    /// Field values (rho, v1, v2, b1, b2) at one point.
    pub fn values(&self, t: f64, x: f64, y: f64) -> [f64; 5] {
        let e = self.eval_all(t, x, y);
        [e[0].v, e[1].v, e[2].v, e[3].v, e[4].v]
    }

    /// The manufactured state sampled on a grid.
    pub fn state_at(&self, grid: &Arc<Grid>, params: PhysicalParams, t: f64) -> State {
        let f = |k: usize| {
            Field::from_fn(grid, |x, y| {
                let e = self.eval_all(t, x, y);
                e[k].v
            })
        };
        State {
            rho: f(0),
            v1: f(1),
            v2: f(2),
            b1: f(3),
            b2: f(4),
            params,
            time: t,
        }
    }

    /// Forcing that makes the manufactured fields an exact solution of
    /// the chosen system (with its sponge), evaluated pointwise from the
    /// closed forms at time t.
    pub fn forcing(
        &self,
        grid: &Arc<Grid>,
        params: PhysicalParams,
        kind: SolverKind,
        t: f64,
    ) -> Forcing {
        let gamma = params.gamma;
        let eps = if kind == SolverKind::Viscous {
            params.epsilon
        } else {
            0.0
        };
        let eps_mu = eps * params.mu;
        let eps_ml = eps * (params.mu + params.lambda);
        let ymax = grid.spec.ymax;

        let mut out = Forcing {
            rho: Field::zeros(grid),
            v1: Field::zeros(grid),
            v2: Field::zeros(grid),
            b1: Field::zeros(grid),
            b2: Field::zeros(grid),
        };
        for j in 0..grid.ny() {
            let y = grid.ys[j];
            let k_sponge = sponge_rate(y, ymax);
            for i in 0..grid.nx() {
                let x = grid.xs[i];
                let [r, v1, v2, b1, b2] = self.eval_all(t, x, y);

                let gm1 = gamma - 1.0;
                let p_x = gamma * r.v.powf(gm1) * r.dx;
                let p_y = gamma * r.v.powf(gm1) * r.dy;
                let divv = v1.dx + v2.dy;

                let rhs_rho =
                    -(v1.v * r.dx + v2.v * r.dy) - r.v * divv - k_sponge * (r.v - BACKGROUND[0]);

                let j_cur = b2.dx - b1.dy;
                let f1 = -j_cur * b2.v;
                let f2 = j_cur * b1.v;
                let visc1 = eps_mu * (v1.dxx + v1.dyy) + eps_ml * (v1.dxx + v2.dxy);
                let visc2 = eps_mu * (v2.dxx + v2.dyy) + eps_ml * (v1.dxy + v2.dyy);
                let rhs_v1 = (-r.v * (v1.v * v1.dx + v2.v * v1.dy) - p_x + visc1 + f1) / r.v
                    - k_sponge * (v1.v - BACKGROUND[1]);
                let rhs_v2 = (-r.v * (v1.v * v2.dx + v2.v * v2.dy) - p_y + visc2 + f2) / r.v
                    - k_sponge * (v2.v - BACKGROUND[2]);

                // E = v1 b2 - v2 b1; d_t b1 = d_y E, d_t b2 = -d_x E
                let e_y = v1.dy * b2.v + v1.v * b2.dy - v2.dy * b1.v - v2.v * b1.dy;
                let e_x = v1.dx * b2.v + v1.v * b2.dx - v2.dx * b1.v - v2.v * b1.dx;
                let rhs_b1 = e_y - k_sponge * (b1.v - BACKGROUND[3]);
                let rhs_b2 = -e_x - k_sponge * (b2.v - BACKGROUND[4]);

                out.rho.set(i, j, r.dt - rhs_rho);
                out.v1.set(i, j, v1.dt - rhs_v1);
                out.v2.set(i, j, v2.dt - rhs_v2);
                out.b1.set(i, j, b1.dt - rhs_b1);
                out.b2.set(i, j, b2.dt - rhs_b2);
            }
        }
        out
    }

    /// Weighted L2 errors of the five fields against the closed forms.
    pub fn errors(&self, s: &State) -> [f64; 5] {
        let grid = s.grid().clone();
        let mut out = [0.0; 5];
        for (k, f) in s.fields().iter().enumerate() {
            let exact = Field::from_fn(&grid, |x, y| {
                let e = self.eval_all(s.time, x, y);
                e[k].v
            });
            out[k] = f.sub(&exact).l2_sq().sqrt();
        }
        out
    }
}
