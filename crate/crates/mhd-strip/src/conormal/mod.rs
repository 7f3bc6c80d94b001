//! Conormal derivative calculus.
//!
//! The three conormal directions are Z0 = d/dt, Z1 = d/dx and
//! Z2 = phi(y) d/dy with the weight phi(y) = y/(1+y), which vanishes at
//! the wall. Z0 acts through a ring of stored time levels by centered
//! differencing; Z1 and Z2 act spatially on each level. On top of the
//! operators sit the weighted L2/sup norms summed over multi-indices and
//! the composite energy functional whose blocks the experiment driver
//! accumulates in time.

pub mod commutator;
pub mod phi_expr;
pub mod probes;

use std::collections::VecDeque;
use std::sync::Arc;

use thiserror::Error;

use crate::grid::{ddx, ddy, ddy2, Field, Grid};
use crate::state::{pressure, State};

/// A per-state derived scalar field, the unit the conormal norms act on.
pub type Selector = Box<dyn Fn(&State) -> Field>;

#[derive(Debug, Error)]
pub enum ConormalError {
    #[error("time derivative of order {order} needs at least {needed} stored levels, ring has {have}")]
    InsufficientDepth {
        order: usize,
        needed: usize,
        have: usize,
    },
    #[error("ring times must be uniformly spaced: expected step {expected}, got {got}")]
    NonUniformRing { expected: f64, got: f64 },
    #[error("ring times must increase, got {0} after {1}")]
    NonIncreasingRing(f64, f64),
    #[error("commutator order must lie in 1..={max}, got {m}")]
    BadOrder { m: usize, max: usize },
}

/// Largest conormal order the tables and norms are built for.
pub const M_MAX: usize = 3;

/// The conormal weight phi(y) = y/(1+y); phi(0) = 0, bounded by 1.
pub fn phi_weight(y: f64) -> f64 {
    assert!(y >= 0.0, "phi weight is defined for y >= 0, got {y}");
    y / (1.0 + y)
}

/// phi'(y) = 1/(1+y)^2; phi'(0) = 1.
pub fn phi_prime(y: f64) -> f64 {
    assert!(y >= 0.0, "phi weight is defined for y >= 0, got {y}");
    1.0 / ((1.0 + y) * (1.0 + y))
}

/// Multi-index (a0, a1, a2) selecting Z0^a0 Z1^a1 Z2^a2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MultiIndex {
    pub a0: usize,
    pub a1: usize,
    pub a2: usize,
}

impl MultiIndex {
    pub fn new(a0: usize, a1: usize, a2: usize) -> MultiIndex {
        MultiIndex { a0, a1, a2 }
    }

    pub fn order(&self) -> usize {
        self.a0 + self.a1 + self.a2
    }

    /// All multi-indices with order <= m and a0 <= alpha0_max, in a fixed
    /// deterministic order (by total order, then lexicographic).
    pub fn enumerate(m: usize, alpha0_max: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for total in 0..=m {
            for a0 in 0..=total.min(alpha0_max) {
                for a1 in 0..=(total - a0) {
                    let a2 = total - a0 - a1;
                    out.push(MultiIndex::new(a0, a1, a2));
                }
            }
        }
        out
    }
}

/// Ring buffer of states at a fixed storage cadence; supplies the time
/// levels that centered differencing of Z0 consumes.
#[derive(Debug, Clone)]
pub struct TimeRing {
    capacity: usize,
    entries: VecDeque<State>,
}

impl TimeRing {
    pub fn new(capacity: usize) -> TimeRing {
        assert!(capacity >= 1);
        TimeRing {
            capacity,
            entries: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state(&self, k: usize) -> &State {
        &self.entries[k]
    }

    pub fn middle_index(&self) -> usize {
        (self.entries.len() - 1) / 2
    }

    pub fn middle(&self) -> &State {
        &self.entries[self.middle_index()]
    }

    pub fn dt_store(&self) -> f64 {
        assert!(self.entries.len() >= 2, "ring spacing needs two levels");
        self.entries[1].time - self.entries[0].time
    }

    /// Push a state, evicting the oldest level once full. Times must
    /// increase by a uniform step (1e-12 relative tolerance).
    pub fn push(&mut self, s: State) -> Result<(), ConormalError> {
        if let Some(last) = self.entries.back() {
            let dt = s.time - last.time;
            if !(dt > 0.0) {
                return Err(ConormalError::NonIncreasingRing(s.time, last.time));
            }
            if self.entries.len() >= 2 {
                let expected = self.dt_store();
                if (dt - expected).abs() > 1e-12 * expected.abs().max(1.0) {
                    return Err(ConormalError::NonUniformRing { expected, got: dt });
                }
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(s);
        Ok(())
    }
}

/// Z1 = d/dx.
pub fn apply_z1(f: &Field) -> Field {
    ddx(f)
}

/// Z2 = phi(y) d/dy. The wall row is exactly zero since phi(0) = 0.
pub fn apply_zy(f: &Field) -> Field {
    let g = f.grid().clone();
    let d = ddy(f);
    let mut out = d;
    let nx = g.nx();
    for j in 0..g.ny() {
        let w = phi_weight(g.ys[j]);
        for i in 0..nx {
            let v = out.at(i, j) * w;
            out.set(i, j, v);
        }
    }
    out
}

/// Z1^a1 Z2^a2 applied to a single field (Z2 first, matching the
/// composition order of the multi-index).
pub fn apply_spatial(f: &Field, a1: usize, a2: usize) -> Field {
    let mut out = f.clone();
    for _ in 0..a2 {
        out = apply_zy(&out);
    }
    for _ in 0..a1 {
        out = apply_z1(&out);
    }
    out
}

/// Z^alpha on a uniformly spaced series of fields, evaluated at
/// `center`. The time part is the a0-fold composition of the centered
/// first difference, which consumes `center +- a0` levels.
pub fn apply_multi_levels(
    fields: &[Field],
    dt: f64,
    center: usize,
    alpha: MultiIndex,
) -> Result<Field, ConormalError> {
    let need_lo = alpha.a0;
    if center < need_lo || center + alpha.a0 >= fields.len() {
        return Err(ConormalError::InsufficientDepth {
            order: alpha.a0,
            needed: 2 * alpha.a0 + 1,
            have: fields.len(),
        });
    }
    let lo = center - alpha.a0;
    let hi = center + alpha.a0;
    let mut level: Vec<Field> = (lo..=hi)
        .map(|k| apply_spatial(&fields[k], alpha.a1, alpha.a2))
        .collect();
    for _ in 0..alpha.a0 {
        let mut next = Vec::with_capacity(level.len() - 2);
        for k in 1..level.len() - 1 {
            next.push(level[k + 1].sub(&level[k - 1]).scale(1.0 / (2.0 * dt)));
        }
        level = next;
    }
    debug_assert_eq!(level.len(), 1);
    Ok(level.pop().unwrap())
}

/// Z^alpha of a per-state derived field over the ring, evaluated at the
/// ring's middle level.
pub fn apply_multi(
    ring: &TimeRing,
    selector: &dyn Fn(&State) -> Field,
    alpha: MultiIndex,
) -> Result<Field, ConormalError> {
    let n = ring.len();
    let needed = 2 * alpha.a0 + 1;
    if n < needed {
        return Err(ConormalError::InsufficientDepth {
            order: alpha.a0,
            needed,
            have: n,
        });
    }
    let fields: Vec<Field> = (0..n).map(|k| selector(ring.state(k))).collect();
    let dt = if alpha.a0 > 0 { ring.dt_store() } else { 1.0 };
    apply_multi_levels(&fields, dt, ring.middle_index(), alpha)
}

/// Per-multi-index L2 report; `total_sq` is the sum of the parts.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub per_alpha_sq: Vec<(MultiIndex, f64)>,
    pub total_sq: f64,
}

/// ||f||_m^2 over the ring: sum over |alpha| <= m (a0 <= alpha0_max) of
/// the quadrature L2 of Z^alpha f at the middle level.
pub fn conormal_l2(
    ring: &TimeRing,
    selector: &dyn Fn(&State) -> Field,
    m: usize,
    alpha0_max: usize,
) -> Result<NormReport, ConormalError> {
    let n = ring.len();
    let fields: Vec<Field> = (0..n).map(|k| selector(ring.state(k))).collect();
    let dt = if n >= 2 { ring.dt_store() } else { 1.0 };
    conormal_l2_levels(&fields, dt, ring.middle_index(), m, alpha0_max)
}

pub fn conormal_l2_levels(
    fields: &[Field],
    dt: f64,
    center: usize,
    m: usize,
    alpha0_max: usize,
) -> Result<NormReport, ConormalError> {
    let mut per_alpha_sq = Vec::new();
    let mut total_sq = 0.0;
    for alpha in MultiIndex::enumerate(m, alpha0_max) {
        let img = apply_multi_levels(fields, dt, center, alpha)?;
        let v = img.l2_sq();
        per_alpha_sq.push((alpha, v));
        total_sq += v;
    }
    Ok(NormReport {
        per_alpha_sq,
        total_sq,
    })
}

/// Spatial-only conormal norm of a single field (a0 = 0).
pub fn conormal_l2_field(f: &Field, m: usize) -> f64 {
    let mut total = 0.0;
    for alpha in MultiIndex::enumerate(m, 0) {
        total += apply_spatial(f, alpha.a1, alpha.a2).l2_sq();
    }
    total
}

/// W^{m,inf} norm over the ring at the middle level: sum over alpha of
/// the discrete sup of |Z^alpha f|.
pub fn conormal_sup(
    ring: &TimeRing,
    selector: &dyn Fn(&State) -> Field,
    m: usize,
    alpha0_max: usize,
) -> Result<f64, ConormalError> {
    let n = ring.len();
    let fields: Vec<Field> = (0..n).map(|k| selector(ring.state(k))).collect();
    let dt = if n >= 2 { ring.dt_store() } else { 1.0 };
    let mut total = 0.0;
    for alpha in MultiIndex::enumerate(m, alpha0_max) {
        total += apply_multi_levels(&fields, dt, ring.middle_index(), alpha)?.max_abs();
    }
    Ok(total)
}

/// Instantaneous blocks of the composite energy functional at the ring's
/// middle time. The sup-in-time core and the time integrals of the
/// remaining blocks are accumulated by the experiment driver.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub time: f64,
    /// Per-alpha weighted core integrand: rho|Z^a v|^2 + |Z^a (B-e_y)|^2
    /// + gamma^{-1} p^{-1} |Z^a (p-1)|^2, integrated over the strip.
    pub per_alpha_core: Vec<(MultiIndex, f64)>,
    pub kinetic: f64,
    pub magnetic: f64,
    pub acoustic: f64,
    /// ||d/dy (v1, v2, b1, p)||_{m-1}^2.
    pub dy1: f64,
    /// ||d^2/dy^2 (v1, v2, b1, p)||_{m-2}^2 (zero when m < 2).
    pub dy2: f64,
    /// eps*mu ||grad v||_m^2.
    pub grad_v: f64,
    /// eps*(mu+lambda) ||div v||_m^2.
    pub div_v: f64,
    /// eps^2 mu^2 (||d_y^2 v1||_{m-1}^2 + ||d_y^3 v1||_{m-2}^2).
    pub visc_v1: f64,
    /// eps^2 (2mu+lambda)^2 (||d_y^2 v2||_{m-1}^2 + ||d_y^3 v2||_{m-2}^2).
    pub visc_v2: f64,
}

impl EnergyReport {
    pub fn core_total(&self) -> f64 {
        self.kinetic + self.magnetic + self.acoustic
    }

    /// Sum of all instantaneous blocks.
    pub fn instantaneous_total(&self) -> f64 {
        self.core_total()
            + self.dy1
            + self.dy2
            + self.grad_v
            + self.div_v
            + self.visc_v1
            + self.visc_v2
    }
}

/// Evaluate every block of the energy functional at the ring middle.
pub fn energy_nm(ring: &TimeRing, m: usize, alpha0_max: usize) -> Result<EnergyReport, ConormalError> {
    let mid = ring.middle();
    let grid = mid.grid().clone();
    let gamma = mid.params.gamma;
    let eps = mid.params.epsilon;
    let mu = mid.params.mu;
    let lambda = mid.params.lambda;
    let p_mid = mid.pressure();
    let inv_p = p_mid.map(|p| 1.0 / p);

    let sel_v1: Selector = Box::new(|s: &State| s.v1.clone());
    let sel_v2: Selector = Box::new(|s: &State| s.v2.clone());
    let sel_b1: Selector = Box::new(|s: &State| s.b1.clone());
    let sel_b2t: Selector = Box::new(|s: &State| s.b2.map(|v| v - 1.0));
    let sel_p1: Selector =
        Box::new(move |s: &State| pressure(&s.rho, gamma).expect("positive rho").map(|p| p - 1.0));

    // weighted quadrature of w * f^2
    let weighted_l2 = |f: &Field, w: &Field| -> f64 { integrate_values(&f.mul(f).mul(w), &grid) };

    let mut per_alpha_core = Vec::new();
    let (mut kinetic, mut magnetic, mut acoustic) = (0.0, 0.0, 0.0);
    for alpha in MultiIndex::enumerate(m, alpha0_max) {
        let zv1 = apply_multi(ring, &*sel_v1, alpha)?;
        let zv2 = apply_multi(ring, &*sel_v2, alpha)?;
        let zb1 = apply_multi(ring, &*sel_b1, alpha)?;
        let zb2 = apply_multi(ring, &*sel_b2t, alpha)?;
        let zp = apply_multi(ring, &*sel_p1, alpha)?;
        let kin = weighted_l2(&zv1, &mid.rho) + weighted_l2(&zv2, &mid.rho);
        let mag = zb1.l2_sq() + zb2.l2_sq();
        let aco = weighted_l2(&zp, &inv_p) / gamma;
        per_alpha_core.push((alpha, kin + mag + aco));
        kinetic += kin;
        magnetic += mag;
        acoustic += aco;
    }

    let dy_sel = |base: &'static str| -> Selector {
        match base {
            "v1" => Box::new(|s: &State| ddy(&s.v1)),
            "v2" => Box::new(|s: &State| ddy(&s.v2)),
            "b1" => Box::new(|s: &State| ddy(&s.b1)),
            _ => Box::new(move |s: &State| ddy(&s.pressure())),
        }
    };
    let dy2_sel = |base: &'static str| -> Selector {
        match base {
            "v1" => Box::new(|s: &State| ddy2(&s.v1)),
            "v2" => Box::new(|s: &State| ddy2(&s.v2)),
            "b1" => Box::new(|s: &State| ddy2(&s.b1)),
            _ => Box::new(move |s: &State| ddy2(&s.pressure())),
        }
    };

    let mut dy1 = 0.0;
    let mut dy2v = 0.0;
    for base in ["v1", "v2", "b1", "p"] {
        dy1 += conormal_l2(ring, &*dy_sel(base), m - 1, alpha0_max)?.total_sq;
        if m >= 2 {
            dy2v += conormal_l2(ring, &*dy2_sel(base), m - 2, alpha0_max)?.total_sq;
        }
    }

    let mut grad_v = 0.0;
    let mut div_v = 0.0;
    let mut visc_v1 = 0.0;
    let mut visc_v2 = 0.0;
    if eps > 0.0 {
        let grads: [Selector; 4] = [
            Box::new(|s: &State| ddx(&s.v1)),
            Box::new(|s: &State| ddy(&s.v1)),
            Box::new(|s: &State| ddx(&s.v2)),
            Box::new(|s: &State| ddy(&s.v2)),
        ];
        for sel in &grads {
            grad_v += conormal_l2(ring, &**sel, m, alpha0_max)?.total_sq;
        }
        grad_v *= eps * mu;
        let div_sel: Selector = Box::new(|s: &State| ddx(&s.v1).add(&ddy(&s.v2)));
        div_v = eps * (mu + lambda) * conormal_l2(ring, &*div_sel, m, alpha0_max)?.total_sq;

        let dyy_v1: Selector = Box::new(|s: &State| ddy2(&s.v1));
        let dyy_v2: Selector = Box::new(|s: &State| ddy2(&s.v2));
        let dyyy_v1: Selector = Box::new(|s: &State| ddy(&ddy2(&s.v1)));
        let dyyy_v2: Selector = Box::new(|s: &State| ddy(&ddy2(&s.v2)));
        let mut w1 = conormal_l2(ring, &*dyy_v1, m - 1, alpha0_max)?.total_sq;
        let mut w2 = conormal_l2(ring, &*dyy_v2, m - 1, alpha0_max)?.total_sq;
        if m >= 2 {
            w1 += conormal_l2(ring, &*dyyy_v1, m - 2, alpha0_max)?.total_sq;
            w2 += conormal_l2(ring, &*dyyy_v2, m - 2, alpha0_max)?.total_sq;
        }
        visc_v1 = (eps * mu).powi(2) * w1;
        visc_v2 = (eps * (2.0 * mu + lambda)).powi(2) * w2;
    }

    Ok(EnergyReport {
        time: mid.time,
        per_alpha_core,
        kinetic,
        magnetic,
        acoustic,
        dy1,
        dy2: dy2v,
        grad_v,
        div_v,
        visc_v1,
        visc_v2,
    })
}

/// Initial-data smallness: sum over i = 0..=2 of the spatial conormal
/// norms ||d_y^i (rho-1, v, B-e_y)||_{m-i}^2 of one state.
pub fn initial_smallness(s: &State, m: usize) -> f64 {
    let perturbations = [
        s.rho.map(|v| v - 1.0),
        s.v1.clone(),
        s.v2.clone(),
        s.b1.clone(),
        s.b2.map(|v| v - 1.0),
    ];
    let mut total = 0.0;
    for f in &perturbations {
        total += conormal_l2_field(f, m);
        if m >= 1 {
            total += conormal_l2_field(&ddy(f), m - 1);
        }
        if m >= 2 {
            total += conormal_l2_field(&ddy2(f), m - 2);
        }
    }
    total
}

/// Trapezoid quadrature of the raw values (for integrands that already
/// carry their weights and squares).
fn integrate_values(f: &Field, grid: &Arc<Grid>) -> f64 {
    let nx = grid.nx();
    let mut total = 0.0;
    for j in 0..grid.ny() {
        let mut row = 0.0;
        for i in 0..nx {
            row += f.at(i, j);
        }
        total += row * grid.wy[j] * grid.dx;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::state::{equilibrium, PhysicalParams};
    use std::f64::consts::PI;

    fn grid(nx: usize, ny: usize) -> Arc<Grid> {
        Grid::build(GridSpec {
            nx,
            ny,
            length_x: 1.0,
            ymax: 4.0,
            stretch_beta: 1.5,
        })
        .unwrap()
    }

    fn params() -> PhysicalParams {
        PhysicalParams {
            epsilon: 0.01,
            mu: 1.0,
            lambda: 0.0,
            gamma: 1.4,
        }
    }

    /// Ring of states whose v1 carries f(t, x, y); other fields stay at
    /// the background.
    fn ring_with_v1(g: &Arc<Grid>, n: usize, dt: f64, f: impl Fn(f64, f64, f64) -> f64) -> TimeRing {
        let mut ring = TimeRing::new(n);
        for k in 0..n {
            let t = k as f64 * dt;
            let mut s = equilibrium(g, params());
            s.time = t;
            s.v1 = Field::from_fn(g, |x, y| f(t, x, y));
            ring.push(s).unwrap();
        }
        ring
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi_weight(0.0), 0.0);
        assert_eq!(phi_weight(1.0), 0.5);
        assert_eq!(phi_prime(1.0), 0.25);
        assert_eq!(phi_prime(0.0), 1.0);
        assert!((phi_weight(1e6) - 1.0).abs() < 1e-6);
    }

    #[test]
    #[should_panic]
    fn phi_rejects_negative() {
        phi_weight(-0.1);
    }

    #[test]
    fn zy_annihilates_wall_row_exactly() {
        let g = grid(8, 9);
        let f = Field::from_fn(&g, |x, y| (1.0 + x) * (2.0 + y).ln());
        let z = apply_zy(&f);
        for i in 0..8 {
            assert_eq!(z.at(i, 0), 0.0);
        }
    }

    #[test]
    fn zy_constant_zero_and_linear_value() {
        let g = grid(8, 65);
        assert_eq!(apply_zy(&Field::constant(&g, 3.0)).max_abs(), 0.0);
        let f = Field::from_fn(&g, |_, y| y);
        let z = apply_zy(&f);
        // at y = 1 the image is phi(1) * 1 = 0.5; ddy is exact for linear
        // fields so only the weight evaluation matters
        let j = (0..65)
            .min_by(|&a, &b| {
                (g.ys[a] - 1.0)
                    .abs()
                    .partial_cmp(&(g.ys[b] - 1.0).abs())
                    .unwrap()
            })
            .unwrap();
        assert!((z.at(3, j) - phi_weight(g.ys[j])).abs() < 1e-12);
    }

    #[test]
    fn multi_index_enumeration_counts() {
        assert_eq!(MultiIndex::enumerate(0, 2).len(), 1);
        // order <= 2 over three symbols: C(5,3) = 10
        assert_eq!(MultiIndex::enumerate(2, 2).len(), 10);
        // capping a0 removes (1,0,0), (2,0,0), (1,1,0), (1,0,1)
        assert_eq!(MultiIndex::enumerate(2, 0).len(), 6);
    }

    #[test]
    fn ring_uniform_spacing_enforced() {
        let g = grid(8, 9);
        let mut ring = TimeRing::new(4);
        for (k, t) in [0.0, 0.1, 0.2].iter().enumerate() {
            let mut s = equilibrium(&g, params());
            s.time = *t;
            ring.push(s).unwrap();
            assert_eq!(ring.len(), k + 1);
        }
        let mut bad = equilibrium(&g, params());
        bad.time = 0.35;
        assert!(matches!(
            ring.push(bad),
            Err(ConormalError::NonUniformRing { .. })
        ));
    }

    #[test]
    fn apply_multi_identity_and_depth_error() {
        let g = grid(8, 9);
        let ring = ring_with_v1(&g, 3, 0.1, |_, x, y| x + y);
        let sel = |s: &State| s.v1.clone();
        let id = apply_multi(&ring, &sel, MultiIndex::new(0, 0, 0)).unwrap();
        assert_eq!(id.data(), ring.middle().v1.data());
        let err = apply_multi(&ring, &sel, MultiIndex::new(2, 0, 0)).unwrap_err();
        match err {
            ConormalError::InsufficientDepth { needed, have, .. } => {
                assert_eq!(needed, 5);
                assert_eq!(have, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn time_derivative_exact_for_linear_in_t() {
        let g = grid(8, 9);
        let ring = ring_with_v1(&g, 5, 0.05, |t, x, y| t * (x + 0.5 * y * y));
        let sel = |s: &State| s.v1.clone();
        let dt1 = apply_multi(&ring, &sel, MultiIndex::new(1, 0, 0)).unwrap();
        let expected = Field::from_fn(&g, |x, y| x + 0.5 * y * y);
        assert!(dt1.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn x_derivative_second_order() {
        let mut errs = Vec::new();
        for nx in [16usize, 32] {
            let g = grid(nx, 9);
            let ring = ring_with_v1(&g, 1, 1.0, |_, x, _| (2.0 * PI * x).sin());
            let sel = |s: &State| s.v1.clone();
            let d = apply_multi(&ring, &sel, MultiIndex::new(0, 1, 0)).unwrap();
            let exact = Field::from_fn(&g, |x, _| 2.0 * PI * (2.0 * PI * x).cos());
            errs.push(d.sub(&exact).max_abs());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn constant_field_l2_equals_measure() {
        let g = grid(8, 17);
        let ring = ring_with_v1(&g, 1, 1.0, |_, _, _| 2.0);
        let sel = |s: &State| s.v1.clone();
        let rep = conormal_l2(&ring, &sel, 0, 0).unwrap();
        assert!((rep.total_sq - 4.0 * g.measure()).abs() < 1e-12);
        // higher orders add nothing for constants
        let rep2 = conormal_l2(&ring, &sel, 2, 0).unwrap();
        assert!((rep2.total_sq - rep.total_sq).abs() < 1e-12);
    }

    #[test]
    fn norm_monotone_in_m() {
        let g = grid(16, 17);
        let ring = ring_with_v1(&g, 5, 0.05, |t, x, y| {
            (1.0 + t) * (2.0 * PI * x).sin() * (-y).exp()
        });
        let sel = |s: &State| s.v1.clone();
        let mut prev = 0.0;
        for m in 0..=3 {
            let rep = conormal_l2(&ring, &sel, m, 2).unwrap();
            assert!(rep.total_sq >= prev);
            prev = rep.total_sq;
        }
    }

    #[test]
    fn single_mode_norm_matches_independent_quadrature() {
        // f = sin(2 pi x) e^{-y}: Z2 f = phi(y) * (-e^{-y}) sin(2 pi x),
        // Z1 f = 2 pi cos(2 pi x) e^{-y}. Compare the discrete norm of
        // order 1 (spatial only) against a fine independent Simpson
        // quadrature of the closed forms.
        let g = grid(96, 193);
        let f = Field::from_fn(&g, |x, y| (2.0 * PI * x).sin() * (-y).exp());
        let discrete = conormal_l2_field(&f, 1);

        let simpson = |h: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| -> f64 {
            let step = (b - a) / n as f64;
            let mut total = h(a) + h(b);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                total += w * h(a + k as f64 * step);
            }
            total * step / 3.0
        };
        // x-integrals: int sin^2 = int cos^2 = Lx/2 = 0.5
        let ey2 = |y: f64| (-2.0 * y).exp();
        let base = 0.5 * simpson(&ey2, 0.0, 4.0, 4000);
        let z1 = 0.5 * (2.0 * PI) * (2.0 * PI) * simpson(&ey2, 0.0, 4.0, 4000);
        let z2f = |y: f64| {
            let w = phi_weight(y) * (-y).exp();
            w * w
        };
        let z2 = 0.5 * simpson(&z2f, 0.0, 4.0, 4000);
        let exact = base + z1 + z2;
        assert!(
            (discrete - exact).abs() < 3e-3 * exact,
            "discrete {discrete} vs exact {exact}"
        );
    }

    #[test]
    fn energy_zero_at_equilibrium() {
        let g = grid(8, 9);
        let mut ring = TimeRing::new(5);
        for k in 0..5 {
            let mut s = equilibrium(&g, params());
            s.time = 0.05 * k as f64;
            ring.push(s).unwrap();
        }
        let rep = energy_nm(&ring, 2, 2).unwrap();
        assert_eq!(rep.instantaneous_total(), 0.0);
    }

    #[test]
    fn energy_reduces_to_magnetic_block_for_steady_b_perturbation() {
        let g = grid(8, 9);
        let mut ring = TimeRing::new(5);
        let c = 0.125;
        for k in 0..5 {
            let mut s = equilibrium(&g, params());
            s.time = 0.05 * k as f64;
            s.b2 = Field::constant(&g, 1.0 + c);
            ring.push(s).unwrap();
        }
        let rep = energy_nm(&ring, 2, 2).unwrap();
        let expected = c * c * g.measure();
        assert!((rep.magnetic - expected).abs() < 1e-12);
        assert!((rep.instantaneous_total() - rep.magnetic).abs() < 1e-14);
    }

    #[test]
    fn energy_blocks_sum_to_total() {
        let g = grid(12, 17);
        let mut ring = TimeRing::new(5);
        for k in 0..5 {
            let t = 0.05 * k as f64;
            let mut s = equilibrium(&g, params());
            s.time = t;
            s.v1 = Field::from_fn(&g, |x, y| {
                0.01 * (1.0 + 0.3 * t) * (2.0 * PI * x).sin() * y * y * (-y).exp()
            });
            s.rho = Field::from_fn(&g, |x, y| {
                1.0 + 0.01 * (2.0 * PI * x).cos() * (-y * y).exp() * (1.0 + 0.1 * t)
            });
            ring.push(s).unwrap();
        }
        let rep = energy_nm(&ring, 2, 2).unwrap();
        let total = rep.kinetic
            + rep.magnetic
            + rep.acoustic
            + rep.dy1
            + rep.dy2
            + rep.grad_v
            + rep.div_v
            + rep.visc_v1
            + rep.visc_v2;
        assert!((rep.instantaneous_total() - total).abs() <= f64::EPSILON * total.abs());
        let alpha_sum: f64 = rep.per_alpha_core.iter().map(|(_, v)| v).sum();
        assert!((alpha_sum - rep.core_total()).abs() < 1e-12 * (1.0 + alpha_sum.abs()));
    }

    #[test]
    fn energy_invariant_under_x_translation() {
        let g = grid(16, 17);
        let build = |shift: usize| {
            let mut ring = TimeRing::new(5);
            for k in 0..5 {
                let t = 0.05 * k as f64;
                let mut s = equilibrium(&g, params());
                s.time = t;
                let raw = Field::from_fn(&g, |x, y| {
                    0.01 * (1.0 + t) * (2.0 * PI * x).sin() * y * y * (-y).exp()
                });
                let mut shifted = Field::zeros(&g);
                for j in 0..g.ny() {
                    for i in 0..g.nx() {
                        shifted.set(i, j, raw.at((i + shift) % g.nx(), j));
                    }
                }
                s.v1 = shifted;
                ring.push(s).unwrap();
            }
            energy_nm(&ring, 2, 2).unwrap().instantaneous_total()
        };
        let a = build(0);
        let b = build(1);
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn initial_smallness_frozen_regression() {
        // default one-mode data at amplitude 1e-2 on the default grid;
        // the value is a first-run measurement kept as a regression
        // guard, and the construction is exactly quadratic in amplitude
        let cfg = crate::config::Config::default();
        let g = Grid::build(cfg.grid).unwrap();
        let params = cfg.physics.with_epsilon(1e-2);
        let s = crate::state::make_initial(&g, params, &cfg.initial).unwrap();
        let sm = initial_smallness(&s, 2);
        let frozen = 1.8650436559772505e0;
        assert!(
            (sm - frozen).abs() < 1e-9 * frozen,
            "smallness {sm} vs frozen {frozen}"
        );
        let mut double = cfg.initial.clone();
        double.amplitude = 2e-2;
        let s2 = crate::state::make_initial(&g, params, &double).unwrap();
        let ratio = initial_smallness(&s2, 2) / sm;
        assert!((ratio - 4.0).abs() < 1e-12 * 4.0, "ratio {ratio}");
    }

    #[test]
    fn sup_norm_of_constant_and_monotonicity() {
        let g = grid(8, 17);
        let ring = ring_with_v1(&g, 5, 0.05, |t, x, y| {
            2.0 + 0.1 * t * ((2.0 * PI * x).sin() + y)
        });
        let sel = |s: &State| s.v1.clone();
        let m0 = conormal_sup(&ring, &sel, 0, 0).unwrap();
        let mid = ring.middle().v1.max_abs();
        assert_eq!(m0, mid);
        let mut prev = 0.0;
        for m in 0..=2 {
            let v = conormal_sup(&ring, &sel, m, 2).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn z1_z2_commute() {
        let g = grid(16, 33);
        let f = Field::from_fn(&g, |x, y| (2.0 * PI * x).sin() * (-y).exp() * (1.0 + y));
        let a = apply_z1(&apply_zy(&f));
        let b = apply_zy(&apply_z1(&f));
        assert!(a.sub(&b).max_abs() < 1e-11);
    }
}
