//! Residual checks for the structural identities that recover normal
//! derivatives from the evolution equations: the divergence identity
//! (mass equation), the d_y v1 identity (b1 equation), the d_y v2
//! identity (mass equation again) and the d_y p relation (v2 momentum).
//! Each residual is the discrete left side minus right side at the
//! ring's middle time, with d_t terms taken by the same centered
//! differencing as Z0. On unforced solver output every residual is
//! O(h^2 + dt_store^2); on the equilibrium ring they vanish exactly.

use crate::conormal::{apply_multi, ConormalError, MultiIndex, TimeRing};
use crate::grid::{ddx, ddx2, ddy, ddy2, Field};
use crate::state::pressure;

fn dt_of(ring: &TimeRing, selector: &dyn Fn(&crate::state::State) -> Field) -> Result<Field, ConormalError> {
    apply_multi(ring, selector, MultiIndex::new(1, 0, 0))
}

/// div v + gamma^{-1} p^{-1} (d_t (p-1) + v . grad (p-1)).
pub fn residual_div_identity(ring: &TimeRing) -> Result<Field, ConormalError> {
    let mid = ring.middle();
    let gamma = mid.params.gamma;
    let p_sel = move |s: &crate::state::State| pressure(&s.rho, gamma).expect("positive rho");
    let dt_p = dt_of(ring, &p_sel)?;
    let p = p_sel(mid);
    let div_v = ddx(&mid.v1).add(&ddy(&mid.v2));
    let vgradp = mid.v1.mul(&ddx(&p)).add(&mid.v2.mul(&ddy(&p)));
    let rhs = dt_p.add(&vgradp).zip(&p, |n, pp| -n / (gamma * pp));
    Ok(div_v.sub(&rhs))
}

/// d_y v1 - (d_t b1 - (b2-1) d_y v1 + v1 d_x b1 + v2 d_y b1 + b1 d_y v2).
pub fn residual_dyv1(ring: &TimeRing) -> Result<Field, ConormalError> {
    let mid = ring.middle();
    let dt_b1 = dt_of(ring, &|s: &crate::state::State| s.b1.clone())?;
    let dyv1 = ddy(&mid.v1);
    let b2t = mid.b2.map(|v| v - 1.0);
    let rhs = dt_b1
        .sub(&b2t.mul(&dyv1))
        .add(&mid.v1.mul(&ddx(&mid.b1)))
        .add(&mid.v2.mul(&ddy(&mid.b1)))
        .add(&mid.b1.mul(&ddy(&mid.v2)));
    Ok(dyv1.sub(&rhs))
}

/// d_y v2 - (-d_x v1 - gamma^{-1} p^{-1} d_t p - gamma^{-1} p^{-1} v . grad p).
pub fn residual_dyv2(ring: &TimeRing) -> Result<Field, ConormalError> {
    let mid = ring.middle();
    let gamma = mid.params.gamma;
    let p_sel = move |s: &crate::state::State| pressure(&s.rho, gamma).expect("positive rho");
    let dt_p = dt_of(ring, &p_sel)?;
    let p = p_sel(mid);
    let vgradp = mid.v1.mul(&ddx(&p)).add(&mid.v2.mul(&ddy(&p)));
    let rhs = ddx(&mid.v1)
        .scale(-1.0)
        .sub(&dt_p.add(&vgradp).zip(&p, |n, pp| n / (gamma * pp)));
    Ok(ddy(&mid.v2).sub(&rhs))
}

/// The d_y p relation from the v2 momentum equation:
/// (d_y p - eps (2mu+lambda) d_y^2 v2) minus
/// (-rho d_t v2 + b1 d_x b2 - rho v.grad v2 - b1 d_y b1
/// + eps mu d_x^2 v2 + eps (mu+lambda) d_y d_x v1).
pub fn residual_dyp(ring: &TimeRing) -> Result<Field, ConormalError> {
    let mid = ring.middle();
    let params = mid.params;
    let gamma = params.gamma;
    let eps = params.epsilon;
    let p = pressure(&mid.rho, gamma).expect("positive rho");
    let dt_v2 = dt_of(ring, &|s: &crate::state::State| s.v2.clone())?;
    let lhs = ddy(&p).sub(&ddy2(&mid.v2).scale(eps * (2.0 * params.mu + params.lambda)));
    let vgradv2 = mid.v1.mul(&ddx(&mid.v2)).add(&mid.v2.mul(&ddy(&mid.v2)));
    let rhs = mid
        .rho
        .mul(&dt_v2)
        .scale(-1.0)
        .add(&mid.b1.mul(&ddx(&mid.b2)))
        .sub(&mid.rho.mul(&vgradv2))
        .sub(&mid.b1.mul(&ddy(&mid.b1)))
        .add(&ddx2(&mid.v2).scale(eps * params.mu))
        .add(&ddy(&ddx(&mid.v1)).scale(eps * (params.mu + params.lambda)));
    Ok(lhs.sub(&rhs))
}

/// The b1 evolution equation in the same expanded form the d_y v1
/// identity rearranges (d_t b1 minus the transported shear terms).
/// Term for term the negative of `residual_dyv1`, which the tests pin
/// down.
pub fn residual_induction_b1(ring: &TimeRing) -> Result<Field, ConormalError> {
    residual_dyv1(ring).map(|f| f.scale(-1.0))
}

/// max_x |b2(t, x, 0) - b2(0, x, 0)| for one b2 field against the
/// recorded initial wall row.
pub fn wall_trace_drift(initial_wall: &[f64], b2: &Field) -> f64 {
    let mut worst = 0.0f64;
    for (i, w0) in initial_wall.iter().enumerate() {
        worst = worst.max((b2.at(i, 0) - w0).abs());
    }
    worst
}
