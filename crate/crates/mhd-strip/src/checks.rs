//! Verification suite behind the `verify` and `mms` subcommands:
//! operator order-of-accuracy checks, commutator table checks (exact
//! order-one coefficient plus residual decay under refinement), the
//! synthetic inequality-probe suite with frozen first-run maxima, and the
//! manufactured-solution convergence study.

use std::sync::Arc;

use crate::config::Config;
use crate::conormal::commutator::{
    commutator_table, verify_commutator, CommutatorIdentity, ALL_IDENTITIES,
};
use crate::conormal::probes::{
    probe_embedding, probe_product_inequality, SampleStream, ScalarRing, SyntheticField,
};
use crate::conormal::{phi_prime, M_MAX};
use crate::dynamics::mms::MmsSolution;
use crate::dynamics::{cfl, step, SolverKind, StepControl};
use crate::grid::{ddx, ddy, ddy2, Field, Grid, GridSpec};

/// One named check with its admissible window.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl CheckRow {
    pub fn pass(&self) -> bool {
        self.value.is_finite() && (self.lo..=self.hi).contains(&self.value)
    }
}

fn order_grid(nx: usize, ny: usize) -> Arc<Grid> {
    Grid::build(GridSpec {
        nx,
        ny,
        length_x: 1.0,
        ymax: 1.0,
        stretch_beta: 2.0,
    })
    .unwrap()
}

/// Refinement ratios error(N)/error(2N) for the three operators on a
/// smooth analytic field; second order means a ratio near 4.
pub fn operator_order_checks() -> Vec<CheckRow> {
    use std::f64::consts::PI;
    let field = |g: &Arc<Grid>| {
        Field::from_fn(g, |x, y| (2.0 * PI * x).sin() * (1.5 * y).cos() * (-y).exp())
    };
    type OpOf = fn(&Field) -> Field;
    type ExactOf = fn(&Arc<Grid>) -> Field;
    let exact: [(&str, OpOf, ExactOf); 3] = [
        ("order(ddx)", ddx, |g| {
            Field::from_fn(g, |x, y| {
                2.0 * PI * (2.0 * PI * x).cos() * (1.5 * y).cos() * (-y).exp()
            })
        }),
        ("order(ddy)", ddy, |g| {
            Field::from_fn(g, |x, y| {
                (2.0 * PI * x).sin() * (-y).exp() * (-1.5 * (1.5 * y).sin() - (1.5 * y).cos())
            })
        }),
        ("order(ddy2)", ddy2, |g| {
            Field::from_fn(g, |x, y| {
                let s = (1.5 * y).sin();
                let c = (1.5 * y).cos();
                (2.0 * PI * x).sin() * (-y).exp() * ((1.0 - 2.25) * c + 3.0 * s)
            })
        }),
    ];
    let mut rows = Vec::new();
    for (name, op, exact_of) in exact {
        let mut errs = Vec::new();
        for &(nx, ny) in &[(64usize, 65usize), (128, 129)] {
            let g = order_grid(nx, ny);
            errs.push(op(&field(&g)).sub(&exact_of(&g)).max_abs());
        }
        rows.push(CheckRow {
            name: name.to_string(),
            value: errs[0] / errs[1],
            lo: 3.5,
            hi: 4.5,
        });
    }
    rows
}

fn identity_name(which: CommutatorIdentity) -> &'static str {
    match which {
        CommutatorIdentity::DyLeft => "dy_left",
        CommutatorIdentity::DyRight => "dy_right",
        CommutatorIdentity::Dy2Left => "dy2_left",
        CommutatorIdentity::Dy2Right => "dy2_right",
        CommutatorIdentity::PhiInv => "phi_inv",
        CommutatorIdentity::PhiMul => "phi_mul",
    }
}

/// Exact order-one coefficient (both orderings equal -phi') plus the
/// residual decay factor of every identity and order under a doubling.
pub fn commutator_checks() -> Vec<CheckRow> {
    use std::f64::consts::PI;
    let mut rows = Vec::new();

    let t1 = commutator_table(1).unwrap();
    let mut worst = 0.0f64;
    for k in 0..200 {
        let y = 0.05 * k as f64;
        worst = worst.max((t1.dy_left[0].eval(y) + phi_prime(y)).abs());
        worst = worst.max((t1.dy_right[0].eval(y) + phi_prime(y)).abs());
    }
    rows.push(CheckRow {
        name: "commutator m=1 coefficient vs -phi'".to_string(),
        value: worst,
        lo: 0.0,
        hi: 1e-12,
    });

    let field = |g: &Arc<Grid>| {
        Field::from_fn(g, |x, y| y * (2.0 * PI * x).cos() * (-0.7 * y).exp())
    };
    for m in 1..=M_MAX {
        let table = commutator_table(m).unwrap();
        for which in ALL_IDENTITIES {
            let mut errs = Vec::new();
            for &(nx, ny) in &[(64usize, 129usize), (128, 257)] {
                let g = Grid::build(GridSpec {
                    nx,
                    ny,
                    length_x: 1.0,
                    ymax: 3.0,
                    stretch_beta: 1.0,
                })
                .unwrap();
                errs.push(verify_commutator(&table, &field(&g), which));
            }
            rows.push(CheckRow {
                name: format!("commutator decay {} m={}", identity_name(which), m),
                value: errs[0] / errs[1],
                lo: 3.2,
                hi: 4.8,
            });
        }
    }
    rows
}

/// Frozen first-run maxima of the 20-sample inequality-probe suite at the
/// base resolution (nx = ny-1 = 32, m = 2, seed below). Criterion: the
/// refined suite stays within 1.5x of these.
pub const PRODUCT_RATIO_BASELINE: f64 = 2.4594738881604164e-1;
#[allow(clippy::excessive_precision)]
pub const EMBEDDING_RATIO_BASELINE: f64 = 3.9363604241018072e-4;
pub const PROBE_SEED: u64 = 20260811;
pub const PROBE_SAMPLES: usize = 20;

/// Max product-inequality and embedding ratios over the synthetic suite
/// on an (nx, ny) grid.
pub fn inequality_probe_suite(nx: usize, ny: usize) -> (f64, f64) {
    let g = Grid::build(GridSpec {
        nx,
        ny,
        length_x: 1.0,
        ymax: 4.0,
        stretch_beta: 1.0,
    })
    .unwrap();
    let mut stream = SampleStream::new(PROBE_SEED);
    let mut worst_product = 0.0f64;
    let mut worst_embedding = 0.0f64;
    for _ in 0..PROBE_SAMPLES {
        let sf = SyntheticField::draw(&mut stream, 1.0);
        let sg = SyntheticField::draw(&mut stream, 1.0);
        let fr = ScalarRing::sample(&g, 0.0, 0.05, 9, &|t, x, y| sf.eval(t, x, y));
        let gr = ScalarRing::sample(&g, 0.0, 0.05, 9, &|t, x, y| sg.eval(t, x, y));
        worst_product = worst_product.max(probe_product_inequality(&fr, &gr, 2, 2).unwrap());
        worst_embedding = worst_embedding.max(probe_embedding(&fr, 2).unwrap());
    }
    (worst_product, worst_embedding)
}

/// Probe-suite stability rows: the refined-grid maxima against the
/// frozen baselines.
pub fn inequality_probe_checks() -> Vec<CheckRow> {
    let (p_ref, e_ref) = inequality_probe_suite(64, 65);
    vec![
        CheckRow {
            name: "product-inequality ratio (refined vs frozen)".to_string(),
            value: p_ref / PRODUCT_RATIO_BASELINE,
            lo: 1.0 / 1.5,
            hi: 1.5,
        },
        CheckRow {
            name: "embedding ratio (refined vs frozen)".to_string(),
            value: e_ref / EMBEDDING_RATIO_BASELINE,
            lo: 1.0 / 1.5,
            hi: 1.5,
        },
    ]
}

/// Observed convergence orders of the manufactured-solution study.
#[derive(Debug, Clone)]
pub struct MmsOrderRow {
    pub solver: SolverKind,
    pub field: &'static str,
    pub coarse_n: usize,
    pub order: f64,
}

pub const MMS_FIELD_NAMES: [&str; 5] = ["rho", "v1", "v2", "b1", "b2"];

/// Run the manufactured solution on `levels` grids (n = 32, 64, ...)
/// for both solvers with the filter off and report the observed L2
/// orders between consecutive levels.
pub fn mms_study(cfg: &Config, levels: usize, epsilon: f64, horizon: f64) -> Vec<MmsOrderRow> {
    let m = MmsSolution::standard(cfg.grid.length_x);
    let mut rows = Vec::new();
    for kind in [SolverKind::Viscous, SolverKind::Ideal] {
        let eps = match kind {
            SolverKind::Viscous => epsilon,
            SolverKind::Ideal => 0.0,
        };
        let params = cfg.physics.with_epsilon(eps);
        let mut errors: Vec<[f64; 5]> = Vec::new();
        let mut sizes = Vec::new();
        for level in 0..levels {
            let n = 32usize << level;
            sizes.push(n);
            let grid = Grid::build(GridSpec {
                nx: n,
                ny: n,
                length_x: cfg.grid.length_x,
                ymax: cfg.grid.ymax,
                stretch_beta: cfg.grid.stretch_beta,
            })
            .unwrap();
            let mut s = m.state_at(&grid, params, 0.0);
            let ctl = StepControl {
                cfl_adv: cfg.time.cfl_adv,
                cfl_visc: cfg.time.cfl_visc,
                dt_cap: cfg.time.dt_cap,
            };
            while s.time < horizon - 1e-12 {
                let dt = cfl(&s, &ctl).unwrap().min(horizon - s.time);
                s = step(&s, dt, kind, Some(&m), 0.0).unwrap();
            }
            errors.push(m.errors(&s));
        }
        for pair in 0..levels - 1 {
            for (k, field) in MMS_FIELD_NAMES.iter().enumerate() {
                rows.push(MmsOrderRow {
                    solver: kind,
                    field,
                    coarse_n: sizes[pair],
                    order: (errors[pair][k] / errors[pair + 1][k]).log2(),
                });
            }
        }
    }
    rows
}
