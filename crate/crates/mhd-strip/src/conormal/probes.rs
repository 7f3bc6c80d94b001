//! Empirical probes of the two functional inequalities used by the
//! energy argument: the product (Gagliardo-Nirenberg-Moser type)
//! inequality and the anisotropic sup-norm embedding. Both assert
//! boundedness with non-explicit constants, so the probes report the
//! observed ratio of left to right side; the checks freeze a first-run
//! maximum and watch that refinement keeps the ratio in range.

use crate::grid::{ddy, Field, Grid};
use std::sync::Arc;

use super::{apply_multi_levels, conormal_l2_levels, ConormalError, MultiIndex};

const RHS_FLOOR: f64 = 1e-30;

/// A uniformly sampled scalar time series on one grid.
pub struct ScalarRing {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
}

impl ScalarRing {
    /// Sample f(t, x, y) at n levels spaced dt apart starting at t0.
    pub fn sample(
        grid: &Arc<Grid>,
        t0: f64,
        dt: f64,
        n: usize,
        f: &dyn Fn(f64, f64, f64) -> f64,
    ) -> ScalarRing {
        let mut times = Vec::with_capacity(n);
        let mut fields = Vec::with_capacity(n);
        for k in 0..n {
            let t = t0 + k as f64 * dt;
            times.push(t);
            fields.push(Field::from_fn(grid, |x, y| f(t, x, y)));
        }
        ScalarRing { times, fields }
    }

    fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    fn sup_abs(&self) -> f64 {
        self.fields.iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }

    fn ddy(&self) -> ScalarRing {
        ScalarRing {
            times: self.times.clone(),
            fields: self.fields.iter().map(ddy).collect(),
        }
    }
}

/// Trapezoid rule over the values attached to uniformly spaced times.
fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

/// max over splits |alpha|+|beta| = m of
///   int ||Z^a f Z^b g||^2 / (||f||_inf^2 int ||g||_m^2 + ||g||_inf^2 int ||f||_m^2)
/// with the time integrals taken over the ring window where centered
/// time differencing is available.
pub fn probe_product_inequality(
    f: &ScalarRing,
    g: &ScalarRing,
    m: usize,
    alpha0_max: usize,
) -> Result<f64, ConormalError> {
    assert_eq!(f.len(), g.len());
    let n = f.len();
    let margin = alpha0_max;
    assert!(n > 2 * margin, "ring too short for the requested a0");
    let centers: Vec<usize> = (margin..n - margin).collect();
    let dt = f.dt();

    let int_norm = |r: &ScalarRing| -> Result<f64, ConormalError> {
        let per: Result<Vec<f64>, _> = centers
            .iter()
            .map(|&c| conormal_l2_levels(&r.fields, dt, c, m, alpha0_max).map(|n| n.total_sq))
            .collect();
        Ok(trapezoid(&per?, dt))
    };
    let int_f = int_norm(f)?;
    let int_g = int_norm(g)?;
    let sup_f = f.sup_abs();
    let sup_g = g.sup_abs();

    let mut worst: f64 = 0.0;
    for alpha in MultiIndex::enumerate(m, alpha0_max) {
        for beta in MultiIndex::enumerate(m, alpha0_max) {
            if alpha.order() + beta.order() != m {
                continue;
            }
            let mut vals = Vec::with_capacity(centers.len());
            for &c in &centers {
                let za = apply_multi_levels(&f.fields, dt, c, alpha)?;
                let zb = apply_multi_levels(&g.fields, dt, c, beta)?;
                vals.push(za.mul(&zb).l2_sq());
            }
            let lhs = trapezoid(&vals, dt);
            let rhs = sup_f * sup_f * int_g + sup_g * sup_g * int_f;
            worst = worst.max(lhs / rhs.max(RHS_FLOOR));
        }
    }
    Ok(worst)
}

/// Ratio of ||f||_{L^inf}^2 to the embedding bound
///   ||f(t0)||_2^2 + ||d_y f(t0)||_1^2 + int_{t0}^{t1} (||f||_3^2 + ||d_y f||_2^2)
/// evaluated over the centered window of the ring.
pub fn probe_embedding(f: &ScalarRing, alpha0_max: usize) -> Result<f64, ConormalError> {
    let n = f.len();
    let margin = alpha0_max.max(2);
    assert!(n > 2 * margin, "ring too short for the embedding probe");
    let centers: Vec<usize> = (margin..n - margin).collect();
    let dt = f.dt();
    let dy_ring = f.ddy();

    let lhs = {
        let mut sup: f64 = 0.0;
        for &c in &centers {
            sup = sup.max(f.fields[c].max_abs());
        }
        sup * sup
    };

    let t0 = centers[0];
    let at_t0 = conormal_l2_levels(&f.fields, dt, t0, 2, alpha0_max.min(2))?.total_sq
        + conormal_l2_levels(&dy_ring.fields, dt, t0, 1, alpha0_max.min(1))?.total_sq;
    let mut vals = Vec::with_capacity(centers.len());
    for &c in &centers {
        let a = conormal_l2_levels(&f.fields, dt, c, 3, alpha0_max)?.total_sq;
        let b = conormal_l2_levels(&dy_ring.fields, dt, c, 2, alpha0_max)?.total_sq;
        vals.push(a + b);
    }
    let rhs = at_t0 + trapezoid(&vals, dt);
    Ok(lhs / rhs.max(RHS_FLOOR))
}

/// Deterministic pseudo-random stream for the synthetic probe suite
/// (splitmix64 over the unit interval).
pub struct SampleStream {
    state: u64,
}

impl SampleStream {
    pub fn new(seed: u64) -> SampleStream {
        SampleStream { state: seed }
    }

    pub fn next_unit(&mut self) -> f64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }
}

/// A band-limited synthetic scalar: a few x-harmonics with smooth decaying
/// wall-normal envelopes and slow oscillation in time.
pub struct SyntheticField {
    terms: Vec<(f64, usize, f64, f64, usize, f64)>,
    length_x: f64,
}

impl SyntheticField {
    pub fn draw(stream: &mut SampleStream, length_x: f64) -> SyntheticField {
        let n_terms = 2 + (stream.next_unit() * 2.0) as usize;
        let mut terms = Vec::new();
        for _ in 0..n_terms {
            let amp = stream.range(0.2, 1.0);
            let kx = 1 + (stream.next_unit() * 3.0) as usize;
            let phase = stream.range(0.0, std::f64::consts::TAU);
            let omega = stream.range(0.5, 2.0);
            let envelope = (stream.next_unit() * 3.0) as usize;
            let decay = stream.range(0.5, 1.5);
            terms.push((amp, kx, phase, omega, envelope, decay));
        }
        SyntheticField { terms, length_x }
    }

    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        let mut total = 0.0;
        for &(amp, kx, phase, omega, envelope, decay) in &self.terms {
            let k = 2.0 * std::f64::consts::PI * kx as f64 / self.length_x;
            let env = match envelope {
                0 => (-decay * y).exp(),
                1 => y * (-decay * y).exp(),
                _ => (-decay * y * y).exp(),
            };
            total += amp * (k * x + phase).cos() * (1.0 + 0.3 * (omega * t).sin()) * env;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn grid(nx: usize, ny: usize) -> Arc<Grid> {
        Grid::build(GridSpec {
            nx,
            ny,
            length_x: 1.0,
            ymax: 4.0,
            stretch_beta: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn product_ratio_zero_for_zero_g() {
        let g = grid(8, 9);
        let f = ScalarRing::sample(&g, 0.0, 0.1, 7, &|t, x, _| (2.0 * PI * x).sin() + t);
        let zero = ScalarRing::sample(&g, 0.0, 0.1, 7, &|_, _, _| 0.0);
        let r = probe_product_inequality(&f, &zero, 2, 2).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn product_ratio_at_most_one_for_constant_f() {
        let g = grid(12, 17);
        let f = ScalarRing::sample(&g, 0.0, 0.1, 7, &|_, _, _| 1.0);
        let gg = ScalarRing::sample(&g, 0.0, 0.1, 7, &|t, x, y| {
            (2.0 * PI * x).sin() * (-y).exp() * (1.0 + 0.2 * t)
        });
        let r = probe_product_inequality(&f, &gg, 2, 2).unwrap();
        assert!(r <= 1.0 + 1e-12, "ratio {r}");
    }

    #[test]
    fn embedding_zero_field_and_constant_field() {
        let g = grid(8, 9);
        let zero = ScalarRing::sample(&g, 0.0, 0.1, 7, &|_, _, _| 0.0);
        assert_eq!(probe_embedding(&zero, 2).unwrap(), 0.0);

        let c = 3.0;
        let cring = ScalarRing::sample(&g, 0.0, 0.1, 7, &|_, _, _| c);
        let r = probe_embedding(&cring, 2).unwrap();
        // LHS = c^2, RHS >= c^2 * measure (the t0 term alone)
        assert!(r <= 1.0 / g.measure() + 1e-12, "ratio {r}");
        assert!(r > 0.0);
    }

    #[test]
    fn synthetic_suite_ratios_finite_and_stable() {
        let mut stream = SampleStream::new(12345);
        let g = grid(16, 17);
        for _ in 0..5 {
            let sf = SyntheticField::draw(&mut stream, 1.0);
            let sg = SyntheticField::draw(&mut stream, 1.0);
            let fr = ScalarRing::sample(&g, 0.0, 0.05, 9, &|t, x, y| sf.eval(t, x, y));
            let gr = ScalarRing::sample(&g, 0.0, 0.05, 9, &|t, x, y| sg.eval(t, x, y));
            let r1 = probe_product_inequality(&fr, &gr, 2, 2).unwrap();
            let r2 = probe_embedding(&fr, 2).unwrap();
            assert!(r1.is_finite() && r1 >= 0.0);
            assert!(r2.is_finite() && r2 >= 0.0);
        }
    }

    #[test]
    fn sample_stream_is_deterministic() {
        let mut a = SampleStream::new(7);
        let mut b = SampleStream::new(7);
        for _ in 0..10 {
            assert_eq!(a.next_unit().to_bits(), b.next_unit().to_bits());
        }
    }
}
