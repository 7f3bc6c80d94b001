//! Closed-form coefficient functions built from the conormal weight.
//!
//! The commutator identities of the weighted calculus have coefficient
//! functions that are polynomial in phi and its derivatives (phi itself
//! may also appear with a negative power). `PhiExpr` represents such a
//! function exactly and evaluates it pointwise; `PureOp` represents a
//! differential operator sum c_j(y) d^j/dy^j with `PhiExpr` coefficients
//! and supports exact composition, which gives an independent expansion
//! route used to cross-check the recursion-built tables.

use std::collections::BTreeMap;

/// phi^phi_pow * prod_d phi^{(d)} with d >= 1 listed (sorted) in `derivs`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Monomial {
    pub phi_pow: i32,
    pub derivs: Vec<u8>,
}

impl Monomial {
    fn one() -> Monomial {
        Monomial {
            phi_pow: 0,
            derivs: Vec::new(),
        }
    }
}

/// Linear combination of monomials with f64 coefficients (all integer
/// valued in the identities handled here, so arithmetic stays exact).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PhiExpr {
    terms: BTreeMap<Monomial, f64>,
}

impl PhiExpr {
    pub fn zero() -> PhiExpr {
        PhiExpr::default()
    }

    pub fn one() -> PhiExpr {
        PhiExpr::constant(1.0)
    }

    pub fn constant(c: f64) -> PhiExpr {
        let mut e = PhiExpr::zero();
        if c != 0.0 {
            e.terms.insert(Monomial::one(), c);
        }
        e
    }

    /// phi^p.
    pub fn phi_pow(p: i32) -> PhiExpr {
        let mut e = PhiExpr::zero();
        e.terms.insert(
            Monomial {
                phi_pow: p,
                derivs: Vec::new(),
            },
            1.0,
        );
        e
    }

    /// phi^{(d)} for d >= 1.
    pub fn phi_deriv(d: u8) -> PhiExpr {
        assert!(d >= 1);
        let mut e = PhiExpr::zero();
        e.terms.insert(
            Monomial {
                phi_pow: 0,
                derivs: vec![d],
            },
            1.0,
        );
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &PhiExpr) -> PhiExpr {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &PhiExpr) -> PhiExpr {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> PhiExpr {
        let mut out = PhiExpr::zero();
        for (m, c) in &self.terms {
            out.insert(m.clone(), a * c);
        }
        out
    }

    pub fn mul(&self, other: &PhiExpr) -> PhiExpr {
        let mut out = PhiExpr::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut derivs = ma.derivs.clone();
                derivs.extend_from_slice(&mb.derivs);
                derivs.sort_unstable();
                out.insert(
                    Monomial {
                        phi_pow: ma.phi_pow + mb.phi_pow,
                        derivs,
                    },
                    ca * cb,
                );
            }
        }
        out
    }

    /// d/dy by the product rule; phi^{(d)} -> phi^{(d+1)}.
    pub fn dy(&self) -> PhiExpr {
        let mut out = PhiExpr::zero();
        for (m, c) in &self.terms {
            if m.phi_pow != 0 {
                let mut derivs = m.derivs.clone();
                derivs.push(1);
                derivs.sort_unstable();
                out.insert(
                    Monomial {
                        phi_pow: m.phi_pow - 1,
                        derivs,
                    },
                    c * m.phi_pow as f64,
                );
            }
            for (idx, d) in m.derivs.iter().enumerate() {
                let mut derivs = m.derivs.clone();
                derivs[idx] = d + 1;
                derivs.sort_unstable();
                out.insert(
                    Monomial {
                        phi_pow: m.phi_pow,
                        derivs,
                    },
                    *c,
                );
            }
        }
        out
    }

    /// The conormal derivative phi * d/dy of this coefficient function.
    pub fn z2(&self) -> PhiExpr {
        self.dy().mul(&PhiExpr::phi_pow(1))
    }

    /// Evaluate at y >= 0 for phi = y/(1+y). Negative phi powers require
    /// y > 0.
    pub fn eval(&self, y: f64) -> f64 {
        let u = 1.0 / (1.0 + y);
        let phi = y * u;
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut v = *c;
            if m.phi_pow != 0 {
                v *= phi.powi(m.phi_pow);
            }
            for &d in &m.derivs {
                // phi^{(d)} = (-1)^{d+1} d! / (1+y)^{d+1}
                let mut fact = 1.0;
                for k in 2..=d as u64 {
                    fact *= k as f64;
                }
                let sign = if d % 2 == 1 { 1.0 } else { -1.0 };
                v *= sign * fact * u.powi(d as i32 + 1);
            }
            total += v;
        }
        total
    }
}

/// Differential operator sum_j c_j(y) d^j/dy^j (j = 0 is multiplication).
#[derive(Clone, Debug, Default)]
pub struct PureOp {
    terms: BTreeMap<u32, PhiExpr>,
}

impl PureOp {
    pub fn zero() -> PureOp {
        PureOp::default()
    }

    pub fn identity() -> PureOp {
        PureOp::mult(PhiExpr::one())
    }

    pub fn mult(c: PhiExpr) -> PureOp {
        let mut op = PureOp::zero();
        op.insert(0, c);
        op
    }

    pub fn dy_op() -> PureOp {
        let mut op = PureOp::zero();
        op.insert(1, PhiExpr::one());
        op
    }

    /// Z2 = phi d/dy.
    pub fn z2_op() -> PureOp {
        let mut op = PureOp::zero();
        op.insert(1, PhiExpr::phi_pow(1));
        op
    }

    fn insert(&mut self, j: u32, c: PhiExpr) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(j).or_insert_with(PhiExpr::zero);
        *entry = entry.add(&c);
        if entry.is_zero() {
            self.terms.remove(&j);
        }
    }

    pub fn add(&self, other: &PureOp) -> PureOp {
        let mut out = self.clone();
        for (j, c) in &other.terms {
            out.insert(*j, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &PureOp) -> PureOp {
        let mut out = self.clone();
        for (j, c) in &other.terms {
            out.insert(*j, c.scale(-1.0));
        }
        out
    }

    pub fn scale_fn(&self, c: &PhiExpr) -> PureOp {
        let mut out = PureOp::zero();
        for (j, e) in &self.terms {
            out.insert(*j, c.mul(e));
        }
        out
    }

    /// Operator composition self o other via the Leibniz rule:
    /// (c d^j) o (e d^k) = sum_i C(j,i) c e^{(i)} d^{j+k-i}.
    pub fn compose(&self, other: &PureOp) -> PureOp {
        let mut out = PureOp::zero();
        for (j, c) in &self.terms {
            for (k, e) in &other.terms {
                let mut e_deriv = e.clone();
                let mut binom = 1.0;
                for i in 0..=*j {
                    if i > 0 {
                        binom = binom * (*j - i + 1) as f64 / i as f64;
                        e_deriv = e_deriv.dy();
                    }
                    let coeff = if i == 0 { e.clone() } else { e_deriv.clone() };
                    out.insert(j + k - i, c.mul(&coeff).scale(binom));
                }
            }
        }
        out
    }

    pub fn pow(op: &PureOp, m: usize) -> PureOp {
        let mut out = PureOp::identity();
        for _ in 0..m {
            out = op.compose(&out);
        }
        out
    }

    pub fn commutator(a: &PureOp, b: &PureOp) -> PureOp {
        a.compose(b).sub(&b.compose(a))
    }

    /// Apply to the monomial y^p and evaluate at y (exact closed forms,
    /// no discretization).
    pub fn apply_to_power(&self, p: u32, y: f64) -> f64 {
        let mut total = 0.0;
        for (j, c) in &self.terms {
            if *j > p {
                continue;
            }
            let mut fall = 1.0;
            for i in 0..*j {
                fall *= (p - i) as f64;
            }
            total += c.eval(y) * fall * y.powi((p - j) as i32);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(y: f64) -> f64 {
        y / (1.0 + y)
    }

    fn phi_prime(y: f64) -> f64 {
        1.0 / ((1.0 + y) * (1.0 + y))
    }

    #[test]
    fn eval_matches_closed_forms() {
        let y = 0.8;
        assert!((PhiExpr::phi_pow(1).eval(y) - phi(y)).abs() < 1e-15);
        assert!((PhiExpr::phi_pow(-1).eval(y) - 1.0 / phi(y)).abs() < 1e-15);
        assert!((PhiExpr::phi_deriv(1).eval(y) - phi_prime(y)).abs() < 1e-15);
        let phi2 = -2.0 / (1.0 + y).powi(3);
        assert!((PhiExpr::phi_deriv(2).eval(y) - phi2).abs() < 1e-15);
    }

    #[test]
    fn dy_of_phi_powers() {
        // d/dy phi^2 = 2 phi phi'
        let e = PhiExpr::phi_pow(2).dy();
        let y = 1.3;
        assert!((e.eval(y) - 2.0 * phi(y) * phi_prime(y)).abs() < 1e-15);
        // d/dy phi^{-1} = -phi^{-2} phi'
        let e = PhiExpr::phi_pow(-1).dy();
        assert!((e.eval(y) + phi_prime(y) / (phi(y) * phi(y))).abs() < 1e-14);
    }

    #[test]
    fn compose_reproduces_z2_of_product() {
        // Z2 o Z2 applied to y^3 equals phi d/dy (phi d/dy y^3)
        let z2 = PureOp::z2_op();
        let z2z2 = z2.compose(&z2);
        let y: f64 = 0.9;
        let by_hand = {
            // phi * d/dy (phi * 3y^2) = phi (phi' 3y^2 + phi 6y)
            phi(y) * (phi_prime(y) * 3.0 * y * y + phi(y) * 6.0 * y)
        };
        assert!((z2z2.apply_to_power(3, y) - by_hand).abs() < 1e-13);
    }

    #[test]
    fn commutator_z2_dy_is_minus_phiprime_dy() {
        let lhs = PureOp::commutator(&PureOp::z2_op(), &PureOp::dy_op());
        let rhs = PureOp::dy_op().scale_fn(&PhiExpr::phi_deriv(1).scale(-1.0));
        for &y in &[0.2, 1.0, 2.7] {
            for p in [2u32, 5] {
                let a = lhs.apply_to_power(p, y);
                let b = rhs.apply_to_power(p, y);
                assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
