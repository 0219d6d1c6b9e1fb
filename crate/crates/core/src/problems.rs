//! Manufactured test problems with closed-form solutions, forcing terms and
//! boundary derivatives, plus a finite-difference oracle for the forcing.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Face;

/// Seed used for forcing validation points unless the caller supplies one.
pub const DEFAULT_VALIDATION_SEED: u64 = 20_200_101;

/// Step used by [`validate_forcing`] for the finite-difference oracle.
pub const DEFAULT_ORACLE_STEP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::P1,
        ProblemId::P2,
        ProblemId::P3,
        ProblemId::P4,
        ProblemId::P5,
    ];

    pub fn number(self) -> u32 {
        match self {
            ProblemId::P1 => 1,
            ProblemId::P2 => 2,
            ProblemId::P3 => 3,
            ProblemId::P4 => 4,
            ProblemId::P5 => 5,
        }
    }
}

impl TryFrom<u32> for ProblemId {
    type Error = Error;

    fn try_from(id: u32) -> Result<Self> {
        match id {
            1 => Ok(ProblemId::P1),
            2 => Ok(ProblemId::P2),
            3 => Ok(ProblemId::P3),
            4 => Ok(ProblemId::P4),
            5 => Ok(ProblemId::P5),
            other => Err(Error::UnknownProblem(other)),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Which forcing term to pair with the exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForcingVariant {
    /// `f` equal to the biharmonic of `u`.
    #[default]
    Exact,
    /// Problem 3 with `f = sinh(x) sinh(y) sinh(z)`, the commonly printed but
    /// inconsistent forcing (off by a factor of 9). Identical to `Exact` for
    /// every other problem.
    Problem3Misprint,
}

/// Value and first four derivatives of a function of one variable.
#[derive(Debug, Clone, Copy)]
struct Jet([f64; 5]);

impl Jet {
    fn one_minus_cos_2pi(t: f64) -> Self {
        let w = 2.0 * PI;
        let (s, c) = (w * t).sin_cos();
        Jet([1.0 - c, w * s, w * w * c, -w.powi(3) * s, -w.powi(4) * c])
    }

    fn sinh(t: f64) -> Self {
        let (s, c) = (t.sinh(), t.cosh());
        Jet([s, c, s, c, s])
    }

    /// `exp(a (t - c)^2) * (t - t^2)`, differentiated with Leibniz' rule.
    fn gaussian_bubble(t: f64, a: f64, center: f64) -> Self {
        let e = (a * (t - center) * (t - center)).exp();
        let d1 = 2.0 * a * (t - center);
        let d2 = 2.0 * a;
        let ex = [
            e,
            d1 * e,
            (d2 + d1 * d1) * e,
            (3.0 * d1 * d2 + d1.powi(3)) * e,
            (3.0 * d2 * d2 + 6.0 * d1 * d1 * d2 + d1.powi(4)) * e,
        ];
        let poly = [t - t * t, 1.0 - 2.0 * t, -2.0, 0.0, 0.0];
        const BINOM: [[f64; 5]; 5] = [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0, 0.0],
            [1.0, 3.0, 3.0, 1.0, 0.0],
            [1.0, 4.0, 6.0, 4.0, 1.0],
        ];
        let mut out = [0.0; 5];
        for (order, slot) in out.iter_mut().enumerate() {
            *slot = (0..=order)
                .map(|k| BINOM[order][k] * ex[order - k] * poly[k])
                .sum();
        }
        Jet(out)
    }
}

/// `sign * X(x) Y(y) Z(z)` evaluated together with the derivatives we need.
struct Separable {
    sign: f64,
    jets: [Jet; 3],
}

impl Separable {
    fn value(&self) -> f64 {
        self.sign * self.jets[0].0[0] * self.jets[1].0[0] * self.jets[2].0[0]
    }

    /// Product with derivative `orders[a]` taken along axis `a`.
    fn partial(&self, orders: [usize; 3]) -> f64 {
        self.sign
            * self.jets[0].0[orders[0]]
            * self.jets[1].0[orders[1]]
            * self.jets[2].0[orders[2]]
    }

    fn biharmonic(&self) -> f64 {
        self.partial([4, 0, 0])
            + self.partial([0, 4, 0])
            + self.partial([0, 0, 4])
            + 2.0 * (self.partial([2, 2, 0]) + self.partial([2, 0, 2]) + self.partial([0, 2, 2]))
    }
}

fn unit(axis: usize) -> [usize; 3] {
    let mut o = [0; 3];
    o[axis] = 1;
    o
}

/// One of the five manufactured problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManufacturedProblem {
    id: ProblemId,
    forcing: ForcingVariant,
}

pub fn get_problem(id: ProblemId) -> ManufacturedProblem {
    ManufacturedProblem {
        id,
        forcing: ForcingVariant::Exact,
    }
}

impl ManufacturedProblem {
    pub fn with_forcing(id: ProblemId, forcing: ForcingVariant) -> Self {
        Self { id, forcing }
    }

    pub fn id(&self) -> ProblemId {
        self.id
    }

    pub fn forcing_variant(&self) -> ForcingVariant {
        self.forcing
    }

    fn separable(&self, p: [f64; 3]) -> Option<Separable> {
        let [x, y, z] = p;
        match self.id {
            ProblemId::P1 => Some(Separable {
                sign: 1.0,
                jets: [
                    Jet::one_minus_cos_2pi(x),
                    Jet::one_minus_cos_2pi(y),
                    Jet::one_minus_cos_2pi(z),
                ],
            }),
            ProblemId::P3 => Some(Separable {
                sign: 1.0,
                jets: [Jet::sinh(x), Jet::sinh(y), Jet::sinh(z)],
            }),
            ProblemId::P5 => Some(Separable {
                sign: -1.0,
                jets: [
                    Jet::gaussian_bubble(x, 10.0, 0.5),
                    Jet::gaussian_bubble(y, 10.0, 0.5),
                    Jet::gaussian_bubble(z, 10.0, 0.2),
                ],
            }),
            ProblemId::P2 | ProblemId::P4 => None,
        }
    }

    /// Exact solution.
    pub fn u(&self, p: [f64; 3]) -> f64 {
        if let Some(s) = self.separable(p) {
            return s.value();
        }
        let [x, y, z] = p;
        match self.id {
            ProblemId::P2 => (x * y * z).exp(),
            ProblemId::P4 => x * y * z * (1.0 + x + y + z).ln(),
            _ => unreachable!(),
        }
    }

    /// Gradient of the exact solution.
    pub fn grad(&self, p: [f64; 3]) -> [f64; 3] {
        if let Some(s) = self.separable(p) {
            return [s.partial(unit(0)), s.partial(unit(1)), s.partial(unit(2))];
        }
        let [x, y, z] = p;
        match self.id {
            ProblemId::P2 => {
                let e = (x * y * z).exp();
                [y * z * e, x * z * e, x * y * e]
            }
            ProblemId::P4 => {
                let s = 1.0 + x + y + z;
                let l = s.ln();
                let q = x * y * z / s;
                [y * z * l + q, x * z * l + q, x * y * l + q]
            }
            _ => unreachable!(),
        }
    }

    /// Pure second partial derivative along `axis`.
    pub fn second_derivative(&self, p: [f64; 3], axis: usize) -> f64 {
        if let Some(s) = self.separable(p) {
            let mut o = [0; 3];
            o[axis] = 2;
            return s.partial(o);
        }
        let [x, y, z] = p;
        // Product of the two coordinates other than `axis`.
        let others = match axis {
            0 => y * z,
            1 => x * z,
            _ => x * y,
        };
        match self.id {
            ProblemId::P2 => others * others * (x * y * z).exp(),
            ProblemId::P4 => {
                let s = 1.0 + x + y + z;
                2.0 * others / s - x * y * z / (s * s)
            }
            _ => unreachable!(),
        }
    }

    /// Forcing term `f = Δ²u` (or the misprinted variant, when selected).
    pub fn f(&self, p: [f64; 3]) -> f64 {
        let [x, y, z] = p;
        match self.id {
            ProblemId::P1 => {
                let (cx, cy, cz) = ((2.0 * PI * x).cos(), (2.0 * PI * y).cos(), (2.0 * PI * z).cos());
                -16.0
                    * PI.powi(4)
                    * (cx - 4.0 * cx * cz - 4.0 * cx * cy + 9.0 * cx * cy * cz + cy
                        - 4.0 * cy * cz
                        + cz)
            }
            ProblemId::P2 => {
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let (x4, y4, z4) = (x2 * x2, y2 * y2, z2 * z2);
                (x * y * z).exp()
                    * (x4 * y4
                        + 2.0 * x4 * y2 * z2
                        + x4 * z4
                        + 8.0 * x2 * x * y * z
                        + 2.0 * x2 * y4 * z2
                        + 2.0 * x2 * y2 * z4
                        + 4.0 * x2
                        + 8.0 * x * y2 * y * z
                        + 8.0 * x * y * z2 * z
                        + y4 * z4
                        + 4.0 * y2
                        + 4.0 * z2)
            }
            ProblemId::P3 => {
                let base = x.sinh() * y.sinh() * z.sinh();
                match self.forcing {
                    ForcingVariant::Exact => 9.0 * base,
                    ForcingVariant::Problem3Misprint => base,
                }
            }
            ProblemId::P4 => {
                let s = 1.0 + x + y + z;
                let num = 4.0 * x.powi(3) + 8.0 * x * x + 15.0 * x * y * z + 4.0 * x * y
                    + 4.0 * x * z
                    + 4.0 * x
                    + 4.0 * y.powi(3)
                    + 8.0 * y * y
                    + 4.0 * y * z
                    + 4.0 * y
                    + 4.0 * z.powi(3)
                    + 8.0 * z * z
                    + 4.0 * z;
                -2.0 * num / s.powi(4)
            }
            ProblemId::P5 => self.separable(p).expect("separable").biharmonic(),
        }
    }

    /// Outward normal derivative on `face`.
    pub fn du_dn(&self, face: Face, p: [f64; 3]) -> f64 {
        face.outward_sign() * self.grad(p)[face.axis()]
    }

    /// Second normal derivative on `face` (sign-free).
    pub fn d2u_dn2(&self, face: Face, p: [f64; 3]) -> f64 {
        self.second_derivative(p, face.axis())
    }
}

/// Centred finite-difference approximation of `Δ²u` at `p`.
///
/// The base approximation uses the 9-point sixth-order stencil for pure
/// fourth derivatives and nested 7-point sixth-order second differences for
/// mixed terms. It is evaluated at `step` and `2 step` and combined to cancel
/// the `step^6` term, leaving `O(step^8)` truncation. Rounding grows like
/// `eps * |u| / step^4`, so steps near `1e-2` balance the two.
pub fn oracle_biharmonic<F>(u: F, p: [f64; 3], step: f64) -> f64
where
    F: Fn([f64; 3]) -> f64,
{
    let fine = sixth_order_biharmonic(&u, p, step);
    let coarse = sixth_order_biharmonic(&u, p, 2.0 * step);
    (64.0 * fine - coarse) / 63.0
}

fn sixth_order_biharmonic<F>(u: &F, p: [f64; 3], step: f64) -> f64
where
    F: Fn([f64; 3]) -> f64,
{
    const D4: [f64; 9] = [
        7.0 / 240.0,
        -2.0 / 5.0,
        169.0 / 60.0,
        -122.0 / 15.0,
        91.0 / 8.0,
        -122.0 / 15.0,
        169.0 / 60.0,
        -2.0 / 5.0,
        7.0 / 240.0,
    ];
    const D2: [f64; 7] = [
        1.0 / 90.0,
        -3.0 / 20.0,
        3.0 / 2.0,
        -49.0 / 18.0,
        3.0 / 2.0,
        -3.0 / 20.0,
        1.0 / 90.0,
    ];
    let at = |offsets: [f64; 3]| {
        u([
            p[0] + offsets[0] * step,
            p[1] + offsets[1] * step,
            p[2] + offsets[2] * step,
        ])
    };

    let mut pure = 0.0;
    for axis in 0..3 {
        for (m, c) in D4.iter().enumerate() {
            let mut o = [0.0; 3];
            o[axis] = m as f64 - 4.0;
            pure += c * at(o);
        }
    }
    let mut mixed = 0.0;
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for (ma, ca) in D2.iter().enumerate() {
            for (mb, cb) in D2.iter().enumerate() {
                let mut o = [0.0; 3];
                o[a] = ma as f64 - 3.0;
                o[b] = mb as f64 - 3.0;
                mixed += ca * cb * at(o);
            }
        }
    }
    (pure + 2.0 * mixed) / step.powi(4)
}

/// Outcome of comparing a problem's forcing with the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingReport {
    pub problem: ProblemId,
    pub samples: usize,
    pub tol: f64,
    /// Largest `|f - oracle| / max(1, |f|)` seen.
    pub worst: f64,
    pub worst_point: [f64; 3],
    /// Largest `|oracle / f|` ratio seen, a quick view of scaling errors.
    pub worst_ratio: f64,
}

impl ForcingReport {
    pub fn passed(&self) -> bool {
        self.worst < self.tol
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            let [x, y, z] = self.worst_point;
            Err(Error::ForcingMismatch {
                problem: self.problem.number(),
                worst: self.worst,
                x,
                y,
                z,
            })
        }
    }
}

/// Checks `problem.f` against [`oracle_biharmonic`] at `samples` seeded points
/// drawn uniformly from `[0.05, 0.95]^3`.
pub fn validate_forcing(
    problem: &ManufacturedProblem,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<ForcingReport> {
    validate_forcing_with_step(problem, samples, tol, seed, DEFAULT_ORACLE_STEP)
}

pub fn validate_forcing_with_step(
    problem: &ManufacturedProblem,
    samples: usize,
    tol: f64,
    seed: u64,
    step: f64,
) -> Result<ForcingReport> {
    if samples == 0 {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ForcingReport {
        problem: problem.id(),
        samples,
        tol,
        worst: 0.0,
        worst_point: [0.0; 3],
        worst_ratio: 0.0,
    };
    for _ in 0..samples {
        let p: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.05..0.95));
        let f = problem.f(p);
        let approx = oracle_biharmonic(|q| problem.u(q), p, step);
        let dev = (f - approx).abs() / f.abs().max(1.0);
        if dev > report.worst {
            report.worst = dev;
            report.worst_point = p;
        }
        if f != 0.0 {
            report.worst_ratio = report.worst_ratio.max((approx / f).abs());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_values() {
        let p1 = get_problem(ProblemId::P1);
        assert!((p1.u([0.5, 0.5, 0.5]) - 8.0).abs() < 1e-14);
        let p2 = get_problem(ProblemId::P2);
        assert!((p2.u([1.0, 1.0, 1.0]) - std::f64::consts::E).abs() < 1e-15);
        let p3 = get_problem(ProblemId::P3);
        let q = [0.3, 0.4, 0.9];
        let base = 0.3f64.sinh() * 0.4f64.sinh() * 0.9f64.sinh();
        assert!((p3.f(q) - 9.0 * base).abs() < 1e-14);
        let literal = ManufacturedProblem::with_forcing(ProblemId::P3, ForcingVariant::Problem3Misprint);
        assert!((literal.f(q) - base).abs() < 1e-15);

        // Reference values from a symbolic computation.
        let p5 = get_problem(ProblemId::P5);
        let q = [0.7734455883092821, 0.5740213470214045, 0.7435919570320813];
        assert!((p5.u(q) + 0.34996077562169359).abs() < 1e-14);
        assert!((p5.f(q) - 127.13366589859652).abs() < 1e-9);
    }

    #[test]
    fn invalid_problem_id() {
        assert!(matches!(ProblemId::try_from(9), Err(Error::UnknownProblem(9))));
        assert!(ProblemId::try_from(0).is_err());
        assert_eq!(ProblemId::try_from(4).unwrap(), ProblemId::P4);
    }

    #[test]
    fn oracle_on_polynomials() {
        let p = [0.37, 0.61, 0.12];
        let quartic = oracle_biharmonic(|q| q[0].powi(4), p, 1e-2);
        assert!((quartic - 24.0).abs() < 1e-6, "{quartic}");
        let mixed = oracle_biharmonic(|q| q[0] * q[0] * q[1] * q[1], p, 1e-2);
        assert!((mixed - 8.0).abs() < 1e-6, "{mixed}");
    }

    // Reference values from a symbolic biharmonic at the stated points.
    #[test]
    fn forcing_matches_symbolic_values() {
        let p2 = get_problem(ProblemId::P2);
        let q = [0.3, 0.7, 0.2];
        assert!((p2.f(q) - 2.8083576566489126).abs() < 1e-13);
        let oracle = oracle_biharmonic(|x| p2.u(x), q, 1e-2);
        assert!((oracle - p2.f(q)).abs() / p2.f(q).abs() < 1e-5);

        let q = [0.3, 0.6, 0.45];
        let p4 = get_problem(ProblemId::P4);
        assert!((p4.f(q) + 1.0172140350977859).abs() < 1e-13);
        let p5 = get_problem(ProblemId::P5);
        assert!((p5.u(q) + 0.038422624973403506).abs() < 1e-14);
        assert!((p5.f(q) + 177.13634049336588).abs() < 1e-10);
    }

    #[test]
    fn problem_one_forcing_matches_separable_form() {
        let p1 = get_problem(ProblemId::P1);
        for q in [[0.1, 0.2, 0.3], [0.77, 0.5, 0.05], [0.9, 0.9, 0.41]] {
            let sep = p1.separable(q).unwrap().biharmonic();
            assert!((sep - p1.f(q)).abs() < 1e-9 * p1.f(q).abs().max(1.0));
        }
    }

    #[test]
    fn every_forcing_validates() {
        for id in ProblemId::ALL {
            let report = validate_forcing(&get_problem(id), 100, 1e-5, DEFAULT_VALIDATION_SEED).unwrap();
            assert!(report.passed(), "problem {id}: {report:?}");
        }
    }

    #[test]
    fn misprinted_problem_three_forcing_fails_by_nine() {
        let literal = ManufacturedProblem::with_forcing(ProblemId::P3, ForcingVariant::Problem3Misprint);
        let report = validate_forcing(&literal, 100, 1e-5, DEFAULT_VALIDATION_SEED).unwrap();
        assert!(!report.passed());
        assert!((report.worst_ratio - 9.0).abs() < 1e-3, "{}", report.worst_ratio);
        assert!(matches!(report.into_result(), Err(Error::ForcingMismatch { problem: 3, .. })));
    }

    #[test]
    fn boundary_derivatives_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 1e-4;
        for id in ProblemId::ALL {
            let prob = get_problem(id);
            for face in Face::ALL {
                for _ in 0..50 {
                    let mut p: [f64; 3] = std::array::from_fn(|_| rng.gen::<f64>());
                    p[face.axis()] = if face.is_low() { 0.0 } else { 1.0 };
                    let shifted = |s: f64| {
                        let mut q = p;
                        q[face.axis()] += s;
                        prob.u(q)
                    };
                    // Fourth-order centred first and second differences.
                    let first = (shifted(-2.0 * d) - 8.0 * shifted(-d) + 8.0 * shifted(d)
                        - shifted(2.0 * d))
                        / (12.0 * d);
                    let second = (-shifted(-2.0 * d) + 16.0 * shifted(-d) - 30.0 * shifted(0.0)
                        + 16.0 * shifted(d)
                        - shifted(2.0 * d))
                        / (12.0 * d * d);
                    let dn = face.outward_sign() * first;
                    let scale = prob.u(p).abs().max(1.0);
                    assert!(
                        (prob.du_dn(face, p) - dn).abs() < 1e-7 * scale,
                        "problem {id} {face:?}: {} vs {dn}",
                        prob.du_dn(face, p)
                    );
                    let tol2 = 1e-5 * prob.d2u_dn2(face, p).abs().max(scale);
                    assert!(
                        (prob.d2u_dn2(face, p) - second).abs() < tol2,
                        "problem {id} {face:?}: {} vs {second}",
                        prob.d2u_dn2(face, p)
                    );
                }
            }
        }
    }

    #[test]
    fn problem_one_vanishes_on_every_face() {
        let prob = get_problem(ProblemId::P1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for face in Face::ALL {
            for _ in 0..20 {
                let mut p: [f64; 3] = std::array::from_fn(|_| rng.gen::<f64>());
                p[face.axis()] = if face.is_low() { 0.0 } else { 1.0 };
                assert!(prob.u(p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_sign_convention() {
        let prob = get_problem(ProblemId::P2);
        let p = [0.0, 0.4, 0.8];
        assert_eq!(prob.du_dn(Face::XLow, p), -prob.grad(p)[0]);
        assert_eq!(prob.d2u_dn2(Face::XLow, p), prob.second_derivative(p, 0));
    }
}
