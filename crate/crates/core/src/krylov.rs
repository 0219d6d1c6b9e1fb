//! Preconditioned bi-conjugate gradients over matrix-free operators, and the
//! banded direct solver used on the coarsest grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{operator_diagonal, BcKind, DiscreteSystem};
use crate::error::{Error, Result};
use crate::grid::{interior_dot, Field, GridSpec};

/// A linear map on interior values together with its transpose.
pub trait LinearOperator {
    fn grid(&self) -> GridSpec;
    fn apply(&self, x: &Field) -> Field;
    fn apply_transpose(&self, x: &Field) -> Field;
}

impl LinearOperator for DiscreteSystem {
    fn grid(&self) -> GridSpec {
        *DiscreteSystem::grid(self)
    }

    fn apply(&self, x: &Field) -> Field {
        DiscreteSystem::apply(self, x).expect("operand lives on the system grid")
    }

    fn apply_transpose(&self, x: &Field) -> Field {
        DiscreteSystem::apply_transpose(self, x).expect("operand lives on the system grid")
    }
}

/// Identity on the interior.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub GridSpec);

impl LinearOperator for IdentityOperator {
    fn grid(&self) -> GridSpec {
        self.0
    }

    fn apply(&self, x: &Field) -> Field {
        x.interior_only()
    }

    fn apply_transpose(&self, x: &Field) -> Field {
        x.interior_only()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrecondKind {
    Identity,
    #[default]
    Jacobi,
}

impl PrecondKind {
    pub fn label(self) -> &'static str {
        match self {
            PrecondKind::Identity => "none",
            PrecondKind::Jacobi => "jacobi",
        }
    }
}

/// Diagonal preconditioner `M`; both `M⁻¹` and `M⁻ᵀ` are the same map.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    Jacobi { inv_diag: Field },
}

impl Preconditioner {
    pub fn apply_inverse(&self, r: &Field) -> Field {
        match self {
            Preconditioner::Identity => r.interior_only(),
            Preconditioner::Jacobi { inv_diag } => {
                let mut z = r.interior_only();
                for (v, d) in z.values_mut().iter_mut().zip(inv_diag.values()) {
                    *v *= d;
                }
                z
            }
        }
    }

    pub fn apply_inverse_transpose(&self, r: &Field) -> Field {
        self.apply_inverse(r)
    }
}

pub fn make_preconditioner(kind: PrecondKind, system: &DiscreteSystem) -> Preconditioner {
    make_preconditioner_for(kind, *system.grid(), system.kind())
}

pub fn make_preconditioner_for(kind: PrecondKind, grid: GridSpec, bc: BcKind) -> Preconditioner {
    match kind {
        PrecondKind::Identity => Preconditioner::Identity,
        PrecondKind::Jacobi => {
            let mut inv = operator_diagonal(grid, bc);
            let g = grid;
            let n = g.n() as isize;
            for k in 1..n {
                for j in 1..n {
                    for i in 1..n {
                        let d = inv.get(i, j, k);
                        assert!(d != 0.0, "zero diagonal at ({i}, {j}, {k})");
                        inv.set(i, j, k, 1.0 / d);
                    }
                }
            }
            Preconditioner::Jacobi { inv_diag: inv }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicgStats {
    pub iterations: usize,
    /// `‖b - A x‖₂ / ‖b‖₂` recomputed from the returned iterate.
    pub final_relres: f64,
    pub breakdown: bool,
    /// Relative recurrence residual before each iteration and after the last.
    pub history: Vec<f64>,
    pub restarted: bool,
}

impl BicgStats {
    pub fn converged(&self, rel_tol: f64) -> bool {
        self.final_relres <= rel_tol
    }
}

/// Breakdown threshold on `|ρ|` and `|p*ᵀ A p|`, relative to the relevant
/// norm products.
const BREAKDOWN: f64 = 1e-30;

/// Seed for the randomised shadow residual used after a breakdown.
const SHADOW_SEED: u64 = 0xB1C6;

fn norm2(x: &Field) -> f64 {
    interior_dot(x, x).sqrt()
}

/// Options that only tests need; the default is what callers want.
#[derive(Debug, Clone, Copy, Default)]
pub struct BicgProbe {
    /// Keep copies of `r_k` and `r*_k` for the first this-many iterations.
    pub keep_residuals: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BicgTrace {
    pub residuals: Vec<Field>,
    pub shadows: Vec<Field>,
    /// True residual norm minus recurrence residual norm every 10 iterations.
    pub drift: Vec<(usize, f64)>,
}

/// Solves `A x = b` by preconditioned Bi-CG starting from `x0`.
///
/// Stops once the recurrence residual satisfies `‖r‖ ≤ rel_tol ‖b‖` and the
/// recomputed residual agrees, after `max_iters` iterations, or on breakdown.
/// The shadow residual starts as `r*₀ = r₀`; on the first breakdown the
/// iteration restarts from the current iterate with a random shadow vector.
pub fn bicg_solve<A: LinearOperator>(
    op: &A,
    precond: &Preconditioner,
    b: &Field,
    x0: &Field,
    rel_tol: f64,
    max_iters: usize,
) -> Result<(Field, BicgStats)> {
    bicg_solve_traced(op, precond, b, x0, rel_tol, max_iters, BicgProbe::default()).map(|(x, s, _)| (x, s))
}

pub fn bicg_solve_traced<A: LinearOperator>(
    op: &A,
    precond: &Preconditioner,
    b: &Field,
    x0: &Field,
    rel_tol: f64,
    max_iters: usize,
    probe: BicgProbe,
) -> Result<(Field, BicgStats, BicgTrace)> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidConfig(format!("relative tolerance must be positive, got {rel_tol}")));
    }
    let grid = op.grid();
    b.ensure_same_grid(&Field::zeros(grid))?;
    x0.ensure_same_grid(b)?;

    let mut trace = BicgTrace::default();
    let b = b.interior_only();
    let b_norm = norm2(&b);
    if b_norm == 0.0 {
        let stats = BicgStats {
            iterations: 0,
            final_relres: 0.0,
            breakdown: false,
            history: vec![0.0],
            restarted: false,
        };
        return Ok((Field::zeros(grid), stats, trace));
    }

    let mut x = x0.interior_only();
    let true_residual = |x: &Field| {
        let mut r = op.apply(x);
        r.scale(-1.0);
        r.axpy(1.0, &b);
        r
    };
    let mut r = true_residual(&x);
    let mut history = vec![norm2(&r) / b_norm];
    let mut iterations = 0;
    let mut restarted = false;
    let mut breakdown = false;

    'outer: loop {
        let mut rs = if restarted {
            let mut rng = ChaCha8Rng::seed_from_u64(SHADOW_SEED);
            let mut s = Field::zeros(grid);
            let n = grid.n() as isize;
            for k in 1..n {
                for j in 1..n {
                    for i in 1..n {
                        s.set(i, j, k, rng.gen_range(-1.0..1.0));
                    }
                }
            }
            s
        } else {
            r.clone()
        };
        let mut z = precond.apply_inverse(&r);
        let mut p = z.clone();
        let mut ps = precond.apply_inverse_transpose(&rs);
        let mut rho = interior_dot(&rs, &z);

        loop {
            let rel = norm2(&r) / b_norm;
            if rel <= rel_tol {
                let check = norm2(&true_residual(&x)) / b_norm;
                if check <= rel_tol {
                    break 'outer;
                }
                // Recurrence drifted below the true residual; resynchronise.
                r = true_residual(&x);
                continue 'outer;
            }
            if iterations >= max_iters {
                break 'outer;
            }
            if rho.abs() <= BREAKDOWN * norm2(&rs) * norm2(&z) || rho == 0.0 {
                if restarted {
                    breakdown = true;
                    break 'outer;
                }
                restarted = true;
                r = true_residual(&x);
                continue 'outer;
            }
            if iterations < probe.keep_residuals {
                trace.residuals.push(r.clone());
                trace.shadows.push(rs.clone());
            }

            let ap = op.apply(&p);
            let atps = op.apply_transpose(&ps);
            let denom = interior_dot(&ps, &ap);
            if denom.abs() <= BREAKDOWN * norm2(&ps) * norm2(&ap) || denom == 0.0 {
                if restarted {
                    breakdown = true;
                    break 'outer;
                }
                restarted = true;
                r = true_residual(&x);
                continue 'outer;
            }
            let alpha = rho / denom;
            x.axpy(alpha, &p);
            r.axpy(-alpha, &ap);
            rs.axpy(-alpha, &atps);
            iterations += 1;
            history.push(norm2(&r) / b_norm);

            if iterations % 10 == 0 {
                let true_norm = norm2(&true_residual(&x));
                trace.drift.push((iterations, true_norm - norm2(&r)));
            }

            z = precond.apply_inverse(&r);
            let zs = precond.apply_inverse_transpose(&rs);
            let rho_next = interior_dot(&rs, &z);
            let beta = rho_next / rho;
            rho = rho_next;
            p.xpby(&z, beta);
            ps.xpby(&zs, beta);
        }
    }

    let final_relres = norm2(&true_residual(&x)) / b_norm;
    let stats = BicgStats {
        iterations,
        final_relres,
        breakdown,
        history,
        restarted,
    };
    Ok((x, stats, trace))
}

/// Largest grid the direct solver accepts.
pub const DSOLVE_MAX_N: usize = 32;

/// Solves the system directly. The matrix is assembled by probing the
/// matrix-free operator with coloured unit vectors and factorised by banded
/// Gaussian elimination with partial pivoting. Returns interior values.
pub fn dsolve(system: &DiscreteSystem) -> Result<Field> {
    let grid = *system.grid();
    if grid.n() > DSOLVE_MAX_N {
        return Err(Error::DirectSolveTooLarge {
            n: grid.n(),
            limit: DSOLVE_MAX_N,
        });
    }
    let mut band = assemble_banded(system);
    band.factorize()?;
    let rhs = interior_vector(system.rhs());
    let sol = band.solve(rhs);
    Ok(vector_to_field(grid, &sol))
}

/// Flattens the interior of `f`, `i` fastest.
pub fn interior_vector(f: &Field) -> Vec<f64> {
    let mut v = Vec::with_capacity(f.grid().interior_count());
    f.for_each_interior(|_, _, _, x| v.push(x));
    v
}

pub fn vector_to_field(grid: GridSpec, v: &[f64]) -> Field {
    let mut f = Field::zeros(grid);
    let n = grid.n() as isize;
    let mut it = v.iter();
    for k in 1..n {
        for j in 1..n {
            for i in 1..n {
                f.set(i, j, k, *it.next().expect("vector length matches interior"));
            }
        }
    }
    f
}

/// Banded matrix with pivoting room, row-wise storage.
///
/// Row `r` stores columns `r - kl ..= r + kl + ku` (out-of-range slots are
/// unused); the extra `kl` columns hold fill from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    size: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedMatrix {
    pub fn zeros(size: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            size,
            kl,
            ku,
            width,
            data: vec![0.0; size * width],
            pivots: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.kl + self.ku);
        row * self.width + (col + self.kl - row)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col + self.kl < row || col > row + self.ku {
            return 0.0;
        }
        self.data[self.slot(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        assert!(
            col + self.kl >= row && col <= row + self.ku,
            "entry ({row}, {col}) outside the band"
        );
        let s = self.slot(row, col);
        self.data[s] = v;
    }

    /// In-place LU with partial pivoting; multipliers stay in the rows where
    /// they were computed.
    pub fn factorize(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.size, self.kl, self.ku);
        self.pivots = Vec::with_capacity(n);
        for c in 0..n {
            let last_row = (c + kl).min(n - 1);
            let mut piv = c;
            let mut best = self.data[self.slot(c, c)].abs();
            for r in c + 1..=last_row {
                let v = self.data[self.slot(r, c)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix { column: c });
            }
            self.pivots.push(piv);
            let last_col = (c + kl + ku).min(n - 1);
            if piv != c {
                for col in c..=last_col {
                    let a = self.slot(c, col);
                    let b = self.slot(piv, col);
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[self.slot(c, c)];
            let pivot_row = self.slot(c, c);
            for r in c + 1..=last_row {
                let rc = self.slot(r, c);
                let l = self.data[rc] / diag;
                self.data[rc] = l;
                if l == 0.0 {
                    continue;
                }
                let target = self.slot(r, c + 1);
                let span = last_col - c;
                let (src, dst) = if pivot_row < target {
                    let (lo, hi) = self.data.split_at_mut(target);
                    (&lo[pivot_row + 1..pivot_row + 1 + span], &mut hi[..span])
                } else {
                    unreachable!("rows are stored in increasing order")
                };
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        Ok(())
    }

    /// Solves with the factors from [`BandedMatrix::factorize`].
    pub fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        let (n, kl, ku) = (self.size, self.kl, self.ku);
        assert_eq!(self.pivots.len(), n, "factorize first");
        for c in 0..n {
            let p = self.pivots[c];
            b.swap(c, p);
            let bc = b[c];
            for r in c + 1..=(c + kl).min(n - 1) {
                b[r] -= self.data[self.slot(r, c)] * bc;
            }
        }
        for c in (0..n).rev() {
            let mut acc = b[c];
            for col in c + 1..=(c + kl + ku).min(n - 1) {
                acc -= self.data[self.slot(c, col)] * b[col];
            }
            b[c] = acc / self.data[self.slot(c, c)];
        }
        b
    }
}

/// Assembles `A` in banded form by probing with 5×5×5-coloured unit vectors;
/// columns sharing a colour have disjoint stencil supports.
pub fn assemble_banded(system: &DiscreteSystem) -> BandedMatrix {
    let grid = *system.grid();
    let m = grid.n() - 1;
    let n = grid.n() as isize;
    let half = 2 * m * m;
    let mut band = BandedMatrix::zeros(m * m * m, half, half);
    let index = |i: isize, j: isize, k: isize| (i - 1) as usize + m * ((j - 1) as usize + m * (k - 1) as usize);
    for color in 0..125usize {
        let (ci, cj, ck) = ((color % 5) as isize, ((color / 5) % 5) as isize, (color / 25) as isize);
        let mut probe = Field::zeros(grid);
        let mut any = false;
        for k in (1..n).filter(|k| k % 5 == ck) {
            for j in (1..n).filter(|j| j % 5 == cj) {
                for i in (1..n).filter(|i| i % 5 == ci) {
                    probe.set(i, j, k, 1.0);
                    any = true;
                }
            }
        }
        if !any {
            continue;
        }
        let image = LinearOperator::apply(system, &probe);
        for k in 1..n {
            for j in 1..n {
                for i in 1..n {
                    let v = image.get(i, j, k);
                    if v == 0.0 {
                        continue;
                    }
                    // The unique probed column within stencil reach.
                    let col = |a: isize, c: isize| {
                        let base = a - (a - c).rem_euclid(5);
                        [base, base + 5]
                            .into_iter()
                            .chain([base - 5])
                            .find(|&q| (q - a).abs() <= 2)
                            .expect("some column of this colour is within reach")
                    };
                    let (qi, qj, qk) = (col(i, ci), col(j, cj), col(k, ck));
                    band.set(index(i, j, k), index(qi, qj, qk), v);
                }
            }
        }
    }
    band
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::BcKind;
    use crate::grid::{norm, NormKind};

    #[test]
    fn banded_lu_small() {
        // Tridiagonal system that needs pivoting in the first column.
        let mut a = BandedMatrix::zeros(4, 1, 1);
        let entries = [
            (0, 0, 1e-3),
            (0, 1, 2.0),
            (1, 0, 3.0),
            (1, 1, 1.0),
            (1, 2, 1.0),
            (2, 1, 1.0),
            (2, 2, 4.0),
            (2, 3, 1.0),
            (3, 2, 2.0),
            (3, 3, 5.0),
        ];
        for &(r, c, v) in &entries {
            a.set(r, c, v);
        }
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let mut b = vec![0.0; 4];
        for &(r, c, v) in &entries {
            b[r] += v * x[c];
        }
        a.factorize().unwrap();
        let got = a.solve(b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_band_reported() {
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        assert!(matches!(a.factorize(), Err(Error::SingularMatrix { column: 2 })));
    }

    #[test]
    fn identity_converges_in_one_step() {
        let g = GridSpec::new(6).unwrap();
        let op = IdentityOperator(g);
        let b = Field::sample(g, |p| p[0] - p[1] * p[2]).interior_only();
        let (x, stats) = bicg_solve(&op, &Preconditioner::Identity, &b, &Field::zeros(g), 1e-12, 10).unwrap();
        assert_eq!(stats.iterations, 1);
        assert!(norm(&x.sub(&b).unwrap(), NormKind::Max) < 1e-15);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let g = GridSpec::new(4).unwrap();
        let op = IdentityOperator(g);
        let x0 = Field::constant(g, 3.0);
        let (x, stats) = bicg_solve(&op, &Preconditioner::Identity, &Field::zeros(g), &x0, 1e-8, 10).unwrap();
        assert_eq!(stats.iterations, 0);
        assert_eq!(norm(&x, NormKind::Max), 0.0);
    }

    #[test]
    fn rejects_non_positive_tolerance() {
        let g = GridSpec::new(4).unwrap();
        let op = IdentityOperator(g);
        let b = Field::constant(g, 1.0);
        assert!(bicg_solve(&op, &Preconditioner::Identity, &b, &b, 0.0, 5).is_err());
    }

    #[test]
    fn jacobi_scaling() {
        let g = GridSpec::new(8).unwrap();
        let pre = make_preconditioner_for(PrecondKind::Jacobi, g, BcKind::FirstKind);
        let r = Field::constant(g, 1.0);
        let z = pre.apply_inverse(&r);
        assert!((z.get(4, 4, 4) - 1.0 / 42.0).abs() < 1e-16);
        assert!((z.get(1, 4, 4) - 1.0 / 43.0).abs() < 1e-16);
        assert_eq!(z.get(0, 4, 4), 0.0);
        let id = make_preconditioner_for(PrecondKind::Identity, g, BcKind::FirstKind);
        assert_eq!(id.apply_inverse(&r), r.interior_only());
    }

    #[test]
    fn dsolve_guard() {
        let g = GridSpec::new(64).unwrap();
        let bc = crate::discretization::BoundaryData::homogeneous(g, BcKind::FirstKind);
        let sys = DiscreteSystem::new(&Field::zeros(g), bc).unwrap();
        assert!(matches!(dsolve(&sys), Err(Error::DirectSolveTooLarge { n: 64, .. })));
    }
}
