//! The 25-point biharmonic stencil with reflection ghosts for both Dirichlet
//! boundary kinds.
//!
//! The unknowns are the interior nodes. The operator `A` acts on the interior
//! with zero boundary values and homogeneous ghost reflections; all boundary
//! data reaches the system only through the right-hand side. With this split,
//! `A x = b` is exactly the 25-point scheme with the near-boundary ghost values
//! eliminated through the reflection formulas.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{inner_product, node_position, norm, Face, Field, GridSpec, NormKind};
use crate::problems::ManufacturedProblem;

/// Which pair of boundary conditions is prescribed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BcKind {
    /// `u` and `∂u/∂n` given.
    #[default]
    FirstKind,
    /// `u` and `∂²u/∂n²` given.
    SecondKind,
}

impl BcKind {
    /// Coefficient of the mirrored interior value in a homogeneous ghost.
    #[inline]
    pub fn reflection_sign(self) -> f64 {
        match self {
            BcKind::FirstKind => 1.0,
            BcKind::SecondKind => -1.0,
        }
    }
}

/// Boundary samples for one grid.
///
/// `g1` holds `u` on every boundary node. `g2` holds, per face, the
/// coordinate derivative along the face normal axis (`∂u/∂x` on both x faces,
/// not the outward derivative) for [`BcKind::FirstKind`], or the pure second
/// derivative for [`BcKind::SecondKind`]. Face arrays are indexed by the two
/// tangential indices `a + (n + 1) * b` over `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    kind: BcKind,
    g1: Field,
    g2: [Vec<f64>; 6],
}

fn face_slot(face: Face) -> usize {
    match face {
        Face::XLow => 0,
        Face::XHigh => 1,
        Face::YLow => 2,
        Face::YHigh => 3,
        Face::ZLow => 4,
        Face::ZHigh => 5,
    }
}

impl BoundaryData {
    /// Builds boundary data from raw samples. `g1` must be on `grid`; each face
    /// array needs `(n + 1)^2` entries.
    pub fn new(kind: BcKind, g1: Field, g2: [Vec<f64>; 6]) -> Result<Self> {
        let n = g1.grid().n();
        let expected = (n + 1) * (n + 1);
        if let Some(bad) = g2.iter().find(|v| v.len() != expected) {
            return Err(Error::TooFewValues {
                needed: expected,
                got: bad.len(),
            });
        }
        let mut g1 = g1;
        let grid = *g1.grid();
        let hi = n as isize + 1;
        for k in -1..=hi {
            for j in -1..=hi {
                for i in -1..=hi {
                    if !grid.is_boundary(i, j, k) {
                        g1.set(i, j, k, 0.0);
                    }
                }
            }
        }
        Ok(Self { kind, g1, g2 })
    }

    /// All-zero data.
    pub fn homogeneous(grid: GridSpec, kind: BcKind) -> Self {
        let len = (grid.n() + 1) * (grid.n() + 1);
        Self {
            kind,
            g1: Field::zeros(grid),
            g2: std::array::from_fn(|_| vec![0.0; len]),
        }
    }

    /// Samples the exact boundary data of a manufactured problem.
    pub fn from_problem(grid: GridSpec, problem: &ManufacturedProblem, kind: BcKind) -> Self {
        let n = grid.n();
        let mut g1 = Field::zeros(grid);
        let hi = n as isize;
        for k in 0..=hi {
            for j in 0..=hi {
                for i in 0..=hi {
                    if grid.is_boundary(i, j, k) {
                        g1.set(i, j, k, problem.u(node_position(&grid, i, j, k)));
                    }
                }
            }
        }
        let g2 = Face::ALL.map(|face| {
            let mut vals = Vec::with_capacity((n + 1) * (n + 1));
            for b in 0..=hi {
                for a in 0..=hi {
                    let [i, j, k] = face.node(n, 0, a, b);
                    let p = node_position(&grid, i, j, k);
                    let v = match kind {
                        // Stored as a coordinate derivative.
                        BcKind::FirstKind => face.outward_sign() * problem.du_dn(face, p),
                        BcKind::SecondKind => problem.d2u_dn2(face, p),
                    };
                    vals.push(v);
                }
            }
            vals
        });
        Self { kind, g1, g2 }
    }

    pub fn kind(&self) -> BcKind {
        self.kind
    }

    pub fn grid(&self) -> &GridSpec {
        self.g1.grid()
    }

    /// `u` on boundary nodes, zero elsewhere.
    pub fn g1(&self) -> &Field {
        &self.g1
    }

    #[inline]
    pub fn g2(&self, face: Face, a: isize, b: isize) -> f64 {
        let n1 = self.grid().n() + 1;
        self.g2[face_slot(face)][a as usize + n1 * b as usize]
    }

    /// Overwrites the boundary nodes of `u` with `g1`.
    pub fn impose_on(&self, u: &mut Field) {
        let grid = *self.grid();
        let n = grid.n() as isize;
        for k in 0..=n {
            for j in 0..=n {
                for i in 0..=n {
                    if grid.is_boundary(i, j, k) {
                        u.set(i, j, k, self.g1.get(i, j, k));
                    }
                }
            }
        }
    }
}

/// Fills the ghost layer of `u` in place from the reflection formulas.
///
/// With `data = None` the homogeneous formulas apply (`g1 = g2 = 0`).
/// Ghosts with two or more out-of-range indices are set to zero.
fn fill_ghosts_in_place(u: &mut Field, kind: BcKind, data: Option<&BoundaryData>) {
    let grid = *u.grid();
    let n = grid.n();
    let h = grid.h();
    let hi = n as isize;

    // Edge and corner ghosts first, so face ghosts below are never clobbered.
    let top = hi + 1;
    let out = |a: isize| (a < 0 || a > hi) as usize;
    for k in -1..=top {
        for j in -1..=top {
            match out(j) + out(k) {
                0 => {}
                1 => {
                    u.set(-1, j, k, 0.0);
                    u.set(top, j, k, 0.0);
                }
                _ => {
                    for i in -1..=top {
                        u.set(i, j, k, 0.0);
                    }
                }
            }
        }
    }

    for face in Face::ALL {
        let sign = face.outward_sign();
        for b in 0..=hi {
            for a in 0..=hi {
                let [gi, gj, gk] = face.node(n, -1, a, b);
                let [mi, mj, mk] = face.node(n, 1, a, b);
                let mirror = u.get(mi, mj, mk);
                let ghost = match (kind, data) {
                    (BcKind::FirstKind, None) => mirror,
                    (BcKind::SecondKind, None) => -mirror,
                    (BcKind::FirstKind, Some(bc)) => mirror + 2.0 * h * sign * bc.g2(face, a, b),
                    (BcKind::SecondKind, Some(bc)) => {
                        let [bi, bj, bk] = face.node(n, 0, a, b);
                        -mirror + 2.0 * u.get(bi, bj, bk) + h * h * bc.g2(face, a, b)
                    }
                };
                u.set(gi, gj, gk, ghost);
            }
        }
    }
}

/// Returns a copy of `u` with its ghost layer filled.
///
/// Boundary node values are taken from `u` as given; the homogeneous variant
/// assumes they are zero.
pub fn fill_ghosts(u: &Field, bc: &BoundaryData, homogeneous: bool) -> Field {
    let mut out = u.clone();
    let data = if homogeneous { None } else { Some(bc) };
    fill_ghosts_in_place(&mut out, bc.kind(), data);
    out
}

/// Evaluates the raw 25-point stencil at every interior node of `src`,
/// trusting whatever boundary and ghost values it holds. Exterior entries of
/// the result are zero.
pub fn apply_stencil_raw(src: &Field) -> Field {
    let grid = *src.grid();
    let mut dst = Field::zeros(grid);
    stencil_interior(src, &mut dst);
    dst
}

fn stencil_interior(src: &Field, dst: &mut Field) {
    let grid = *src.grid();
    let n = grid.n();
    let sy = grid.stride_y();
    let sz = grid.stride_z();
    let s = src.values();
    dst.values_mut()
        .par_chunks_mut(sz)
        .enumerate()
        .for_each(|(plane, out)| {
            // plane = k + 1
            if plane < 2 || plane > n {
                return;
            }
            let len = n - 1;
            for jj in 2..=n {
                let local = 2 + sy * jj;
                let c = plane * sz + local;
                // Row slices for each offset, all of length `len`, so the
                // inner loop runs without bounds checks.
                let row = |off: isize| {
                    let start = (c as isize + off) as usize;
                    &s[start..start + len]
                };
                let (sy, sz) = (sy as isize, sz as isize);
                let ctr = row(0);
                let (xm, xp, ym, yp, zm, zp) = (row(-1), row(1), row(-sy), row(sy), row(-sz), row(sz));
                let (xm2, xp2, ym2, yp2, zm2, zp2) =
                    (row(-2), row(2), row(-2 * sy), row(2 * sy), row(-2 * sz), row(2 * sz));
                let d = [
                    row(-1 - sy),
                    row(-1 + sy),
                    row(1 - sy),
                    row(1 + sy),
                    row(-1 - sz),
                    row(1 - sz),
                    row(-sy - sz),
                    row(sy - sz),
                    row(-1 + sz),
                    row(1 + sz),
                    row(-sy + sz),
                    row(sy + sz),
                ];
                let dst = &mut out[local..local + len];
                for t in 0..len {
                    let axis1 = xm[t] + xp[t] + ym[t] + yp[t] + zm[t] + zp[t];
                    let axis2 = xm2[t] + xp2[t] + ym2[t] + yp2[t] + zm2[t] + zp2[t];
                    let diag = d[0][t]
                        + d[1][t]
                        + d[2][t]
                        + d[3][t]
                        + d[4][t]
                        + d[5][t]
                        + d[6][t]
                        + d[7][t]
                        + d[8][t]
                        + d[9][t]
                        + d[10][t]
                        + d[11][t];
                    dst[t] = 42.0 * ctr[t] - 12.0 * axis1 + axis2 + 2.0 * diag;
                }
            }
        });
}

/// Stencil offsets and weights, in no particular order.
pub(crate) const STENCIL: [([isize; 3], f64); 25] = [
    ([0, 0, 0], 42.0),
    ([-1, 0, 0], -12.0),
    ([1, 0, 0], -12.0),
    ([0, -1, 0], -12.0),
    ([0, 1, 0], -12.0),
    ([0, 0, -1], -12.0),
    ([0, 0, 1], -12.0),
    ([-2, 0, 0], 1.0),
    ([2, 0, 0], 1.0),
    ([0, -2, 0], 1.0),
    ([0, 2, 0], 1.0),
    ([0, 0, -2], 1.0),
    ([0, 0, 2], 1.0),
    ([-1, -1, 0], 2.0),
    ([-1, 1, 0], 2.0),
    ([1, -1, 0], 2.0),
    ([1, 1, 0], 2.0),
    ([-1, 0, -1], 2.0),
    ([1, 0, -1], 2.0),
    ([0, -1, -1], 2.0),
    ([0, 1, -1], 2.0),
    ([-1, 0, 1], 2.0),
    ([1, 0, 1], 2.0),
    ([0, -1, 1], 2.0),
    ([0, 1, 1], 2.0),
];

/// Stencil at an arbitrary node; reads outside storage count as zero.
fn stencil_at_checked(src: &Field, i: isize, j: isize, k: isize) -> f64 {
    let grid = src.grid();
    STENCIL
        .iter()
        .map(|&([di, dj, dk], w)| {
            let (a, b, c) = (i + di, j + dj, k + dk);
            if grid.contains(a, b, c) {
                w * src.get(a, b, c)
            } else {
                0.0
            }
        })
        .sum()
}

fn check_size(grid: &GridSpec) -> Result<()> {
    if grid.n() < GridSpec::MIN_INTERVALS {
        return Err(Error::GridTooSmall { n: grid.n() });
    }
    Ok(())
}

/// `A x`: only the interior of `x` is read; boundary values are taken as zero
/// and ghosts follow the homogeneous reflection for `kind`.
pub fn apply_operator(x: &Field, kind: BcKind) -> Result<Field> {
    check_size(x.grid())?;
    let mut padded = x.interior_only();
    fill_ghosts_in_place(&mut padded, kind, None);
    Ok(apply_stencil_raw(&padded))
}

/// `Aᵀ y`, assembled as (ghost fold)ᵀ ∘ (stencil)ᵀ rather than by reusing
/// [`apply_operator`].
pub fn apply_transpose(y: &Field, kind: BcKind) -> Result<Field> {
    check_size(y.grid())?;
    let grid = *y.grid();
    let n = grid.n();
    let hi = n as isize;
    let src = y.interior_only();

    // Transposed stencil: scatter from interior rows. The offset set is point
    // symmetric, so at interior targets this is the gather form.
    let mut out = apply_stencil_raw(&src);

    // Each homogeneous ghost equals sign * (its mirror), so the transposed
    // contributions collected at ghost nodes fold back onto the mirrors.
    let sign = kind.reflection_sign();
    for face in Face::ALL {
        for b in 1..hi {
            for a in 1..hi {
                let [gi, gj, gk] = face.node(n, -1, a, b);
                let [mi, mj, mk] = face.node(n, 1, a, b);
                let at_ghost = stencil_at_checked(&src, gi, gj, gk);
                let cur = out.get(mi, mj, mk);
                out.set(mi, mj, mk, cur + sign * at_ghost);
            }
        }
    }
    Ok(out)
}

/// Right-hand side `h⁴ f` minus the boundary contribution.
///
/// `f_samples` must hold `f` at the interior nodes.
pub fn build_rhs(f_samples: &Field, bc: &BoundaryData) -> Result<Field> {
    f_samples.ensure_same_grid(bc.g1())?;
    check_size(f_samples.grid())?;
    let h4 = f_samples.grid().h().powi(4);

    let mut particular = bc.g1().clone();
    fill_ghosts_in_place(&mut particular, bc.kind(), Some(bc));
    let lifted = apply_stencil_raw(&particular);

    let mut rhs = f_samples.interior_only();
    rhs.scale(h4);
    rhs.axpy(-1.0, &lifted);
    Ok(rhs)
}

/// Row diagonal of `A`: 42, shifted by the reflection sign once for every face
/// the node is adjacent to.
pub fn operator_diagonal(grid: GridSpec, kind: BcKind) -> Field {
    let mut diag = Field::zeros(grid);
    let n = grid.n() as isize;
    let sign = kind.reflection_sign();
    for k in 1..n {
        for j in 1..n {
            for i in 1..n {
                let near = [i, j, k]
                    .iter()
                    .map(|&a| (a == 1) as u32 + (a == n - 1) as u32)
                    .sum::<u32>();
                diag.set(i, j, k, 42.0 + sign * near as f64);
            }
        }
    }
    diag
}

/// A discretised boundary value problem on one grid.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    grid: GridSpec,
    bc: BoundaryData,
    rhs: Field,
}

impl DiscreteSystem {
    pub fn new(f_samples: &Field, bc: BoundaryData) -> Result<Self> {
        let rhs = build_rhs(f_samples, &bc)?;
        Ok(Self {
            grid: *bc.grid(),
            bc,
            rhs,
        })
    }

    /// Samples forcing and boundary data from a manufactured problem.
    pub fn from_problem(grid: GridSpec, problem: &ManufacturedProblem, kind: BcKind) -> Result<Self> {
        let f = Field::sample(grid, |p| problem.f(p));
        let bc = BoundaryData::from_problem(grid, problem, kind);
        Self::new(&f, bc)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn bc(&self) -> &BoundaryData {
        &self.bc
    }

    pub fn kind(&self) -> BcKind {
        self.bc.kind()
    }

    pub fn rhs(&self) -> &Field {
        &self.rhs
    }

    pub fn apply(&self, x: &Field) -> Result<Field> {
        x.ensure_same_grid(&self.rhs)?;
        apply_operator(x, self.kind())
    }

    pub fn apply_transpose(&self, x: &Field) -> Result<Field> {
        x.ensure_same_grid(&self.rhs)?;
        apply_transpose(x, self.kind())
    }

    /// Copy of `x` with boundary values `g1`.
    pub fn with_boundary(&self, x: &Field) -> Field {
        let mut out = x.interior_only();
        self.bc.impose_on(&mut out);
        out
    }
}

/// `b - A u` together with the relative residual `‖b - A u‖ / ‖b‖`.
///
/// A zero right-hand side reports the absolute residual norm instead.
pub fn residual(system: &DiscreteSystem, u: &Field) -> Result<(Field, f64)> {
    let au = system.apply(u)?;
    let r = system.rhs().sub(&au)?;
    let bn = norm(system.rhs(), NormKind::Rms);
    let rn = norm(&r, NormKind::Rms);
    let rel = if bn > 0.0 { rn / bn } else { rn };
    Ok((r, rel))
}

/// `⟨A x, y⟩ - ⟨x, Aᵀ y⟩`, exposed for adjointness checks.
pub fn adjoint_defect(x: &Field, y: &Field, kind: BcKind) -> Result<f64> {
    let ax = apply_operator(x, kind)?;
    let aty = apply_transpose(y, kind)?;
    Ok(inner_product(&ax, y)? - inner_product(x, &aty)?)
}
