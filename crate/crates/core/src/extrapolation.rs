//! Richardson extrapolation and tri-quadratic interpolation between embedded
//! grids.
//!
//! [`exp_finite`] predicts the finite-difference solution on grid `h` from the
//! solutions on `2h` and `4h` (third order); [`exp_true`] combines the
//! solutions on `h` and `2h` into a higher-order approximation of the exact
//! solution on grid `h`.

use crate::discretization::BoundaryData;
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

/// Fourth-order estimate of the exact solution at a node shared by grids `h`
/// and `2h`.
#[inline]
pub fn richardson_node(u_fine: f64, u_coarse: f64) -> f64 {
    (4.0 * u_fine - u_coarse) / 3.0
}

/// Exact-solution estimate at the midpoint of a coarse edge; `d_left` and
/// `d_right` are the fine-minus-coarse differences at the edge endpoints.
#[inline]
pub fn richardson_midpoint(u_mid_fine: f64, d_left: f64, d_right: f64) -> f64 {
    u_mid_fine + (d_left + d_right) / 6.0
}

/// Prediction of the next finer solution at a node shared by grids `h1` and
/// `h0 = 2 h1`.
#[inline]
pub fn fd_node_extrap(u1: f64, u0: f64) -> f64 {
    (5.0 * u1 - u0) / 4.0
}

/// Prediction of the next finer solution at a midpoint of a coarse edge.
#[inline]
pub fn fd_midpoint_extrap(u1_mid: f64, d_left: f64, d_right: f64) -> f64 {
    u1_mid + (d_left + d_right) / 8.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuarterSide {
    /// The point one quarter of the way from the left endpoint.
    Left,
    /// Three quarters of the way from the left endpoint.
    Right,
}

/// Prediction at a quarter point of a coarse edge (quadratic interpolation of
/// the node and midpoint predictions).
pub fn fd_quarter_extrap(
    u1_left: f64,
    u1_mid: f64,
    u1_right: f64,
    u0_left: f64,
    u0_right: f64,
    side: QuarterSide,
) -> f64 {
    let (near1, far1, near0, far0) = match side {
        QuarterSide::Left => (u1_left, u1_right, u0_left, u0_right),
        QuarterSide::Right => (u1_right, u1_left, u0_right, u0_left),
    };
    ((9.0 * near1 + 12.0 * u1_mid - far1) - (3.0 * near0 + far0)) / 16.0
}

/// Element-local coordinates in `[-1, 1]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalCoord {
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
}

impl NaturalCoord {
    pub fn new(xi: f64, eta: f64, zeta: f64) -> Self {
        Self { xi, eta, zeta }
    }
}

/// Nodal values of a 27-node hexahedron.
///
/// Node `(a, b, c)` with `a, b, c ∈ {0, 1, 2}` (natural coordinate `a - 1`
/// along ξ and so on) lives at index `9 a + 3 b + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellValues27(pub [f64; 27]);

impl CellValues27 {
    #[inline]
    pub fn index(a: usize, b: usize, c: usize) -> usize {
        9 * a + 3 * b + c
    }

    /// Natural coordinate of the node stored at `index`.
    pub fn node_coord(index: usize) -> NaturalCoord {
        let a = index / 9;
        let b = (index / 3) % 3;
        let c = index % 3;
        NaturalCoord::new(a as f64 - 1.0, b as f64 - 1.0, c as f64 - 1.0)
    }
}

/// Quadratic Lagrange basis on nodes `{-1, 0, 1}`.
#[inline]
fn lagrange3(t: f64) -> [f64; 3] {
    [0.5 * t * (t - 1.0), (1.0 - t) * (1.0 + t), 0.5 * t * (t + 1.0)]
}

/// Tri-quadratic shape function weights at `c`, in [`CellValues27`] order.
pub fn shape27(c: NaturalCoord) -> [f64; 27] {
    let lx = lagrange3(c.xi);
    let ly = lagrange3(c.eta);
    let lz = lagrange3(c.zeta);
    let mut w = [0.0; 27];
    for a in 0..3 {
        for b in 0..3 {
            for cc in 0..3 {
                w[CellValues27::index(a, b, cc)] = lx[a] * ly[b] * lz[cc];
            }
        }
    }
    w
}

pub fn triquadratic_eval(vals: &CellValues27, c: NaturalCoord) -> f64 {
    shape27(c).iter().zip(vals.0.iter()).map(|(w, v)| w * v).sum()
}

/// Applies a midpoint formula to every diagonal through `node` whose
/// endpoints sit one step away along the odd axes, and averages the results.
///
/// `node` is given on the grid where midpoints have odd indices; `value_at`
/// returns the midpoint value of the finer solution and `diff_at` the
/// fine-minus-coarse difference at an endpoint.
fn averaged_midpoint<V, D>(node: [isize; 3], value_at: V, diff_at: D, formula: fn(f64, f64, f64) -> f64) -> f64
where
    V: Fn([isize; 3]) -> f64,
    D: Fn([isize; 3]) -> f64,
{
    let odd: Vec<usize> = (0..3).filter(|&a| node[a].rem_euclid(2) == 1).collect();
    debug_assert!(!odd.is_empty());
    let mid = value_at(node);
    // Diagonals are the sign patterns over the odd axes with the first sign
    // fixed; each pairs an endpoint with its reflection through `node`.
    let patterns = 1usize << (odd.len() - 1);
    let mut acc = 0.0;
    for pattern in 0..patterns {
        let mut lo = node;
        let mut hi = node;
        for (slot, &axis) in odd.iter().enumerate() {
            let s = if slot == 0 || (pattern >> (slot - 1)) & 1 == 0 { -1 } else { 1 };
            lo[axis] += s;
            hi[axis] -= s;
        }
        acc += formula(mid, diff_at(lo), diff_at(hi));
    }
    acc / patterns as f64
}

fn check_parent(fine: &GridSpec, coarse: &Field) -> Result<()> {
    if coarse.grid().n() * 2 != fine.n() {
        return Err(Error::GridMismatch {
            expected: fine.n() / 2,
            found: coarse.grid().n(),
        });
    }
    Ok(())
}

/// Third-order prediction of the solution on the grid twice as fine as
/// `u_2h`, from the solutions on `2h` and `4h`.
///
/// Nodes of the `2h` grid are handled by role relative to the `4h` cells
/// (corner, edge midpoint, face centre, cell centre); every other fine node
/// is interpolated tri-quadratically within its `4h` cell. Nodes on a face
/// shared by two cells are assigned to the lower cell, so each value is
/// computed once. When `boundary` is given, boundary nodes take its `g1`.
pub fn exp_finite(u_2h: &Field, u_4h: &Field, boundary: Option<&BoundaryData>) -> Result<Field> {
    let mid_grid = *u_2h.grid();
    let fine_grid = mid_grid.refined();
    check_parent(&mid_grid, u_4h)?;
    if fine_grid.n() % 4 != 0 {
        return Err(Error::NotDivisibleByFour { n: fine_grid.n() });
    }
    if let Some(bc) = boundary {
        if bc.grid().n() != fine_grid.n() {
            return Err(Error::GridMismatch {
                expected: fine_grid.n(),
                found: bc.grid().n(),
            });
        }
    }

    // Predictions at the 2h nodes.
    let nm = mid_grid.n() as isize;
    let diff = |q: [isize; 3]| u_2h.get(q[0], q[1], q[2]) - u_4h.get(q[0] / 2, q[1] / 2, q[2] / 2);
    let mut w_mid = Field::zeros(mid_grid);
    for k in 0..=nm {
        for j in 0..=nm {
            for i in 0..=nm {
                let node = [i, j, k];
                let value = if node.iter().all(|a| a % 2 == 0) {
                    fd_node_extrap(u_2h.get(i, j, k), u_4h.get(i / 2, j / 2, k / 2))
                } else {
                    averaged_midpoint(node, |q| u_2h.get(q[0], q[1], q[2]), diff, fd_midpoint_extrap)
                };
                w_mid.set(i, j, k, value);
            }
        }
    }

    let mut w = Field::zeros(fine_grid);
    let nf = fine_grid.n() as isize;
    let cells = nf / 4;
    // Lagrange weights at the five fine offsets 0..=4 of a 4h cell.
    let table: [[f64; 3]; 5] = std::array::from_fn(|m| lagrange3(m as f64 / 2.0 - 1.0));
    for k in 0..=nf {
        let (ck, ok) = owner(k, cells);
        for j in 0..=nf {
            let (cj, oj) = owner(j, cells);
            for i in 0..=nf {
                if i % 2 == 0 && j % 2 == 0 && k % 2 == 0 {
                    w.set(i, j, k, w_mid.get(i / 2, j / 2, k / 2));
                    continue;
                }
                let (ci, oi) = owner(i, cells);
                let (lx, ly, lz) = (table[oi], table[oj], table[ok]);
                let mut value = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        for c in 0..3 {
                            let node = w_mid.get(2 * ci + a as isize, 2 * cj + b as isize, 2 * ck + c as isize);
                            value += lx[a] * ly[b] * lz[c] * node;
                        }
                    }
                }
                w.set(i, j, k, value);
            }
        }
    }
    if let Some(bc) = boundary {
        bc.impose_on(&mut w);
    }
    Ok(w)
}

/// Owning cell and local offset (0..=4) of fine index `i`.
#[inline]
fn owner(i: isize, cells: isize) -> (isize, usize) {
    let c = (i / 4).min(cells - 1);
    (c, (i - 4 * c) as usize)
}

/// Higher-order approximation of the exact solution on the grid of `u_h`.
///
/// Nodes shared with `2h` use [`richardson_node`]; edge midpoints, face
/// centres and cell centres average [`richardson_midpoint`] over the one, two
/// or four diagonals through them. When `boundary` is given, boundary nodes
/// take its `g1`.
pub fn exp_true(u_h: &Field, u_2h: &Field, boundary: Option<&BoundaryData>) -> Result<Field> {
    let grid = *u_h.grid();
    check_parent(&grid, u_2h)?;
    if let Some(bc) = boundary {
        u_h.ensure_same_grid(bc.g1())?;
    }
    let n = grid.n() as isize;
    let diff = |q: [isize; 3]| u_h.get(q[0], q[1], q[2]) - u_2h.get(q[0] / 2, q[1] / 2, q[2] / 2);
    let mut out = Field::zeros(grid);
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                let node = [i, j, k];
                let value = if node.iter().all(|a| a % 2 == 0) {
                    richardson_node(u_h.get(i, j, k), u_2h.get(i / 2, j / 2, k / 2))
                } else {
                    averaged_midpoint(node, |q| u_h.get(q[0], q[1], q[2]), diff, richardson_midpoint)
                };
                out.set(i, j, k, value);
            }
        }
    }
    if let Some(bc) = boundary {
        bc.impose_on(&mut out);
    }
    Ok(out)
}
