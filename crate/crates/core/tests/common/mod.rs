//! Helpers shared by the integration tests.
#![allow(dead_code)]

use excmg::grid::{Field, GridSpec};
use excmg::BcKind;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// The 25-point stencil written out from scratch.
pub fn stencil() -> Vec<([isize; 3], f64)> {
    let mut s = vec![([0, 0, 0], 42.0)];
    for axis in 0..3 {
        for d in [-2isize, -1, 1, 2] {
            let mut o = [0; 3];
            o[axis] = d;
            s.push((o, if d.abs() == 1 { -12.0 } else { 1.0 }));
        }
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for da in [-1isize, 1] {
            for db in [-1isize, 1] {
                let mut o = [0; 3];
                o[a] = da;
                o[b] = db;
                s.push((o, 2.0));
            }
        }
    }
    assert_eq!(s.len(), 25);
    s
}

pub fn unknown_index(n: isize, p: [isize; 3]) -> Option<usize> {
    if p.iter().all(|&c| c >= 1 && c <= n - 1) {
        let m = (n - 1) as usize;
        Some((p[0] - 1) as usize + m * ((p[1] - 1) as usize + m * (p[2] - 1) as usize))
    } else {
        None
    }
}

/// Dense `A` built node by node: neighbours on the boundary drop out, face
/// ghosts reflect onto their mirror with the kind's sign, edge and corner
/// ghosts vanish.
pub fn dense_matrix(n: usize, kind: BcKind) -> Vec<Vec<f64>> {
    let ni = n as isize;
    let m = (n - 1).pow(3);
    let sign = match kind {
        BcKind::FirstKind => 1.0,
        BcKind::SecondKind => -1.0,
    };
    let mut a = vec![vec![0.0; m]; m];
    for k in 1..ni {
        for j in 1..ni {
            for i in 1..ni {
                let row = unknown_index(ni, [i, j, k]).unwrap();
                for (o, c) in stencil() {
                    let mut t = [i + o[0], j + o[1], k + o[2]];
                    let outside: Vec<usize> = (0..3).filter(|&ax| t[ax] < 0 || t[ax] > ni).collect();
                    let coeff = match outside.len() {
                        0 => c,
                        1 => {
                            let ax = outside[0];
                            t[ax] = if t[ax] < 0 { -t[ax] } else { 2 * ni - t[ax] };
                            sign * c
                        }
                        _ => 0.0,
                    };
                    if let Some(col) = unknown_index(ni, t) {
                        a[row][col] += coeff;
                    }
                }
            }
        }
    }
    a
}

pub fn random_interior(grid: GridSpec, rng: &mut ChaCha8Rng) -> Field {
    let mut f = Field::zeros(grid);
    let n = grid.n() as isize;
    for k in 1..n {
        for j in 1..n {
            for i in 1..n {
                f.set(i, j, k, rng.gen_range(-1.0..1.0));
            }
        }
    }
    f
}

pub fn to_vec(f: &Field) -> Vec<f64> {
    let n = f.grid().n() as isize;
    let mut v = Vec::new();
    for k in 1..n {
        for j in 1..n {
            for i in 1..n {
                v.push(f.get(i, j, k));
            }
        }
    }
    v
}

