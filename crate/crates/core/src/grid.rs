//! Uniform cubic grids on the unit cube, the doubling hierarchy, and node fields.
//!
//! Nodes carry indices `0..=n` along each axis; `0` and `n` are boundary nodes,
//! `1..n` are the unknowns, and a single ghost layer at `-1` and `n + 1` sits
//! beyond every face. All storage is one flat `(n + 3)^3` array with `i`
//! varying fastest.

use std::io::Write;

use crate::error::{Error, Result};

/// Geometry of one uniform grid level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    h: f64,
}

impl GridSpec {
    pub const MIN_INTERVALS: usize = 4;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_INTERVALS {
            return Err(Error::GridTooSmall { n });
        }
        Ok(Self {
            n,
            h: 1.0 / n as f64,
        })
    }

    /// Intervals per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh size `1 / n`.
    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Nodes per axis including the ghost layer on both sides.
    #[inline]
    pub fn padded(&self) -> usize {
        self.n + 3
    }

    #[inline]
    pub fn storage_len(&self) -> usize {
        let p = self.padded();
        p * p * p
    }

    /// Number of interior (unknown) nodes, `(n - 1)^3`.
    #[inline]
    pub fn interior_count(&self) -> usize {
        let m = self.n - 1;
        m * m * m
    }

    #[inline]
    pub fn stride_y(&self) -> usize {
        self.padded()
    }

    #[inline]
    pub fn stride_z(&self) -> usize {
        self.padded() * self.padded()
    }

    /// Flat offset of node `(i, j, k)`; indices must lie in `-1..=n+1`.
    #[inline]
    pub fn offset(&self, i: isize, j: isize, k: isize) -> usize {
        debug_assert!(self.contains(i, j, k), "node ({i}, {j}, {k}) outside storage");
        let p = self.padded();
        (i + 1) as usize + p * ((j + 1) as usize + p * (k + 1) as usize)
    }

    #[inline]
    pub fn contains(&self, i: isize, j: isize, k: isize) -> bool {
        let hi = self.n as isize + 1;
        (-1..=hi).contains(&i) && (-1..=hi).contains(&j) && (-1..=hi).contains(&k)
    }

    #[inline]
    pub fn is_interior(&self, i: isize, j: isize, k: isize) -> bool {
        let hi = self.n as isize;
        (1..hi).contains(&i) && (1..hi).contains(&j) && (1..hi).contains(&k)
    }

    /// True for nodes on the closed cube surface.
    #[inline]
    pub fn is_boundary(&self, i: isize, j: isize, k: isize) -> bool {
        let n = self.n as isize;
        let inside = |a: isize| (0..=n).contains(&a);
        inside(i) && inside(j) && inside(k) && !self.is_interior(i, j, k)
    }

    /// Next finer level (`2n` intervals).
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n,
            h: 1.0 / (2 * self.n) as f64,
        }
    }

    pub fn coarsened(&self) -> Result<Self> {
        if self.n % 2 != 0 {
            return Err(Error::OddGrid { n: self.n });
        }
        Self::new(self.n / 2)
    }
}

/// One of the six faces of the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    XLow,
    XHigh,
    YLow,
    YHigh,
    ZLow,
    ZHigh,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::XLow,
        Face::XHigh,
        Face::YLow,
        Face::YHigh,
        Face::ZLow,
        Face::ZHigh,
    ];

    /// Coordinate axis normal to the face (0 = x, 1 = y, 2 = z).
    #[inline]
    pub fn axis(self) -> usize {
        match self {
            Face::XLow | Face::XHigh => 0,
            Face::YLow | Face::YHigh => 1,
            Face::ZLow | Face::ZHigh => 2,
        }
    }

    /// Sign of the outward normal along [`Face::axis`].
    #[inline]
    pub fn outward_sign(self) -> f64 {
        match self {
            Face::XLow | Face::YLow | Face::ZLow => -1.0,
            Face::XHigh | Face::YHigh | Face::ZHigh => 1.0,
        }
    }

    #[inline]
    pub fn is_low(self) -> bool {
        self.outward_sign() < 0.0
    }

    /// The two tangential axes, in increasing order.
    #[inline]
    pub fn tangential_axes(self) -> [usize; 2] {
        match self.axis() {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    /// Node index `(i, j, k)` at normal offset `depth` into the domain from this
    /// face (`depth = 0` is the face itself, `-1` the ghost layer), with
    /// tangential indices `(a, b)`.
    #[inline]
    pub fn node(self, n: usize, depth: isize, a: isize, b: isize) -> [isize; 3] {
        let n = n as isize;
        let normal = if self.is_low() { depth } else { n - depth };
        match self.axis() {
            0 => [normal, a, b],
            1 => [a, normal, b],
            _ => [a, b, normal],
        }
    }
}

/// Physical position of node `(i, j, k)`; ghost indices map outside `[0, 1]`.
#[inline]
pub fn node_position(grid: &GridSpec, i: isize, j: isize, k: isize) -> [f64; 3] {
    let h = grid.h();
    [i as f64 * h, j as f64 * h, k as f64 * h]
}

/// Embedded ladder of grids from coarsest to finest.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Vec<GridSpec>,
}

impl Hierarchy {
    pub fn levels(&self) -> &[GridSpec] {
        &self.levels
    }

    pub fn coarse_n(&self) -> usize {
        self.levels[0].n()
    }

    pub fn total_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &GridSpec {
        self.levels.last().expect("hierarchy is never empty")
    }
}

/// Two mandatory coarse levels plus `extra_levels` refinements.
pub fn build_hierarchy(coarse_n: usize, extra_levels: usize) -> Result<Hierarchy> {
    let mut grid = GridSpec::new(coarse_n)?;
    let mut levels = Vec::with_capacity(extra_levels + 2);
    levels.push(grid);
    for _ in 0..extra_levels + 1 {
        grid = grid.refined();
        levels.push(grid);
    }
    Ok(Hierarchy { levels })
}

/// Node values on one grid, including the ghost ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.storage_len()],
        }
    }

    /// Samples `f` at every node in `0..=n`; ghosts stay zero.
    pub fn sample<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64,
    {
        let mut field = Self::zeros(grid);
        let n = grid.n() as isize;
        for k in 0..=n {
            for j in 0..=n {
                for i in 0..=n {
                    let v = f(node_position(&grid, i, j, k));
                    field.set(i, j, k, v);
                }
            }
        }
        field
    }

    /// Samples `f` at every stored node, ghosts included.
    pub fn sample_with_ghosts<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64,
    {
        let mut field = Self::zeros(grid);
        let hi = grid.n() as isize + 1;
        for k in -1..=hi {
            for j in -1..=hi {
                for i in -1..=hi {
                    let v = f(node_position(&grid, i, j, k));
                    field.set(i, j, k, v);
                }
            }
        }
        field
    }

    /// Constant `c` on every stored node (interior, boundary and ghosts).
    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.storage_len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize, k: isize) -> f64 {
        self.values[self.grid.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, k: isize, v: f64) {
        let o = self.grid.offset(i, j, k);
        self.values[o] = v;
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.n() != other.grid.n() {
            return Err(Error::GridMismatch {
                expected: self.grid.n(),
                found: other.grid.n(),
            });
        }
        Ok(())
    }

    /// Visits interior nodes in storage order.
    pub fn for_each_interior<F: FnMut(isize, isize, isize, f64)>(&self, mut f: F) {
        let n = self.grid.n() as isize;
        for k in 1..n {
            for j in 1..n {
                for i in 1..n {
                    f(i, j, k, self.get(i, j, k));
                }
            }
        }
    }

    /// Zeroes boundary and ghost nodes, keeping interior values.
    pub fn clear_exterior(&mut self) {
        let p = self.grid.padded();
        let n = self.grid.n();
        // Padded indices 2..=n are interior along each axis.
        let inside = |a: usize| (2..=n).contains(&a);
        for (plane, slab) in self.values.chunks_mut(p * p).enumerate() {
            if !inside(plane) {
                slab.fill(0.0);
                continue;
            }
            for (row, line) in slab.chunks_mut(p).enumerate() {
                if inside(row) {
                    line[..2].fill(0.0);
                    line[n + 1..].fill(0.0);
                } else {
                    line.fill(0.0);
                }
            }
        }
    }

    /// Copy with only the interior retained.
    pub fn interior_only(&self) -> Field {
        let mut out = self.clone();
        out.clear_exterior();
        out
    }

    /// `self += alpha * x` over all stored nodes.
    pub fn axpy(&mut self, alpha: f64, x: &Field) {
        debug_assert_eq!(self.grid.n(), x.grid.n());
        for (a, b) in self.values.iter_mut().zip(&x.values) {
            *a += alpha * b;
        }
    }

    /// `self = x + beta * self` over all stored nodes.
    pub fn xpby(&mut self, x: &Field, beta: f64) {
        debug_assert_eq!(self.grid.n(), x.grid.n());
        for (a, b) in self.values.iter_mut().zip(&x.values) {
            *a = b + beta * *a;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    /// Writes `(i, j, k, x, y, z, value)` rows for interior nodes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,k,x,y,z,value")?;
        let grid = self.grid;
        let mut result = Ok(());
        self.for_each_interior(|i, j, k, v| {
            if result.is_ok() {
                let [x, y, z] = node_position(&grid, i, j, k);
                result = writeln!(out, "{i},{j},{k},{x},{y},{z},{v:e}");
            }
        });
        result
    }
}

/// Sum over interior nodes of `a * b`.
pub fn inner_product(a: &Field, b: &Field) -> Result<f64> {
    a.ensure_same_grid(b)?;
    Ok(interior_dot(a, b))
}

/// Unchecked interior dot product for hot loops where grids are known to agree.
pub(crate) fn interior_dot(a: &Field, b: &Field) -> f64 {
    let grid = a.grid;
    let n = grid.n() as isize;
    let m = (n - 1) as usize;
    let mut sum = 0.0;
    for k in 1..n {
        for j in 1..n {
            let start = grid.offset(1, j, k);
            let ra = &a.values[start..start + m];
            let rb = &b.values[start..start + m];
            sum += ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Count-normalised root mean square over interior nodes.
    Rms,
    Max,
}

pub fn norm(a: &Field, kind: NormKind) -> f64 {
    match kind {
        NormKind::Rms => (interior_dot(a, a) / a.grid.interior_count() as f64).sqrt(),
        NormKind::Max => {
            let mut m = 0.0f64;
            a.for_each_interior(|_, _, _, v| m = m.max(v.abs()));
            m
        }
    }
}

/// Pointwise injection onto the next coarser grid: `coarse(i,j,k) = fine(2i,2j,2k)`.
pub fn restrict_inject(fine: &Field) -> Result<Field> {
    let coarse_grid = fine.grid.coarsened()?;
    let mut coarse = Field::zeros(coarse_grid);
    let n = coarse_grid.n() as isize;
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                coarse.set(i, j, k, fine.get(2 * i, 2 * j, 2 * k));
            }
        }
    }
    Ok(coarse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hierarchy_ladders() {
        let h = build_hierarchy(4, 0).unwrap();
        let ns: Vec<_> = h.levels().iter().map(GridSpec::n).collect();
        assert_eq!(ns, vec![4, 8]);

        let h = build_hierarchy(32, 3).unwrap();
        assert_eq!(h.finest().n(), 512);
        assert_eq!(h.total_levels(), 5);

        let h = build_hierarchy(4, 2).unwrap();
        let hs: Vec<_> = h.levels().iter().map(GridSpec::h).collect();
        assert_eq!(hs, vec![0.25, 0.125, 0.0625, 0.03125]);
        for pair in h.levels().windows(2) {
            assert_eq!(pair[0].h(), 2.0 * pair[1].h());
        }
    }

    #[test]
    fn rejects_small_coarse_grid() {
        assert!(matches!(build_hierarchy(3, 1), Err(Error::GridTooSmall { n: 3 })));
        assert!(GridSpec::new(0).is_err());
    }

    #[test]
    fn spacing_times_n_is_one() {
        for n in [4, 5, 7, 12, 96, 1000] {
            let g = GridSpec::new(n).unwrap();
            assert!((g.h() * n as f64 - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn node_positions() {
        let g = GridSpec::new(4).unwrap();
        assert_eq!(node_position(&g, 0, 0, 0), [0.0, 0.0, 0.0]);
        assert_eq!(node_position(&g, 4, 4, 4), [1.0, 1.0, 1.0]);
        assert_eq!(node_position(&g, -1, 2, 2), [-0.25, 0.5, 0.5]);
    }

    #[test]
    fn inner_products() {
        let g = GridSpec::new(4).unwrap();
        let zero = Field::zeros(g);
        let ones = Field::constant(g, 1.0);
        assert_eq!(inner_product(&zero, &ones).unwrap(), 0.0);
        assert_eq!(inner_product(&ones, &ones).unwrap(), 27.0);

        let mut e1 = Field::zeros(g);
        e1.set(2, 1, 3, 1.0);
        assert_eq!(inner_product(&e1, &e1).unwrap(), 1.0);

        let other = Field::zeros(GridSpec::new(8).unwrap());
        assert!(matches!(
            inner_product(&zero, &other),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn norms() {
        let g = GridSpec::new(4).unwrap();
        let zero = Field::zeros(g);
        assert_eq!(norm(&zero, NormKind::Rms), 0.0);
        assert_eq!(norm(&zero, NormKind::Max), 0.0);

        let ones = Field::constant(g, 1.0);
        assert!((norm(&ones, NormKind::Rms) - 1.0).abs() < 1e-15);
        assert_eq!(norm(&ones, NormKind::Max), 1.0);

        let mut single = Field::zeros(g);
        single.set(1, 2, 3, 2.0);
        // Exterior values never count.
        single.set(0, 2, 3, 100.0);
        single.set(-1, 2, 3, -100.0);
        assert_eq!(norm(&single, NormKind::Max), 2.0);
        assert!((norm(&single, NormKind::Rms) - 2.0 / 27f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn injection() {
        let fine_grid = GridSpec::new(8).unwrap();
        let c = Field::constant(fine_grid, 3.5);
        let coarse = restrict_inject(&c).unwrap();
        assert_eq!(coarse.grid().n(), 4);
        coarse.for_each_interior(|_, _, _, v| assert_eq!(v, 3.5));

        let sq = |p: [f64; 3]| p[0] * p[0];
        let fine = Field::sample(fine_grid, sq);
        let coarse = restrict_inject(&fine).unwrap();
        let expect = Field::sample(GridSpec::new(4).unwrap(), sq);
        assert_eq!(coarse, expect);

        let mut marker = Field::zeros(fine_grid);
        marker.set(6, 4, 2, 1.0);
        let coarse = restrict_inject(&marker).unwrap();
        assert_eq!(coarse.get(3, 2, 1), 1.0);
        assert_eq!(inner_product(&coarse, &coarse).unwrap(), 1.0);

        let odd = Field::zeros(GridSpec::new(5).unwrap());
        assert!(matches!(restrict_inject(&odd), Err(Error::OddGrid { n: 5 })));
    }

    #[test]
    fn csv_dump_has_one_row_per_interior_node() {
        let g = GridSpec::new(4).unwrap();
        let f = Field::sample(g, |p| p[0] + p[1] + p[2]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 27);
        assert!(text.lines().nth(1).unwrap().starts_with("1,1,1,0.25,0.25,0.25,"));
    }
}
