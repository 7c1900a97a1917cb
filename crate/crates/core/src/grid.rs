//! Uniform right-triangle mesh on the truncated strip `(-ε(R+L), ε(R+L)) × (0, εK)`,
//! periodic in the vertical direction.
//!
//! Node coordinates are kept as integer lattice indices `(i, q)` and only turned
//! into lengths on demand as `i·h1`, `q·h2`, so cell shifts are exact.
//!
//! Nodes are numbered region by region: first the open interior `|x1| < εR`,
//! then the closed right box `[εR, ε(R+L)]`, then the closed left box
//! `[-ε(R+L), -εR]`. Inside each region the numbering is column-major in the
//! lattice (column offset times `K·n2` plus row).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub eps: f64,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub n1: usize,
    pub n2: usize,
}

impl GridSpec {
    pub fn new(eps: f64, r: usize, l: usize, k: usize, n1: usize, n2: usize) -> Result<Self> {
        let spec = GridSpec { eps, r, l, k, n1, n2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::InvalidGrid(format!("eps must be positive, got {}", self.eps)));
        }
        for (name, v) in [("R", self.r), ("L", self.l), ("K", self.k), ("n1", self.n1), ("n2", self.n2)] {
            if v == 0 {
                return Err(Error::InvalidGrid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn h1(&self) -> f64 {
        self.eps / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        self.eps / self.n2 as f64
    }

    /// Height `H = εK` of the strip.
    pub fn height(&self) -> f64 {
        self.eps * self.k as f64
    }

    /// Number of node rows (the row at `x2 = H` is identified with row 0).
    pub fn rows(&self) -> usize {
        self.k * self.n2
    }

    /// Nodes with `|x1| < εR`.
    pub fn n_interior(&self) -> usize {
        (2 * self.r * self.n1 - 1) * self.rows()
    }

    /// Nodes in one closed radiation box.
    pub fn n_box(&self) -> usize {
        (self.l * self.n1 + 1) * self.rows()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_interior() + 2 * self.n_box()
    }

    pub fn n_elements(&self) -> usize {
        4 * (self.r + self.l) * self.n1 * self.rows()
    }

    fn inner_col(&self) -> i64 {
        (self.r * self.n1) as i64
    }

    fn outer_col(&self) -> i64 {
        ((self.r + self.l) * self.n1) as i64
    }
}

/// Which radiation box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Plus => "+",
            Side::Minus => "-",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Plus => "right",
            Side::Minus => "left",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Interior,
    Box(Side),
}

/// The two right triangles a lattice rectangle is split into.
///
/// `Lower` has vertices `(i,q), (i+1,q), (i+1,q+1)`, `Upper` has
/// `(i,q), (i+1,q+1), (i,q+1)`; both are counter-clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TriangleKind {
    Lower,
    Upper,
}

impl TriangleKind {
    pub const ALL: [TriangleKind; 2] = [TriangleKind::Lower, TriangleKind::Upper];

    /// Vertex offsets relative to the lower-left corner of the rectangle.
    pub fn offsets(self) -> [[i64; 2]; 3] {
        match self {
            TriangleKind::Lower => [[0, 0], [1, 0], [1, 1]],
            TriangleKind::Upper => [[0, 0], [1, 1], [0, 1]],
        }
    }

    /// Barycenter in units of the rectangle's edge lengths.
    pub fn barycenter_offset(self) -> [f64; 2] {
        match self {
            TriangleKind::Lower => [2.0 / 3.0, 1.0 / 3.0],
            TriangleKind::Upper => [1.0 / 3.0, 2.0 / 3.0],
        }
    }

    /// Vertex coordinates with the rectangle corner at the origin.
    pub fn reference_coords(self, h1: f64, h2: f64) -> [[f64; 2]; 3] {
        self.offsets().map(|[a, b]| [a as f64 * h1, b as f64 * h2])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Element {
    /// Global node indices of the three vertices.
    pub nodes: [usize; 3],
    /// Lattice index `(i, q)` of the lower-left rectangle corner (`q < K·n2`).
    pub corner: [i64; 2],
    pub kind: TriangleKind,
    pub region: Region,
}

impl Element {
    /// Unwrapped lattice indices of the vertices; `q` may equal `K·n2`.
    pub fn lattice(&self) -> [[i64; 2]; 3] {
        self.kind.offsets().map(|[a, b]| [self.corner[0] + a, self.corner[1] + b])
    }

    pub fn coords(&self, spec: &GridSpec) -> [[f64; 2]; 3] {
        let (h1, h2) = (spec.h1(), spec.h2());
        self.lattice().map(|[i, q]| [i as f64 * h1, q as f64 * h2])
    }

    pub fn barycenter(&self, spec: &GridSpec) -> [f64; 2] {
        let off = self.kind.barycenter_offset();
        [(self.corner[0] as f64 + off[0]) * spec.h1(), (self.corner[1] as f64 + off[1]) * spec.h2()]
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    nodes: Vec<[i64; 2]>,
    elements: Vec<Element>,
}

pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let rows = spec.rows() as i64;
    let (inner, outer) = (spec.inner_col(), spec.outer_col());

    let mut nodes = vec![[0i64; 2]; spec.n_nodes()];
    for i in -outer..=outer {
        for q in 0..rows {
            nodes[node_index_of(&spec, i, q)] = [i, q];
        }
    }

    let mut elements = Vec::with_capacity(spec.n_elements());
    for i in -outer..outer {
        let region = if i >= inner {
            Region::Box(Side::Plus)
        } else if i < -inner {
            Region::Box(Side::Minus)
        } else {
            Region::Interior
        };
        for q in 0..rows {
            for kind in TriangleKind::ALL {
                let mut el = Element { nodes: [0; 3], corner: [i, q], kind, region };
                let lat = el.lattice();
                for v in 0..3 {
                    el.nodes[v] = node_index_of(&spec, lat[v][0], lat[v][1]);
                }
                elements.push(el);
            }
        }
    }
    log::debug!(
        "grid: {} nodes ({} interior, {} per box), {} elements",
        nodes.len(),
        spec.n_interior(),
        spec.n_box(),
        elements.len()
    );
    Ok(Grid { spec, nodes, elements })
}

fn node_index_of(spec: &GridSpec, i: i64, q: i64) -> usize {
    let rows = spec.rows() as i64;
    let q = q.rem_euclid(rows);
    let (inner, outer) = (spec.inner_col(), spec.outer_col());
    debug_assert!(i.abs() <= outer);
    let col = if i >= inner {
        spec.n_interior() as i64 / rows + (i - inner)
    } else if i <= -inner {
        (spec.n_interior() + spec.n_box()) as i64 / rows + (i + outer)
    } else {
        i + inner - 1
    };
    (col * rows + q) as usize
}

impl Grid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_interior(&self) -> usize {
        self.spec.n_interior()
    }

    pub fn n_box(&self) -> usize {
        self.spec.n_box()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Lattice index of node `n`.
    pub fn lattice(&self, n: usize) -> [i64; 2] {
        self.nodes[n]
    }

    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let [i, q] = self.nodes[n];
        [i as f64 * self.spec.h1(), q as f64 * self.spec.h2()]
    }

    /// Node index of lattice point `(i, q)`; `q` is wrapped.
    pub fn node_index(&self, i: i64, q: i64) -> usize {
        node_index_of(&self.spec, i, q)
    }

    /// First global index of the nodes of one closed box.
    pub fn box_offset(&self, side: Side) -> usize {
        match side {
            Side::Plus => self.n_interior(),
            Side::Minus => self.n_interior() + self.n_box(),
        }
    }

    pub fn box_nodes(&self, side: Side) -> std::ops::Range<usize> {
        let start = self.box_offset(side);
        start..start + self.n_box()
    }

    /// Lattice index of box node `local` in box-local coordinates (lower-left
    /// corner of the box at the origin).
    pub fn box_local_lattice(&self, local: usize) -> [i64; 2] {
        let rows = self.spec.rows();
        [(local / rows) as i64, (local % rows) as i64]
    }

    pub fn region_of_node(&self, n: usize) -> Region {
        if n < self.n_interior() {
            Region::Interior
        } else if n < self.n_interior() + self.n_box() {
            Region::Box(Side::Plus)
        } else {
            Region::Box(Side::Minus)
        }
    }
}

// ============================================================================
// Element integrals
// ============================================================================

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalMatrices {
    /// `a ∫ ∇φ_i · ∇φ_j`
    pub stiffness: [[f64; 3]; 3],
    /// `∫ φ_i φ_j`
    pub mass: [[f64; 3]; 3],
    /// `∫ φ_i ∂₁φ_j`
    pub flux: [[f64; 3]; 3],
}

/// Signed area and hat gradients of a linear triangle.
pub fn hat_gradients(coords: &[[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let [p0, p1, p2] = *coords;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let grads = [
        [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
        [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
        [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
    ];
    (0.5 * det, grads)
}

pub fn element_matrices(coords: &[[f64; 2]; 3], a: f64) -> LocalMatrices {
    let (area, g) = hat_gradients(coords);
    let area = area.abs();
    let mut out = LocalMatrices { stiffness: [[0.0; 3]; 3], mass: [[0.0; 3]; 3], flux: [[0.0; 3]; 3] };
    for i in 0..3 {
        for j in 0..3 {
            out.stiffness[i][j] = a * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            out.mass[i][j] = if i == j { area / 6.0 } else { area / 12.0 };
            out.flux[i][j] = area / 3.0 * g[j][0];
        }
    }
    out
}

/// `∫ w φ_i φ_j` for a weight `w` linear on the triangle with vertex values `w`.
pub fn weighted_mass(coords: &[[f64; 2]; 3], w: [f64; 3]) -> [[f64; 3]; 3] {
    let (area, _) = hat_gradients(coords);
    let area = area.abs();
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let c = match (i == j, i == k, j == k) {
                    (true, true, _) => 1.0 / 10.0,
                    (true, false, _) | (false, true, _) | (false, _, true) => 1.0 / 30.0,
                    _ => 1.0 / 60.0,
                };
                s += wk * c;
            }
            m[i][j] = area * s;
        }
    }
    m
}

/// Degree-5 seven-point rule on a triangle: barycentric points and weights
/// normalized to sum to one.
pub fn triangle_quadrature() -> [([f64; 3], f64); 7] {
    let s = 15f64.sqrt();
    let (a1, b1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0);
    let (a2, b2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0);
    let (w1, w2) = ((155.0 - s) / 1200.0, (155.0 + s) / 1200.0);
    let t = 1.0 / 3.0;
    [
        ([t, t, t], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

pub fn barycentric_point(coords: &[[f64; 2]; 3], l: [f64; 3]) -> [f64; 2] {
    [
        l[0] * coords[0][0] + l[1] * coords[1][0] + l[2] * coords[2][0],
        l[0] * coords[0][1] + l[1] * coords[1][1] + l[2] * coords[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_force_counts(spec: &GridSpec) -> (usize, usize, usize) {
        let (h1, h2) = (spec.h1(), spec.h2());
        let (r, rl) = (spec.eps * spec.r as f64, spec.eps * (spec.r + spec.l) as f64);
        let (mut inner, mut plus, mut minus) = (0, 0, 0);
        let cols = 2 * (spec.r + spec.l) * spec.n1 + 1;
        for c in 0..cols {
            let x = -rl + c as f64 * h1;
            for q in 0..spec.rows() {
                let y = q as f64 * h2;
                assert!(y < spec.height());
                let tol = 1e-9 * h1;
                if x.abs() < r - tol {
                    inner += 1;
                } else if x > 0.0 {
                    plus += 1;
                } else {
                    minus += 1;
                }
            }
        }
        (inner, plus, minus)
    }

    #[test]
    fn smallest_grid_counts() {
        let spec = GridSpec::new(1.0, 1, 1, 1, 1, 1).unwrap();
        let g = build_grid(spec).unwrap();
        assert_eq!(g.elements().len(), 8);
        assert_eq!(g.n_nodes(), 5);
        assert_eq!(g.n_interior(), 1);
        assert_eq!(g.n_box(), 2);
    }

    #[test]
    fn reference_grid_steps() {
        let spec = GridSpec::new(1.0, 15, 6, 14, 20, 19).unwrap();
        assert_relative_eq!(spec.h1(), 0.05);
        assert!((spec.h2() - 0.0526).abs() < 1e-4);
    }

    #[test]
    fn counts_match_node_scan() {
        for spec in [
            GridSpec::new(1.0, 2, 1, 3, 4, 3).unwrap(),
            GridSpec::new(0.5, 3, 2, 2, 5, 2).unwrap(),
            GridSpec::new(2.0, 1, 3, 1, 2, 7).unwrap(),
        ] {
            let (inner, plus, minus) = brute_force_counts(&spec);
            assert_eq!(inner, spec.n_interior());
            assert_eq!(plus, spec.n_box());
            assert_eq!(minus, spec.n_box());
            let g = build_grid(spec).unwrap();
            assert_eq!(g.n_nodes(), inner + plus + minus);
        }
    }

    #[test]
    fn node_ordering_by_region() {
        let spec = GridSpec::new(1.0, 2, 1, 2, 3, 2).unwrap();
        let g = build_grid(spec).unwrap();
        let r = spec.eps * spec.r as f64;
        let mut seen = vec![false; g.n_nodes()];
        for n in 0..g.n_nodes() {
            let x = g.node_coords(n)[0];
            match g.region_of_node(n) {
                Region::Interior => assert!(x.abs() < r),
                Region::Box(Side::Plus) => assert!(x >= r),
                Region::Box(Side::Minus) => assert!(x <= -r),
            }
            let [i, q] = g.lattice(n);
            assert_eq!(g.node_index(i, q), n);
            seen[n] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn box_local_numbering_starts_at_inner_edge() {
        let spec = GridSpec::new(1.0, 2, 2, 2, 2, 3).unwrap();
        let g = build_grid(spec).unwrap();
        for side in [Side::Plus, Side::Minus] {
            for (local, n) in g.box_nodes(side).enumerate() {
                let [li, lq] = g.box_local_lattice(local);
                let [i, q] = g.lattice(n);
                let i0 = match side {
                    Side::Plus => (spec.r * spec.n1) as i64,
                    Side::Minus => -(((spec.r + spec.l) * spec.n1) as i64),
                };
                assert_eq!([i - i0, q], [li, lq]);
            }
        }
    }

    #[test]
    fn elements_are_right_triangles_in_one_cell() {
        let spec = GridSpec::new(1.0, 1, 1, 2, 3, 2).unwrap();
        let g = build_grid(spec).unwrap();
        let area = 0.5 * spec.h1() * spec.h2();
        for el in g.elements() {
            let c = el.coords(&spec);
            let (a, _) = hat_gradients(&c);
            assert_relative_eq!(a, area, max_relative = 1e-12);
            let b = el.barycenter(&spec);
            let cell = [(b[0] / spec.eps).floor(), (b[1] / spec.eps).floor()];
            for v in c {
                assert!(v[0] >= cell[0] * spec.eps - 1e-12 && v[0] <= (cell[0] + 1.0) * spec.eps + 1e-12);
                assert!(v[1] >= cell[1] * spec.eps - 1e-12 && v[1] <= (cell[1] + 1.0) * spec.eps + 1e-12);
            }
        }
    }

    #[test]
    fn vertical_wrap() {
        let spec = GridSpec::new(1.0, 1, 1, 2, 2, 2).unwrap();
        let g = build_grid(spec).unwrap();
        let rows = spec.rows() as i64;
        assert_eq!(g.node_index(0, rows), g.node_index(0, 0));
        let top: Vec<_> = g.elements().iter().filter(|e| e.corner[1] == rows - 1).collect();
        assert!(!top.is_empty());
        for e in top {
            assert!(e.nodes.iter().all(|&n| g.lattice(n)[1] < rows));
        }
    }

    #[test]
    fn cell_shift_is_exact() {
        let spec = GridSpec::new(1.0, 2, 1, 1, 5, 3).unwrap();
        let g = build_grid(spec).unwrap();
        let n1 = spec.n1 as i64;
        let a = g.node_coords(g.node_index(1, 2));
        let b = g.node_coords(g.node_index(1 + n1, 2));
        assert_eq!(g.lattice(g.node_index(1 + n1, 2))[0] - g.lattice(g.node_index(1, 2))[0], n1);
        assert!((b[0] - a[0] - spec.eps).abs() <= 4.0 * f64::EPSILON * b[0].abs());
        assert_eq!(a[1], b[1]);
    }

    #[test]
    fn rejects_zero_dimensions() {
        assert!(GridSpec::new(1.0, 0, 1, 1, 1, 1).is_err());
        assert!(GridSpec::new(1.0, 1, 1, 1, 0, 1).is_err());
        assert!(GridSpec::new(-1.0, 1, 1, 1, 1, 1).is_err());
    }

    #[test]
    fn unit_triangle_mass() {
        let c = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let m = element_matrices(&c, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.5 / 6.0 } else { 0.5 / 12.0 };
                assert_relative_eq!(m.mass[i][j], expect, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_rows_and_flux_columns_sum_to_zero() {
        for kind in TriangleKind::ALL {
            let c = kind.reference_coords(0.3, 0.7);
            let m = element_matrices(&c, 2.5);
            for i in 0..3 {
                let row: f64 = m.stiffness[i].iter().sum();
                assert!(row.abs() < 1e-13);
                let flux_row: f64 = m.flux[i].iter().sum();
                assert!(flux_row.abs() < 1e-14);
            }
            // Σ_i ∫ φ_i ∂₁φ_j = ∫ ∂₁φ_j
            let (area, g) = hat_gradients(&c);
            for j in 0..3 {
                let col: f64 = (0..3).map(|k| m.flux[k][j]).sum();
                assert_relative_eq!(col, area * g[j][0], max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn weighted_mass_with_unit_weight_is_mass() {
        let c = TriangleKind::Upper.reference_coords(0.2, 0.1);
        let w = weighted_mass(&c, [1.0; 3]);
        let m = element_matrices(&c, 1.0).mass;
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(w[i][j], m[i][j], max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn weighted_mass_matches_quadrature() {
        let c = TriangleKind::Lower.reference_coords(0.4, 0.3);
        let wv = [0.2, 1.3, -0.7];
        let w = weighted_mass(&c, wv);
        let (area, _) = hat_gradients(&c);
        for i in 0..3 {
            for j in 0..3 {
                let q: f64 = triangle_quadrature()
                    .iter()
                    .map(|(l, wt)| {
                        let weight = l[0] * wv[0] + l[1] * wv[1] + l[2] * wv[2];
                        wt * area * weight * l[i] * l[j]
                    })
                    .sum();
                assert_relative_eq!(w[i][j], q, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_is_exact_for_quintics() {
        let c = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        // ∫ x^a y^b over the unit triangle = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 = triangle_quadrature()
                    .iter()
                    .map(|(l, w)| {
                        let p = barycentric_point(&c, *l);
                        0.5 * w * p[0].powi(a as i32) * p[1].powi(b as i32)
                    })
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert_relative_eq!(q, exact, max_relative = 1e-12);
            }
        }
    }
}
