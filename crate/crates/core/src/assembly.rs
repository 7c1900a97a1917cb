//! Discrete truncated problem on `V_h`: hat functions on the open interior
//! plus the radiation bases of both boxes.
//!
//! All hat-level matrices are real and share one sparsity pattern. Every
//! matrix on `V_h` is kept in arrowhead form: the sparse interior block, dense
//! borders coupling the interior nodes next to the boxes with the Bloch
//! coefficients, and a dense Bloch corner.

use std::ops::Range;

use faer::{c64, Mat};

use crate::enrichment::RadiationBasis;
use crate::error::{Error, Result};
use crate::grid::{
    barycentric_point, element_matrices, triangle_quadrature, weighted_mass, Grid, GridSpec, Region, Side, TriangleKind,
};
use crate::select::incoming_admissible;
use crate::sparse::Csr;

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// Piecewise-linear cut-off: 1 on `|x1| ≤ εR`, 0 beyond `ε(R+L)`.
#[derive(Clone, Copy, Debug)]
pub struct CutoffTheta {
    pub eps: f64,
    pub r: usize,
    pub l: usize,
}

impl CutoffTheta {
    pub fn new(spec: &GridSpec) -> Self {
        CutoffTheta { eps: spec.eps, r: spec.r, l: spec.l }
    }

    pub fn value(&self, x1: f64) -> f64 {
        let inner = self.eps * self.r as f64;
        let outer = self.eps * (self.r + self.l) as f64;
        let x = x1.abs();
        if x <= inner {
            1.0
        } else if x >= outer {
            0.0
        } else {
            (outer - x) / (outer - inner)
        }
    }
}

pub fn theta_cutoff(x1: f64, spec: &GridSpec) -> f64 {
    CutoffTheta::new(spec).value(x1)
}

/// Plane wave `A e^{i j·x}` fed in from the left through a smooth step in x1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncomingWave {
    pub j_in: [f64; 2],
    pub amplitude: c64,
    /// Steepness of the step.
    pub d: f64,
    /// Use `½(1 - tanh)` (continuous) instead of `1 - tanh`.
    pub half_step: bool,
}

impl IncomingWave {
    pub fn new(j_in: [f64; 2]) -> Self {
        IncomingWave { j_in, amplitude: c64::new(1.0, 0.0), d: 1.0, half_step: true }
    }

    pub fn value(&self, x: [f64; 2]) -> c64 {
        let t = self.j_in[0] * x[0] + self.j_in[1] * x[1];
        self.amplitude * c64::new(t.cos(), t.sin())
    }
}

/// Vertical wave number on the lattice `2πn/(εK)` closest to `j2`, and the
/// matching horizontal component on the light circle `|j| = ω`.
pub fn aligned_incoming(omega: f64, j_approx: [f64; 2], spec: &GridSpec) -> Result<[f64; 2]> {
    let unit = 2.0 * std::f64::consts::PI / spec.height();
    let j2 = (j_approx[1] / unit).round() * unit;
    let rest = omega * omega - j2 * j2;
    if !(rest > 0.0) {
        return Err(Error::InadmissibleIncoming {
            j1: j_approx[0],
            j2: j_approx[1],
            reason: format!("aligned vertical wave number {j2} is not below omega = {omega}"),
        });
    }
    let j1 = rest.sqrt().copysign(if j_approx[0] == 0.0 { 1.0 } else { j_approx[0] });
    Ok([j1, j2])
}

/// The step `θ(x1)`: 1 left of `-εR`, 0 from `x1 = 0` on, a tanh centred at
/// `-εR/2` in between.
#[derive(Clone, Copy, Debug)]
pub struct SourceStep {
    start: f64,
    center: f64,
    d: f64,
    scale: f64,
}

impl SourceStep {
    pub fn new(spec: &GridSpec, d: f64, half_step: bool) -> Self {
        let start = -spec.eps * spec.r as f64;
        SourceStep { start, center: 0.5 * start, d, scale: if half_step { 0.5 } else { 1.0 } }
    }

    fn inside(&self, x1: f64) -> bool {
        x1 >= self.start && x1 < 0.0
    }

    pub fn value(&self, x1: f64) -> f64 {
        if x1 < self.start {
            1.0
        } else if x1 >= 0.0 {
            0.0
        } else {
            self.scale * (1.0 - (self.d * (x1 - self.center)).tanh())
        }
    }

    pub fn derivative(&self, x1: f64) -> f64 {
        if !self.inside(x1) {
            return 0.0;
        }
        let t = (self.d * (x1 - self.center)).tanh();
        -self.scale * self.d * (1.0 - t * t)
    }

    pub fn second_derivative(&self, x1: f64) -> f64 {
        if !self.inside(x1) {
            return 0.0;
        }
        let t = (self.d * (x1 - self.center)).tanh();
        2.0 * self.scale * self.d * self.d * t * (1.0 - t * t)
    }
}

/// Hat-level load `∫ f ψ̄_k` and an optional nodal field added back after the solve.
#[derive(Clone, Debug)]
pub struct Load {
    pub hat: Vec<c64>,
    pub offset: Option<Vec<c64>>,
}

impl Load {
    pub fn zero(n: usize) -> Self {
        Load { hat: vec![ZERO; n], offset: None }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Load {
            hat: self.hat.iter().map(|v| v * s).collect(),
            offset: self.offset.as_ref().map(|o| o.iter().map(|v| v * s).collect()),
        }
    }
}

fn integrate_load(grid: &Grid, mut f: impl FnMut(usize, [f64; 2]) -> c64) -> Vec<c64> {
    let spec = grid.spec();
    let rule = triangle_quadrature();
    let area = 0.5 * spec.h1() * spec.h2();
    let mut out = vec![ZERO; grid.n_nodes()];
    for (e, el) in grid.elements().iter().enumerate() {
        let coords = el.coords(spec);
        let mut local = [ZERO; 3];
        for (l, w) in &rule {
            let v = f(e, barycentric_point(&coords, *l)) * (w * area);
            if v == ZERO {
                continue;
            }
            for k in 0..3 {
                local[k] += v * l[k];
            }
        }
        for k in 0..3 {
            out[el.nodes[k]] += local[k];
        }
    }
    out
}

/// Minimal periodic distance in x2 on a strip of height `h`.
fn wrapped(dy: f64, h: f64) -> f64 {
    dy - h * (dy / h).round()
}

/// Load of `f(x) = A e^{-c |x - x*|²}`, with the vertical distance taken periodically.
pub fn gaussian_load(grid: &Grid, amplitude: f64, decay: f64, center: [f64; 2]) -> Load {
    let h = grid.spec().height();
    let hat = integrate_load(grid, |_, x| {
        let dx = x[0] - center[0];
        let dy = wrapped(x[1] - center[1], h);
        c64::new(amplitude * (-decay * (dx * dx + dy * dy)).exp(), 0.0)
    });
    Load { hat, offset: None }
}

/// Transform an incoming plane wave into the source
/// `f̃ = a u_in (2i j1 θ' + θ'')` and the add-back field `u_in θ`.
pub fn incoming_source(wave: &IncomingWave, omega: f64, grid: &Grid, coefficient: &[f64]) -> Result<Load> {
    let spec = grid.spec();
    if !incoming_admissible(omega, wave.j_in) {
        return Err(Error::InadmissibleIncoming {
            j1: wave.j_in[0],
            j2: wave.j_in[1],
            reason: format!("|j_in|² differs from omega² = {}", omega * omega),
        });
    }
    let step = SourceStep::new(spec, wave.d, wave.half_step);
    if step.value(-1e-300) >= 1e-5 {
        return Err(Error::Config(format!(
            "source step is not small at the interface (theta(0) = {:.3e}); increase d",
            step.value(-1e-300)
        )));
    }
    // the transformation needs a constant coefficient where θ varies
    let start = -spec.eps * spec.r as f64;
    let mut a_strip: Option<f64> = None;
    for (el, a) in grid.elements().iter().zip(coefficient) {
        let x = el.barycenter(spec)[0];
        if x > start && x < 0.0 {
            match a_strip {
                None => a_strip = Some(*a),
                Some(v) if v != *a => return Err(Error::NonConstantCoefficient),
                _ => {}
            }
        }
    }
    let a = a_strip.unwrap_or(1.0);
    if wave.amplitude == ZERO {
        return Ok(Load::zero(grid.n_nodes()));
    }
    let j1 = wave.j_in[0];
    let hat = integrate_load(grid, |_, x| {
        let d1 = step.derivative(x[0]);
        let d2 = step.second_derivative(x[0]);
        if d1 == 0.0 && d2 == 0.0 {
            return ZERO;
        }
        wave.value(x) * c64::new(a * d2, 2.0 * a * j1 * d1)
    });
    let offset = (0..grid.n_nodes())
        .map(|n| {
            let x = grid.node_coords(n);
            wave.value(x) * step.value(x[0])
        })
        .collect();
    Ok(Load { hat, offset: Some(offset) })
}

// ============================================================================
// Hat-level matrices
// ============================================================================

/// Real hat-function matrices on the whole grid, sharing one pattern.
#[derive(Clone, Debug)]
pub struct HatOperators {
    /// `∫ a ϑ ∇ψ_k·∇ψ_l`
    pub stiffness: Csr<f64>,
    /// `(1/εL)(∫_{W+} - ∫_{W-}) a ψ_k ∂₁ψ_l`
    pub boundary: Csr<f64>,
    /// `∫ ϑ ψ_k ψ_l`
    pub mass: Csr<f64>,
    /// `∫_{Ω_R} ψ_k ψ_l`
    pub mass_inner: Csr<f64>,
}

pub fn assemble_hat(grid: &Grid, coefficient: &[f64]) -> Result<HatOperators> {
    if coefficient.len() != grid.elements().len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} elements",
            coefficient.len(),
            grid.elements().len()
        )));
    }
    let spec = grid.spec();
    let n = grid.n_nodes();
    let cutoff = CutoffTheta::new(spec);
    let local = TriangleKind::ALL.map(|k| element_matrices(&k.reference_coords(spec.h1(), spec.h2()), 1.0));
    let inv_width = 1.0 / (spec.eps * spec.l as f64);

    let mut pairs = Vec::with_capacity(9 * grid.elements().len());
    for el in grid.elements() {
        for s in el.nodes {
            for t in el.nodes {
                pairs.push((s, t));
            }
        }
    }
    let mut stiffness = Csr::from_pattern(n, n, pairs);
    let mut boundary = stiffness.clone();
    let mut mass = stiffness.clone();
    let mut mass_inner = stiffness.clone();

    for (el, &a) in grid.elements().iter().zip(coefficient) {
        let lm = &local[el.kind as usize];
        let coords = el.coords(spec);
        let theta = coords.map(|p| cutoff.value(p[0]));
        let mean_theta = (theta[0] + theta[1] + theta[2]) / 3.0;
        let weighted = if theta == [1.0; 3] { lm.mass } else { weighted_mass(&coords, theta) };
        let flux_sign = match el.region {
            Region::Box(Side::Plus) => inv_width,
            Region::Box(Side::Minus) => -inv_width,
            Region::Interior => 0.0,
        };
        for s in 0..3 {
            for t in 0..3 {
                let (r, c) = (el.nodes[s], el.nodes[t]);
                stiffness.add(r, c, a * mean_theta * lm.stiffness[s][t]);
                mass.add(r, c, weighted[s][t]);
                if el.region == Region::Interior {
                    mass_inner.add(r, c, lm.mass[s][t]);
                } else {
                    boundary.add(r, c, flux_sign * a * lm.flux[s][t]);
                }
            }
        }
    }
    Ok(HatOperators { stiffness, boundary, mass, mass_inner })
}

// ============================================================================
// Arrowhead matrices on V_h
// ============================================================================

/// One matrix on `V_h = hats(N₀) ⊕ Bloch(n₊) ⊕ Bloch(n₋)`.
#[derive(Clone, Debug)]
pub struct Arrowhead<T> {
    pub hat: Csr<T>,
    /// `border_rows × (n₊ + n₋)`
    pub upper: Mat<c64>,
    /// `(n₊ + n₋) × border_rows`
    pub lower: Mat<c64>,
    pub corner: Mat<c64>,
}

/// Shape of `V_h` and the interior nodes coupled to the boxes.
#[derive(Clone, Debug)]
pub struct Layout {
    pub n_interior: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    pub border_rows: Vec<usize>,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.n_interior + self.n_plus + self.n_minus
    }

    pub fn n_bloch(&self) -> usize {
        self.n_plus + self.n_minus
    }

    pub fn plus(&self) -> Range<usize> {
        self.n_interior..self.n_interior + self.n_plus
    }

    pub fn minus(&self) -> Range<usize> {
        self.n_interior + self.n_plus..self.dim()
    }
}

struct BoxBasis<'a> {
    nodes: Range<usize>,
    columns: &'a [Vec<c64>],
    shift: usize,
}

fn lift(h: &Csr<f64>, layout: &Layout, boxes: &[BoxBasis<'_>]) -> Arrowhead<f64> {
    let n0 = layout.n_interior;
    let nb = layout.n_bloch();
    let nr = layout.border_rows.len();
    let mut upper = Mat::<c64>::zeros(nr, nb);
    let mut lower = Mat::<c64>::zeros(nb, nr);
    let mut corner = Mat::<c64>::zeros(nb, nb);
    let mut slot = vec![None; n0];
    for (ri, &r) in layout.border_rows.iter().enumerate() {
        slot[r] = Some(ri);
    }
    for bx in boxes {
        let off = bx.nodes.start;
        for (ri, &r) in layout.border_rows.iter().enumerate() {
            let (cs, vs) = h.row(r);
            for (lam, col) in bx.columns.iter().enumerate() {
                let mut s = ZERO;
                for (c, v) in cs.iter().zip(vs) {
                    if bx.nodes.contains(c) {
                        s += col[c - off] * *v;
                    }
                }
                upper[(ri, bx.shift + lam)] = s;
            }
        }
        // κᴴ H[box, :] restricted to the border rows
        for b in bx.nodes.clone() {
            let (cs, vs) = h.row(b);
            for (c, v) in cs.iter().zip(vs) {
                if let Some(ri) = slot.get(*c).copied().flatten() {
                    for (lam, col) in bx.columns.iter().enumerate() {
                        lower[(bx.shift + lam, ri)] += col[b - off].conj() * *v;
                    }
                }
            }
        }
        let hb = h.block(bx.nodes.clone(), bx.nodes.clone());
        let applied: Vec<Vec<c64>> = bx.columns.iter().map(|c| hb.apply(c)).collect();
        for (lr, cr) in bx.columns.iter().enumerate() {
            for (lc, ac) in applied.iter().enumerate() {
                let s = cr.iter().zip(ac).fold(ZERO, |s, (x, y)| s + x.conj() * y);
                corner[(bx.shift + lr, bx.shift + lc)] = s;
            }
        }
    }
    Arrowhead { hat: h.block(0..n0, 0..n0), upper, lower, corner }
}

impl Arrowhead<f64> {
    fn apply(&self, layout: &Layout, x: &[c64]) -> Vec<c64> {
        apply_arrow(&self.hat.apply(&x[..layout.n_interior]), &self.upper, &self.lower, &self.corner, layout, x)
    }
}

impl Arrowhead<c64> {
    fn apply(&self, layout: &Layout, x: &[c64]) -> Vec<c64> {
        apply_arrow(&self.hat.apply(&x[..layout.n_interior]), &self.upper, &self.lower, &self.corner, layout, x)
    }
}

fn apply_arrow(
    hat_part: &[c64],
    upper: &Mat<c64>,
    lower: &Mat<c64>,
    corner: &Mat<c64>,
    layout: &Layout,
    x: &[c64],
) -> Vec<c64> {
    let n0 = layout.n_interior;
    let nb = layout.n_bloch();
    let mut y = hat_part.to_vec();
    y.resize(n0 + nb, ZERO);
    let c = &x[n0..];
    for (ri, &r) in layout.border_rows.iter().enumerate() {
        for k in 0..nb {
            y[r] += upper[(ri, k)] * c[k];
        }
    }
    for k in 0..nb {
        let mut s = ZERO;
        for (ri, &r) in layout.border_rows.iter().enumerate() {
            s += lower[(k, ri)] * x[r];
        }
        for l in 0..nb {
            s += corner[(k, l)] * c[l];
        }
        y[n0 + k] = s;
    }
    y
}

/// Assembled problem on `V_h`.
#[derive(Clone, Debug)]
pub struct EnrichedSystem {
    pub omega: f64,
    pub delta: f64,
    pub layout: Layout,
    pub stiffness: Arrowhead<f64>,
    pub boundary: Arrowhead<f64>,
    pub mass: Arrowhead<f64>,
    pub mass_inner: Arrowhead<f64>,
    /// `A - B - ω²(M + iδ M_in)`
    pub system: Arrowhead<c64>,
    pub rhs: Vec<c64>,
    pub kappa_plus: Vec<Vec<c64>>,
    pub kappa_minus: Vec<Vec<c64>>,
    pub n_nodes: usize,
    pub box_plus: Range<usize>,
    pub box_minus: Range<usize>,
    pub offset: Option<Vec<c64>>,
}

pub fn assemble(
    grid: &Grid,
    hat: &HatOperators,
    omega: f64,
    delta: f64,
    plus: &RadiationBasis,
    minus: &RadiationBasis,
    load: &Load,
) -> Result<EnrichedSystem> {
    let n = grid.n_nodes();
    if hat.stiffness.n_rows() != n || load.hat.len() != n {
        return Err(Error::Dimension(format!(
            "hat operators of size {} and load of size {} on a grid with {n} nodes",
            hat.stiffness.n_rows(),
            load.hat.len()
        )));
    }
    for (basis, side) in [(plus, Side::Plus), (minus, Side::Minus)] {
        if basis.side != side || basis.columns.iter().any(|c| c.len() != grid.n_box()) {
            return Err(Error::Dimension(format!("{} radiation basis does not match the grid", side.name())));
        }
    }
    if !(omega > 0.0) || !(delta >= 0.0) {
        return Err(Error::Config(format!("need omega > 0 and delta >= 0, got {omega}, {delta}")));
    }
    let n0 = grid.n_interior();
    let mut border_rows: Vec<usize> = grid
        .elements()
        .iter()
        .filter(|el| el.nodes.iter().any(|&k| k >= n0))
        .flat_map(|el| el.nodes.into_iter().filter(|&k| k < n0))
        .collect();
    border_rows.sort_unstable();
    border_rows.dedup();
    let layout = Layout { n_interior: n0, n_plus: plus.len(), n_minus: minus.len(), border_rows };
    let boxes = [
        BoxBasis { nodes: grid.box_nodes(Side::Plus), columns: &plus.columns, shift: 0 },
        BoxBasis { nodes: grid.box_nodes(Side::Minus), columns: &minus.columns, shift: plus.len() },
    ];
    let stiffness = lift(&hat.stiffness, &layout, &boxes);
    let boundary = lift(&hat.boundary, &layout, &boxes);
    let mass = lift(&hat.mass, &layout, &boxes);
    let mass_inner = lift(&hat.mass_inner, &layout, &boxes);

    let w2 = omega * omega;
    let combine = |a: c64, b: c64, m: c64, mi: c64| a - b - m * w2 - mi * c64::new(0.0, delta * w2);
    let sys_hat = stiffness.hat.zip_map(&[&boundary.hat, &mass.hat, &mass_inner.hat], |v| {
        c64::new(v[0] - v[1] - w2 * v[2], -delta * w2 * v[3])
    });
    let dense = |f: fn(&Arrowhead<f64>) -> &Mat<c64>| {
        let (a, b, m, mi) = (f(&stiffness), f(&boundary), f(&mass), f(&mass_inner));
        Mat::<c64>::from_fn(a.nrows(), a.ncols(), |r, c| combine(a[(r, c)], b[(r, c)], m[(r, c)], mi[(r, c)]))
    };
    let system = Arrowhead {
        hat: sys_hat,
        upper: dense(|a| &a.upper),
        lower: dense(|a| &a.lower),
        corner: dense(|a| &a.corner),
    };

    let mut rhs = load.hat[..n0].to_vec();
    for bx in &boxes {
        for col in bx.columns {
            let s = bx.nodes.clone().fold(ZERO, |s, k| s + col[k - bx.nodes.start].conj() * load.hat[k]);
            rhs.push(s);
        }
    }
    log::debug!("enriched system: {} hat + {} + {} Bloch unknowns", n0, plus.len(), minus.len());
    Ok(EnrichedSystem {
        omega,
        delta,
        layout,
        stiffness,
        boundary,
        mass,
        mass_inner,
        system,
        rhs,
        kappa_plus: plus.columns.clone(),
        kappa_minus: minus.columns.clone(),
        n_nodes: n,
        box_plus: grid.box_nodes(Side::Plus),
        box_minus: grid.box_nodes(Side::Minus),
        offset: load.offset.clone(),
    })
}

/// Which assembled matrix to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    Stiffness,
    Boundary,
    Mass,
    MassInner,
    System,
}

impl EnrichedSystem {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn apply(&self, op: Operator, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.dim());
        match op {
            Operator::Stiffness => self.stiffness.apply(&self.layout, x),
            Operator::Boundary => self.boundary.apply(&self.layout, x),
            Operator::Mass => self.mass.apply(&self.layout, x),
            Operator::MassInner => self.mass_inner.apply(&self.layout, x),
            Operator::System => self.system.apply(&self.layout, x),
        }
    }

    /// `xᴴ Op y`
    pub fn form(&self, op: Operator, x: &[c64], y: &[c64]) -> c64 {
        let ay = self.apply(op, y);
        x.iter().zip(&ay).fold(ZERO, |s, (a, b)| s + a.conj() * b)
    }

    /// Nodal values on the whole grid of a `V_h` coordinate vector (without
    /// the incoming add-back).
    pub fn nodal(&self, coords: &[c64]) -> Vec<c64> {
        let n0 = self.layout.n_interior;
        let mut out = vec![ZERO; self.n_nodes];
        out[..n0].copy_from_slice(&coords[..n0]);
        for (range, cols, alpha) in [
            (&self.box_plus, &self.kappa_plus, &coords[self.layout.plus()]),
            (&self.box_minus, &self.kappa_minus, &coords[self.layout.minus()]),
        ] {
            for (col, a) in cols.iter().zip(alpha) {
                for (k, v) in range.clone().zip(col) {
                    out[k] += *a * v;
                }
            }
        }
        out
    }
}

/// `β(u, v) = uᴴ Sᴴ v`, conjugate-linear in `u`; `Im β(u, u)` carries the
/// damping and the outgoing flux.
pub fn beta_form(system: &EnrichedSystem, u: &[c64], v: &[c64]) -> c64 {
    system.form(Operator::System, v, u).conj()
}
