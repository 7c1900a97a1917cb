//! Bloch waves as hat-function combinations on the radiation boxes.
//!
//! Box vectors are indexed by box-local node numbers (see [`Grid::box_nodes`]),
//! with the lower-left corner of the box at the origin.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};

use crate::cell::{BlochMode, CellGrid};
use crate::error::{Error, Result};
use crate::grid::{element_matrices, Grid, Region, Side, TriangleKind};
use crate::select::{IndexEntry, IndexSet};
use crate::sparse::Csr;

/// Relative norm below which a projected column counts as dependent.
pub const DROP_TOL: f64 = 1e-8;

/// Mass and flux matrices of one closed radiation box.
#[derive(Clone, Debug)]
pub struct BoxOperator {
    pub side: Side,
    /// `∫_W φ_i φ_j`
    pub mass: Csr<f64>,
    /// `∫_W a φ_i ∂₁φ_j`
    pub flux: Csr<f64>,
    /// `|W| = ε²LK`
    pub volume: f64,
    /// Number of periodicity cells `L·K` in the box.
    pub cells: usize,
}

impl BoxOperator {
    pub fn new(grid: &Grid, coefficient: &[f64], side: Side) -> Result<Self> {
        if coefficient.len() != grid.elements().len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} elements",
                coefficient.len(),
                grid.elements().len()
            )));
        }
        let spec = grid.spec();
        let offset = grid.box_offset(side);
        let n = grid.n_box();
        let local = TriangleKind::ALL.map(|k| element_matrices(&k.reference_coords(spec.h1(), spec.h2()), 1.0));
        let in_box: Vec<usize> =
            (0..grid.elements().len()).filter(|&e| grid.elements()[e].region == Region::Box(side)).collect();

        let mut pairs = Vec::with_capacity(9 * in_box.len());
        for &e in &in_box {
            let nodes = grid.elements()[e].nodes;
            for s in nodes {
                for t in nodes {
                    pairs.push((s - offset, t - offset));
                }
            }
        }
        let mut mass = Csr::from_pattern(n, n, pairs);
        let mut flux = mass.clone();
        for &e in &in_box {
            let el = &grid.elements()[e];
            let lm = &local[el.kind as usize];
            let a = coefficient[e];
            for s in 0..3 {
                for t in 0..3 {
                    let (r, c) = (el.nodes[s] - offset, el.nodes[t] - offset);
                    mass.add(r, c, lm.mass[s][t]);
                    flux.add(r, c, a * lm.flux[s][t]);
                }
            }
        }
        let volume = spec.eps * spec.eps * (spec.l * spec.k) as f64;
        Ok(BoxOperator { side, mass, flux, volume, cells: spec.l * spec.k })
    }

    /// `∫_W ū v`
    pub fn inner(&self, u: &[c64], v: &[c64]) -> c64 {
        self.mass.form(u, v)
    }

    pub fn norm_sq(&self, u: &[c64]) -> f64 {
        self.inner(u, u).re
    }

    /// `∫_W a ū ∂₁v`
    pub fn flux_form(&self, u: &[c64], v: &[c64]) -> c64 {
        self.flux.form(u, v)
    }
}

/// Nodal values of `U = Ψ e^{2πi j·x/ε}` on the closed box of `side`, in
/// box-local coordinates.
pub fn extend_to_box(mode: &BlochMode, cell: &CellGrid, grid: &Grid) -> Result<Vec<c64>> {
    let spec = grid.spec();
    if cell.m1 != spec.n1 || cell.m2 != spec.n2 || cell.eps != spec.eps {
        return Err(Error::Dimension(format!(
            "cell grid {}x{} (eps {}) does not match the global grid {}x{} (eps {})",
            cell.m1, cell.m2, cell.eps, spec.n1, spec.n2, spec.eps
        )));
    }
    if mode.psi.len() != cell.n_nodes() {
        return Err(Error::Dimension(format!("mode has {} values, cell has {}", mode.psi.len(), cell.n_nodes())));
    }
    let (n1, n2) = (spec.n1 as f64, spec.n2 as f64);
    Ok((0..grid.n_box())
        .map(|local| {
            let [li, lq] = grid.box_local_lattice(local);
            let t = 2.0 * PI * (mode.j[0] * li as f64 / n1 + mode.j[1] * lq as f64 / n2);
            mode.psi[cell.node(li, lq)] * c64::new(t.cos(), t.sin())
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct RadiationBasis {
    pub side: Side,
    pub entries: Vec<IndexEntry>,
    /// Extended modes, one per entry, before any orthonormalization.
    pub pre_gram: Vec<Vec<c64>>,
    /// Current basis columns `κ`.
    pub columns: Vec<Vec<c64>>,
    /// Entry index of every pre-Gram column that survived.
    pub kept: Vec<usize>,
    /// Upper-triangular `R` with `pre_gram[kept] = columns · R`, stored by column.
    pub gram: Option<Vec<Vec<c64>>>,
}

impl RadiationBasis {
    pub fn new(set: &IndexSet, cell: &CellGrid, grid: &Grid) -> Result<Self> {
        let mut pre_gram = Vec::with_capacity(set.len());
        for e in &set.entries {
            let mode = e.mode.as_ref().ok_or_else(|| Error::Dimension("index entry without mode".into()))?;
            pre_gram.push(extend_to_box(mode, cell, grid)?);
        }
        Ok(RadiationBasis {
            side: set.side,
            entries: set.entries.clone(),
            columns: pre_gram.clone(),
            kept: (0..pre_gram.len()).collect(),
            pre_gram,
            gram: None,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.gram.is_some()
    }

    /// Modified Gram-Schmidt in `L²(W)` with one reorthogonalization pass.
    pub fn orthonormalize(mut self, op: &BoxOperator) -> Result<Self> {
        if self.pre_gram.is_empty() {
            return Ok(RadiationBasis { gram: Some(Vec::new()), ..self });
        }
        let mut q: Vec<Vec<c64>> = Vec::new();
        let mut r: Vec<Vec<c64>> = Vec::new();
        let mut kept = Vec::new();
        for (c, col) in self.pre_gram.iter().enumerate() {
            let original = op.norm_sq(col).sqrt();
            let mut v = col.clone();
            let mut coeff = vec![c64::new(0.0, 0.0); q.len() + 1];
            for _pass in 0..2 {
                for (k, qk) in q.iter().enumerate() {
                    let h = op.inner(qk, &v);
                    for (vi, qi) in v.iter_mut().zip(qk) {
                        *vi -= h * qi;
                    }
                    coeff[k] += h;
                }
            }
            let nv = op.norm_sq(&v).sqrt();
            if !(nv > DROP_TOL * original) {
                log::warn!(
                    "{} side: Bloch column {c} (j = {:?}, m = {}) is dependent, dropped",
                    self.side.name(),
                    self.entries[c].j,
                    self.entries[c].m
                );
                continue;
            }
            for x in v.iter_mut() {
                *x /= nv;
            }
            coeff[q.len()] = c64::new(nv, 0.0);
            q.push(v);
            r.push(coeff);
            kept.push(c);
        }
        if q.is_empty() {
            return Err(Error::DegenerateBasis(self.side.name()));
        }
        self.columns = q;
        self.kept = kept;
        self.gram = Some(r);
        Ok(self)
    }

    /// Coefficients with respect to the pre-Gram columns (one per entry;
    /// dropped entries get zero) from coefficients of the current columns.
    pub fn pre_gram_coefficients(&self, alpha: &[c64]) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.entries.len()];
        match &self.gram {
            None => {
                for (k, &e) in self.kept.iter().enumerate() {
                    out[e] = alpha[k];
                }
            }
            Some(r) => {
                // back substitution with the upper-triangular R
                let n = r.len();
                let mut beta = alpha.to_vec();
                for c in (0..n).rev() {
                    beta[c] /= r[c][c];
                    let bc = beta[c];
                    for (k, b) in beta.iter_mut().enumerate().take(c) {
                        *b -= r[c][k] * bc;
                    }
                }
                for (k, &e) in self.kept.iter().enumerate() {
                    out[e] = beta[k];
                }
            }
        }
        out
    }

    /// `κ α` on the box.
    pub fn combine(&self, alpha: &[c64]) -> Vec<c64> {
        let n = self.columns.first().map_or(0, Vec::len);
        let mut out = vec![c64::new(0.0, 0.0); n];
        for (col, a) in self.columns.iter().zip(alpha) {
            for (o, v) in out.iter_mut().zip(col) {
                *o += *a * v;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Expansion {
    pub alpha: Vec<c64>,
    /// `‖field - κα‖_{L²(W)}`
    pub residual: f64,
}

/// Least-squares projection of a box field onto the span of the basis.
pub fn expand(field: &[c64], basis: &RadiationBasis, op: &BoxOperator) -> Result<Expansion> {
    let n = basis.len();
    let b: Vec<c64> = basis.columns.iter().map(|c| op.inner(c, field)).collect();
    let alpha = if basis.is_orthonormal() || n == 0 {
        b
    } else {
        let g = Mat::<c64>::from_fn(n, n, |r, c| op.inner(&basis.columns[r], &basis.columns[c]));
        let rhs = Mat::<c64>::from_fn(n, 1, |r, _| b[r]);
        let x = g.partial_piv_lu().solve(&rhs);
        (0..n).map(|r| x[(r, 0)]).collect()
    };
    let approx = basis.combine(&alpha);
    let diff: Vec<c64> = field.iter().zip(&approx).map(|(f, a)| f - a).collect();
    let residual = if n == 0 { op.norm_sq(field).sqrt() } else { op.norm_sq(&diff).max(0.0).sqrt() };
    Ok(Expansion { alpha, residual })
}

/// `(‖field‖²_{L²(W)}, ε²LK Σ|α|²)` with `α` the coefficients of the field
/// against each cell-normalized column.
pub fn plancherel_check(field: &[c64], columns: &[Vec<c64>], op: &BoxOperator) -> (f64, f64) {
    let lhs = op.norm_sq(field);
    let rhs = columns
        .iter()
        .map(|c| {
            let a = op.inner(c, field) / op.volume;
            a.norm_sqr()
        })
        .sum::<f64>()
        * op.volume;
    (lhs, rhs)
}

/// Gram matrix `(∫ ū_r u_c)` of a set of box vectors.
pub fn gram_matrix(columns: &[Vec<c64>], op: &BoxOperator) -> Mat<c64> {
    let n = columns.len();
    Mat::from_fn(n, n, |r, c| op.inner(&columns[r], &columns[c]))
}
