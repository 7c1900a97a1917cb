//! Bloch eigenproblem on one periodicity cell.
//!
//! The unknowns are the nodal values of the periodic factor `Ψ` on an
//! `m1 × m2` doubly periodic cell grid. The Bloch wave `U = Ψ e^{2πi j·x/ε}`
//! is realized as the piecewise-linear interpolant of its nodal values, so on
//! each element the hat coefficients are `Ψ_n` times the phase of the
//! (unwrapped) vertex. All cell matrices are then the P1 matrices of `U`
//! pulled back to `Ψ`; they are Hermitian by construction and the same exact
//! quadrature is used everywhere the Bloch waves reappear on the big grid.

use std::f64::consts::PI;

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{c64, Mat, Par, Side as Triangle};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{element_matrices, LocalMatrices, Side, TriangleKind};
use crate::medium::{cell_barycenter, Material};

/// Finite-difference step for group velocities.
pub const GROUP_VELOCITY_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellGrid {
    pub eps: f64,
    pub m1: usize,
    pub m2: usize,
}

impl CellGrid {
    pub fn new(eps: f64, m1: usize, m2: usize) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) || m1 == 0 || m2 == 0 {
            return Err(Error::InvalidGrid(format!("cell grid eps={eps}, m1={m1}, m2={m2}")));
        }
        Ok(CellGrid { eps, m1, m2 })
    }

    pub fn n_nodes(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn n_elements(&self) -> usize {
        2 * self.m1 * self.m2
    }

    /// Node index of lattice point `(p, q)`, wrapped in both directions.
    pub fn node(&self, p: i64, q: i64) -> usize {
        let p = p.rem_euclid(self.m1 as i64) as usize;
        let q = q.rem_euclid(self.m2 as i64) as usize;
        p * self.m2 + q
    }

    pub fn h1(&self) -> f64 {
        self.eps / self.m1 as f64
    }

    pub fn h2(&self) -> f64 {
        self.eps / self.m2 as f64
    }

    /// Elements in the fixed order `(p, q, kind)`.
    pub fn elements(&self) -> impl Iterator<Item = (usize, usize, TriangleKind)> + '_ {
        (0..self.m1)
            .flat_map(move |p| (0..self.m2).flat_map(move |q| TriangleKind::ALL.into_iter().map(move |k| (p, q, k))))
    }

    pub fn sample(&self, material: &Material) -> Vec<f64> {
        self.elements().map(|(p, q, kind)| material.value_at(cell_barycenter(p, q, kind, self.m1, self.m2))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochMode {
    pub side: Side,
    /// Wave vector in the Brillouin zone `(-½, ½]²`.
    pub j: [f64; 2],
    pub m: usize,
    pub mu: f64,
    #[serde(skip)]
    pub psi: Vec<c64>,
}

/// `K_j`, `M_j` and the flux matrix `F_j` (all `m1·m2` square).
pub struct ShiftedMatrices {
    pub stiffness: Mat<c64>,
    pub mass: Mat<c64>,
    pub flux: Mat<c64>,
}

#[derive(Clone, Debug)]
pub struct CellProblem {
    grid: CellGrid,
    coeff: Vec<f64>,
    local: [LocalMatrices; 2],
}

fn kind_index(kind: TriangleKind) -> usize {
    match kind {
        TriangleKind::Lower => 0,
        TriangleKind::Upper => 1,
    }
}

impl CellProblem {
    pub fn new(grid: CellGrid, material: &Material) -> Result<Self> {
        material.validate()?;
        let coeff = grid.sample(material);
        Self::from_coefficients(grid, coeff)
    }

    pub fn from_coefficients(grid: CellGrid, coeff: Vec<f64>) -> Result<Self> {
        if coeff.len() != grid.n_elements() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} cell elements",
                coeff.len(),
                grid.n_elements()
            )));
        }
        if coeff.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::Config("cell coefficient must be positive".into()));
        }
        let (h1, h2) = (grid.h1(), grid.h2());
        let local = TriangleKind::ALL.map(|k| element_matrices(&k.reference_coords(h1, h2), 1.0));
        Ok(CellProblem { grid, coeff, local })
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeff
    }

    pub fn n_unknowns(&self) -> usize {
        self.grid.n_nodes()
    }

    /// Vertex phases `e^{2πi j·offset/ε}` for one triangle kind.
    fn phases(&self, kind: TriangleKind, j: [f64; 2]) -> [c64; 3] {
        let (m1, m2) = (self.grid.m1 as f64, self.grid.m2 as f64);
        kind.offsets().map(|[a, b]| {
            let t = 2.0 * PI * (j[0] * a as f64 / m1 + j[1] * b as f64 / m2);
            c64::new(t.cos(), t.sin())
        })
    }

    pub fn assemble_shifted(&self, j: [f64; 2]) -> ShiftedMatrices {
        let n = self.n_unknowns();
        let mut stiffness = Mat::<c64>::zeros(n, n);
        let mut mass = Mat::<c64>::zeros(n, n);
        let mut flux = Mat::<c64>::zeros(n, n);
        let ph = [self.phases(TriangleKind::Lower, j), self.phases(TriangleKind::Upper, j)];

        for ((p, q, kind), a) in self.grid.elements().zip(&self.coeff) {
            let ki = kind_index(kind);
            let lm = &self.local[ki];
            let ph = &ph[ki];
            let nodes = kind.offsets().map(|[da, db]| self.grid.node(p as i64 + da, q as i64 + db));
            for s in 0..3 {
                for t in s..3 {
                    let w = ph[s].conj() * ph[t];
                    let (ns, nt) = (nodes[s], nodes[t]);
                    stiffness[(ns, nt)] += w * (a * lm.stiffness[s][t]);
                    mass[(ns, nt)] += w * lm.mass[s][t];
                    flux[(ns, nt)] += w * (a * lm.flux[s][t]);
                    if s != t {
                        let wc = w.conj();
                        stiffness[(nt, ns)] += wc * (a * lm.stiffness[t][s]);
                        mass[(nt, ns)] += wc * lm.mass[t][s];
                        flux[(nt, ns)] += wc * (a * lm.flux[t][s]);
                    }
                }
            }
        }
        ShiftedMatrices { stiffness, mass, flux }
    }

    /// Reduce `K x = μ M x` to standard form `C y = μ y` with `M = L Lᴴ`.
    fn reduce(&self, mats: &ShiftedMatrices) -> Result<(Mat<c64>, Mat<c64>)> {
        let llt = mats.mass.llt(Triangle::Lower).map_err(|_| Error::MassNotPositive)?;
        let l = llt.L().to_owned();
        let mut x = mats.stiffness.clone();
        solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), Par::Seq);
        let mut c = x.adjoint().to_owned();
        solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), Par::Seq);
        let n = c.nrows();
        for i in 0..n {
            c[(i, i)] = c64::new(c[(i, i)].re, 0.0);
            for k in 0..i {
                let v = (c[(i, k)] + c[(k, i)].conj()) * 0.5;
                c[(i, k)] = v;
                c[(k, i)] = v.conj();
            }
        }
        Ok((l, c))
    }

    fn check_bands(&self, n_bands: usize) -> Result<()> {
        if n_bands > self.n_unknowns() {
            return Err(Error::TooManyBands { requested: n_bands, available: self.n_unknowns() });
        }
        Ok(())
    }

    /// Lowest `n_bands` eigenvalues at `j`, ascending.
    pub fn eigenvalues(&self, j: [f64; 2], n_bands: usize) -> Result<Vec<f64>> {
        self.check_bands(n_bands)?;
        let mats = self.assemble_shifted(j);
        let (_, c) = self.reduce(&mats)?;
        let mut vals = c
            .self_adjoint_eigenvalues(Triangle::Lower)
            .map_err(|e| Error::Solve(format!("cell eigensolver failed at j = {j:?} (n = {}): {e:?}", c.nrows())))?;
        vals.truncate(n_bands);
        Ok(vals)
    }

    /// Lowest `n_bands` Bloch modes at `j`, normalized to unit cell mean of `|U|²`.
    pub fn solve(&self, j: [f64; 2], n_bands: usize, side: Side) -> Result<Vec<BlochMode>> {
        self.check_bands(n_bands)?;
        let mats = self.assemble_shifted(j);
        let (l, c) = self.reduce(&mats)?;
        let evd = c
            .self_adjoint_eigen(Triangle::Lower)
            .map_err(|e| Error::Solve(format!("cell eigensolver failed at j = {j:?} (n = {}): {e:?}", c.nrows())))?;
        let mut vecs = evd.U().get(.., ..n_bands).to_owned();
        solve_upper_triangular_in_place(l.adjoint(), vecs.as_mut(), Par::Seq);

        let s = evd.S();
        let mut modes = Vec::with_capacity(n_bands);
        for m in 0..n_bands {
            let mut psi: Vec<c64> = (0..vecs.nrows()).map(|r| vecs[(r, m)]).collect();
            fix_phase(&mut psi);
            let norm = self.mean_square(&mats, &psi).sqrt();
            for v in psi.iter_mut() {
                *v /= norm;
            }
            let mu = self.rayleigh_quotient(&mats, j, &psi).unwrap_or(s[m].re);
            modes.push(BlochMode { side, j, m, mu, psi });
        }
        Ok(modes)
    }

    /// `ψᴴKψ / ψᴴMψ` with the stiffness summed edge by edge as
    /// `-K_st |u_s - u_t|²`, which avoids the cancellation of the plain
    /// quadratic form near the kernel of `K`.
    pub fn rayleigh_quotient(&self, mats: &ShiftedMatrices, j: [f64; 2], psi: &[c64]) -> Option<f64> {
        let ph = [self.phases(TriangleKind::Lower, j), self.phases(TriangleKind::Upper, j)];
        let mut energy = 0.0;
        for ((p, q, kind), a) in self.grid.elements().zip(&self.coeff) {
            let ki = kind_index(kind);
            let lm = &self.local[ki];
            let u = kind
                .offsets()
                .map(|[da, db]| self.grid.node(p as i64 + da, q as i64 + db))
                .iter()
                .zip(&ph[ki])
                .map(|(&n, w)| psi[n] * w)
                .collect::<Vec<_>>();
            for s in 0..3 {
                for t in s + 1..3 {
                    energy -= a * lm.stiffness[s][t] * (u[s] - u[t]).norm_sqr();
                }
            }
        }
        let mass = quad_form(&mats.mass, psi).re;
        (mass > 0.0 && energy.is_finite()).then(|| energy / mass)
    }

    /// Cell mean of `|U|²` for the periodic factor `psi`.
    pub fn mean_square(&self, mats: &ShiftedMatrices, psi: &[c64]) -> f64 {
        quad_form(&mats.mass, psi).re / (self.grid.eps * self.grid.eps)
    }

    /// Poynting number `Im mean(Ū a ∂₁U)` for a mode's periodic factor.
    pub fn poynting_with(&self, mats: &ShiftedMatrices, psi: &[c64]) -> f64 {
        quad_form(&mats.flux, psi).im / (self.grid.eps * self.grid.eps)
    }

    pub fn poynting(&self, mode: &BlochMode) -> f64 {
        self.poynting_with(&self.assemble_shifted(mode.j), &mode.psi)
    }

    /// Group velocity `(ε/2π) ∇_j √μ_m(j)` by central differences with
    /// eigenvalue-proximity band matching.
    pub fn group_velocity(&self, j: [f64; 2], m: usize) -> Result<[f64; 2]> {
        let n = (m + 3).min(self.n_unknowns());
        let here = self.eigenvalues(j, n)?;
        let mu = here[m];
        let scale = mu.abs().max(1.0);
        let isolated = (m == 0 || mu - here[m - 1] > 1e-8 * scale) && (m + 1 >= n || here[m + 1] - mu > 1e-8 * scale);
        if mu <= 0.0 || !isolated {
            return Err(Error::DegenerateBand { band: m, j1: j[0], j2: j[1] });
        }
        let dj = GROUP_VELOCITY_STEP;
        let mut vg = [0.0; 2];
        for (d, slot) in vg.iter_mut().enumerate() {
            let mut root = [0.0; 2];
            for (s, sign) in [1.0, -1.0].into_iter().enumerate() {
                let mut jj = j;
                jj[d] += sign * dj;
                let vals = self.eigenvalues(jj, n)?;
                let best = vals
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - mu).abs().total_cmp(&(b.1 - mu).abs()))
                    .map(|(k, _)| k)
                    .unwrap_or(m);
                if best != m {
                    return Err(Error::DegenerateBand { band: m, j1: j[0], j2: j[1] });
                }
                root[s] = vals[best].max(0.0).sqrt();
            }
            *slot = self.grid.eps / (2.0 * PI) * (root[0] - root[1]) / (2.0 * dj);
        }
        Ok(vg)
    }

    /// Index `n` of the plane-wave harmonic `e^{2πi n·x/ε}` carrying most of `Ψ`.
    pub fn dominant_harmonic(&self, psi: &[c64]) -> [i64; 2] {
        let (m1, m2) = (self.grid.m1 as i64, self.grid.m2 as i64);
        let reach = 3i64;
        let mut best = ([0, 0], -1.0);
        for n1 in -reach..=reach {
            for n2 in -reach..=reach {
                let mut s = c64::new(0.0, 0.0);
                for p in 0..m1 {
                    for q in 0..m2 {
                        let t = -2.0 * PI * (n1 as f64 * p as f64 / m1 as f64 + n2 as f64 * q as f64 / m2 as f64);
                        s += psi[self.grid.node(p, q)] * c64::new(t.cos(), t.sin());
                    }
                }
                if s.norm() > best.1 + 1e-12 {
                    best = ([n1, n2], s.norm());
                }
            }
        }
        best.0
    }

    /// Physical wave vector `2π(j + n*)/ε` using the dominant harmonic.
    pub fn unfolded_wavevector(&self, mode: &BlochMode) -> [f64; 2] {
        let n = self.dominant_harmonic(&mode.psi);
        let s = 2.0 * PI / self.grid.eps;
        [s * (mode.j[0] + n[0] as f64), s * (mode.j[1] + n[1] as f64)]
    }
}

/// Rotate so the largest-modulus entry is real positive.
fn fix_phase(psi: &mut [c64]) {
    let mut k = 0;
    for (i, v) in psi.iter().enumerate() {
        if v.norm() > psi[k].norm() {
            k = i;
        }
    }
    let p = psi[k];
    if p.norm() > 0.0 {
        let rot = p.conj() / p.norm();
        for v in psi.iter_mut() {
            *v *= rot;
        }
    }
}

/// `xᴴ A x` for a dense matrix.
pub fn quad_form(a: &Mat<c64>, x: &[c64]) -> c64 {
    let mut s = c64::new(0.0, 0.0);
    for c in 0..a.ncols() {
        let mut col = c64::new(0.0, 0.0);
        for r in 0..a.nrows() {
            col += x[r].conj() * a[(r, c)];
        }
        s += col * x[c];
    }
    s
}
