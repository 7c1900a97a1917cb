//! Direct solve of the enriched system: sparse LU of the interior block and a
//! dense Schur complement for the Bloch coefficients.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::assembly::{EnrichedSystem, Operator};
use crate::error::{Error, Result};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// Relative residual accepted after the direct solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub dim: usize,
    pub n_interior: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    pub nnz: usize,
    pub relative_residual: f64,
    /// 2-norm condition number of the Schur complement.
    pub schur_condition: f64,
    /// Wall-clock time; left out of the written report.
    #[serde(skip)]
    pub seconds: f64,
}

/// Discrete solution on `V_h` and its nodal values on the whole grid.
#[derive(Clone, Debug)]
pub struct SolutionField {
    /// Coordinates on `V_h`: hat values, then `α₊`, then `α₋`.
    pub coords: Vec<c64>,
    pub alpha_plus: Vec<c64>,
    pub alpha_minus: Vec<c64>,
    /// Nodal values including the incoming add-back, if any.
    pub nodal: Vec<c64>,
    pub stats: SolverStats,
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn check_finite(v: &[c64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Solve(format!("non-finite values in {what}")))
    }
}

/// Solve `S u = F` for the assembled system.
pub fn solve(system: &EnrichedSystem) -> Result<SolutionField> {
    let start = Instant::now();
    let layout = &system.layout;
    let n0 = layout.n_interior;
    let nb = layout.n_bloch();
    let rhs = &system.rhs;
    check_finite(rhs, "the right-hand side")?;

    let mut stats = SolverStats {
        dim: layout.dim(),
        n_interior: n0,
        n_plus: layout.n_plus,
        n_minus: layout.n_minus,
        nnz: system.system.hat.nnz(),
        ..Default::default()
    };

    let coords = if norm(rhs) == 0.0 {
        vec![ZERO; layout.dim()]
    } else {
        let sys = &system.system;
        let triplets: Vec<_> = sys.hat.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let s00 = SparseColMat::<usize, c64>::try_new_from_triplets(n0, n0, &triplets)
            .map_err(|e| Error::Solve(format!("interior matrix: {e:?}")))?;
        let lu = s00.sp_lu().map_err(|e| Error::Solve(format!("sparse LU: {e:?}")))?;

        // right-hand sides: the load and the upper border columns
        let mut rhs0 = Mat::<c64>::zeros(n0, nb + 1);
        for r in 0..n0 {
            rhs0[(r, 0)] = rhs[r];
        }
        for (ri, &r) in layout.border_rows.iter().enumerate() {
            for k in 0..nb {
                rhs0[(r, k + 1)] = sys.upper[(ri, k)];
            }
        }
        lu.solve_in_place(rhs0.as_mut());

        let mut u0: Vec<c64> = (0..n0).map(|r| rhs0[(r, 0)]).collect();
        let mut c = Vec::new();
        if nb > 0 {
            let mut schur = sys.corner.clone();
            let mut g = Mat::<c64>::zeros(nb, 1);
            for k in 0..nb {
                let mut s = rhs[n0 + k];
                for (ri, &r) in layout.border_rows.iter().enumerate() {
                    let lk = sys.lower[(k, ri)];
                    s -= lk * rhs0[(r, 0)];
                    for l in 0..nb {
                        schur[(k, l)] -= lk * rhs0[(r, l + 1)];
                    }
                }
                g[(k, 0)] = s;
            }
            stats.schur_condition = condition(&schur);
            let sol = schur.partial_piv_lu().solve(&g);
            c = (0..nb).map(|k| sol[(k, 0)]).collect();
            for (r, v) in u0.iter_mut().enumerate() {
                for k in 0..nb {
                    *v -= rhs0[(r, k + 1)] * c[k];
                }
            }
        }
        u0.extend(c);
        u0
    };
    check_finite(&coords, "the solution")?;

    let residual: Vec<c64> = system.apply(Operator::System, &coords).iter().zip(rhs).map(|(a, b)| a - b).collect();
    let scale = norm(rhs);
    stats.relative_residual = if scale == 0.0 { norm(&residual) } else { norm(&residual) / scale };
    if stats.relative_residual > RESIDUAL_TOL {
        return Err(Error::Residual(stats.relative_residual));
    }

    let mut nodal = system.nodal(&coords);
    if let Some(off) = &system.offset {
        for (u, o) in nodal.iter_mut().zip(off) {
            *u += o;
        }
    }
    stats.seconds = start.elapsed().as_secs_f64();
    log::info!(
        "solved {} unknowns ({} Bloch), residual {:.2e}, Schur condition {:.2e}",
        stats.dim,
        nb,
        stats.relative_residual,
        stats.schur_condition
    );
    Ok(SolutionField {
        alpha_plus: coords[layout.plus()].to_vec(),
        alpha_minus: coords[layout.minus()].to_vec(),
        coords,
        nodal,
        stats,
    })
}

fn condition(m: &Mat<c64>) -> f64 {
    match m.singular_values() {
        Ok(s) if !s.is_empty() => {
            let hi = s.iter().cloned().fold(0.0, f64::max);
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            if lo > 0.0 {
                hi / lo
            } else {
                f64::INFINITY
            }
        }
        _ => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, assemble_hat, beta_form, gaussian_load, Load};
    use crate::cell::{CellGrid, CellProblem};
    use crate::enrichment::{BoxOperator, RadiationBasis};
    use crate::grid::{build_grid, GridSpec, Side};
    use crate::medium::{sample_coefficient, Material, Medium};
    use crate::select::{select_indices, SelectionParams};

    fn homogeneous_system(delta: f64) -> (EnrichedSystem, crate::grid::Grid) {
        let spec = GridSpec::new(1.0, 3, 1, 3, 4, 4).unwrap();
        let grid = build_grid(spec).unwrap();
        let medium = Medium::uniform(Material::constant(1.0));
        let coeff = sample_coefficient(&medium, &grid);
        let hat = assemble_hat(&grid, &coeff).unwrap();
        let omega = 2.5;
        let cell = CellProblem::new(CellGrid::new(1.0, 4, 4).unwrap(), &Material::constant(1.0)).unwrap();
        let j2: Vec<f64> = (0..3).map(|k| 2.0 * std::f64::consts::PI * k as f64 / 3.0).collect();
        let params = SelectionParams { j1_mesh: 41, ..Default::default() };
        let mut bases = Vec::new();
        for side in [Side::Plus, Side::Minus] {
            let set = select_indices(&cell, omega, side, &j2, &params).unwrap();
            let op = BoxOperator::new(&grid, &coeff, side).unwrap();
            let basis = RadiationBasis::new(&set, cell.grid(), &grid).unwrap().orthonormalize(&op).unwrap();
            bases.push(basis);
        }
        let load = gaussian_load(&grid, 1.0, 4.0, [0.0, 1.5]);
        let sys = assemble(&grid, &hat, omega, delta, &bases[0], &bases[1], &load).unwrap();
        (sys, grid)
    }

    #[test]
    fn solves_with_small_residual() {
        let (sys, _) = homogeneous_system(1e-3);
        assert!(sys.layout.n_bloch() > 0);
        let sol = solve(&sys).unwrap();
        assert!(sol.stats.relative_residual < 1e-10);
        assert!(sol.stats.schur_condition.is_finite());
    }

    #[test]
    fn energy_identity() {
        let (sys, _) = homogeneous_system(1e-2);
        let sol = solve(&sys).unwrap();
        let u = &sol.coords;
        let lhs = sys.rhs.iter().zip(u).fold(ZERO, |s, (f, x)| s + f.conj() * x).im;
        let rhs = beta_form(&sys, u, u).im;
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn zero_load_gives_zero() {
        let (mut sys, grid) = homogeneous_system(1e-3);
        sys.rhs = vec![ZERO; sys.dim()];
        let sol = solve(&sys).unwrap();
        assert!(sol.coords.iter().all(|v| *v == ZERO));
        assert_eq!(sol.nodal.len(), grid.n_nodes());
        let _ = Load::zero(1);
    }
}
