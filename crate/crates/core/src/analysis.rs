//! Homogenized coefficient, plane-wave reference values at a flat interface
//! and the quantities read off a discrete scattering solution.

use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::cell::CellProblem;
use crate::enrichment::{BoxOperator, RadiationBasis};
use crate::error::{Error, Result};
use crate::grid::Side;

/// Ties in `|α|` closer than this are broken by `|j1|`, then by band index.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HomogenizedCoefficient {
    pub a_star: f64,
    /// Same difference quotient at `dj/2`.
    pub a_star_half: f64,
    pub dj: f64,
}

fn curvature(problem: &CellProblem, dj: f64) -> Result<f64> {
    let mu = |j1: f64| -> Result<f64> { Ok(problem.eigenvalues([j1, 0.0], 1)?[0]) };
    let d2 = (mu(dj)? - 2.0 * mu(0.0)? + mu(-dj)?) / (dj * dj);
    let eps = problem.grid().eps;
    Ok(0.5 * (eps / (2.0 * PI)).powi(2) * d2)
}

/// `a* = ½ (ε/2π)² ∂²_{j1} μ₀(0)` by a central difference, checked against `dj/2`.
pub fn homogenized_a(problem: &CellProblem, dj: f64) -> Result<HomogenizedCoefficient> {
    if !(1e-4..=1e-2).contains(&dj) {
        return Err(Error::Config(format!("dj must lie in [1e-4, 1e-2], got {dj}")));
    }
    let coarse = curvature(problem, dj)?;
    let fine = curvature(problem, 0.5 * dj)?;
    if !(coarse > 0.0) || (coarse - fine).abs() > 1e-3 * fine.abs() {
        return Err(Error::Richardson { coarse, fine });
    }
    log::info!("a* = {coarse:.6} (dj/2: {fine:.6})");
    Ok(HomogenizedCoefficient { a_star: coarse, a_star_half: fine, dj })
}

/// Transmitted wave vector and Fresnel amplitudes at a flat interface
/// `1 | a*` for the incoming vector `j_in`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnellFresnel {
    pub j_out: [f64; 2],
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

pub fn snell_fresnel(j_in: [f64; 2], a_star: f64) -> Result<SnellFresnel> {
    if !(a_star > 0.0) {
        return Err(Error::Config(format!("a* must be positive, got {a_star}")));
    }
    let norm_out = j_in[0].hypot(j_in[1]) / a_star.sqrt();
    let rest = norm_out * norm_out - j_in[1] * j_in[1];
    if rest <= 0.0 {
        return Err(Error::Evanescent);
    }
    let j1 = rest.sqrt();
    let r = (j_in[0] - a_star * j1) / (j_in[0] + a_star * j1);
    Ok(SnellFresnel { j_out: [j1, j_in[1]], r, t: 1.0 + r })
}

/// Modulus of each basis mode's coefficient, rescaled to a unit-norm mode on
/// one periodicity cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeCoefficient {
    pub side: Side,
    pub j: [f64; 2],
    pub m: usize,
    pub group_velocity: Option<[f64; 2]>,
    pub poynting: f64,
    pub coefficient: [f64; 2],
    pub modulus: f64,
}

/// Pre-Gram coefficients of a box field, each scaled by the cell norm of its mode.
pub fn mode_coefficients(basis: &RadiationBasis, alpha: &[c64], op: &BoxOperator) -> Vec<ModeCoefficient> {
    let beta = basis.pre_gram_coefficients(alpha);
    let cell_volume = op.volume / op.cells as f64;
    basis
        .entries
        .iter()
        .zip(&basis.pre_gram)
        .zip(beta)
        .map(|((e, col), b)| {
            let scale = (op.norm_sq(col) / op.cells as f64 / cell_volume).sqrt();
            let v = b * scale;
            ModeCoefficient {
                side: basis.side,
                j: e.j,
                m: e.m,
                group_velocity: e.group_velocity,
                poynting: e.poynting,
                coefficient: [v.re, v.im],
                modulus: v.norm(),
            }
        })
        .collect()
}

/// Index of the largest `|α|`, ties broken by smaller `|j1|` then smaller `m`.
pub fn dominant(modes: &[ModeCoefficient]) -> Option<usize> {
    let best = modes.iter().map(|c| c.modulus).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..modes.len()).filter(|&k| modes[k].modulus >= best - TIE_TOL).collect();
    if tied.len() > 1 {
        log::info!("{} modes tie for the largest coefficient", tied.len());
    }
    tied.into_iter()
        .min_by(|&a, &b| modes[a].j[0].abs().total_cmp(&modes[b].j[0].abs()).then(modes[a].m.cmp(&modes[b].m)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RTReport {
    pub j_in: [f64; 2],
    pub a_star: f64,
    #[serde(rename = "R_ref")]
    pub r_ref: f64,
    #[serde(rename = "T_ref")]
    pub t_ref: f64,
    pub j_out_ref: [f64; 2],
    pub alpha_refl: f64,
    pub alpha_out: f64,
    pub lambda_refl: ModeCoefficient,
    pub lambda_out: ModeCoefficient,
    /// Physical wave vector of the dominant transmitted mode.
    pub j_out: [f64; 2],
    pub snell_ratio: f64,
    pub err_r: f64,
    pub err_t: f64,
}

/// Reflection and transmission read off the dominant Bloch coefficients.
#[allow(clippy::too_many_arguments)]
pub fn extract_rt(
    j_in: [f64; 2],
    a_star: f64,
    plus: (&RadiationBasis, &[c64], &BoxOperator),
    minus: (&RadiationBasis, &[c64], &BoxOperator),
    transmitted_cell: &CellProblem,
) -> Result<RTReport> {
    let reference = snell_fresnel(j_in, a_star)?;
    let out = mode_coefficients(plus.0, plus.1, plus.2);
    let refl = mode_coefficients(minus.0, minus.1, minus.2);
    let k_out = dominant(&out).ok_or(Error::EmptyBasis("right"))?;
    let k_refl = dominant(&refl).ok_or(Error::EmptyBasis("left"))?;
    let mode = plus.0.entries[k_out]
        .mode
        .as_ref()
        .ok_or_else(|| Error::Dimension("transmitted mode carries no eigenvector".into()))?;
    let j_out = transmitted_cell.unfolded_wavevector(mode);
    let alpha_refl = refl[k_refl].modulus;
    let alpha_out = out[k_out].modulus;
    let report = RTReport {
        j_in,
        a_star,
        r_ref: reference.r,
        t_ref: reference.t,
        j_out_ref: reference.j_out,
        alpha_refl,
        alpha_out,
        lambda_refl: refl[k_refl].clone(),
        lambda_out: out[k_out].clone(),
        j_out,
        snell_ratio: j_in[0].hypot(j_in[1]) / j_out[0].hypot(j_out[1]),
        err_r: (reference.r - alpha_refl).abs(),
        err_t: (reference.t - alpha_out).abs(),
    };
    log::info!(
        "R = {:.4} (ref {:.4}), T = {:.4} (ref {:.4}), |j_in|/|j_out| = {:.6}",
        alpha_refl,
        reference.r,
        alpha_out,
        reference.t,
        report.snell_ratio
    );
    Ok(report)
}

/// Selected modes joined with their coefficient moduli.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefractionDiagnostics {
    pub modes: Vec<ModeCoefficient>,
    /// Set for incoming-wave runs: all dominant transmitted modes travel
    /// downwards while the incoming wave travels upwards.
    pub negative_refraction: Option<bool>,
}

/// Modes whose coefficient is at least this fraction of the largest count as dominant.
pub const DOMINANT_FRACTION: f64 = 0.1;

pub fn refraction_diagnostics(
    transmitted: Vec<ModeCoefficient>,
    reflected: Vec<ModeCoefficient>,
    j_in: Option<[f64; 2]>,
) -> RefractionDiagnostics {
    let negative_refraction = j_in.map(|j| {
        let top = transmitted.iter().map(|c| c.modulus).fold(0.0, f64::max);
        let dominant: Vec<_> =
            transmitted.iter().filter(|c| top > 0.0 && c.modulus >= DOMINANT_FRACTION * top).collect();
        j[1] > 0.0 && !dominant.is_empty() && dominant.iter().all(|c| c.group_velocity.is_some_and(|v| v[1] < 0.0))
    });
    let mut modes = reflected;
    modes.extend(transmitted);
    RefractionDiagnostics { modes, negative_refraction }
}
