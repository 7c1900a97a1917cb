//! End-to-end runs: band structure, scattering solve, R/T validation and the
//! damping sweep.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    extract_rt, homogenized_a, mode_coefficients, refraction_diagnostics, ModeCoefficient, RTReport,
    RefractionDiagnostics,
};
use crate::assembly::{
    aligned_incoming, assemble, assemble_hat, gaussian_load, incoming_source, EnrichedSystem, HatOperators,
    IncomingWave, Load,
};
use crate::cell::{CellGrid, CellProblem};
use crate::config::{J2Policy, RunConfig, Source};
use crate::enrichment::{BoxOperator, RadiationBasis};
use crate::error::{Error, Result};
use crate::export::{self, BandRow, SweepRow};
use crate::grid::{build_grid, Grid, Side};
use crate::medium::sample_coefficient;
use crate::select::{nearest_lines, q_prime, select_indices, IndexSet};
use crate::solve::{solve, SolutionField, SolverStats};

/// Wall-clock seconds per stage, kept out of the deterministic outputs.
pub type Timings = BTreeMap<String, f64>;

/// Cell problem, selected modes and radiation basis of one side.
#[derive(Clone, Debug)]
pub struct SideData {
    pub cell: CellProblem,
    pub set: IndexSet,
    pub op: BoxOperator,
    pub basis: RadiationBasis,
}

/// Everything that does not depend on the damping `δ`.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub grid: Grid,
    pub coefficient: Vec<f64>,
    /// Incoming wave vector after snapping to the strip period.
    pub j_in: Option<[f64; 2]>,
    pub plus: SideData,
    pub minus: SideData,
    pub hat: HatOperators,
    pub load: Load,
    pub timings: Timings,
}

fn timed<T>(timings: &mut Timings, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *timings.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64();
    out
}

pub fn cell_problem(config: &RunConfig, side: Side) -> Result<CellProblem> {
    let g = &config.geometry;
    CellProblem::new(CellGrid::new(g.eps, g.n1, g.n2)?, config.medium.side_material(side))
}

/// Snapped incoming wave vector, if the source is a plane wave.
pub fn incoming_vector(config: &RunConfig) -> Result<Option<[f64; 2]>> {
    match &config.source {
        Source::Incoming { j_in, .. } => {
            let j = aligned_incoming(config.omega, *j_in, &config.geometry)?;
            if (j[0] - j_in[0]).abs() + (j[1] - j_in[1]).abs() > 1e-12 {
                log::info!("incoming vector {:?} snapped to ({:.6}, {:.6})", j_in, j[0], j[1]);
            }
            Ok(Some(j))
        }
        _ => Ok(None),
    }
}

/// Vertical Brillouin wave numbers searched for outgoing modes.
pub fn j2_values(config: &RunConfig, j_in: Option<[f64; 2]>) -> (Vec<f64>, f64) {
    let k = config.geometry.k;
    let j2_ref = j_in.map_or(0.0, |j| config.geometry.eps * j[1] / (2.0 * PI));
    let lines = match config.j2_policy {
        J2Policy::All => q_prime(k),
        J2Policy::Incoming { lines } => nearest_lines(j2_ref, k, lines),
    };
    (lines, j2_ref)
}

fn prepare_side(
    config: &RunConfig,
    grid: &Grid,
    coefficient: &[f64],
    side: Side,
    j2: &[f64],
    j2_ref: f64,
) -> Result<SideData> {
    let cell = cell_problem(config, side)?;
    let mut set = select_indices(&cell, config.omega, side, j2, &config.selection)?;
    if let Some(n) = config.max_modes {
        set.truncate_nearest(n, j2_ref);
    }
    let op = BoxOperator::new(grid, coefficient, side)?;
    let mut basis = RadiationBasis::new(&set, cell.grid(), grid)?;
    if config.orthonormalize && !basis.is_empty() {
        basis = basis.orthonormalize(&op)?;
    }
    Ok(SideData { cell, set, op, basis })
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let mut timings = Timings::new();
    let grid = timed(&mut timings, "grid", || build_grid(config.geometry))?;
    let coefficient = sample_coefficient(&config.medium, &grid);
    let j_in = incoming_vector(config)?;
    let (j2, j2_ref) = j2_values(config, j_in);
    let plus = timed(&mut timings, "select", || prepare_side(config, &grid, &coefficient, Side::Plus, &j2, j2_ref))?;
    let minus = timed(&mut timings, "select", || prepare_side(config, &grid, &coefficient, Side::Minus, &j2, j2_ref))?;
    let hat = timed(&mut timings, "assemble", || assemble_hat(&grid, &coefficient))?;
    let load = timed(&mut timings, "load", || match &config.source {
        Source::None => Ok(Load::zero(grid.n_nodes())),
        Source::Gaussian { amplitude, decay, center } => Ok(gaussian_load(&grid, *amplitude, *decay, *center)),
        Source::Incoming { d, amplitude, half_step, .. } => {
            let wave = IncomingWave {
                j_in: j_in.expect("incoming vector"),
                amplitude: faer::c64::new(*amplitude, 0.0),
                d: *d,
                half_step: *half_step,
            };
            incoming_source(&wave, config.omega, &grid, &coefficient)
        }
    })?;
    log::info!(
        "grid {} nodes ({} interior), Bloch modes: {} right, {} left",
        grid.n_nodes(),
        grid.n_interior(),
        plus.basis.len(),
        minus.basis.len()
    );
    Ok(Prepared { config: config.clone(), grid, coefficient, j_in, plus, minus, hat, load, timings })
}

/// Assembled system and its solution for one damping value.
#[derive(Clone, Debug)]
pub struct Solved {
    pub system: EnrichedSystem,
    pub solution: SolutionField,
}

impl Prepared {
    pub fn side(&self, side: Side) -> &SideData {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    pub fn assemble(&self, delta: f64) -> Result<EnrichedSystem> {
        assemble(&self.grid, &self.hat, self.config.omega, delta, &self.plus.basis, &self.minus.basis, &self.load)
    }

    pub fn solve(&mut self, delta: f64) -> Result<Solved> {
        let mut timings = std::mem::take(&mut self.timings);
        let out = (|| {
            let system = timed(&mut timings, "assemble", || self.assemble(delta))?;
            let solution = timed(&mut timings, "solve", || solve(&system))?;
            Ok(Solved { system, solution })
        })();
        self.timings = timings;
        out
    }

    /// Coefficients of the selected modes in the solution, per side.
    pub fn coefficients(&self, solved: &Solved) -> (Vec<ModeCoefficient>, Vec<ModeCoefficient>) {
        let s = &solved.solution;
        (
            mode_coefficients(&self.plus.basis, &s.alpha_plus, &self.plus.op),
            mode_coefficients(&self.minus.basis, &s.alpha_minus, &self.minus.op),
        )
    }

    pub fn rt_report(&self, solved: &Solved, a_star: f64) -> Result<RTReport> {
        let j_in = self.j_in.ok_or_else(|| Error::Config("R/T extraction needs an incoming wave".into()))?;
        let s = &solved.solution;
        extract_rt(
            j_in,
            a_star,
            (&self.plus.basis, &s.alpha_plus, &self.plus.op),
            (&self.minus.basis, &s.alpha_minus, &self.minus.op),
            &self.plus.cell,
        )
    }

    /// `a*` for the Fresnel reference: the configured value or the band
    /// curvature of the right medium.
    pub fn reference_a_star(&self) -> Result<f64> {
        match self.config.reference_a_star {
            Some(a) => Ok(a),
            None => Ok(homogenized_a(&self.plus.cell, self.config.a_star_dj)?.a_star),
        }
    }
}

// ============================================================================
// Runs
// ============================================================================

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub omega: f64,
    pub delta: f64,
    pub j_in: Option<[f64; 2]>,
    pub n_nodes: usize,
    pub stats: SolverStats,
    pub dropped_plus: usize,
    pub dropped_minus: usize,
    pub max_abs_u: f64,
    pub diagnostics: RefractionDiagnostics,
}

pub fn solve_report(prepared: &Prepared, solved: &Solved) -> SolveReport {
    let (plus, minus) = prepared.coefficients(solved);
    let s = &solved.solution;
    SolveReport {
        omega: prepared.config.omega,
        delta: solved.system.delta,
        j_in: prepared.j_in,
        n_nodes: prepared.grid.n_nodes(),
        stats: s.stats.clone(),
        dropped_plus: prepared.plus.set.len() - prepared.plus.basis.len(),
        dropped_minus: prepared.minus.set.len() - prepared.minus.basis.len(),
        max_abs_u: s.nodal.iter().map(|u| u.norm()).fold(0.0, f64::max),
        diagnostics: refraction_diagnostics(plus, minus, prepared.j_in),
    }
}

fn write_timings(out: &Path, config: &RunConfig, timings: &Timings) -> Result<()> {
    export::write_json(&out.join(&config.outputs.timings), timings)
}

/// Band samples on a `mesh × mesh` grid of the zone for both media, and the
/// selected outgoing modes.
pub fn band_rows(config: &RunConfig) -> Result<Vec<BandRow>> {
    let band = &config.outputs.band;
    let mesh = band.mesh;
    let mut rows = Vec::new();
    for side in [Side::Minus, Side::Plus] {
        let cell = cell_problem(config, side)?;
        let points: Vec<[f64; 2]> = (0..mesh)
            .flat_map(|b| {
                (0..mesh).map(move |a| [-0.5 + (a + 1) as f64 / mesh as f64, -0.5 + (b + 1) as f64 / mesh as f64])
            })
            .collect();
        let sampled: Vec<Vec<BandRow>> = points
            .par_iter()
            .map(|&j| {
                let modes = cell.solve(j, band.n_bands, side)?;
                let mats = cell.assemble_shifted(j);
                modes
                    .iter()
                    .map(|mode| {
                        let vg = if band.group_velocity { cell.group_velocity(j, mode.m).ok() } else { None };
                        Ok(BandRow {
                            side: side.label().into(),
                            j1: j[0],
                            j2: j[1],
                            m: mode.m,
                            mu: mode.mu,
                            p: cell.poynting_with(&mats, &mode.psi),
                            vg1: vg.map(|v| v[0]),
                            vg2: vg.map(|v| v[1]),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        rows.extend(sampled.into_iter().flatten());
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandSummary {
    pub band_rows: usize,
    pub selected_plus: usize,
    pub selected_minus: usize,
}

pub fn run_band(config: &RunConfig, out: &Path) -> Result<BandSummary> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let mut timings = Timings::new();
    let rows = timed(&mut timings, "bands", || band_rows(config))?;
    export::write_band_csv(&out.join(&config.outputs.bands), &rows)?;
    let j_in = incoming_vector(config)?;
    let (j2, j2_ref) = j2_values(config, j_in);
    let mut sets = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        let cell = cell_problem(config, side)?;
        let mut set =
            timed(&mut timings, "select", || select_indices(&cell, config.omega, side, &j2, &config.selection))?;
        if let Some(n) = config.max_modes {
            set.truncate_nearest(n, j2_ref);
        }
        sets.push(set);
    }
    export::write_band_csv(&out.join(&config.outputs.selected), &export::selected_rows(&[&sets[0], &sets[1]]))?;
    write_timings(out, config, &timings)?;
    Ok(BandSummary { band_rows: rows.len(), selected_plus: sets[0].len(), selected_minus: sets[1].len() })
}

pub fn run_solve(config: &RunConfig, out: &Path) -> Result<SolveReport> {
    std::fs::create_dir_all(out)?;
    let mut prepared = prepare(config)?;
    let solved = prepared.solve(config.delta)?;
    let report = solve_report(&prepared, &solved);
    export::write_field_csv(
        &out.join(&config.outputs.field),
        &export::field_rows(&prepared.grid, &solved.solution.nodal),
    )?;
    export::write_band_csv(
        &out.join(&config.outputs.selected),
        &export::selected_rows(&[&prepared.plus.set, &prepared.minus.set]),
    )?;
    export::write_json(&out.join(&config.outputs.report), &report)?;
    write_timings(out, config, &prepared.timings)?;
    Ok(report)
}

pub fn run_validate(config: &RunConfig, out: &Path) -> Result<RTReport> {
    if !matches!(config.source, Source::Incoming { .. }) {
        return Err(Error::Config("validate needs an incoming plane wave source".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut prepared = prepare(config)?;
    let a_star = prepared.reference_a_star()?;
    let solved = prepared.solve(config.delta)?;
    let report = prepared.rt_report(&solved, a_star)?;
    export::write_json(&out.join(&config.outputs.rt), &report)?;
    write_timings(out, config, &prepared.timings)?;
    Ok(report)
}

/// One solve per damping value against the Fresnel reference.
pub fn delta_sweep(config: &RunConfig, deltas: &[f64]) -> Result<Vec<SweepRow>> {
    if deltas.is_empty() || !deltas.iter().all(|d| *d > 0.0) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("deltas must be positive and strictly descending".into()));
    }
    if !matches!(config.source, Source::Incoming { .. }) {
        return Err(Error::Config("sweep needs an incoming plane wave source".into()));
    }
    let mut prepared = prepare(config)?;
    let a_star = prepared.reference_a_star()?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let solved = prepared.solve(delta)?;
        let rt = prepared.rt_report(&solved, a_star)?;
        log::info!("delta = {delta:e}: err_R = {:.3e}, err_T = {:.3e}", rt.err_r, rt.err_t);
        rows.push(SweepRow { delta, err_r: rt.err_r, err_t: rt.err_t });
    }
    Ok(rows)
}

pub fn run_sweep(config: &RunConfig, out: &Path) -> Result<Vec<SweepRow>> {
    std::fs::create_dir_all(out)?;
    let rows = delta_sweep(config, &config.deltas)?;
    export::write_sweep_csv(&out.join(&config.outputs.sweep), &rows)?;
    Ok(rows)
}
