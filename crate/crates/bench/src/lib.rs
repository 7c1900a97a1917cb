//! Setups shared by the criterion benchmarks under `benches/`.

use blochwave::pipeline::{prepare, Prepared};
use blochwave::{CellGrid, CellProblem, GridSpec, J2Policy, Material, Medium, RunConfig, SelectionParams, Source};

/// Crystal cell at the resolution of the full-scale runs.
pub fn crystal_cell() -> CellProblem {
    CellProblem::new(CellGrid::new(1.0, 20, 19).expect("cell grid"), &Material::crystal()).expect("cell problem")
}

/// Plane wave through a crystal interface on a reduced strip.
pub fn small_run() -> RunConfig {
    RunConfig {
        geometry: GridSpec::new(1.0, 12, 2, 4, 10, 10).expect("grid"),
        medium: Medium::interface(Material::constant(1.0), Material::crystal()),
        omega: 1.85,
        delta: 1e-4,
        source: Source::Incoming { j_in: [1.269, 1.346], d: 1.0, amplitude: 1.0, half_step: true },
        selection: SelectionParams { j1_mesh: 64, ..Default::default() },
        j2_policy: J2Policy::Incoming { lines: 1 },
        max_modes: None,
        ..Default::default()
    }
}

pub fn prepared_small() -> Prepared {
    prepare(&small_run()).expect("prepare")
}
