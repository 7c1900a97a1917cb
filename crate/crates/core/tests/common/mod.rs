//! Small setups shared by the integration tests.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use blochwave::assembly::Operator;
use blochwave::pipeline::{prepare, Prepared};
use blochwave::{c64, EnrichedSystem, GridSpec, J2Policy, Material, Medium, RunConfig, SelectionParams, Source};

/// Homogeneous strip where every `j2` line carries exactly one outgoing mode
/// per side, so distinct modes never share a wave number.
pub fn homogeneous_config() -> RunConfig {
    RunConfig {
        geometry: GridSpec::new(1.0, 3, 2, 4, 6, 6).unwrap(),
        medium: Medium::uniform(Material::constant(1.0)),
        omega: 2.5,
        delta: 1e-2,
        source: Source::Gaussian { amplitude: 1.0, decay: 3.0, center: [0.0, 1.0] },
        selection: SelectionParams { j1_mesh: 64, ..Default::default() },
        j2_policy: J2Policy::All,
        max_modes: None,
        ..Default::default()
    }
}

/// Crystal on the right of a homogeneous half, several modes per line.
pub fn interface_config() -> RunConfig {
    RunConfig {
        geometry: GridSpec::new(1.0, 3, 2, 3, 6, 6).unwrap(),
        medium: Medium::interface(Material::constant(1.0), Material::crystal()),
        omega: 1.85,
        delta: 1e-3,
        source: Source::Gaussian { amplitude: 2.0, decay: 3.0, center: [-1.0, 0.5] },
        selection: SelectionParams { j1_mesh: 48, ..Default::default() },
        j2_policy: J2Policy::All,
        max_modes: None,
        ..Default::default()
    }
}

/// Plane wave through a medium without interface.
pub fn no_interface_config() -> RunConfig {
    RunConfig {
        geometry: GridSpec::new(1.0, 12, 2, 4, 10, 10).unwrap(),
        medium: Medium::uniform(Material::constant(1.0)),
        omega: 1.85,
        delta: 1e-4,
        source: Source::Incoming { j_in: [1.269, 1.346], d: 1.0, amplitude: 1.0, half_step: true },
        selection: SelectionParams { j1_mesh: 64, ..Default::default() },
        j2_policy: J2Policy::Incoming { lines: 1 },
        max_modes: None,
        reference_a_star: Some(1.0),
        ..Default::default()
    }
}

pub fn prepared(config: &RunConfig) -> Prepared {
    prepare(config).expect("prepare")
}

/// `δω²‖u‖²_{Ω_R} + εK Σ|α⁺|²P⁺ - εK Σ|α⁻|²P⁻` and the matching scale.
pub fn im_beta_prediction(p: &Prepared, sys: &EnrichedSystem, u: &[c64]) -> (f64, f64) {
    let spec = p.grid.spec();
    let w2 = sys.omega * sys.omega;
    let inner = sys.form(Operator::MassInner, u, u).re;
    let mut value = sys.delta * w2 * inner;
    let mut scale = value.abs();
    for (side, range) in [(&p.plus, sys.layout.plus()), (&p.minus, sys.layout.minus())] {
        let beta = side.basis.pre_gram_coefficients(&u[range]);
        for (b, e) in beta.iter().zip(&side.basis.entries) {
            let t = spec.eps * spec.k as f64 * b.norm_sqr() * e.poynting;
            value += t * side.basis.side.sign();
            scale += t.abs();
        }
    }
    (value, scale)
}

/// Seeded random complex vector with entries in the unit square.
pub fn random_vector(seed: u64, n: usize) -> Vec<c64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}
