//! Outgoing Bloch index sets: intersections of the bands with the level `ω²`
//! along the admissible vertical wave numbers, filtered by the sign of the
//! Poynting number.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{BlochMode, CellProblem};
use crate::error::{Error, Result};
use crate::grid::Side;

/// Vertical Brillouin wave numbers compatible with the strip height `εK`.
pub fn q_prime(k: usize) -> Vec<f64> {
    let k = k.max(1) as i64;
    let shift = if k % 2 == 0 { k - 2 } else { k - 1 };
    (0..k).map(|i| (2 * i - shift) as f64 / (2 * k) as f64).collect()
}

/// Reduce a Brillouin coordinate into `(-½, ½]`.
pub fn reduce_zone(x: f64) -> f64 {
    x - (x - 0.5).ceil()
}

/// Element of `Q'_K` closest to `j2` (modulo 1).
pub fn nearest_q_prime(j2: f64, k: usize) -> f64 {
    let r = reduce_zone(j2);
    q_prime(k).into_iter().min_by(|a, b| zone_distance(*a, r).total_cmp(&zone_distance(*b, r))).unwrap_or(0.0)
}

/// The `n` elements of `Q'_K` closest to `j2` (modulo 1), in ascending order.
pub fn nearest_lines(j2: f64, k: usize, n: usize) -> Vec<f64> {
    let r = reduce_zone(j2);
    let mut q = q_prime(k);
    q.sort_by(|a, b| zone_distance(*a, r).total_cmp(&zone_distance(*b, r)).then(a.total_cmp(b)));
    q.truncate(n);
    q.sort_by(f64::total_cmp);
    q
}

fn zone_distance(a: f64, b: f64) -> f64 {
    let d = a - b;
    (d - d.round()).abs()
}

/// `||j_in|² - ω²| < 1e-6 ω²`.
pub fn incoming_admissible(omega: f64, j_in: [f64; 2]) -> bool {
    let w2 = omega * omega;
    (j_in[0] * j_in[0] + j_in[1] * j_in[1] - w2).abs() < 1e-6 * w2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionParams {
    /// Points of the uniform `j1` mesh on `(-½, ½]`.
    pub j1_mesh: usize,
    /// Positive-speed threshold; `None` means `1e-8·max|P|` over the candidates.
    pub c0: Option<f64>,
    /// Level tolerance relative to `ω²`.
    pub level_tol: f64,
    pub n_bands: usize,
    pub max_bisection: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams { j1_mesh: 201, c0: None, level_tol: 1e-6, n_bands: 6, max_bisection: 40 }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.j1_mesh < 16 {
            return Err(Error::Config(format!("j1_mesh must be at least 16, got {}", self.j1_mesh)));
        }
        if self.n_bands == 0 {
            return Err(Error::Config("n_bands must be at least 1".into()));
        }
        if !(self.level_tol > 0.0) {
            return Err(Error::Config("level_tol must be positive".into()));
        }
        if let Some(c0) = self.c0 {
            if !(c0 >= 0.0) {
                return Err(Error::Config("c0 must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexEntry {
    pub j: [f64; 2],
    pub m: usize,
    pub mu: f64,
    pub poynting: f64,
    /// `None` when the band is degenerate at `j`.
    pub group_velocity: Option<[f64; 2]>,
    #[serde(skip)]
    pub mode: Option<BlochMode>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexSet {
    pub side: Side,
    pub omega: f64,
    pub c0: f64,
    pub entries: Vec<IndexEntry>,
}

impl IndexSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keep at most `n` entries, preferring vertical wave numbers closest to
    /// `j2_ref`, then smaller bands; the original order is preserved.
    pub fn truncate_nearest(&mut self, n: usize, j2_ref: f64) {
        if self.entries.len() <= n {
            return;
        }
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            zone_distance(ea.j[1], j2_ref)
                .total_cmp(&zone_distance(eb.j[1], j2_ref))
                .then(ea.m.cmp(&eb.m))
                .then(ea.j[0].abs().total_cmp(&eb.j[0].abs()))
                .then(a.cmp(&b))
        });
        let mut keep = vec![false; self.entries.len()];
        for &i in idx.iter().take(n) {
            keep[i] = true;
        }
        let mut k = keep.iter();
        self.entries.retain(|_| *k.next().unwrap());
    }
}

struct Candidate {
    mode: BlochMode,
    poynting: f64,
}

/// Sample the bands on one horizontal line of the zone.
pub fn sample_line(problem: &CellProblem, j2: f64, mesh: usize, n_bands: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    (0..mesh)
        .into_par_iter()
        .map(|i| {
            let j1 = -0.5 + (i + 1) as f64 / mesh as f64;
            problem.eigenvalues([j1, j2], n_bands).map(|v| (j1, v))
        })
        .collect()
}

/// Find `j1 ∈ [a, b]` with `μ_m(j1, j2) = ω²` given a sign change.
fn refine_root(
    problem: &CellProblem,
    j2: f64,
    m: usize,
    w2: f64,
    (mut a, mut ga): (f64, f64),
    (mut b, gb): (f64, f64),
    params: &SelectionParams,
) -> Result<Option<f64>> {
    let tol = params.level_tol * w2;
    let g = |j1: f64| -> Result<f64> { Ok(problem.eigenvalues([reduce_zone(j1), j2], m + 1)?[m] - w2) };
    if ga.abs() <= tol {
        return Ok(Some(a));
    }
    if gb.abs() <= tol {
        return Ok(Some(b));
    }
    let mut x = a - ga * (b - a) / (gb - ga);
    let mut gx = g(x)?;
    for _ in 0..params.max_bisection {
        if gx.abs() <= tol {
            return Ok(Some(x));
        }
        if (gx < 0.0) == (ga < 0.0) {
            a = x;
            ga = gx;
        } else {
            b = x;
        }
        x = 0.5 * (a + b);
        gx = g(x)?;
    }
    if gx.abs() <= tol {
        Ok(Some(x))
    } else {
        log::warn!("band {m} at j2 = {j2}: level residual {:.3e} after bisection, root dropped", gx.abs());
        Ok(None)
    }
}

/// Select the outgoing Bloch modes of `side` at frequency `omega` on the lines
/// `j2 ∈ j2_values`.
pub fn select_indices(
    problem: &CellProblem,
    omega: f64,
    side: Side,
    j2_values: &[f64],
    params: &SelectionParams,
) -> Result<IndexSet> {
    params.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Config(format!("omega must be positive, got {omega}")));
    }
    let w2 = omega * omega;
    let mesh = params.j1_mesh;
    let nb = params.n_bands;
    let mut candidates = Vec::new();

    for &j2 in j2_values {
        let samples = sample_line(problem, j2, mesh, nb)?;
        for m in 0..nb {
            for i in 0..mesh {
                let (ja, va) = &samples[i];
                let (jb, vb) = if i + 1 < mesh {
                    (samples[i + 1].0, &samples[i + 1].1)
                } else {
                    (samples[0].0 + 1.0, &samples[0].1)
                };
                let (ga, gb) = (va[m] - w2, vb[m] - w2);
                if (ga < 0.0) == (gb < 0.0) {
                    continue;
                }
                if let Some(root) = refine_root(problem, j2, m, w2, (*ja, ga), (jb, gb), params)? {
                    let j = [reduce_zone(root), j2];
                    let mode = problem.solve(j, m + 1, side)?.pop().expect("m + 1 modes");
                    let mats = problem.assemble_shifted(j);
                    let poynting = problem.poynting_with(&mats, &mode.psi);
                    candidates.push(Candidate { mode, poynting });
                }
            }
        }
    }

    let max_p = candidates.iter().map(|c| c.poynting.abs()).fold(0.0, f64::max);
    let c0 = params.c0.unwrap_or(1e-8 * max_p);
    let mut kept: Vec<Candidate> = Vec::new();
    for c in candidates {
        if side.sign() * c.poynting <= c0 {
            continue;
        }
        let dup = kept.iter().any(|k| {
            k.mode.m == c.mode.m
                && zone_distance(k.mode.j[0], c.mode.j[0]).hypot(zone_distance(k.mode.j[1], c.mode.j[1])) < 1e-6
        });
        if !dup {
            kept.push(c);
        }
    }

    let mut entries = Vec::with_capacity(kept.len());
    for c in kept {
        let vg = match problem.group_velocity(c.mode.j, c.mode.m) {
            Ok(v) => Some(v),
            Err(Error::DegenerateBand { .. }) => {
                log::warn!("degenerate band {} at j = {:?}; group velocity omitted", c.mode.m, c.mode.j);
                None
            }
            Err(e) => return Err(e),
        };
        entries.push(IndexEntry {
            j: c.mode.j,
            m: c.mode.m,
            mu: c.mode.mu,
            poynting: c.poynting,
            group_velocity: vg,
            mode: Some(c.mode),
        });
    }
    entries.sort_by(|a, b| a.j[1].total_cmp(&b.j[1]).then(a.j[0].total_cmp(&b.j[0])).then(a.m.cmp(&b.m)));
    if entries.is_empty() {
        log::warn!("no outgoing Bloch modes on the {} side at omega = {omega}", side.name());
    } else {
        log::info!("{} side: {} outgoing Bloch modes (c0 = {c0:.3e})", side.name(), entries.len());
    }
    Ok(IndexSet { side, omega, c0, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellGrid;
    use crate::medium::Material;
    use std::f64::consts::PI;

    #[test]
    fn q_prime_examples() {
        assert_eq!(q_prime(4), vec![-0.25, 0.0, 0.25, 0.5]);
        let q3 = q_prime(3);
        assert_eq!(q3.len(), 3);
        assert!((q3[0] + 1.0 / 3.0).abs() < 1e-15 && q3[1] == 0.0 && (q3[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(q_prime(1), vec![0.0]);
        let q14 = q_prime(14);
        assert_eq!(q14.len(), 14);
        assert_eq!(*q14.last().unwrap(), 0.5);
    }

    #[test]
    fn zone_reduction() {
        assert_eq!(reduce_zone(0.5), 0.5);
        assert_eq!(reduce_zone(-0.5), 0.5);
        assert!((reduce_zone(0.6) + 0.4).abs() < 1e-15);
        assert!((nearest_q_prime(0.449 / (2.0 * PI), 14) - 1.0 / 14.0).abs() < 1e-15);
        assert_eq!(nearest_lines(0.26, 4, 2), vec![0.25, 0.5]);
        assert_eq!(nearest_lines(0.0, 1, 3), vec![0.0]);
    }

    #[test]
    fn admissibility() {
        assert!(!incoming_admissible(1.0, [1.0, 1.0]));
        let w = 0.2 * PI;
        let j2 = 2.0 * PI / 14.0;
        assert!(incoming_admissible(w, [(w * w - j2 * j2).sqrt(), j2]));
    }

    #[test]
    fn truncation_prefers_nearest_line() {
        let e = |j1: f64, j2: f64, m| IndexEntry {
            j: [j1, j2],
            m,
            mu: 1.0,
            poynting: 1.0,
            group_velocity: None,
            mode: None,
        };
        let mut set = IndexSet {
            side: Side::Plus,
            omega: 1.0,
            c0: 0.0,
            entries: vec![e(0.1, -0.25, 0), e(0.1, 0.0, 1), e(0.2, 0.0, 0), e(0.3, 0.25, 0)],
        };
        set.truncate_nearest(2, 0.0);
        assert_eq!(set.len(), 2);
        assert!(set.entries.iter().all(|e| e.j[1] == 0.0));
    }

    #[test]
    fn homogeneous_circle_intersections() {
        let cp = CellProblem::new(CellGrid::new(1.0, 12, 12).unwrap(), &Material::constant(1.0)).unwrap();
        let omega = 0.2 * PI;
        let j2 = 1.0 / 14.0;
        let params = SelectionParams { j1_mesh: 64, n_bands: 3, ..Default::default() };
        let plus = select_indices(&cp, omega, Side::Plus, &[j2], &params).unwrap();
        let minus = select_indices(&cp, omega, Side::Minus, &[j2], &params).unwrap();
        assert_eq!(plus.len(), 1);
        assert_eq!(minus.len(), 1);
        let ep = &plus.entries[0];
        assert!(ep.j[0] > 0.0 && ep.poynting > plus.c0);
        assert!(minus.entries[0].j[0] < 0.0 && minus.entries[0].poynting < -minus.c0);
        assert!((ep.mu - omega * omega).abs() <= 1e-6 * omega * omega);
        // discrete dispersion sits slightly above the continuum; circle within O(h²)
        let exact = ((omega / (2.0 * PI)).powi(2) - j2 * j2).sqrt();
        assert!((ep.j[0] - exact).abs() < 5e-3 * exact.max(1.0), "{} vs {exact}", ep.j[0]);
        let vg = ep.group_velocity.unwrap();
        assert!(vg[0] > 0.0 && vg[1] > 0.0);
    }
}
