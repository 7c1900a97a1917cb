//! Coefficient descriptions and their element-wise sampling.
//!
//! A [`Material`] is an ε-periodic coefficient described in cell units
//! `ξ = x/ε mod 1`. A [`Medium`] places materials on the strip: `left` for
//! `x1 < 0`, `right` for `x1 ≥ 0`, optionally truncated to a slab of whole
//! cells after which the left material resumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Element, Grid, Side, TriangleKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscArray {
    pub inside_value: f64,
    pub outside_value: f64,
    /// Disc radius in cell units.
    pub radius: f64,
    /// Disc centers in cell units; distances use the nearest periodic image.
    pub centers: Vec<[f64; 2]>,
}

impl DiscArray {
    pub const DEFAULT_RADIUS: f64 = 0.35 * std::f64::consts::FRAC_1_SQRT_2;

    fn default_centers() -> Vec<[f64; 2]> {
        vec![[0.5, 0.0], [0.0, 0.5], [0.5, 1.0], [1.0, 0.5]]
    }

    /// Discs of value 1/12 in a background of value 1.
    pub fn dense_discs() -> Self {
        DiscArray {
            inside_value: 1.0 / 12.0,
            outside_value: 1.0,
            radius: Self::DEFAULT_RADIUS,
            centers: Self::default_centers(),
        }
    }

    /// Holes of value 1 in a background of value 1/12: the photonic crystal
    /// used for the refraction experiments.
    pub fn crystal() -> Self {
        DiscArray {
            inside_value: 1.0,
            outside_value: 1.0 / 12.0,
            radius: Self::DEFAULT_RADIUS,
            centers: Self::default_centers(),
        }
    }

    pub fn contains(&self, xi: [f64; 2]) -> bool {
        let r2 = self.radius * self.radius;
        self.centers.iter().any(|c| {
            let dx = xi[0] - c[0];
            let dy = xi[1] - c[1];
            let dx = dx - dx.round();
            let dy = dy - dy.round();
            dx * dx + dy * dy < r2
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Material {
    Constant {
        value: f64,
    },
    Discs(DiscArray),
    /// Layers in x1: `first` on `ξ1 < fraction`, `second` on the rest.
    Laminate {
        first: f64,
        second: f64,
        fraction: f64,
    },
}

impl Material {
    pub fn constant(value: f64) -> Self {
        Material::Constant { value }
    }

    pub fn crystal() -> Self {
        Material::Discs(DiscArray::crystal())
    }

    /// Coefficient at cell coordinates `xi ∈ [0,1)²`.
    pub fn value_at(&self, xi: [f64; 2]) -> f64 {
        match self {
            Material::Constant { value } => *value,
            Material::Discs(d) => {
                if d.contains(xi) {
                    d.inside_value
                } else {
                    d.outside_value
                }
            }
            Material::Laminate { first, second, fraction } => {
                if xi[0] < *fraction {
                    *first
                } else {
                    *second
                }
            }
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Material::Constant { value } => Some(*value),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive and finite, got {v}")))
            }
        };
        match self {
            Material::Constant { value } => positive(*value, "coefficient"),
            Material::Discs(d) => {
                positive(d.inside_value, "inside_value")?;
                positive(d.outside_value, "outside_value")?;
                if !(d.radius > 0.0 && d.radius < 1.0) {
                    return Err(Error::Config(format!("disc radius must lie in (0, 1), got {}", d.radius)));
                }
                if d.centers.is_empty() {
                    return Err(Error::Config("disc array has no centers".into()));
                }
                Ok(())
            }
            Material::Laminate { first, second, fraction } => {
                positive(*first, "laminate value")?;
                positive(*second, "laminate value")?;
                if !(*fraction > 0.0 && *fraction < 1.0) {
                    return Err(Error::Config(format!("laminate fraction must lie in (0, 1), got {fraction}")));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub left: Material,
    pub right: Material,
    /// If set, `right` only fills `0 ≤ x1 < slab_cells·ε`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slab_cells: Option<usize>,
}

impl Medium {
    pub fn uniform(m: Material) -> Self {
        Medium { left: m.clone(), right: m, slab_cells: None }
    }

    pub fn interface(left: Material, right: Material) -> Self {
        Medium { left, right, slab_cells: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        if self.slab_cells == Some(0) {
            return Err(Error::Config("slab_cells must be at least 1".into()));
        }
        Ok(())
    }

    /// Material filling the cell column starting at `cell1·ε`.
    pub fn material_in_column(&self, cell1: i64) -> &Material {
        if cell1 < 0 {
            return &self.left;
        }
        match self.slab_cells {
            Some(w) if cell1 >= w as i64 => &self.left,
            _ => &self.right,
        }
    }

    /// Material seen by the radiation box on `side`.
    pub fn side_material(&self, side: Side) -> &Material {
        match (side, self.slab_cells) {
            (Side::Minus, _) | (Side::Plus, Some(_)) => &self.left,
            (Side::Plus, None) => &self.right,
        }
    }
}

/// Cell coordinates of the barycenter of a triangle in rectangle `(p, q)` of
/// an `m1 × m2` cell grid, `p`, `q` already reduced.
pub fn cell_barycenter(p: usize, q: usize, kind: TriangleKind, m1: usize, m2: usize) -> [f64; 2] {
    let off = kind.barycenter_offset();
    [(p as f64 + off[0]) / m1 as f64, (q as f64 + off[1]) / m2 as f64]
}

fn element_value(medium: &Medium, el: &Element, n1: usize, n2: usize) -> f64 {
    let [i, q] = el.corner;
    let cell1 = i.div_euclid(n1 as i64);
    let p = i.rem_euclid(n1 as i64) as usize;
    let r = q.rem_euclid(n2 as i64) as usize;
    let xi = cell_barycenter(p, r, el.kind, n1, n2);
    medium.material_in_column(cell1).value_at(xi)
}

/// One coefficient value per element, sampled at the element barycenter.
pub fn sample_coefficient(medium: &Medium, grid: &Grid) -> Vec<f64> {
    let spec = grid.spec();
    grid.elements().iter().map(|el| element_value(medium, el, spec.n1, spec.n2)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn constant_medium() {
        let g = build_grid(GridSpec::new(1.0, 1, 1, 2, 3, 3).unwrap()).unwrap();
        let a = sample_coefficient(&Medium::uniform(Material::constant(1.0)), &g);
        assert_eq!(a.len(), g.elements().len());
        assert!(a.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn disc_membership() {
        let m = Material::Discs(DiscArray::dense_discs());
        assert_eq!(m.value_at([0.5, 0.0]), 1.0 / 12.0);
        // distance to (1/2, 0) is sqrt(0.125) ≈ 0.354 > 0.2475
        assert_eq!(m.value_at([0.25, 0.25]), 1.0);
        assert_eq!(m.value_at([0.99, 0.5]), 1.0 / 12.0);
        assert_eq!(m.value_at([0.5, 0.5]), 1.0);
    }

    #[test]
    fn crystal_swaps_values() {
        let m = Material::crystal();
        assert_eq!(m.value_at([0.5, 0.0]), 1.0);
        assert_eq!(m.value_at([0.25, 0.25]), 1.0 / 12.0);
    }

    #[test]
    fn interface_and_slab_sides() {
        let g = build_grid(GridSpec::new(1.0, 2, 1, 1, 2, 2).unwrap()).unwrap();
        let med = Medium::interface(Material::constant(1.0), Material::constant(0.25));
        let a = sample_coefficient(&med, &g);
        for (el, v) in g.elements().iter().zip(&a) {
            let x = el.barycenter(g.spec())[0];
            assert_eq!(*v, if x < 0.0 { 1.0 } else { 0.25 });
        }
        let slab = Medium { slab_cells: Some(1), ..med };
        let a = sample_coefficient(&slab, &g);
        for (el, v) in g.elements().iter().zip(&a) {
            let x = el.barycenter(g.spec())[0];
            assert_eq!(*v, if (0.0..1.0).contains(&x) { 0.25 } else { 1.0 });
        }
        assert_eq!(slab.side_material(Side::Plus), &Material::constant(1.0));
    }

    #[test]
    fn periodic_sampling_is_shift_invariant() {
        let spec = GridSpec::new(1.0, 2, 1, 2, 5, 4).unwrap();
        let g = build_grid(spec).unwrap();
        let a = sample_coefficient(&Medium::uniform(Material::crystal()), &g);
        let by_corner: std::collections::HashMap<_, _> =
            g.elements().iter().zip(&a).map(|(e, v)| ((e.corner, e.kind), *v)).collect();
        for el in g.elements() {
            let [i, q] = el.corner;
            if let Some(v) = by_corner.get(&([i + spec.n1 as i64, q], el.kind)) {
                assert_eq!(*v, by_corner[&(el.corner, el.kind)]);
            }
        }
    }

    #[test]
    fn rejects_bad_materials() {
        assert!(Material::constant(0.0).validate().is_err());
        assert!(Material::Laminate { first: 1.0, second: 1.0, fraction: 1.5 }.validate().is_err());
        let mut d = DiscArray::crystal();
        d.radius = 2.0;
        assert!(Material::Discs(d).validate().is_err());
    }
}
