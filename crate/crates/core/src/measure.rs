//! Finite positive measures on the plane as weighted point clouds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::{BBox, Point};
use crate::sum::compensated_sum;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureAtoms {
    atoms: Vec<(Point, f64)>,
    total_mass: f64,
}

impl MeasureAtoms {
    /// Validates finite positions and finite nonnegative weights.
    pub fn new(atoms: Vec<(Point, f64)>) -> Result<Self> {
        for (i, (p, w)) in atoms.iter().enumerate() {
            if !p.is_finite() {
                return invalid(format!("atom {i} has a non-finite position"));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return invalid(format!("atom {i} has invalid weight {w}"));
            }
        }
        Ok(Self::from_atoms_unchecked(atoms))
    }

    pub(crate) fn from_atoms_unchecked(atoms: Vec<(Point, f64)>) -> Self {
        let total_mass = compensated_sum(atoms.iter().map(|a| a.1));
        MeasureAtoms { atoms, total_mass }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// A single atom of weight `w` at `p`.
    pub fn dirac(p: Point, w: f64) -> Result<Self> {
        Self::new(vec![(p, w)])
    }

    pub fn atoms(&self) -> &[(Point, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(self.atoms.iter().map(|a| &a.0))
    }

    /// All weights multiplied by `s >= 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return invalid(format!("scale factor must be finite and nonnegative, got {s}"));
        }
        Ok(Self::from_atoms_unchecked(self.atoms.iter().map(|&(p, w)| (p, w * s)).collect()))
    }

    /// Restriction to a box, with the mass that fell outside.
    pub fn clip(&self, bx: &BBox) -> (Self, f64) {
        let (inside, outside): (Vec<(Point, f64)>, Vec<(Point, f64)>) = self.atoms.iter().partition(|a| bx.contains(a.0));
        let clipped = compensated_sum(outside.iter().map(|a| a.1));
        (Self::from_atoms_unchecked(inside), clipped)
    }

    /// CSV with header `x,y,w`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,w")?;
        for (p, m) in &self.atoms {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", p.x, p.y, m)?;
        }
        Ok(())
    }
}
