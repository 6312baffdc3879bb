//! Automorphisms of the unit disk.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// `z -> rotation * (z - a) / (1 - conj(a) z)` with `|a| < 1`, `|rotation| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskAutomorphism {
    a: C64,
    rotation: C64,
}

impl DiskAutomorphism {
    pub fn new(a: C64, rotation_angle: f64) -> Result<Self> {
        if !(a.norm() < 1.0) {
            return Err(Error::precondition(format!("|a| = {} must be below 1", a.norm())));
        }
        Ok(DiskAutomorphism {
            a,
            rotation: C64::from_polar(1.0, rotation_angle),
        })
    }

    pub fn identity() -> Self {
        DiskAutomorphism {
            a: C64::new(0.0, 0.0),
            rotation: C64::new(1.0, 0.0),
        }
    }

    /// The automorphism sending `a` to 0 with `rotation = 1`.
    pub fn centering(a: C64) -> Result<Self> {
        Self::new(a, 0.0)
    }

    pub fn zero_preimage(&self) -> C64 {
        self.a
    }

    pub fn apply(&self, z: C64) -> C64 {
        self.rotation * (z - self.a) / (C64::new(1.0, 0.0) - self.a.conj() * z)
    }

    pub fn inverse_apply(&self, w: C64) -> C64 {
        let u = w / self.rotation;
        (u + self.a) / (C64::new(1.0, 0.0) + self.a.conj() * u)
    }

    /// Post-composes with a rotation by `angle`.
    pub fn rotated(mut self, angle: f64) -> Self {
        self.rotation *= C64::from_polar(1.0, angle);
        self
    }
}
