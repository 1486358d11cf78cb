use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The coverage question `p(m, ell, d)`: expected fraction of a side-`s`
/// query hypercube covered by at least `ell` of `m` random origin-containing
/// cells of side `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSpec {
    m: usize,
    ell: usize,
    d: usize,
    b: f64,
    s: f64,
}

impl CoverageSpec {
    pub fn new(m: usize, ell: usize, d: usize, b: f64, s: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSpec("m must be at least 1".into()));
        }
        if ell == 0 {
            return Err(Error::InvalidSpec("ell must be at least 1".into()));
        }
        if d == 0 {
            return Err(Error::InvalidSpec("d must be at least 1".into()));
        }
        for (name, v) in [("b", b), ("s", s)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be a positive real, got {v}")));
            }
        }
        Ok(Self { m, ell, d, b, s })
    }

    /// Unit cells and unit query (`b = s = 1`).
    pub fn unit(m: usize, ell: usize, d: usize) -> Result<Self> {
        Self::new(m, ell, d, 1.0, 1.0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Closed forms exist only for `b = s = 1`.
    pub fn require_unit(&self) -> Result<()> {
        if self.b == 1.0 && self.s == 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "analytic formulas require b = s = 1 (got b = {}, s = {})",
                self.b, self.s
            )))
        }
    }

    /// Simulation rescales to the unit model, which needs `b = s`.
    pub fn require_equal_sides(&self) -> Result<()> {
        if self.b == self.s {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "simulation requires b = s (got b = {}, s = {})",
                self.b, self.s
            )))
        }
    }

    /// `p(1, ell, d)` with `ell > 1` denotes the overlap of `ell` independent
    /// cells, so it is simulated as `ell` cells with threshold `ell`.
    pub fn normalized(&self) -> Self {
        if self.m == 1 && self.ell > 1 {
            Self { m: self.ell, ..*self }
        } else {
            *self
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized() == *self
    }
}
