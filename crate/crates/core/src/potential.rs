//! Potentials, bound states and scattering amplitudes.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::grid::{Grid, SampledFn};

/// Boundary treatment of a sampled potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    /// ψ = 0 at both grid ends.
    HardWalls,
    /// Whole line; the potential continues as its edge values beyond the grid.
    DecayingLine,
    /// Hard wall at `x_min`, decaying to the right.
    DecayingHalfLine,
    /// One period of a periodic system; a delta may sit on `x_min`.
    Periodic,
}

impl BcKind {
    pub fn name(self) -> &'static str {
        match self {
            BcKind::HardWalls => "hard-walls",
            BcKind::DecayingLine => "decaying-line",
            BcKind::DecayingHalfLine => "decaying-half-line",
            BcKind::Periodic => "periodic",
        }
    }

    pub fn left_wall(self) -> bool {
        matches!(self, BcKind::HardWalls | BcKind::DecayingHalfLine)
    }

    pub fn right_wall(self) -> bool {
        matches!(self, BcKind::HardWalls)
    }
}

impl std::str::FromStr for BcKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard-walls" => Ok(BcKind::HardWalls),
            "decaying-line" => Ok(BcKind::DecayingLine),
            "decaying-half-line" => Ok(BcKind::DecayingHalfLine),
            "periodic" => Ok(BcKind::Periodic),
            other => invalid(format!("unknown boundary kind `{other}`")),
        }
    }
}

/// Point interaction `strength · δ(x − position)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta {
    pub position: f64,
    pub strength: f64,
}

/// Sampled potential with boundary kind and exact delta components.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    body: SampledFn,
    bc: BcKind,
    deltas: Vec<Delta>,
    truncated_tail: bool,
}

/// Relative edge slope tolerated at the truncation edge of a decaying kind.
pub const EDGE_SLOPE_TOLERANCE: f64 = 1e-3;

/// Edge slopes below this are accepted whatever the peak-to-peak range.
pub const EDGE_SLOPE_FLOOR: f64 = 1e-8;

impl Potential {
    pub fn new(body: SampledFn, bc: BcKind, deltas: Vec<Delta>) -> Result<Self> {
        let p = Self {
            body,
            bc,
            deltas,
            truncated_tail: false,
        };
        p.check_deltas()?;
        p.check_edges()?;
        Ok(p)
    }

    /// Potential on a truncated domain whose tail is deliberately cut off
    /// (e.g. slowly decaying oscillating tails); skips the edge-flatness
    /// check and records that it was skipped.
    pub fn truncated(body: SampledFn, bc: BcKind, deltas: Vec<Delta>) -> Result<Self> {
        let p = Self {
            body,
            bc,
            deltas,
            truncated_tail: true,
        };
        p.check_deltas()?;
        Ok(p)
    }

    /// Flat-bottomed hard-wall box on `grid`.
    pub fn hard_box(grid: Grid) -> Self {
        Self {
            body: SampledFn::zeros(grid),
            bc: BcKind::HardWalls,
            deltas: Vec::new(),
            truncated_tail: false,
        }
    }

    pub fn free(grid: Grid, bc: BcKind) -> Self {
        Self {
            body: SampledFn::zeros(grid),
            bc,
            deltas: Vec::new(),
            truncated_tail: false,
        }
    }

    fn check_deltas(&self) -> Result<()> {
        let g = self.body.grid();
        for d in &self.deltas {
            if !d.strength.is_finite() || !d.position.is_finite() {
                return invalid("delta position and strength must be finite");
            }
            let Some(i) = g.node_index(d.position) else {
                return invalid(format!(
                    "delta at x = {} does not sit on a grid node",
                    d.position
                ));
            };
            let inside = match self.bc {
                BcKind::Periodic => i + 1 < g.len(),
                _ => i > 0 && i + 1 < g.len(),
            };
            if !inside {
                return invalid(format!(
                    "delta at x = {} must lie strictly inside the grid",
                    d.position
                ));
            }
        }
        Ok(())
    }

    fn check_edges(&self) -> Result<()> {
        let v = self.body.values();
        let n = v.len();
        let h = self.body.grid().spacing();
        let ptp = self.body.max() - self.body.min();
        // absolute floor so that numerically flat potentials are not rejected
        let limit = (EDGE_SLOPE_TOLERANCE * ptp).max(EDGE_SLOPE_FLOOR);
        let left = (v[1] - v[0]).abs() / h;
        let right = (v[n - 1] - v[n - 2]).abs() / h;
        let bad_left = self.bc == BcKind::DecayingLine && left > limit;
        let bad_right =
            matches!(self.bc, BcKind::DecayingLine | BcKind::DecayingHalfLine) && right > limit;
        if bad_left || bad_right {
            return invalid(format!(
                "potential is not flat at the truncation edge (slopes {left:.3e}, {right:.3e}, limit {limit:.3e}); widen the domain"
            ));
        }
        Ok(())
    }

    pub fn body(&self) -> &SampledFn {
        &self.body
    }

    pub fn grid(&self) -> &Grid {
        self.body.grid()
    }

    pub fn bc(&self) -> BcKind {
        self.bc
    }

    pub fn deltas(&self) -> &[Delta] {
        &self.deltas
    }

    pub fn truncated_tail(&self) -> bool {
        self.truncated_tail
    }

    /// Same potential with another boundary kind.
    pub fn with_bc(&self, bc: BcKind) -> Result<Self> {
        if self.truncated_tail {
            Self::truncated(self.body.clone(), bc, self.deltas.clone())
        } else {
            Self::new(self.body.clone(), bc, self.deltas.clone())
        }
    }

    /// Same deltas and boundary kind with a new body.
    pub fn with_body(&self, body: SampledFn) -> Result<Self> {
        if self.truncated_tail {
            Self::truncated(body, self.bc, self.deltas.clone())
        } else {
            Self::new(body, self.bc, self.deltas.clone())
        }
    }

    /// Asymptotic levels `(V(−∞), V(+∞))` for the decaying kinds.
    pub fn asymptotes(&self) -> (f64, f64) {
        let v = self.body.values();
        (v[0], v[v.len() - 1])
    }

    /// Lowest energy of the continuum, `None` for hard walls.
    pub fn continuum_edge(&self) -> Option<f64> {
        let (l, r) = self.asymptotes();
        match self.bc {
            BcKind::DecayingLine => Some(l.min(r)),
            BcKind::DecayingHalfLine => Some(r),
            _ => None,
        }
    }

    /// `(node index, strength)` for every delta.
    pub(crate) fn delta_nodes(&self) -> Vec<(usize, f64)> {
        let g = self.body.grid();
        let mut out: Vec<(usize, f64)> = self
            .deltas
            .iter()
            .map(|d| (g.nearest_index(d.position), d.strength))
            .collect();
        out.sort_by_key(|p| p.0);
        out
    }
}

/// Normalized bound state.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    /// Node count, zero-based. The ground state has `n = 0` and is reported
    /// as level 1.
    pub n: usize,
    pub energy: f64,
    pub psi: SampledFn,
    pub dpsi: SampledFn,
    /// ψ′ at the left wall for wall problems; the right-tail norming constant
    /// `lim ψ(x)·e^{κx}` for line problems.
    pub swf: f64,
}

impl BoundState {
    /// One-based level number, E_1 being the ground state.
    pub fn level(&self) -> usize {
        self.n + 1
    }
}

/// Scattering amplitudes for a wave incident from the left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringResult {
    pub energy: f64,
    pub r: Complex64,
    pub t: Complex64,
    /// Wave numbers on the left and right, needed for the flux balance.
    pub k_left: f64,
    pub k_right: f64,
}

impl ScatteringResult {
    /// `|R|² + (k_R/k_L)|T|²`, equal to one for real potentials.
    pub fn flux(&self) -> f64 {
        self.r.norm_sqr() + self.k_right / self.k_left * self.t.norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_must_sit_inside_on_a_node() {
        let g = Grid::new(-1.0, 1.0, 21).unwrap();
        let ok = Potential::new(
            SampledFn::zeros(g),
            BcKind::DecayingLine,
            vec![Delta {
                position: 0.0,
                strength: 2.0,
            }],
        );
        assert!(ok.is_ok());
        let off_node = Potential::new(
            SampledFn::zeros(g),
            BcKind::DecayingLine,
            vec![Delta {
                position: 0.03,
                strength: 2.0,
            }],
        );
        assert!(off_node.is_err());
        let on_edge = Potential::new(
            SampledFn::zeros(g),
            BcKind::DecayingLine,
            vec![Delta {
                position: -1.0,
                strength: 2.0,
            }],
        );
        assert!(on_edge.is_err());
        let periodic_edge = Potential::new(
            SampledFn::zeros(g),
            BcKind::Periodic,
            vec![Delta {
                position: -1.0,
                strength: 2.0,
            }],
        );
        assert!(periodic_edge.is_ok());
    }

    #[test]
    fn decaying_kinds_need_flat_edges() {
        let g = Grid::new(-1.0, 1.0, 201).unwrap();
        let slope = g.sample(|x| x).unwrap();
        assert!(Potential::new(slope.clone(), BcKind::DecayingLine, vec![]).is_err());
        assert!(Potential::new(slope.clone(), BcKind::HardWalls, vec![]).is_ok());
        let t = Potential::truncated(slope, BcKind::DecayingLine, vec![]).unwrap();
        assert!(t.truncated_tail());
    }
}
