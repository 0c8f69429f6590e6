//! Named example potentials shared by the property suites.

use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::grid::Grid;
use crate::potential::{BcKind, Potential};

/// Grid intervals per π used by the corpus.
pub const CORPUS_DENSITY: usize = 2000;

#[derive(Debug, Clone)]
pub struct Example {
    pub name: &'static str,
    pub potential: Potential,
}

fn sampled(x_min: f64, x_max: f64, bc: BcKind, f: impl Fn(f64) -> f64) -> Result<Potential> {
    let grid = Grid::with_density(x_min, x_max, CORPUS_DENSITY)?;
    Potential::new(grid.sample(f)?, bc, Vec::new())
}

fn sech2(x: f64) -> f64 {
    1.0 / x.cosh().powi(2)
}

/// Flat box of width π.
pub fn unit_box() -> Result<Potential> {
    sampled(-FRAC_PI_2, FRAC_PI_2, BcKind::HardWalls, |_| 0.0)
}

/// One-level soliton well `−2 sech²x`.
pub fn soliton_line() -> Result<Potential> {
    sampled(-20.0, 20.0, BcKind::DecayingLine, |x| -2.0 * sech2(x))
}

/// The potentials every property suite runs on.
pub fn examples() -> Result<Vec<Example>> {
    Ok(vec![
        Example {
            name: "box",
            potential: unit_box()?,
        },
        Example {
            name: "tilted-box",
            potential: sampled(-FRAC_PI_2, FRAC_PI_2, BcKind::HardWalls, |x| 2.0 * x)?,
        },
        Example {
            name: "oscillator-box",
            potential: sampled(-6.0, 6.0, BcKind::HardWalls, |x| x * x)?,
        },
        Example {
            name: "soliton-line",
            potential: soliton_line()?,
        },
        Example {
            name: "two-level-line",
            potential: sampled(-20.0, 20.0, BcKind::DecayingLine, |x| -6.0 * sech2(x))?,
        },
        Example {
            name: "half-line-well",
            potential: sampled(0.0, 24.0, BcKind::DecayingHalfLine, |x| {
                -6.0 * sech2(x - 4.0)
            })?,
        },
    ])
}
