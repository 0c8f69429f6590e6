//! Band structure of periodic systems and zone-edge control.
//!
//! A zone edge is a root of `|Δ(E)| = 2`, Δ being the trace of the one-period
//! transfer matrix. Edges that merely touch ±2 (a closed gap) are caught as
//! extrema of Δ between scan samples.

use rayon::prelude::*;

use crate::darboux::{shift_level, StepRecord, TransformOptions};
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, SampledFn};
use crate::potential::{BcKind, Delta, Potential};
use crate::solver::{band_discriminant, brent};

/// Scan step for the discriminant.
const SCAN_STEP: f64 = 0.01;
/// Bisection width for zone edges.
const EDGE_TOL: f64 = 1e-10;
/// Gaps narrower than this count as closed.
pub const GAP_CLOSED: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSystem {
    cell: Potential,
}

/// One allowed band, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zone {
    pub index: usize,
    pub e_lo: f64,
    pub e_hi: f64,
}

impl Zone {
    pub fn width(&self) -> f64 {
        self.e_hi - self.e_lo
    }
}

impl PeriodicSystem {
    /// `cell` spans one period; deltas may sit only on its left end, where
    /// they are counted once per period.
    pub fn new(cell: Potential) -> Result<Self> {
        if cell.bc() != BcKind::Periodic {
            return invalid("a periodic system needs a cell with periodic boundary kind");
        }
        let g = cell.grid();
        if cell.deltas().iter().any(|d| g.nearest_index(d.position) != 0) {
            return invalid("cell deltas must sit on the left cell edge");
        }
        Ok(Self { cell })
    }

    /// Dirac comb of strength `g` and period `a`.
    pub fn dirac_comb(g: f64, a: f64, per_pi: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && g.is_finite()) {
            return invalid("comb period must be positive and strength finite");
        }
        let grid = Grid::with_density(0.0, a, per_pi)?;
        let cell = Potential::new(
            SampledFn::zeros(grid),
            BcKind::Periodic,
            vec![Delta {
                position: 0.0,
                strength: g,
            }],
        )?;
        Self::new(cell)
    }

    pub fn cell(&self) -> &Potential {
        &self.cell
    }

    pub fn period(&self) -> f64 {
        self.cell.grid().x_max() - self.cell.grid().x_min()
    }

    pub fn discriminant(&self, energy: f64) -> f64 {
        band_discriminant(&self.cell, energy)
    }

    /// The cell with its edge deltas replaced by hard walls.
    pub fn auxiliary_box(&self) -> Result<Potential> {
        Potential::new(self.cell.body().clone(), BcKind::HardWalls, Vec::new())
    }
}

/// Energy below every zone.
fn scan_floor(p: &PeriodicSystem) -> f64 {
    let attractive: f64 = p
        .cell
        .deltas()
        .iter()
        .filter(|d| d.strength < 0.0)
        .map(|d| d.strength.abs() / p.period())
        .sum();
    let mut e = p.cell.body().min() - 1.0 - attractive * attractive - attractive;
    let mut step = 1.0;
    while p.discriminant(e).abs() <= 2.0 {
        e -= step;
        step *= 2.0;
    }
    e
}

fn bisect_edge(p: &PeriodicSystem, mut a: f64, mut b: f64) -> f64 {
    let excess = |e: f64| p.discriminant(e).abs() - 2.0;
    let fa = excess(a);
    while b - a > EDGE_TOL {
        let m = 0.5 * (a + b);
        if (excess(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Maximum of `|Δ|` on `[a, b]` by golden-section search.
fn refine_peak(p: &PeriodicSystem, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let f = |e: f64| p.discriminant(e).abs();
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > EDGE_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let e = 0.5 * (a + b);
    (e, f(e))
}

/// All zones with `E_lo < e_max`, the last one followed to its upper edge.
pub fn zones(p: &PeriodicSystem, e_max: f64) -> Result<Vec<Zone>> {
    let floor = scan_floor(p);
    if !(e_max.is_finite() && e_max > floor) {
        return invalid(format!("E_max = {e_max} lies below the spectrum"));
    }
    let limit = e_max + 10.0 * (e_max - floor) + 10.0;
    let h = (e_max - floor) / ((e_max - floor) / SCAN_STEP).ceil();
    let at = |i: usize| floor + i as f64 * h;
    let eval = |r: std::ops::Range<usize>| -> Vec<f64> {
        r.into_par_iter().map(|i| p.discriminant(at(i)).abs()).collect()
    };

    let mut d = eval(0..((e_max - floor) / h).round() as usize + 1);
    // (energy, opens a zone)
    let mut edges: Vec<(f64, bool)> = Vec::new();
    let mut i = 1;
    loop {
        while i < d.len() {
            scan_edges(p, &d, i, &at, &mut edges);
            i += 1;
        }
        let closed = edges.iter().any(|&(e, opens)| !opens && e >= e_max);
        if d[d.len() - 1] > 2.0 || closed {
            break;
        }
        let n = d.len();
        if at(n) > limit {
            return Err(Error::Numerical(format!(
                "the zone below E = {e_max} does not close before E = {limit}"
            )));
        }
        d.extend(eval(n..n + 256));
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for (e, opens) in edges {
        match (opens, open) {
            (true, None) => open = Some(e),
            (false, Some(lo)) => {
                if lo < e_max {
                    out.push(Zone {
                        index: out.len() + 1,
                        e_lo: lo,
                        e_hi: e,
                    });
                }
                open = None;
            }
            _ => {
                return Err(Error::Numerical(format!(
                    "inconsistent zone edges near E = {e}"
                )))
            }
        }
    }
    Ok(out)
}

fn scan_edges(
    p: &PeriodicSystem,
    d: &[f64],
    i: usize,
    at: &impl Fn(usize) -> f64,
    edges: &mut Vec<(f64, bool)>,
) {
    if (d[i - 1] > 2.0) != (d[i] > 2.0) {
        edges.push((bisect_edge(p, at(i - 1), at(i)), d[i] <= 2.0));
    } else if i >= 2
        && d[i] <= 2.0
        && d[i - 1] <= 2.0
        && d[i - 2] <= 2.0
        && d[i - 1] >= d[i - 2]
        && d[i - 1] >= d[i]
        && d[i - 1] > 2.0 - 1e-2
    {
        // a gap narrower than the scan step, or one that is closed
        let (ep, peak) = refine_peak(p, at(i - 2), at(i));
        if peak > 2.0 {
            edges.push((bisect_edge(p, at(i - 2), ep), false));
            edges.push((bisect_edge(p, ep, at(i)), true));
        } else if peak >= 2.0 - 1e-9 {
            edges.push((ep, false));
            edges.push((ep, true));
        }
    }
}

/// Gap between zones `k` and `k + 1`, zero when they touch.
pub fn gap_after(zones: &[Zone], k: usize) -> Option<f64> {
    let lower = zones.iter().find(|z| z.index == k)?;
    let upper = zones.iter().find(|z| z.index == k + 1)?;
    Some((upper.e_lo - lower.e_hi).max(0.0))
}

/// Periodic system after moving one level of the auxiliary hard-wall box.
#[derive(Debug, Clone)]
pub struct ZoneShift {
    pub system: PeriodicSystem,
    /// Moved auxiliary level, which stays a zone edge.
    pub edge: f64,
    pub record: StepRecord,
}

/// Moves the auxiliary box level `aux_level` (1-based) by `de` and adds the
/// resulting ΔV to the cell. The edge deltas are kept.
pub fn shift_zone(
    p: &PeriodicSystem,
    aux_level: usize,
    de: f64,
    opts: &TransformOptions,
) -> Result<ZoneShift> {
    let aux = p.auxiliary_box()?;
    let r = shift_level(&aux, &[], aux_level, de, opts)?;
    let dv = r.potential.body() - aux.body();
    let body = p.cell.body() + &dv;
    let cell = Potential::new(body, BcKind::Periodic, p.cell.deltas().to_vec())?;
    let edge = r
        .states
        .get(aux_level - 1)
        .map(|s| s.energy)
        .ok_or_else(|| Error::Numerical("shifted level missing from the result".into()))?;
    Ok(ZoneShift {
        system: PeriodicSystem::new(cell)?,
        edge,
        record: r.step_log.into_iter().next().ok_or_else(|| {
            Error::Numerical("shift produced no step record".into())
        })?,
    })
}

/// One row of a zone-shift sweep.
#[derive(Debug, Clone)]
pub struct ZoneTrack {
    pub de: f64,
    pub edge: f64,
    pub zones: Vec<Zone>,
    /// Gap between zones `aux_level` and `aux_level + 1`.
    pub gap: Option<f64>,
}

/// Recomputes the zones after each shift in `des`.
pub fn track_zone_shift(
    p: &PeriodicSystem,
    aux_level: usize,
    des: &[f64],
    e_max: f64,
    opts: &TransformOptions,
) -> Result<Vec<ZoneTrack>> {
    des.par_iter()
        .map(|&de| {
            let s = shift_zone(p, aux_level, de, opts)?;
            let z = zones(&s.system, e_max)?;
            Ok(ZoneTrack {
                de,
                edge: s.edge,
                gap: gap_after(&z, aux_level),
                zones: z,
            })
        })
        .collect()
}

/// `Δ·dΔ/dE` at the moved edge. Its sign tells whether the gap lies above
/// (positive) or below (negative) the edge and it vanishes when the gap closes.
fn edge_orientation(p: &PeriodicSystem, aux_level: usize, de: f64, opts: &TransformOptions) -> Result<f64> {
    let s = shift_zone(p, aux_level, de, opts)?;
    let step = 1e-5;
    let d = s.system.discriminant(s.edge);
    let slope = (s.system.discriminant(s.edge + step) - s.system.discriminant(s.edge - step)) / (2.0 * step);
    Ok(d * slope)
}

/// Shift `dE*` in `(lo, hi)` at which the gap next to the moved edge closes.
pub fn gap_closure(
    p: &PeriodicSystem,
    aux_level: usize,
    lo: f64,
    hi: f64,
    opts: &TransformOptions,
) -> Result<f64> {
    if !(lo < hi) {
        return invalid("closure bracket must satisfy lo < hi");
    }
    let samples = 16;
    let des: Vec<f64> = (0..=samples)
        .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
        .collect();
    let signs: Vec<f64> = des
        .par_iter()
        .map(|&de| edge_orientation(p, aux_level, de, opts))
        .collect::<Result<_>>()?;
    let i = (1..signs.len())
        .find(|&i| signs[i - 1].signum() != signs[i].signum())
        .ok_or_else(|| {
            Error::Numerical(format!("the gap does not close for dE in ({lo}, {hi})"))
        })?;
    let mut failure = None;
    let root = brent(
        |de| match edge_orientation(p, aux_level, de, opts) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        des[i - 1],
        des[i],
        1e-10,
        200,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    root.ok_or_else(|| Error::Numerical("gap closure search did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comb() -> PeriodicSystem {
        PeriodicSystem::dirac_comb(2.0, std::f64::consts::PI, 2000).unwrap()
    }

    #[test]
    fn comb_zones_end_at_squares() {
        let z = zones(&comb(), 10.0).unwrap();
        assert_eq!(z.len(), 3);
        for (k, zone) in z.iter().enumerate() {
            let n = (k + 1) as f64;
            assert!((zone.e_hi - n * n).abs() < 1e-8, "{zone:?}");
            assert!(zone.e_lo > (n - 1.0) * (n - 1.0));
        }
    }

    #[test]
    fn free_cell_zones_touch() {
        let grid = Grid::with_density(0.0, std::f64::consts::PI, 2000).unwrap();
        let p = PeriodicSystem::new(Potential::free(grid, BcKind::Periodic)).unwrap();
        let z = zones(&p, 10.0).unwrap();
        assert_eq!(z.len(), 4);
        for (k, zone) in z.iter().enumerate() {
            assert!((zone.e_lo - (k * k) as f64).abs() < 1e-6, "{zone:?}");
            assert!((zone.e_hi - ((k + 1) * (k + 1)) as f64).abs() < 1e-6, "{zone:?}");
        }
    }

    #[test]
    fn cell_deltas_must_sit_on_the_edge() {
        let grid = Grid::with_density(0.0, std::f64::consts::PI, 200).unwrap();
        let x = grid.x(grid.len() / 2);
        let cell = Potential::new(
            SampledFn::zeros(grid),
            BcKind::Periodic,
            vec![Delta {
                position: x,
                strength: 1.0,
            }],
        )
        .unwrap();
        assert!(PeriodicSystem::new(cell).is_err());
    }

    #[test]
    fn shifted_edge_stays_an_edge() {
        let p = comb();
        let opts = TransformOptions::default();
        let s = shift_zone(&p, 2, 1.0, &opts).unwrap();
        assert!((s.edge - 5.0).abs() < 1e-8);
        assert!((s.system.discriminant(s.edge).abs() - 2.0).abs() < 1e-6);
        let z = zones(&s.system, 10.0).unwrap();
        assert!(z.iter().any(|zone| (zone.e_hi - s.edge).abs() < 1e-6
            || (zone.e_lo - s.edge).abs() < 1e-6));
    }

    #[test]
    fn gap_closes_and_reopens() {
        let p = comb();
        let opts = TransformOptions::default();
        let de = gap_closure(&p, 2, 0.25, 4.75, &opts).unwrap();
        let s = shift_zone(&p, 2, de, &opts).unwrap();
        let z = zones(&s.system, 12.0).unwrap();
        assert!(gap_after(&z, 2).unwrap() < GAP_CLOSED);
        let des = [0.1, 0.2, 0.3, 0.4, 0.5, de + 0.2, de + 0.6, de + 1.2];
        let track = track_zone_shift(&p, 2, &des, 12.0, &opts).unwrap();
        let before: Vec<f64> = track[..5].iter().map(|t| t.gap.unwrap()).collect();
        assert!(before.windows(2).all(|w| w[1] < w[0]), "{before:?}");
        // past closure the third zone is squeezed between the edge and E = 9
        let third: Vec<f64> = track[5..].iter().map(|t| t.zones[2].width()).collect();
        assert!(third.windows(2).all(|w| w[1] < w[0]), "{third:?}");
        for t in &track[5..] {
            assert!((t.zones[2].e_lo - t.edge).abs() < 1e-6);
        }
    }

    #[test]
    fn stronger_comb_has_wider_gaps() {
        let weak = zones(&comb(), 10.0).unwrap();
        let strong = zones(
            &PeriodicSystem::dirac_comb(4.0, std::f64::consts::PI, 2000).unwrap(),
            10.0,
        )
        .unwrap();
        for k in 1..3 {
            assert!(gap_after(&strong, k).unwrap() > gap_after(&weak, k).unwrap());
        }
    }

    #[test]
    fn zero_shift_and_fixed_edges() {
        let p = comb();
        let opts = TransformOptions::default();
        let base = zones(&p, 10.0).unwrap();
        let same = zones(&shift_zone(&p, 2, 0.0, &opts).unwrap().system, 10.0).unwrap();
        for (a, b) in base.iter().zip(&same) {
            assert!((a.e_lo - b.e_lo).abs() < 1e-8 && (a.e_hi - b.e_hi).abs() < 1e-8);
        }
        let moved = zones(&shift_zone(&p, 2, 0.4, &opts).unwrap().system, 10.0).unwrap();
        assert!((moved[0].e_hi - 1.0).abs() < 1e-3);
        assert!((moved[2].e_hi - 9.0).abs() < 1e-3);
    }
}
