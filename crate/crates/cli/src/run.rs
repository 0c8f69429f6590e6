//! Executes a resolved configuration into an in-memory bundle.
//!
//! Nothing touches the disk here. A validation error surfaces as `Err` before
//! anything is written; a numerical failure is recorded in the manifest and
//! the bundle holds whatever was finished before it.

use std::f64::consts::PI;

use isodesign_core::bands::{gap_after, shift_zone, track_zone_shift, zones, ZoneTrack, GAP_CLOSED};
use isodesign_core::checks::{isospectrality_ledger, orthonormality_defect, ORTHONORMAL_TOL};
use isodesign_core::darboux::{apply, TransformOptions, TransformResult};
use isodesign_core::lattice::{residual, stark_ladder, LatticeBc, LatticeSystem, SpectrumEnd};
use isodesign_core::solver::{bound_state_count, scattering_sweep};
use isodesign_core::{
    bound_states, BcKind, BoundState, Delta, Error, Grid, PeriodicSystem, Potential, SampledFn,
};
use serde_json::json;

use crate::bundle::{header, Bundle, Cell};
use crate::config::{Base, Mode, RunConfig, Step};
use crate::error::{invalid, CliError, Result};
use crate::manifest::{Check, Manifest, Outcome, StepLog};

/// Grid intervals per π when `points` is not set.
pub const DEFAULT_DENSITY: usize = 2000;

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let mut manifest = Manifest::new(cfg.mode.name(), cfg.raw.clone());
    manifest.resolve("base", cfg.base.name());
    manifest.resolve("numerics", serde_json::to_value(&cfg.numerics)?);
    let mut bundle = Bundle::new();
    match cfg.mode {
        Mode::Solve | Mode::Design => continuum(cfg, &mut manifest, &mut bundle)?,
        Mode::Band => band(cfg, &mut manifest, &mut bundle)?,
        Mode::Lattice => lattice(cfg, &mut manifest, &mut bundle)?,
    }
    Ok(Outcome { bundle, manifest })
}

/// Splits core errors: validation aborts the run, anything else is recorded
/// as the failing phase.
fn record<T>(
    r: isodesign_core::Result<T>,
    manifest: &mut Manifest,
    index: usize,
    phase: &str,
) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Validation(msg)) => {
            let at = if index == 0 {
                phase.to_string()
            } else {
                format!("step {index}")
            };
            invalid(format!("{at}: {msg}"))
        }
        Err(e) => {
            manifest.fail(index, phase, e);
            Ok(None)
        }
    }
}

fn grid(cfg: &RunConfig, lo: f64, hi: f64) -> Result<Grid> {
    Ok(match cfg.numerics.points {
        Some(p) => Grid::new(lo, hi, p)?,
        None => Grid::with_density(lo, hi, DEFAULT_DENSITY)?,
    })
}

pub fn base_potential(cfg: &RunConfig) -> Result<Potential> {
    let l = cfg.numerics.truncation;
    Ok(match &cfg.base {
        Base::Box => Potential::hard_box(grid(cfg, -PI / 2.0, PI / 2.0)?),
        Base::FreeLine => Potential::free(grid(cfg, -l, l)?, BcKind::DecayingLine),
        Base::HalfLine => Potential::free(grid(cfg, 0.0, l)?, BcKind::DecayingHalfLine),
        Base::File { path, bc } => {
            if cfg.numerics.points.is_some() {
                return invalid("points cannot be set for a CSV base; its grid comes from the file");
            }
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Validation(format!("cannot read potential {}: {e}", path.display()))
            })?;
            Potential::new(SampledFn::from_csv(&text)?, *bc, Vec::new())?
        }
        other => return invalid(format!("base `{}` is not a continuum problem", other.name())),
    })
}

fn transform_options(cfg: &RunConfig) -> TransformOptions {
    TransformOptions {
        wall_cap: cfg.numerics.wall_cap,
        ..TransformOptions::default()
    }
}

fn is_bound(v: &Potential, s: &BoundState) -> bool {
    v.continuum_edge().map_or(true, |edge| s.energy < edge)
}

/// Isospectrality of every tracked bound state plus orthonormality.
fn oracle_checks(r: &TransformResult, tol: f64) -> isodesign_core::Result<(Vec<Check>, Vec<String>)> {
    let mut notes = Vec::new();
    let bound: Vec<BoundState> = r
        .states
        .iter()
        .filter(|s| is_bound(&r.potential, s))
        .cloned()
        .collect();
    for s in r.states.iter().filter(|s| !is_bound(&r.potential, s)) {
        notes.push(format!(
            "state at E = {} lies in the continuum; it is outside the bound-state oracle",
            s.energy
        ));
    }
    let probe = TransformResult {
        potential: r.potential.clone(),
        states: bound,
        step_log: Vec::new(),
    };
    let mut checks: Vec<Check> = isospectrality_ledger(&probe)?
        .iter()
        .map(|e| Check::against("isospectrality", e.level, e.declared, e.measured, tol))
        .collect();
    if !r.states.is_empty() {
        let d = orthonormality_defect(&r.states)?;
        checks.push(Check::new("orthonormality", d, d, ORTHONORMAL_TOL));
    }
    Ok((checks, notes))
}

fn continuum(cfg: &RunConfig, manifest: &mut Manifest, bundle: &mut Bundle) -> Result<()> {
    let base = base_potential(cfg)?;
    let g = *base.grid();
    manifest.resolve("bc", base.bc().name());
    manifest.resolve("x_min", g.x_min());
    manifest.resolve("x_max", g.x_max());
    manifest.resolve("points", g.len());
    manifest.resolve("spacing", g.spacing());
    let opts = transform_options(cfg);
    let tol = cfg.numerics.tol;

    let count = match base.continuum_edge() {
        None => Ok(cfg.numerics.states.unwrap_or(4)),
        Some(_) => bound_state_count(&base).map(|n| cfg.numerics.states.map_or(n, |s| s.min(n))),
    };
    let states = record(
        manifest.time("base", || {
            count.and_then(|n| if n == 0 { Ok(Vec::new()) } else { bound_states(&base, n) })
        }),
        manifest,
        0,
        "base",
    )?;
    let Some(mut states) = states else {
        emit_continuum(cfg, manifest, bundle, &base, &base, &[])?;
        return Ok(());
    };
    manifest.resolve("states", states.len());
    if !states.is_empty() {
        let d = orthonormality_defect(&states)?;
        manifest
            .base_checks
            .push(Check::new("orthonormality", d, d, ORTHONORMAL_TOL));
    }

    let mut v = base.clone();
    for (i, step) in cfg.steps.iter().enumerate() {
        let index = i + 1;
        let Step::Darboux(d) = step else {
            return invalid(format!("step {index}: `{}` needs the band command", step.kind()));
        };
        let phase = format!("step {index} {}", d.kind());
        let r = manifest.time(&phase, || apply(&v, &states, d, &opts));
        let Some(r) = record(r, manifest, index, d.kind())? else {
            break;
        };
        let mut log = StepLog::new(index, d.kind(), d.params());
        if let Some(rec) = r.step_log.last() {
            log.denominator_min = (rec.denominator_min > 0.0).then_some(rec.denominator_min);
            log.capped_points = rec.capped_points;
            log.notes = rec.notes.clone();
        }
        let checked = manifest.time(&format!("step {index} oracle"), || oracle_checks(&r, tol));
        let Some((checks, notes)) = record(checked, manifest, index, "oracle")? else {
            manifest.steps.push(log);
            break;
        };
        log.checks = checks;
        log.notes.extend(notes);
        manifest.steps.push(log);
        v = r.potential;
        states = r.states;
    }
    emit_continuum(cfg, manifest, bundle, &base, &v, &states)
}

fn emit_continuum(
    cfg: &RunConfig,
    manifest: &mut Manifest,
    bundle: &mut Bundle,
    base: &Potential,
    v: &Potential,
    states: &[BoundState],
) -> Result<()> {
    bundle.add_text("potential.csv", v.body().to_csv());

    let mut cols = vec!["x".to_string()];
    cols.extend((1..=states.len()).map(|n| format!("psi_{n}")));
    let rows: Vec<Vec<Cell>> = v
        .grid()
        .nodes()
        .enumerate()
        .map(|(i, x)| {
            let mut row = vec![Cell::from(x)];
            row.extend(states.iter().map(|s| Cell::from(s.psi.values()[i])));
            row
        })
        .collect();
    bundle.add_table("states.csv", &cols, &rows)?;

    let rows: Vec<Vec<Cell>> = states
        .iter()
        .enumerate()
        .map(|(i, s)| vec![Cell::from(i + 1), s.energy.into(), s.swf.into()])
        .collect();
    bundle.add_table("spectrum.csv", &header(&["n", "energy", "swf"]), &rows)?;

    if cfg.mode == Mode::Design {
        let rows: Vec<Vec<Cell>> = manifest
            .steps
            .iter()
            .map(|s| {
                vec![
                    Cell::from(s.index),
                    s.kind.as_str().into(),
                    s.params.as_str().into(),
                    s.denominator_min.into(),
                ]
            })
            .collect();
        bundle.add_table(
            "steplog.csv",
            &header(&["step", "kind", "params", "denominator_min"]),
            &rows,
        )?;
    }

    if v.bc() == BcKind::DecayingLine && manifest.failed_step.is_none() {
        let (vl, vr) = v.asymptotes();
        let edge = vl.max(vr);
        let e_max = cfg.numerics.e_max;
        if e_max > edge {
            let n = cfg.numerics.samples;
            let energies: Vec<f64> = (1..=n)
                .map(|i| edge + (e_max - edge) * i as f64 / n as f64)
                .collect();
            let sweep = manifest.time("scattering", || scattering_sweep(v, &energies));
            if let Some(sweep) = record(sweep, manifest, manifest.steps.len(), "scattering")? {
                let rows: Vec<Vec<Cell>> = sweep
                    .iter()
                    .map(|s| {
                        vec![
                            s.energy.into(),
                            s.r.norm().into(),
                            s.t.norm().into(),
                            s.r.arg().into(),
                        ]
                    })
                    .collect();
                bundle.add_table(
                    "scattering.csv",
                    &header(&["energy", "abs_R", "abs_T", "arg_R"]),
                    &rows,
                )?;
                let flux = sweep.iter().map(|s| (s.flux() - 1.0).abs()).fold(0.0, f64::max);
                manifest.note("max_flux_defect", flux);
            }
        }
    }

    manifest.note("final_max_abs_potential", v.body().max_abs());
    manifest.note(
        "final_max_deviation_from_base",
        (v.body() - base.body()).max_abs(),
    );
    manifest.note("levels", states.len());
    Ok(())
}

fn comb(cfg: &RunConfig, g: f64, a: f64) -> Result<PeriodicSystem> {
    let cell = Potential::new(
        SampledFn::zeros(grid(cfg, 0.0, a)?),
        BcKind::Periodic,
        vec![Delta {
            position: 0.0,
            strength: g,
        }],
    )?;
    Ok(PeriodicSystem::new(cell)?)
}

fn edge_check(name: &str, p: &PeriodicSystem, e: f64, level: usize, tol: f64) -> Check {
    let d = p.discriminant(e);
    Check {
        level: Some(level as i64),
        declared: Some(e),
        ..Check::new(name, d, (d.abs() - 2.0).abs(), tol)
    }
}

fn linspace(from: f64, to: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| from + (to - from) * i as f64 / (count - 1) as f64)
        .collect()
}

fn band(cfg: &RunConfig, manifest: &mut Manifest, bundle: &mut Bundle) -> Result<()> {
    let Base::Comb { g, a } = cfg.base else {
        return invalid("the band command needs base = comb");
    };
    let mut p = comb(cfg, g, a)?;
    let opts = transform_options(cfg);
    let tol = cfg.numerics.tol;
    let e_max = cfg.numerics.e_max;
    manifest.resolve("points", p.cell().grid().len());
    manifest.note("g", g);
    manifest.note("a", a);

    // hard-wall levels of the cell are zone edges
    let k0 = PI / a;
    let aux: Vec<f64> = (1..)
        .map(|k| (k as f64 * k0).powi(2))
        .take_while(|&e| e <= e_max)
        .collect();
    for (k, e) in aux.iter().enumerate() {
        manifest
            .base_checks
            .push(edge_check("auxiliary-edge", &p, *e, k + 1, tol));
    }

    let mut track: Vec<ZoneTrack> = Vec::new();
    let mut closures = Vec::new();
    for (i, step) in cfg.steps.iter().enumerate() {
        let index = i + 1;
        let mut log = StepLog::new(index, step.kind(), step.params());
        let phase = format!("step {index} {}", step.kind());
        match *step {
            Step::ZoneShift { level, de } => {
                let r = manifest.time(&phase, || shift_zone(&p, level, de, &opts));
                let Some(s) = record(r, manifest, index, step.kind())? else {
                    break;
                };
                log.denominator_min = (s.record.denominator_min > 0.0).then_some(s.record.denominator_min);
                log.notes = s.record.notes.clone();
                log.checks.push(edge_check("moved-edge", &s.system, s.edge, level, tol));
                p = s.system;
            }
            Step::ZoneTrack {
                level,
                from,
                to,
                count,
            } => {
                let des = linspace(from, to, count);
                let r = manifest.time(&phase, || track_zone_shift(&p, level, &des, e_max, &opts));
                let Some(rows) = record(r, manifest, index, step.kind())? else {
                    break;
                };
                log.notes.push(format!("{} shifts tracked", rows.len()));
                track.extend(rows);
            }
            Step::GapClosure { level, lo, hi } => {
                let r = manifest.time(&phase, || {
                    isodesign_core::bands::gap_closure(&p, level, lo, hi, &opts).and_then(|de| {
                        let s = shift_zone(&p, level, de, &opts)?;
                        let z = zones(&s.system, e_max)?;
                        Ok((de, s.edge, gap_after(&z, level)))
                    })
                });
                let Some((de, edge, gap)) = record(r, manifest, index, step.kind())? else {
                    break;
                };
                let gap = gap.unwrap_or(0.0);
                log.notes.push(format!("dE* = {de}, edge at {edge}"));
                log.checks.push(Check::new("closed-gap", gap, gap, GAP_CLOSED));
                closures.push(json!({ "level": level, "dE_star": de, "edge": edge, "gap": gap }));
                manifest.note("dE_star", de);
            }
            Step::Darboux(_) => {
                return invalid(format!("step {index}: `{}` needs the design command", step.kind()))
            }
        }
        manifest.steps.push(log);
    }
    if !closures.is_empty() {
        manifest.note("gap_closures", closures);
    }

    bundle.add_text("potential.csv", p.cell().body().to_csv());
    if !track.is_empty() {
        let rows: Vec<Vec<Cell>> = track
            .iter()
            .map(|t| vec![t.de.into(), t.edge.into(), t.gap.into()])
            .collect();
        bundle.add_table(
            "zone_track.csv",
            &header(&["dE", "edge_energy", "gap_width"]),
            &rows,
        )?;
    }
    if manifest.failed_step.is_some() {
        return Ok(());
    }
    let z = manifest.time("zones", || zones(&p, e_max));
    if let Some(z) = record(z, manifest, 0, "zones")? {
        let rows: Vec<Vec<Cell>> = z
            .iter()
            .map(|z| vec![z.index.into(), z.e_lo.into(), z.e_hi.into()])
            .collect();
        bundle.add_table("zones.csv", &header(&["index", "E_lo", "E_hi"]), &rows)?;
        manifest.note("zone_count", z.len());
        let e_lo = z.first().map_or(0.0, |z| z.e_lo.min(0.0)) - 1.0;
        let n = cfg.numerics.samples;
        let rows: Vec<Vec<Cell>> = linspace(e_lo, e_max, n)
            .into_iter()
            .map(|e| vec![e.into(), p.discriminant(e).into()])
            .collect();
        bundle.add_table("discriminant.csv", &header(&["energy", "delta"]), &rows)?;
    }
    Ok(())
}

fn lattice(cfg: &RunConfig, manifest: &mut Manifest, bundle: &mut Bundle) -> Result<()> {
    let tol = cfg.numerics.tol;
    let (sys, labels, states) = match &cfg.base {
        Base::LatticeStark {
            c,
            half_width,
            orders,
        } => {
            let window = -half_width..=*half_width;
            let sys = LatticeSystem::linear(*c, window.clone())?;
            let r = manifest.time("ladder", || stark_ladder(*c, window, orders.clone()));
            let Some(ladder) = record(r, manifest, 0, "ladder")? else {
                emit_lattice_potential(bundle, &sys)?;
                return Ok(());
            };
            for rung in &ladder {
                manifest.base_checks.push(Check {
                    level: Some(rung.m),
                    ..Check::new("bessel-recurrence", rung.bessel_residual, rung.bessel_residual, tol)
                });
            }
            for w in ladder.windows(2) {
                let spacing = w[1].state.energy - w[0].state.energy;
                manifest.base_checks.push(Check {
                    declared: Some(*c),
                    ..Check::new("ladder-spacing", spacing, (spacing - c).abs(), tol)
                });
            }
            manifest.note("slope", *c);
            let labels = ladder.iter().map(|r| r.m).collect::<Vec<_>>();
            let states = ladder.into_iter().map(|r| r.state).collect::<Vec<_>>();
            (sys, labels, states)
        }
        Base::LatticeSingle { v0, half_width, bc } => {
            let sys = LatticeSystem::single_site(*v0, *half_width, *bc)?;
            let end = cfg.lattice_end.unwrap_or(if *v0 > 0.0 {
                SpectrumEnd::Highest
            } else {
                SpectrumEnd::Lowest
            });
            let Some(states) = lattice_states(cfg, manifest, bundle, &sys, 1, end)? else {
                return Ok(());
            };
            (sys, (1..=states.len() as i64).collect(), states)
        }
        Base::LatticeFree { half_width, bc } => {
            let sys = LatticeSystem::from_fn(-half_width..=*half_width, *bc, |_| 0.0)?;
            let end = cfg.lattice_end.unwrap_or(SpectrumEnd::Lowest);
            let Some(states) = lattice_states(cfg, manifest, bundle, &sys, 4, end)? else {
                return Ok(());
            };
            (sys, (1..=states.len() as i64).collect(), states)
        }
        other => return invalid(format!("base `{}` is not a lattice", other.name())),
    };
    manifest.resolve("sites", sys.len());
    manifest.resolve(
        "lattice_bc",
        match sys.bc() {
            LatticeBc::HardWalls => "hard-walls",
            LatticeBc::Decaying => "decaying",
        },
    );
    for (label, st) in labels.iter().zip(&states) {
        let r = residual(&sys, st);
        manifest.base_checks.push(Check {
            level: Some(*label),
            ..Check::new("eigen-residual", r, r, tol)
        });
    }
    emit_lattice_potential(bundle, &sys)?;
    let mut cols = vec!["n".to_string()];
    cols.extend(labels.iter().map(|m| format!("psi_{m}")));
    let rows: Vec<Vec<Cell>> = sys
        .sites()
        .enumerate()
        .map(|(i, n)| {
            let mut row = vec![Cell::from(n)];
            row.extend(states.iter().map(|s| Cell::from(s.psi[i])));
            row
        })
        .collect();
    bundle.add_table("lattice_states.csv", &cols, &rows)?;
    let rows: Vec<Vec<Cell>> = labels
        .iter()
        .zip(&states)
        .map(|(m, s)| vec![Cell::from(*m), s.energy.into()])
        .collect();
    bundle.add_table("lattice_spectrum.csv", &header(&["m", "energy"]), &rows)?;
    Ok(())
}

fn lattice_states(
    cfg: &RunConfig,
    manifest: &mut Manifest,
    bundle: &mut Bundle,
    sys: &LatticeSystem,
    default_count: usize,
    end: SpectrumEnd,
) -> Result<Option<Vec<isodesign_core::LatticeState>>> {
    let count = cfg.numerics.states.unwrap_or(default_count);
    let r = manifest.time("states", || sys.states(count, end));
    let states = record(r, manifest, 0, "states")?;
    if states.is_none() {
        emit_lattice_potential(bundle, sys)?;
    }
    Ok(states)
}

fn emit_lattice_potential(bundle: &mut Bundle, sys: &LatticeSystem) -> Result<()> {
    let rows: Vec<Vec<Cell>> = sys
        .sites()
        .zip(sys.potential())
        .map(|(n, v)| vec![Cell::from(n), (*v).into()])
        .collect();
    bundle.add_table("lattice_potential.csv", &header(&["n", "V"]), &rows)
}
