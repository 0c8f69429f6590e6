//! Figure bundles: the data behind each documented layout, one CSV per
//! panel with one column per curve, plus a README and a manifest.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use isodesign_core::bands::{gap_closure, track_zone_shift, ZoneTrack};
use isodesign_core::checks::{isospectrality_ledger, orthonormality_defect, ORTHONORMAL_TOL};
use isodesign_core::darboux::{
    bargmann_reflectionless, bsec_whole_line, darboux_create, degeneration_family, embed_bsec,
    resonance_fwhm, scale_swf, shift_level, symmetric_norms, TransformOptions, TransformResult,
};
use isodesign_core::lattice::{residual, stark_ladder, LatticeBc, LatticeSystem, SpectrumEnd};
use isodesign_core::solver::scattering_sweep;
use isodesign_core::{bound_states, BcKind, Grid, PeriodicSystem, Potential, SampledFn};

use crate::bundle::{Bundle, Cell};
use crate::config::RawConfig;
use crate::error::{CliError, Result};
use crate::manifest::{Check, Manifest, Outcome, StepLog};
use crate::run::DEFAULT_DENSITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureTag {
    Fig1_1,
    Fig1_2,
    Fig1_6,
    Fig2_1,
    Fig2_5,
    Fig4_1,
    Fig5_1,
    Fig6_13,
    Fig6_14,
    Fig6_22,
    Fig7_6,
    Fig7_13,
}

impl FigureTag {
    pub const ALL: [FigureTag; 12] = [
        FigureTag::Fig1_1,
        FigureTag::Fig1_2,
        FigureTag::Fig1_6,
        FigureTag::Fig2_1,
        FigureTag::Fig2_5,
        FigureTag::Fig4_1,
        FigureTag::Fig5_1,
        FigureTag::Fig6_13,
        FigureTag::Fig6_14,
        FigureTag::Fig6_22,
        FigureTag::Fig7_6,
        FigureTag::Fig7_13,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureTag::Fig1_1 => "fig1_1",
            FigureTag::Fig1_2 => "fig1_2",
            FigureTag::Fig1_6 => "fig1_6",
            FigureTag::Fig2_1 => "fig2_1",
            FigureTag::Fig2_5 => "fig2_5",
            FigureTag::Fig4_1 => "fig4_1",
            FigureTag::Fig5_1 => "fig5_1",
            FigureTag::Fig6_13 => "fig6_13",
            FigureTag::Fig6_14 => "fig6_14",
            FigureTag::Fig6_22 => "fig6_22",
            FigureTag::Fig7_6 => "fig7_6",
            FigureTag::Fig7_13 => "fig7_13",
        }
    }

    /// Figure number encoded in the tag, `fig6_22` → `6.22`.
    pub fn figure_number(self) -> String {
        self.name().trim_start_matches("fig").replace('_', ".")
    }

    fn summary(self) -> &'static str {
        match self {
            FigureTag::Fig1_1 => "Box ground level moved from 1 to -4; other levels fixed.",
            FigureTag::Fig1_2 => "Box ground level raised towards the second level.",
            FigureTag::Fig1_6 => "Bound levels split off the free continuum by reflectionless wells.",
            FigureTag::Fig2_1 => "Box ground-state spectral weight increased; every level fixed.",
            FigureTag::Fig2_5 => "Ground state of a finite well pressed out by decreasing its spectral weight.",
            FigureTag::Fig4_1 => "Reflectionless wells sharing the lowest eight levels of a linear, an oscillator and a box well.",
            FigureTag::Fig5_1 => "Box level 2 brought towards level 3.",
            FigureTag::Fig6_13 => "Bound state embedded in the continuum of a half-line potential.",
            FigureTag::Fig6_14 => "Whole-line reflection of the embedding potential for several spectral weights.",
            FigureTag::Fig6_22 => "Dirac comb zones while one auxiliary level is shifted.",
            FigureTag::Fig7_6 => "Lattice state above the band in a one-site barrier.",
            FigureTag::Fig7_13 => "Wannier-Stark ladder states on linear slopes.",
        }
    }
}

impl FromStr for FigureTag {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| {
            let tags: Vec<&str> = Self::ALL.iter().map(|t| t.name()).collect();
            CliError::Validation(format!("unknown figure tag `{s}`; known tags: {}", tags.join(", ")))
        })
    }
}

/// Columns sharing one abscissa.
struct Panel {
    file: String,
    about: String,
    columns: Vec<String>,
    data: Vec<Vec<Cell>>,
}

impl Panel {
    fn new(file: impl Into<String>, about: impl Into<String>, axis: &str, xs: Vec<Cell>) -> Self {
        Self {
            file: file.into(),
            about: about.into(),
            columns: vec![axis.to_string()],
            data: vec![xs],
        }
    }

    fn grid(file: impl Into<String>, about: impl Into<String>, g: &Grid) -> Self {
        Self::new(file, about, "x", g.nodes().map(Cell::from).collect())
    }

    fn col(&mut self, name: impl Into<String>, values: impl IntoIterator<Item = f64>) {
        self.columns.push(name.into());
        self.data.push(values.into_iter().map(Cell::from).collect());
    }

    fn cells(&mut self, name: impl Into<String>, values: Vec<Cell>) {
        self.columns.push(name.into());
        self.data.push(values);
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        let n = self.data[0].len();
        (0..n)
            .map(|i| {
                self.data
                    .iter()
                    .map(|c| c.get(i).cloned().unwrap_or(Cell::Empty))
                    .collect()
            })
            .collect()
    }
}

struct Figure {
    tag: FigureTag,
    manifest: Manifest,
    panels: Vec<Panel>,
    opts: TransformOptions,
    points: Option<usize>,
}

impl Figure {
    fn grid(&self, lo: f64, hi: f64) -> Result<Grid> {
        Ok(match self.points {
            Some(p) => Grid::new(lo, hi, p)?,
            None => Grid::with_density(lo, hi, DEFAULT_DENSITY)?,
        })
    }

    fn unit_box(&self) -> Result<Potential> {
        Ok(Potential::hard_box(self.grid(-PI / 2.0, PI / 2.0)?))
    }

    fn free_line(&self, l: f64) -> Result<Potential> {
        Ok(Potential::free(self.grid(-l, l)?, BcKind::DecayingLine))
    }

    /// Logs a transformation with its isospectrality and orthonormality checks.
    fn log(&mut self, r: &TransformResult, label: &str, tol: f64) -> Result<()> {
        let index = self.manifest.steps.len() + 1;
        let rec = r.step_log.last();
        let mut log = StepLog::new(
            index,
            rec.map_or("transform", |s| s.step.kind()),
            format!("{label}: {}", rec.map(|s| s.step.params()).unwrap_or_default()),
        );
        if let Some(rec) = rec {
            log.denominator_min = (rec.denominator_min > 0.0).then_some(rec.denominator_min);
            log.capped_points = rec.capped_points;
            log.notes = rec.notes.clone();
        }
        let bound = r
            .states
            .iter()
            .all(|s| r.potential.continuum_edge().map_or(true, |e| s.energy < e));
        if bound {
            for e in isospectrality_ledger(r)? {
                log.checks
                    .push(Check::against("isospectrality", e.level, e.declared, e.measured, tol));
            }
        }
        if !r.states.is_empty() {
            let d = orthonormality_defect(&r.states)?;
            log.checks
                .push(Check::new("orthonormality", d, d, ORTHONORMAL_TOL));
        }
        self.manifest.steps.push(log);
        Ok(())
    }

    fn check(&mut self, c: Check) {
        self.manifest.base_checks.push(c);
    }

    fn finish(mut self) -> Result<Outcome> {
        let mut bundle = Bundle::new();
        let mut readme = format!(
            "# {}\n\nMirrors figure {} of the reference text.\n\n{}\n\n",
            self.tag.name(),
            self.tag.figure_number(),
            self.tag.summary()
        );
        for p in &self.panels {
            bundle.add_table(&p.file, &p.columns, &p.rows())?;
            let _ = writeln!(readme, "- `{}`: {} Columns: {}.", p.file, p.about, p.columns.join(", "));
        }
        readme.push_str("\nOracle checks and parameters are in `manifest.json`.\n");
        bundle.add_text("README.md", readme);
        self.manifest.resolve("tag", self.tag.name());
        Ok(Outcome {
            bundle,
            manifest: self.manifest,
        })
    }
}

fn offset(psi: &SampledFn, e: f64) -> Vec<f64> {
    psi.values().iter().map(|p| p + e).collect()
}

fn label(v: f64) -> String {
    format!("{v}")
}

/// Builds the bundle for `tag`. `points` overrides the grid size of the
/// continuum layouts.
pub fn emit(tag: FigureTag, points: Option<usize>) -> Result<Outcome> {
    if let Some(p) = points {
        if p < 3 || p % 2 == 0 {
            return Err(CliError::Validation(format!(
                "points = {p}: need an odd count of at least 3"
            )));
        }
    }
    let mut raw = RawConfig::default();
    raw.set("tag", tag.name());
    if let Some(p) = points {
        raw.set("points", p.to_string());
    }
    let mut f = Figure {
        tag,
        manifest: Manifest::new("figure", raw),
        panels: Vec::new(),
        opts: TransformOptions::default(),
        points,
    };
    let t = std::time::Instant::now();
    match tag {
        FigureTag::Fig1_1 => fig1_1(&mut f)?,
        FigureTag::Fig1_2 => fig1_2(&mut f)?,
        FigureTag::Fig1_6 => fig1_6(&mut f)?,
        FigureTag::Fig2_1 => fig2_1(&mut f)?,
        FigureTag::Fig2_5 => fig2_5(&mut f)?,
        FigureTag::Fig4_1 => fig4_1(&mut f)?,
        FigureTag::Fig5_1 => fig5_1(&mut f)?,
        FigureTag::Fig6_13 => fig6_13(&mut f)?,
        FigureTag::Fig6_14 => fig6_14(&mut f)?,
        FigureTag::Fig6_22 => fig6_22(&mut f)?,
        FigureTag::Fig7_6 => fig7_6(&mut f)?,
        FigureTag::Fig7_13 => fig7_13(&mut f)?,
    }
    f.manifest.timings.push(crate::manifest::Timing {
        phase: tag.name().to_string(),
        seconds: t.elapsed().as_secs_f64(),
    });
    f.finish()
}

const TOL: f64 = 1e-5;

fn fig1_1(f: &mut Figure) -> Result<()> {
    let v0 = f.unit_box()?;
    let s0 = bound_states(&v0, 4)?;
    let r = shift_level(&v0, &s0, 1, -5.0, &f.opts)?;
    f.log(&r, "main", TOL)?;
    let g = *v0.grid();
    let mut p = Panel::grid("fig1_1.csv", "Shifted potential, its change and the first two states drawn at their energies.", &g);
    p.col("V", r.potential.body().values().to_vec());
    p.col("dV", (r.potential.body() - v0.body()).into_values());
    p.col("psi1_offset", offset(&r.states[0].psi, r.states[0].energy));
    p.col("psi2_offset", offset(&r.states[1].psi, r.states[1].energy));
    p.col("psi1_0_offset", offset(&s0[0].psi, s0[0].energy));
    p.col("psi2_0_offset", offset(&s0[1].psi, s0[1].energy));
    f.panels.push(p);

    let mut e = Panel::grid("fig1_1_evolution.csv", "Potential and ground state for intermediate shifts.", &g);
    for de in [-1.0, -2.0, -3.0] {
        let r = shift_level(&v0, &s0, 1, de, &f.opts)?;
        f.log(&r, &format!("dE={de}"), TOL)?;
        e.col(format!("V_dE{}", label(de)), r.potential.body().values().to_vec());
        e.col(format!("psi1_dE{}", label(de)), r.states[0].psi.values().to_vec());
    }
    f.panels.push(e);
    Ok(())
}

fn fig1_2(f: &mut Figure) -> Result<()> {
    let v0 = f.unit_box()?;
    let s0 = bound_states(&v0, 4)?;
    let g = *v0.grid();
    let mut p = Panel::grid("fig1_2.csv", "Potential and ground state while the ground level is raised.", &g);
    for de in [1.0, 2.0, 2.5] {
        let r = shift_level(&v0, &s0, 1, de, &f.opts)?;
        f.log(&r, &format!("dE={de}"), TOL)?;
        p.col(format!("V_dE{}", label(de)), r.potential.body().values().to_vec());
        p.col(format!("psi1_dE{}", label(de)), r.states[0].psi.values().to_vec());
        p.col(format!("psi2_offset_dE{}", label(de)), offset(&r.states[1].psi, r.states[1].energy));
    }
    p.col("abs_psi2_0", s0[1].psi.values().iter().map(|x| x.abs()));
    f.panels.push(p);
    Ok(())
}

fn fig1_6(f: &mut Figure) -> Result<()> {
    let v0 = f.free_line(20.0)?;
    let one = darboux_create(&v0, &[], -1.0, 0.5, &f.opts)?;
    f.log(&one, "one level", TOL)?;
    let kappas = [1.0, 2.0];
    let two = bargmann_reflectionless(*v0.grid(), &kappas, &symmetric_norms(&kappas)?, &f.opts)?;
    f.log(&two, "two levels", TOL)?;
    let mut p = Panel::grid("fig1_6.csv", "Reflectionless wells with one and two bound levels and their states.", v0.grid());
    p.col("V_one", one.potential.body().values().to_vec());
    p.col("psi1_one", one.states[0].psi.values().to_vec());
    p.col("V_two", two.potential.body().values().to_vec());
    p.col("psi1_two", two.states[0].psi.values().to_vec());
    p.col("psi2_two", two.states[1].psi.values().to_vec());
    f.panels.push(p);

    let energies: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
    let mut r = Panel::new("fig1_6_reflection.csv", "Reflection amplitude of both wells.", "energy", energies.iter().map(|e| Cell::from(*e)).collect());
    for (name, v) in [("one", &one.potential), ("two", &two.potential)] {
        let sweep = scattering_sweep(v, &energies)?;
        let worst = sweep.iter().map(|s| s.r.norm()).fold(0.0, f64::max);
        f.check(Check::new(&format!("reflectionless-{name}"), worst, worst, 1e-6));
        r.col(format!("abs_R_{name}"), sweep.iter().map(|s| s.r.norm()));
    }
    f.panels.push(r);
    Ok(())
}

fn fig2_1(f: &mut Figure) -> Result<()> {
    let v0 = f.unit_box()?;
    let s0 = bound_states(&v0, 4)?;
    let mut p = Panel::grid("fig2_1.csv", "Potential and the first two states as the ground-state weight grows.", v0.grid());
    p.col("psi1_0_offset", offset(&s0[0].psi, s0[0].energy));
    p.col("psi2_0_offset", offset(&s0[1].psi, s0[1].energy));
    for m in [2.0, 5.0, 10.0, 20.0] {
        let r = scale_swf(&v0, &s0, 1, m * m - 1.0, &f.opts)?;
        f.log(&r, &format!("c1 x{m}"), TOL)?;
        let ratio = r.states[0].swf / s0[0].swf;
        f.check(Check {
            declared: Some(m),
            ..Check::new("swf-ratio", ratio, (ratio - m).abs(), 1e-6)
        });
        p.col(format!("V_x{m}"), r.potential.body().values().to_vec());
        p.col(format!("psi1_x{m}"), r.states[0].psi.values().to_vec());
        p.col(format!("psi2_x{m}"), r.states[1].psi.values().to_vec());
    }
    f.panels.push(p);
    Ok(())
}

fn fig2_5(f: &mut Figure) -> Result<()> {
    // finite well of depth 20 and width 2 against a wall, edge smoothed over 0.05
    let g = f.grid(0.0, 20.0)?;
    let body = g.sample(|x| -20.0 / (1.0 + ((x - 2.0) / 0.05).exp()))?;
    let v0 = Potential::new(body, BcKind::DecayingHalfLine, Vec::new())?;
    let s0 = bound_states(&v0, 2)?;
    let mut p = Panel::grid("fig2_5.csv", "Finite well and its first two states as the ground-state weight shrinks.", &g);
    p.col("V_0", v0.body().values().to_vec());
    p.col("psi1_0", s0[0].psi.values().to_vec());
    p.col("psi2_0", s0[1].psi.values().to_vec());
    for m in [0.5, 0.1, 0.01] {
        let r = scale_swf(&v0, &s0, 1, m * m - 1.0, &f.opts)?;
        f.log(&r, &format!("c1 x{m}"), TOL)?;
        p.col(format!("V_x{m}"), r.potential.body().values().to_vec());
        p.col(format!("psi1_x{m}"), r.states[0].psi.values().to_vec());
        p.col(format!("psi2_x{m}"), r.states[1].psi.values().to_vec());
    }
    f.panels.push(p);
    Ok(())
}

fn fig4_1(f: &mut Figure) -> Result<()> {
    let levels = 8;
    let linear = Potential::new(
        Grid::with_density(-15.0, 15.0, DEFAULT_DENSITY)?.sample(f64::abs)?,
        BcKind::HardWalls,
        Vec::new(),
    )?;
    let linear: Vec<f64> = bound_states(&linear, levels)?
        .iter()
        .map(|s| s.energy)
        .collect();
    let oscillator: Vec<f64> = (0..levels).map(|m| 2.0 * m as f64 + 1.0).collect();
    let square: Vec<f64> = (1..=levels).map(|m| (m * m) as f64).collect();
    let line = f.free_line(20.0)?;
    let g = *line.grid();
    let mut p = Panel::grid("fig4_1.csv", "Reflectionless wells raised by the offset that aligns their spectra, next to the wells they imitate.", &g);
    let refs: [(&str, &[f64], Box<dyn Fn(f64) -> Option<f64>>); 3] = [
        ("linear", &linear, Box::new(|x: f64| Some(x.abs()))),
        ("oscillator", &oscillator, Box::new(|x: f64| Some(x * x))),
        ("box", &square, Box::new(|x: f64| (x.abs() <= PI / 2.0).then_some(0.0))),
    ];
    for (name, spectrum, reference) in refs {
        let shift = spectrum[levels - 1] + 1.0;
        let kappas: Vec<f64> = spectrum.iter().rev().map(|e| (shift - e).sqrt()).collect();
        let r = bargmann_reflectionless(g, &kappas, &symmetric_norms(&kappas)?, &f.opts)?;
        f.log(&r, name, 1e-4)?;
        p.col(format!("V_{name}"), r.potential.body().values().iter().map(|v| v + shift));
        p.cells(format!("V_{name}_ref"), g.nodes().map(|x| Cell::from(reference(x))).collect());
        let worst = scattering_sweep(&r.potential, &[0.5, 2.0, 8.0])?
            .iter()
            .map(|s| s.r.norm())
            .fold(0.0, f64::max);
        f.check(Check::new(&format!("reflectionless-{name}"), worst, worst, 1e-5));
    }
    f.panels.push(p);
    Ok(())
}

fn fig5_1(f: &mut Figure) -> Result<()> {
    let v0 = f.unit_box()?;
    let s0 = bound_states(&v0, 4)?;
    let gaps = [4.0, 2.0, 1.0, 0.1];
    let family = degeneration_family(&v0, &s0, 2, &gaps, &f.opts)?;
    let mut p = Panel::grid("fig5_1.csv", "Potential and levels 2 and 3 as their gap closes.", v0.grid());
    for (gap, r) in gaps.iter().zip(&family) {
        f.log(r, &format!("gap {gap}"), TOL)?;
        p.col(format!("V_gap{gap}"), r.potential.body().values().to_vec());
        p.col(format!("psi2_gap{gap}"), r.states[1].psi.values().to_vec());
        p.col(format!("psi3_gap{gap}"), r.states[2].psi.values().to_vec());
    }
    f.panels.push(p);
    Ok(())
}

fn fig6_13(f: &mut Figure) -> Result<()> {
    let g = f.grid(0.0, 40.0 * PI)?;
    let r = embed_bsec(1.0, 1.0, g, &f.opts)?;
    f.log(&r, "E=1", TOL)?;
    let mut p = Panel::grid("fig6_13.csv", "Embedding potential and its state at E = 1.", &g);
    p.col("V", r.potential.body().values().to_vec());
    p.col("psi", r.states[0].psi.values().to_vec());
    f.panels.push(p);
    Ok(())
}

fn fig6_14(f: &mut Figure) -> Result<()> {
    let k = 10f64.sqrt();
    // coarse away from the resonance, fine across it
    let mut energies: Vec<f64> = (0..158).map(|i| 2.0 + 0.05 * i as f64).collect();
    energies.extend((0..400).map(|i| 9.9 + 0.0005 * i as f64));
    energies.extend((0..=198).map(|i| 10.1 + 0.05 * i as f64));
    let mut p = Panel::new("fig6_14.csv", "Whole-line reflection amplitude near the embedded level E = 10.", "energy", energies.iter().map(|e| Cell::from(*e)).collect());
    let mut widths = Vec::new();
    let mut peaks = Vec::new();
    for lambda in [0.5, 1.0, 2.0] {
        let v = bsec_whole_line(k, lambda, 10.0, 40.0 * PI, DEFAULT_DENSITY)?;
        let r: Vec<f64> = scattering_sweep(&v, &energies)?
            .iter()
            .map(|s| s.r.norm())
            .collect();
        let (at, peak) = r
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (energies[i], *v))
            .unwrap_or((f64::NAN, f64::NAN));
        // total reflection is asserted at the reference weight; smaller
        // weights leak more through the truncated tail
        if lambda == 1.0 {
            f.check(Check {
                declared: Some(1.0),
                ..Check::new("peak-lambda-1", peak, 1.0 - peak, 1e-3)
            });
        }
        peaks.push(peak);
        f.check(Check {
            declared: Some(10.0),
            ..Check::new(&format!("peak-energy-lambda-{lambda}"), at, (at - 10.0).abs(), 0.05)
        });
        widths.push(resonance_fwhm(&energies, &r));
        p.col(format!("abs_R_lambda{lambda}"), r);
    }
    f.manifest.note("peak", peaks);
    f.manifest.note("fwhm", widths.iter().map(|w| w.unwrap_or(f64::NAN)).collect::<Vec<_>>());
    f.panels.push(p);
    Ok(())
}

fn track_panel(file: &str, about: &str, rows: &[ZoneTrack]) -> Panel {
    let mut p = Panel::new(file, about, "dE", rows.iter().map(|t| Cell::from(t.de)).collect());
    p.col("edge_energy", rows.iter().map(|t| t.edge));
    p.cells("gap_width", rows.iter().map(|t| Cell::from(t.gap)).collect());
    for z in 1..=3 {
        let pick = |t: &ZoneTrack, lo: bool| {
            Cell::from(t.zones.iter().find(|q| q.index == z).map(|q| if lo { q.e_lo } else { q.e_hi }))
        };
        p.cells(format!("zone{z}_lo"), rows.iter().map(|t| pick(t, true)).collect());
        p.cells(format!("zone{z}_hi"), rows.iter().map(|t| pick(t, false)).collect());
    }
    p
}

fn fig6_22(f: &mut Figure) -> Result<()> {
    let (g, a) = (2.0, PI);
    let comb = PeriodicSystem::dirac_comb(g, a, DEFAULT_DENSITY)?;
    let ramp = |from: f64, to: f64| -> Vec<f64> {
        (0..24).map(|i| from + (to - from) * i as f64 / 23.0).collect()
    };
    let panels = [
        ("fig6_22.csv", "Upper edge of zone 2 (auxiliary level 2) shifted up.", 2, ramp(0.0, 3.9)),
        ("fig6_22_b.csv", "Upper edge of zone 2 shifted down.", 2, ramp(0.0, -2.9)),
        ("fig6_22_c.csv", "Lower edge of zone 2 (auxiliary level 1) shifted up.", 1, ramp(0.0, 2.9)),
    ];
    for (file, about, level, des) in panels {
        let rows = track_zone_shift(&comb, level, &des, 10.0, &f.opts)?;
        f.panels.push(track_panel(file, about, &rows));
    }
    let de = gap_closure(&comb, 2, 0.25, 3.9, &f.opts)?;
    let closed = track_zone_shift(&comb, 2, &[de], 10.0, &f.opts)?;
    let gap = closed.first().and_then(|t| t.gap).unwrap_or(0.0);
    f.check(Check::new("closed-gap", gap, gap, isodesign_core::bands::GAP_CLOSED));
    f.manifest.note("g", g);
    f.manifest.note("a", a);
    f.manifest.note("dE_star", de);
    Ok(())
}

fn fig7_6(f: &mut Figure) -> Result<()> {
    let sys = LatticeSystem::single_site(1.5, 32, LatticeBc::Decaying)?;
    let st = sys.states(1, SpectrumEnd::Highest)?.remove(0);
    f.check(Check {
        declared: Some(4.5),
        ..Check::new("energy", st.energy, (st.energy - 4.5).abs(), 1e-8)
    });
    let r = residual(&sys, &st);
    f.check(Check::new("eigen-residual", r, r, 1e-9));
    let mut p = Panel::new("fig7_6.csv", "Site potential and the state above the band.", "n", sys.sites().map(Cell::from).collect());
    p.col("V", sys.potential().to_vec());
    p.col("psi", st.psi);
    f.panels.push(p);
    Ok(())
}

fn fig7_13(f: &mut Figure) -> Result<()> {
    let window = -40..=40;
    let sites: Vec<Cell> = window.clone().map(Cell::from).collect();
    let mut p = Panel::new("fig7_13.csv", "Ground rung m = 0 of the ladder for each slope C.", "n", sites);
    let mut spectrum = Vec::new();
    for c in [1.0, 0.5, 0.25] {
        let ladder = stark_ladder(c, window.clone(), -2..=2)?;
        for w in ladder.windows(2) {
            let s = w[1].state.energy - w[0].state.energy;
            f.check(Check {
                declared: Some(c),
                ..Check::new(&format!("spacing-C{c}"), s, (s - c).abs(), 1e-8)
            });
        }
        for rung in &ladder {
            f.check(Check {
                level: Some(rung.m),
                ..Check::new(&format!("bessel-C{c}"), rung.bessel_residual, rung.bessel_residual, 1e-9)
            });
            spectrum.push((c, rung.m, rung.state.energy));
        }
        if let Some(rung) = ladder.iter().find(|r| r.m == 0) {
            p.col(format!("psi_C{c}"), rung.state.psi.clone());
        }
    }
    f.panels.push(p);
    let mut s = Panel::new("fig7_13_spectrum.csv", "Ladder energies.", "C", spectrum.iter().map(|t| Cell::from(t.0)).collect());
    s.cells("m", spectrum.iter().map(|t| Cell::from(t.1)).collect());
    s.col("energy", spectrum.iter().map(|t| t.2));
    f.panels.push(s);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for t in FigureTag::ALL {
            assert_eq!(t.name().parse::<FigureTag>().unwrap(), t);
        }
        assert_eq!(FigureTag::Fig6_22.figure_number(), "6.22");
        let err = "fig9_9".parse::<FigureTag>().unwrap_err();
        assert!(err.to_string().contains("fig1_1, fig1_2"));
    }
}
