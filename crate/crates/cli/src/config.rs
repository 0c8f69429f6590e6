//! Run configuration: flat `key = value` lines with repeated `[step]` blocks.
//!
//! ```text
//! base = box
//! states = 4
//! [step]
//! kind = shift
//! n = 1
//! dE = -5
//! step = remove n=1
//! ```
//!
//! A `step = …` line is a one-line step: the kind first (bare or as
//! `kind=…`), then `name=value` tokens.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use isodesign_core::darboux::DarbouxStep;
use isodesign_core::lattice::{LatticeBc, SpectrumEnd};
use isodesign_core::BcKind;
use serde::Serialize;

use crate::error::{invalid, CliError, Result};

/// The configuration exactly as written, after flag overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RawConfig {
    pub entries: Vec<(String, String)>,
    pub steps: Vec<Vec<(String, String)>>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub dir: PathBuf,
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return None;
    }
    Some((k.to_string(), v.to_string()))
}

fn inline_step(text: &str, lineno: usize) -> Result<Vec<(String, String)>> {
    let mut tokens = text.split_whitespace();
    let first = tokens
        .next()
        .ok_or_else(|| CliError::Validation(format!("line {lineno}: empty step")))?;
    let mut step = Vec::new();
    match split_pair(first) {
        Some(pair) => step.push(pair),
        None => step.push(("kind".to_string(), first.to_string())),
    }
    for t in tokens {
        let pair = split_pair(t).ok_or_else(|| {
            CliError::Validation(format!("line {lineno}: expected name=value, got `{t}`"))
        })?;
        step.push(pair);
    }
    Ok(step)
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RawConfig::default();
        let mut in_step = false;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "[step]" {
                cfg.steps.push(Vec::new());
                in_step = true;
                continue;
            }
            if line.starts_with('[') {
                return invalid(format!("line {lineno}: unknown section {line}"));
            }
            let (k, v) = split_pair(line).ok_or_else(|| {
                CliError::Validation(format!("line {lineno}: expected `key = value`, got `{line}`"))
            })?;
            if k == "step" {
                cfg.steps.push(inline_step(&v, lineno)?);
                in_step = false;
            } else if in_step {
                if let Some(last) = cfg.steps.last_mut() {
                    last.push((k, v));
                }
            } else {
                cfg.entries.push((k, v));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// A `--set` override: `step` appends a one-line step, any other key
    /// replaces the file value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "step" {
            let step = inline_step(value, 0)?;
            self.steps.push(step);
        } else {
            self.set(key, value);
        }
        Ok(())
    }

    /// Sets a top-level key, replacing any value from the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value.into()));
    }
}

/// Keys of one section, consumed as they are read so leftovers can be
/// reported.
struct Keys {
    what: String,
    map: BTreeMap<String, String>,
}

impl Keys {
    fn new(what: impl Into<String>, pairs: &[(String, String)]) -> Result<Self> {
        let what = what.into();
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if map.insert(k.clone(), v.clone()).is_some() {
                return invalid(format!("{what}: key `{k}` given twice"));
            }
        }
        Ok(Self { what, map })
    }

    fn text(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                CliError::Validation(format!("{}: cannot parse {key} = {v}", self.what))
            }),
        }
    }

    fn num(&mut self, key: &str) -> Result<Option<f64>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => parse_number(&v).map(Some).map_err(|_| {
                CliError::Validation(format!("{}: cannot parse {key} = {v}", self.what))
            }),
        }
    }

    fn num_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn need_num(&mut self, key: &str) -> Result<f64> {
        let what = self.what.clone();
        self.num(key)?
            .ok_or_else(|| CliError::Validation(format!("{what}: missing `{key}`")))
    }

    fn need<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let what = self.what.clone();
        self.parse(key)?
            .ok_or_else(|| CliError::Validation(format!("{what}: missing `{key}`")))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| parse_number(s.trim()))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| CliError::Validation(format!("{}: cannot parse {key} = {v}", self.what))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.map.keys().next() {
            return invalid(format!("{}: unknown key `{k}`", self.what));
        }
        Ok(())
    }
}

/// Reals, plus `pi`, `k*pi` and `pi/k`.
fn parse_number(s: &str) -> std::result::Result<f64, ()> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    if s == "pi" {
        return Ok(PI);
    }
    if let Some(f) = s.strip_suffix("*pi") {
        return f.trim().parse::<f64>().map(|f| f * PI).map_err(|_| ());
    }
    if let Some(d) = s.strip_prefix("pi/") {
        return d.trim().parse::<f64>().map(|d| PI / d).map_err(|_| ());
    }
    Err(())
}

fn parse_range(s: &str) -> Option<RangeInclusive<i64>> {
    let (a, b) = s.split_once("..")?;
    let a = a.trim().parse().ok()?;
    let b = b.trim().parse().ok()?;
    (a <= b).then_some(a..=b)
}

/// Which family of system a subcommand works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Design,
    Band,
    Lattice,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Design => "design",
            Mode::Band => "band",
            Mode::Lattice => "lattice",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    /// Width-π hard-wall box centred on the origin.
    Box,
    /// `V = 0` on `[−L, L]`.
    FreeLine,
    /// `V = 0` on `[0, L]` with a wall at the origin.
    HalfLine,
    /// Dirac comb, strength `g`, period `a`.
    Comb { g: f64, a: f64 },
    LatticeSingle { v0: f64, half_width: i64, bc: LatticeBc },
    LatticeFree { half_width: i64, bc: LatticeBc },
    LatticeStark { c: f64, half_width: i64, orders: RangeInclusive<i64> },
    /// `x,value` CSV.
    File { path: PathBuf, bc: BcKind },
}

impl Base {
    fn mode_ok(&self, mode: Mode) -> bool {
        match self {
            Base::Comb { .. } => mode == Mode::Band,
            Base::LatticeSingle { .. } | Base::LatticeFree { .. } | Base::LatticeStark { .. } => {
                mode == Mode::Lattice
            }
            Base::File { bc, .. } => {
                matches!(mode, Mode::Solve | Mode::Design) && *bc != BcKind::Periodic
            }
            _ => matches!(mode, Mode::Solve | Mode::Design),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Base::Box => "box",
            Base::FreeLine => "free-line",
            Base::HalfLine => "half-line",
            Base::Comb { .. } => "comb",
            Base::LatticeSingle { .. } => "lattice-single",
            Base::LatticeFree { .. } => "lattice-free",
            Base::LatticeStark { .. } => "lattice-stark",
            Base::File { .. } => "file",
        }
    }
}

/// A chain command.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Darboux(DarbouxStep),
    /// Moves an auxiliary-box level of the comb cell.
    ZoneShift { level: usize, de: f64 },
    /// Zones after each of `count` shifts spread over `[from, to]`.
    ZoneTrack { level: usize, from: f64, to: f64, count: usize },
    /// Shift in `[lo, hi]` at which the gap above `level` closes.
    GapClosure { level: usize, lo: f64, hi: f64 },
}

impl Step {
    fn mode_ok(&self, mode: Mode) -> bool {
        match self {
            Step::Darboux(_) => mode == Mode::Design,
            _ => mode == Mode::Band,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Step::Darboux(d) => d.kind(),
            Step::ZoneShift { .. } => "zone-shift",
            Step::ZoneTrack { .. } => "zone-track",
            Step::GapClosure { .. } => "gap-closure",
        }
    }

    pub fn params(&self) -> String {
        match self {
            Step::Darboux(d) => d.params(),
            Step::ZoneShift { level, de } => format!("level={level} dE={de}"),
            Step::ZoneTrack {
                level,
                from,
                to,
                count,
            } => format!("level={level} from={from} to={to} count={count}"),
            Step::GapClosure { level, lo, hi } => format!("level={level} lo={lo} hi={hi}"),
        }
    }

    fn parse(index: usize, pairs: &[(String, String)]) -> Result<Step> {
        let mut k = Keys::new(format!("step {index}"), pairs)?;
        let kind = k
            .text("kind")
            .ok_or_else(|| CliError::Validation(format!("step {index}: missing `kind`")))?;
        let step = match kind.as_str() {
            "remove" => Step::Darboux(DarbouxStep::Remove { level: k.need("n")? }),
            "create" => Step::Darboux(DarbouxStep::Create {
                energy: k.need_num("E")?,
                sigma: k.num_or("sigma", 0.5)?,
            }),
            "shift" => Step::Darboux(DarbouxStep::Shift {
                level: k.need("n")?,
                de: k.need_num("dE")?,
            }),
            "scale" | "scale_swf" => Step::Darboux(DarbouxStep::ScaleSwf {
                level: k.need("n")?,
                lambda: k.need_num("lambda")?,
            }),
            "bsec" => {
                let k_wave = match (k.num("k")?, k.num("E")?) {
                    (Some(kw), None) => kw,
                    (None, Some(e)) if e > 0.0 => e.sqrt(),
                    (None, Some(e)) => {
                        return invalid(format!("step {index}: bsec energy {e} must be positive"))
                    }
                    _ => return invalid(format!("step {index}: bsec needs exactly one of k, E")),
                };
                Step::Darboux(DarbouxStep::Bsec {
                    k: k_wave,
                    lambda: k.need_num("lambda")?,
                })
            }
            "bargmann" => {
                let kappas = k.list("kappa")?.ok_or_else(|| {
                    CliError::Validation(format!("step {index}: missing `kappa`"))
                })?;
                let norms = match k.list("c")? {
                    Some(c) => c,
                    None => isodesign_core::darboux::symmetric_norms(&kappas)?,
                };
                Step::Darboux(DarbouxStep::Bargmann { kappas, norms })
            }
            "zone-shift" => Step::ZoneShift {
                level: k.need("level")?,
                de: k.need_num("dE")?,
            },
            "zone-track" => {
                let count: usize = k.parse("count")?.unwrap_or(21);
                if count < 2 {
                    return invalid(format!("step {index}: zone-track needs count >= 2"));
                }
                Step::ZoneTrack {
                    level: k.need("level")?,
                    from: k.need_num("from")?,
                    to: k.need_num("to")?,
                    count,
                }
            }
            "gap-closure" => Step::GapClosure {
                level: k.need("level")?,
                lo: k.need_num("lo")?,
                hi: k.need_num("hi")?,
            },
            other => {
                return invalid(format!(
                    "step {index}: unknown kind `{other}` (expected remove, create, shift, scale, bsec, bargmann, zone-shift, zone-track, gap-closure)"
                ))
            }
        };
        k.finish()?;
        if let Step::Darboux(
            DarbouxStep::Remove { level }
            | DarbouxStep::Shift { level, .. }
            | DarbouxStep::ScaleSwf { level, .. },
        )
        | Step::ZoneShift { level, .. }
        | Step::ZoneTrack { level, .. }
        | Step::GapClosure { level, .. } = &step
        {
            if *level == 0 {
                return invalid(format!("step {index}: levels are numbered from 1"));
            }
        }
        Ok(step)
    }
}

/// Numerical settings with defaults resolved for the subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Numerics {
    /// Grid points; `None` keeps the default density of 2000 intervals per π.
    pub points: Option<usize>,
    /// Half-width `L` of line problems, length of half-line problems.
    pub truncation: f64,
    /// Tolerance of the oracle checks.
    pub tol: f64,
    /// States to report; `None` picks a default per base system.
    pub states: Option<usize>,
    pub wall_cap: f64,
    /// Upper end of scattering and discriminant scans.
    pub e_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub base: Base,
    pub steps: Vec<Step>,
    pub numerics: Numerics,
    pub lattice_end: Option<SpectrumEnd>,
    /// Output directory named in the file; the `--out` flag wins over it.
    pub out: Option<PathBuf>,
    pub raw: RawConfig,
}

pub const DEFAULT_TRUNCATION: f64 = 20.0;

impl RunConfig {
    pub fn resolve(raw: RawConfig, mode: Mode) -> Result<Self> {
        let mut k = Keys::new("config", &raw.entries)?;
        let base_name = k.text("base").unwrap_or_else(|| {
            match mode {
                Mode::Band => "comb",
                Mode::Lattice => "lattice-single",
                _ => "box",
            }
            .to_string()
        });
        let lattice_bc = |k: &mut Keys, default: LatticeBc| -> Result<LatticeBc> {
            Ok(k.parse("bc")?.unwrap_or(default))
        };
        let half_width = |k: &mut Keys| -> Result<i64> {
            let hw: i64 = k.parse("half_width")?.unwrap_or(40);
            if hw < 1 {
                return invalid("half_width must be at least 1");
            }
            Ok(hw)
        };
        let base = match base_name.as_str() {
            "box" => Base::Box,
            "free-line" => Base::FreeLine,
            "half-line" => Base::HalfLine,
            "comb" => Base::Comb {
                g: k.num_or("g", 2.0)?,
                a: k.num_or("a", PI)?,
            },
            "lattice-single" => Base::LatticeSingle {
                v0: k.num_or("v0", 1.5)?,
                half_width: half_width(&mut k)?,
                bc: lattice_bc(&mut k, LatticeBc::Decaying)?,
            },
            "lattice-free" => Base::LatticeFree {
                half_width: half_width(&mut k)?,
                bc: lattice_bc(&mut k, LatticeBc::HardWalls)?,
            },
            "lattice-stark" => {
                let orders = match k.text("orders") {
                    None => -2..=2,
                    Some(s) => parse_range(&s).ok_or_else(|| {
                        CliError::Validation(format!("orders = {s}: expected `a..b` with a <= b"))
                    })?,
                };
                Base::LatticeStark {
                    c: k.num_or("c", 1.0)?,
                    half_width: half_width(&mut k)?,
                    orders,
                }
            }
            path if path.ends_with(".csv") => {
                let bc: BcKind = k
                    .parse("bc")?
                    .ok_or_else(|| CliError::Validation("a CSV base needs `bc`".into()))?;
                Base::File {
                    path: raw.dir.join(path),
                    bc,
                }
            }
            other => {
                return invalid(format!(
                    "unknown base `{other}` (expected box, free-line, half-line, comb, lattice-single, lattice-free, lattice-stark or a .csv path)"
                ))
            }
        };
        if !base.mode_ok(mode) {
            return invalid(format!(
                "base `{}` cannot be used with the {} command",
                base.name(),
                mode.name()
            ));
        }
        let default_tol = match mode {
            Mode::Solve | Mode::Design => 1e-5,
            Mode::Band => 1e-6,
            Mode::Lattice => 1e-9,
        };
        let numerics = Numerics {
            points: k.parse("points")?,
            truncation: k.num_or("truncation", DEFAULT_TRUNCATION)?,
            tol: k.num_or("tol", default_tol)?,
            states: k.parse("states")?,
            wall_cap: k.num_or("wall_cap", 1e6)?,
            e_max: k.num_or("e_max", 10.0)?,
            samples: k
                .parse("samples")?
                .unwrap_or(if mode == Mode::Band { 1001 } else { 100 }),
        };
        let lattice_end = match k.text("end").as_deref() {
            None => None,
            Some("lowest") => Some(SpectrumEnd::Lowest),
            Some("highest") => Some(SpectrumEnd::Highest),
            Some(other) => return invalid(format!("end = {other}: expected lowest or highest")),
        };
        let out = k.text("out").map(|o| raw.dir.join(o));
        k.finish()?;
        check_numerics(&numerics)?;
        if let Base::Comb { g, a } = base {
            if !(a > 0.0 && a.is_finite() && g.is_finite()) {
                return invalid("comb needs a positive period `a` and a finite strength `g`");
            }
        }
        let steps = raw
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| Step::parse(i + 1, s))
            .collect::<Result<Vec<_>>>()?;
        for (i, s) in steps.iter().enumerate() {
            if !s.mode_ok(mode) {
                return invalid(format!(
                    "step {}: `{}` does not apply to the {} command on base `{}`",
                    i + 1,
                    s.kind(),
                    mode.name(),
                    base.name()
                ));
            }
        }
        Ok(Self {
            mode,
            base,
            steps,
            numerics,
            lattice_end,
            out,
            raw,
        })
    }
}

fn check_numerics(n: &Numerics) -> Result<()> {
    if let Some(p) = n.points {
        if p < 3 || p % 2 == 0 {
            return invalid(format!("points = {p}: need an odd count of at least 3"));
        }
    }
    for (name, v) in [
        ("truncation", n.truncation),
        ("tol", n.tol),
        ("wall_cap", n.wall_cap),
        ("e_max", n.e_max),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("{name} = {v}: must be positive"));
        }
    }
    if n.samples < 2 {
        return invalid("samples must be at least 2");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_and_inline_steps() {
        let raw = RawConfig::parse(
            "base = free-line # line\n[step]\nkind = create\nE = -1\nstep = remove n=1\nstep = kind=shift n=1 dE=-0.5\n",
        )
        .unwrap();
        assert_eq!(raw.entries, vec![("base".into(), "free-line".into())]);
        assert_eq!(raw.steps.len(), 3);
        let cfg = RunConfig::resolve(raw, Mode::Design).unwrap();
        assert_eq!(
            cfg.steps[0],
            Step::Darboux(DarbouxStep::Create {
                energy: -1.0,
                sigma: 0.5
            })
        );
        assert_eq!(cfg.steps[1], Step::Darboux(DarbouxStep::Remove { level: 1 }));
        assert_eq!(
            cfg.steps[2],
            Step::Darboux(DarbouxStep::Shift { level: 1, de: -0.5 })
        );
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "base = moon",
            "base = box\ntol = -1",
            "base = box\npoints = 100",
            "base = box\ncolour = red",
            "base = comb",
            "step = shift n=0 dE=1",
            "step = teleport",
            "step = zone-shift level=2 dE=1",
            "base = box\nbase = box",
        ];
        for text in bad {
            let r = RawConfig::parse(text).and_then(|r| RunConfig::resolve(r, Mode::Design));
            assert!(matches!(r, Err(CliError::Validation(_))), "{text}");
        }
    }

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("pi"), Ok(PI));
        assert_eq!(parse_number("2*pi"), Ok(2.0 * PI));
        assert_eq!(parse_number("pi/2"), Ok(PI / 2.0));
        assert!(parse_number("tau").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let mut raw = RawConfig::parse("base = box\ntol = 1e-3").unwrap();
        raw.set("tol", "1e-7");
        let cfg = RunConfig::resolve(raw, Mode::Solve).unwrap();
        assert_eq!(cfg.numerics.tol, 1e-7);
    }
}
