//! Elementary spectral transformations.
//!
//! Every second logarithmic derivative is expanded analytically. For a
//! factorization solution `u` at energy ε the Riccati identity
//! `(ln u)″ = V − ε − (u′/u)²` turns `V − 2(ln u)″` into `−V + 2ε + 2(u′/u)²`;
//! the spectral-weight deformations use `(ln D)″ = D″/D − (D′/D)²` with `D′`
//! known in closed form. No sampled curve is ever differenced twice.
//!
//! Levels are numbered from 1 in the public API (`level = 1` is the ground
//! state); [`BoundState::n`] stays zero-based.

use std::f64::consts::PI;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{cumulative, Grid, SampledFn};
use crate::potential::{BcKind, BoundState, Potential};
use crate::solver::{bound_states, count_nodes, finish_state, solution_derivative, Shooter};

/// One elementary transformation.
#[derive(Debug, Clone, PartialEq)]
pub enum DarbouxStep {
    Remove { level: usize },
    Create { energy: f64, sigma: f64 },
    Shift { level: usize, de: f64 },
    ScaleSwf { level: usize, lambda: f64 },
    Bsec { k: f64, lambda: f64 },
    Bargmann { kappas: Vec<f64>, norms: Vec<f64> },
}

impl DarbouxStep {
    pub fn kind(&self) -> &'static str {
        match self {
            DarbouxStep::Remove { .. } => "remove",
            DarbouxStep::Create { .. } => "create",
            DarbouxStep::Shift { .. } => "shift",
            DarbouxStep::ScaleSwf { .. } => "scale",
            DarbouxStep::Bsec { .. } => "bsec",
            DarbouxStep::Bargmann { .. } => "bargmann",
        }
    }

    /// Parameters as `name=value` pairs separated by spaces.
    pub fn params(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            DarbouxStep::Remove { level } => format!("n={level}"),
            DarbouxStep::Create { energy, sigma } => format!("E={energy} sigma={sigma}"),
            DarbouxStep::Shift { level, de } => format!("n={level} dE={de}"),
            DarbouxStep::ScaleSwf { level, lambda } => format!("n={level} lambda={lambda}"),
            DarbouxStep::Bsec { k, lambda } => format!("k={k} lambda={lambda}"),
            DarbouxStep::Bargmann { kappas, norms } => {
                format!("kappa={} c={}", list(kappas), list(norms))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformOptions {
    /// Magnitude written in place of infinite samples at hard walls.
    pub wall_cap: f64,
    /// A denominator whose minimum falls below this fraction of its maximum
    /// makes the step singular.
    pub singular_ratio: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            wall_cap: 1e6,
            singular_ratio: 1e-12,
        }
    }
}

/// Log entry for one applied step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: DarbouxStep,
    pub factorization_energies: Vec<f64>,
    /// Smallest |denominator| met on the grid (0 for closed-form steps
    /// without a denominator).
    pub denominator_min: f64,
    /// Samples with |V| at or above the wall cap.
    pub capped_points: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult {
    pub potential: Potential,
    /// Analytically transformed states, ordered by energy.
    pub states: Vec<BoundState>,
    pub step_log: Vec<StepRecord>,
}

impl TransformResult {
    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }
}

fn level_index(level: usize) -> Result<usize> {
    if level == 0 {
        return invalid("levels are numbered from 1");
    }
    Ok(level - 1)
}

fn check_transformable(v: &Potential) -> Result<()> {
    if !v.deltas().is_empty() {
        return invalid("transformations of potentials with point interactions are not supported");
    }
    if v.bc() == BcKind::Periodic {
        return invalid("transform the auxiliary hard-wall cell, not the periodic system");
    }
    Ok(())
}

/// The tracked states, extended from the oracle so that at least `count`
/// consecutive levels are available.
fn tracked_states(v: &Potential, known: &[BoundState], count: usize) -> Result<Vec<BoundState>> {
    let consecutive = known.iter().enumerate().all(|(i, s)| s.n == i);
    if !consecutive {
        return invalid("tracked states must be consecutive levels starting at the ground state");
    }
    if known.len() >= count {
        Ok(known.to_vec())
    } else {
        bound_states(v, count)
    }
}

/// Nodes on which a denominator must stay away from zero: wall endpoints,
/// where it vanishes by construction, are excluded.
fn interior(v: &Potential, left_zero: bool, right_zero: bool) -> Range<usize> {
    let n = v.grid().len();
    usize::from(left_zero)..n - usize::from(right_zero)
}

/// Minimum |d| on `range`; fails if `d` changes sign or if a local minimum
/// of |d| dips below `ratio` times the largest |d| within one unit of
/// length. A global maximum would flag every exponentially growing
/// factorization solution on a wide line.
fn check_denominator(grid: &Grid, d: &[f64], range: Range<usize>, ratio: f64) -> Result<f64> {
    if let Some(i) = range.clone().skip(1).find(|&i| d[i - 1] * d[i] < 0.0) {
        return Err(Error::Singular {
            x: grid.x(i),
            min: d[i].abs().min(d[i - 1].abs()),
            ratio: 0.0,
        });
    }
    let reach = ((1.0 / grid.spacing()).ceil() as usize).max(8);
    let mut min = f64::INFINITY;
    for i in range.clone() {
        let a = d[i].abs();
        min = min.min(a);
        let left = i == range.start || d[i - 1].abs() >= a;
        let right = i + 1 == range.end || d[i + 1].abs() >= a;
        if !(left && right) {
            continue;
        }
        let lo = i.saturating_sub(reach).max(range.start);
        let hi = (i + reach + 1).min(range.end);
        let local = d[lo..hi].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(local > 0.0) || a < ratio * local {
            return Err(Error::Singular {
                x: grid.x(i),
                min: a,
                ratio: if local > 0.0 { a / local } else { 0.0 },
            });
        }
    }
    Ok(min)
}

/// New potential with infinite wall samples replaced by `±cap`.
fn capped_potential(
    v: &Potential,
    mut values: Vec<f64>,
    opts: &TransformOptions,
) -> Result<(Potential, usize)> {
    let n = values.len();
    for (i, x) in values.iter_mut().enumerate() {
        if !x.is_finite() {
            if i == 0 || i + 1 == n {
                *x = if *x < 0.0 { -opts.wall_cap } else { opts.wall_cap };
            } else {
                return Err(Error::Numerical(format!(
                    "transformed potential is not finite at x = {}",
                    v.grid().x(i)
                )));
            }
        }
    }
    let capped = values.iter().filter(|x| x.abs() >= opts.wall_cap).count();
    let body = SampledFn::new(*v.grid(), values)?;
    Ok((v.with_body(body)?, capped))
}

/// Copies `psi` and `dpsi` into a state of the new potential; samples where
/// the formulas are 0/0 at a wall are pinned to zero first.
fn transformed_state(
    v: &Potential,
    n: usize,
    energy: f64,
    mut psi: Vec<f64>,
    mut dpsi: Vec<f64>,
) -> Result<BoundState> {
    let last = psi.len() - 1;
    let mut fix = Vec::new();
    for i in [0, last] {
        if !psi[i].is_finite() {
            psi[i] = 0.0;
            fix.push(i);
        }
    }
    if !fix.is_empty() || dpsi.iter().any(|x| !x.is_finite()) {
        let edge = solution_derivative(v, &psi, energy);
        for i in [0, last] {
            if fix.contains(&i) || !dpsi[i].is_finite() {
                dpsi[i] = edge[i];
            }
        }
    }
    finish_state(v, n, energy, psi, dpsi)
}

fn identity(v: &Potential, states: &[BoundState], step: DarbouxStep, note: &str) -> TransformResult {
    TransformResult {
        potential: v.clone(),
        states: states.to_vec(),
        step_log: vec![StepRecord {
            step,
            factorization_energies: Vec::new(),
            denominator_min: 0.0,
            capped_points: 0,
            notes: vec![note.to_string()],
        }],
    }
}

fn kappa(level: f64, energy: f64) -> f64 {
    (level - energy).max(0.0).sqrt()
}

/// Solution of `−u″ + Vu = εu` built from the solutions regular at each end,
/// `u = σ·u_L/u_L(mid) + (1−σ)·u_R/u_R(mid)`, scaled to `max|u| = 1`.
///
/// `u_L` is the solution that vanishes at a left wall or decays toward the
/// left; `u_R` likewise on the right. `σ = 1/2` gives the symmetric mix.
pub fn factorization_solution(v: &Potential, eps: f64, sigma: f64) -> Result<SampledFn> {
    let (u, _) = factorization_pair(v, eps, sigma)?;
    SampledFn::new(*v.grid(), u)
}

fn factorization_pair(v: &Potential, eps: f64, sigma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_transformable(v)?;
    if !(0.0..=1.0).contains(&sigma) {
        return invalid(format!("sigma = {sigma} must lie in [0, 1]"));
    }
    let sh = Shooter::new(v)?;
    let ul = sh.full_from_left(eps);
    let ur = sh.full_from_right(eps);
    let mid = ul.len() / 2;
    let pick = |u: &[f64]| {
        if u[mid] != 0.0 {
            u[mid]
        } else {
            u.iter().fold(0.0f64, |a, x| if x.abs() > a.abs() { *x } else { a })
        }
    };
    let (sl, sr) = (pick(&ul), pick(&ur));
    let mut u: Vec<f64> = ul
        .iter()
        .zip(&ur)
        .map(|(l, r)| sigma * l / sl + (1.0 - sigma) * r / sr)
        .collect();
    let max = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(max.is_finite() && max > 0.0) {
        return Err(Error::Numerical(format!(
            "factorization solution at {eps} vanishes identically"
        )));
    }
    for x in &mut u {
        *x /= max;
    }
    let du = solution_derivative(v, &u, eps);
    Ok((u, du))
}

/// `ψ̂ = ψ′ − wψ` and its derivative for a state at `energy` after a
/// one-step transformation with `w = u′/u` at factorization energy `eps`.
fn intertwine(
    psi: &[f64],
    dpsi: &[f64],
    energy: f64,
    eps: f64,
    w: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let phi = (0..psi.len()).map(|i| dpsi[i] - w[i] * psi[i]).collect();
    let dphi = (0..psi.len())
        .map(|i| (eps - energy + w[i] * w[i]) * psi[i] - w[i] * dpsi[i])
        .collect();
    (phi, dphi)
}

/// Removes the ground state. The ground state is taken from `states` when
/// tracked, otherwise from the oracle.
pub fn darboux_remove_ground(
    v: &Potential,
    states: &[BoundState],
    opts: &TransformOptions,
) -> Result<TransformResult> {
    check_transformable(v)?;
    let states = tracked_states(v, states, 1)?;
    let ground = &states[0];
    if count_nodes(ground.psi.values(), 1e-9) != 0 {
        return invalid("the state to remove has interior nodes; it is not a ground state");
    }
    let eps = ground.energy;
    let u = ground.psi.values();
    let du = ground.dpsi.values();
    let range = interior(v, v.bc().left_wall(), v.bc().right_wall());
    let dmin = check_denominator(v.grid(), u, range, opts.singular_ratio)?;
    let w: Vec<f64> = u.iter().zip(du).map(|(a, b)| b / a).collect();
    let body: Vec<f64> = v
        .body()
        .values()
        .iter()
        .zip(&w)
        .map(|(vi, wi)| -vi + 2.0 * eps + 2.0 * wi * wi)
        .collect();
    let (potential, capped) = capped_potential(v, body, opts)?;
    let mut out = Vec::with_capacity(states.len() - 1);
    for s in &states[1..] {
        let (phi, dphi) = intertwine(s.psi.values(), s.dpsi.values(), s.energy, eps, &w);
        out.push(transformed_state(&potential, s.n - 1, s.energy, phi, dphi)?);
    }
    Ok(TransformResult {
        potential,
        states: out,
        step_log: vec![StepRecord {
            step: DarbouxStep::Remove { level: 1 },
            factorization_energies: vec![eps],
            denominator_min: dmin,
            capped_points: capped,
            notes: Vec::new(),
        }],
    })
}

/// Adds a new ground state at `energy` below the spectrum of a line problem.
///
/// Only decaying-line problems admit this: with a hard wall the new state
/// `1/u` cannot vanish at the wall, so no isospectral insertion exists.
pub fn darboux_create(
    v: &Potential,
    states: &[BoundState],
    energy: f64,
    sigma: f64,
    opts: &TransformOptions,
) -> Result<TransformResult> {
    check_transformable(v)?;
    if v.bc() != BcKind::DecayingLine {
        return invalid(format!(
            "level creation needs a decaying-line problem; a {} problem has no room below its ground state",
            v.bc().name()
        ));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return invalid(format!(
            "sigma = {sigma} must lie in (0, 1); the end values give a non-normalizable state"
        ));
    }
    let edge = v.continuum_edge().unwrap_or(f64::INFINITY);
    if !(energy < edge) {
        return invalid(format!(
            "new level {energy} must lie below the continuum edge {edge}"
        ));
    }
    let sh = Shooter::new(v)?;
    if sh.count_below(energy) > 0 {
        return invalid(format!(
            "new level {energy} is not below the existing spectrum"
        ));
    }
    let states = tracked_states(v, states, 0)?;
    let (u, du) = factorization_pair(v, energy, sigma)?;
    let dmin = check_denominator(v.grid(), &u, 0..u.len(), opts.singular_ratio)?;
    let w: Vec<f64> = u.iter().zip(&du).map(|(a, b)| b / a).collect();
    let body: Vec<f64> = v
        .body()
        .values()
        .iter()
        .zip(&w)
        .map(|(vi, wi)| -vi + 2.0 * energy + 2.0 * wi * wi)
        .collect();
    let (potential, capped) = capped_potential(v, body, opts)?;
    let mut out = Vec::with_capacity(states.len() + 1);
    let psi0: Vec<f64> = u.iter().map(|x| 1.0 / x).collect();
    let dpsi0: Vec<f64> = u.iter().zip(&w).map(|(x, wi)| -wi / x).collect();
    out.push(transformed_state(&potential, 0, energy, psi0, dpsi0)?);
    for s in &states {
        let (phi, dphi) = intertwine(s.psi.values(), s.dpsi.values(), s.energy, energy, &w);
        out.push(transformed_state(&potential, s.n + 1, s.energy, phi, dphi)?);
    }
    Ok(TransformResult {
        potential,
        states: out,
        step_log: vec![StepRecord {
            step: DarbouxStep::Create { energy, sigma },
            factorization_energies: vec![energy],
            denominator_min: dmin,
            capped_points: capped,
            notes: Vec::new(),
        }],
    })
}

/// Open interval a level may move in without crossing its neighbours.
pub fn level_window(v: &Potential, states: &[BoundState], level: usize) -> Result<(f64, f64)> {
    let idx = level_index(level)?;
    let lo = if idx == 0 {
        f64::NEG_INFINITY
    } else {
        states[idx - 1].energy
    };
    let hi = if states.len() > idx + 1 {
        states[idx + 1].energy
    } else {
        match bound_states(v, idx + 2) {
            Ok(s) => s[idx + 1].energy,
            Err(Error::NotEnoughStates { edge, .. }) => edge,
            Err(e) => return Err(e),
        }
    };
    Ok((lo, hi))
}

/// Moves level `level` by `de`, keeping every other level.
///
/// Realized as one two-seed Crum step: the Wronskian `W = ψ_n f′ − ψ_n′ f` of
/// the state and of a solution `f` at the target energy removes `E_n` and
/// creates `E_n + dE` together. `f` takes opposite-signed unit values at the
/// two ends (relative to the sign of `ψ_n` there), which keeps `W` nodeless
/// for every target inside the no-crossing window.
///
/// Every other state has its end amplitudes scaled by one common factor, so
/// the ratio of its right to left amplitude (ψ′ at a wall, the norming
/// constant on a decaying end) is kept. The weights of `f` at the two ends
/// are chosen so that the moved state keeps that ratio too; on symmetric
/// problems this is the symmetric shift. On the half-line the moved state
/// keeps its wall weight `c_n` instead.
pub fn shift_level(
    v: &Potential,
    states: &[BoundState],
    level: usize,
    de: f64,
    opts: &TransformOptions,
) -> Result<TransformResult> {
    check_transformable(v)?;
    let idx = level_index(level)?;
    let states = tracked_states(v, states, idx + 1)?;
    let step = DarbouxStep::Shift { level, de };
    let (lo, hi) = level_window(v, &states, level)?;
    let en = states[idx].energy;
    let target = en + de;
    if !de.is_finite() || !(target > lo && target < hi) {
        return invalid(format!(
            "level {level} can move within ({lo}, {hi}) without crossing; E = {en} + {de} = {target} is outside"
        ));
    }
    if de == 0.0 {
        return Ok(identity(v, &states, step, "dE = 0 leaves the potential unchanged"));
    }
    let moved = crum_shift(v, &states, idx, target, step.clone(), opts)?;
    if v.bc() != BcKind::DecayingHalfLine {
        return Ok(moved);
    }
    // a wall and a decaying tail have no invariant amplitude ratio; keep the
    // wall weight c_n instead
    let (c_old, c_new) = (states[idx].swf, moved.states[idx].swf);
    if !(c_new.abs() > 0.0) {
        return Err(Error::Numerical(format!(
            "shifted level {level} has zero spectral weight"
        )));
    }
    let lambda = (c_old / c_new).powi(2) - 1.0;
    if lambda.abs() < 1e-12 {
        return Ok(moved);
    }
    let restored = scale_swf(&moved.potential, &moved.states, level, lambda, opts)?;
    let (first, second) = (&moved.step_log[0], &restored.step_log[0]);
    let mut notes = first.notes.clone();
    notes.push(format!("wall weight restored with lambda = {lambda}"));
    Ok(TransformResult {
        potential: restored.potential,
        states: restored.states,
        step_log: vec![StepRecord {
            step,
            factorization_energies: first.factorization_energies.clone(),
            denominator_min: first.denominator_min.min(second.denominator_min),
            capped_points: first.capped_points.max(second.capped_points),
            notes,
        }],
    })
}

/// Right-to-left amplitude ratio of a state: `|ψ′|` at a wall, `|ψ|e^{κ|x|}`
/// at a decaying end.
struct EndAmplitudes {
    left_wall: bool,
    right_wall: bool,
    x: (f64, f64),
    levels: (f64, f64),
}

impl EndAmplitudes {
    fn new(v: &Potential) -> Self {
        let g = v.grid();
        let bc = v.bc();
        Self {
            left_wall: bc.left_wall(),
            right_wall: bc.right_wall(),
            x: (g.x_min(), g.x_max()),
            levels: v.asymptotes(),
        }
    }

    fn ratio(&self, psi: &[f64], dpsi: &[f64], energy: f64) -> f64 {
        let n = psi.len();
        self.ratio_at(psi[0], dpsi[0], psi[n - 1], dpsi[n - 1], energy)
    }

    fn ratio_at(&self, pl: f64, dl: f64, pr: f64, dr: f64, energy: f64) -> f64 {
        let left = if self.left_wall {
            dl.abs()
        } else {
            pl.abs() * ((self.levels.0 - energy).max(0.0).sqrt() * self.x.0.abs()).exp()
        };
        let right = if self.right_wall {
            dr.abs()
        } else {
            pr.abs() * ((self.levels.1 - energy).max(0.0).sqrt() * self.x.1.abs()).exp()
        };
        right / left
    }
}

/// Two-seed Wronskian step moving state `idx` to `target`.
fn crum_shift(
    v: &Potential,
    states: &[BoundState],
    idx: usize,
    target: f64,
    step: DarbouxStep,
    opts: &TransformOptions,
) -> Result<TransformResult> {
    let en = states[idx].energy;
    let sh = Shooter::new(v)?;
    let gl = sh.full_from_left(target);
    let gr = sh.full_from_right(target);
    let n = gl.len();
    let psi_n = states[idx].psi.values();
    let dpsi_n = states[idx].dpsi.values();
    let max = psi_n.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let sign_left = psi_n
        .iter()
        .find(|x| x.abs() > 1e-6 * max)
        .map_or(1.0, |x| x.signum());
    let sign_right = psi_n
        .iter()
        .rev()
        .find(|x| x.abs() > 1e-6 * max)
        .map_or(1.0, |x| x.signum());
    if gr[0] == 0.0 || gl[n - 1] == 0.0 {
        return Err(Error::Numerical(format!(
            "target energy {target} is an eigenvalue of the unperturbed problem"
        )));
    }
    let b = -sign_left / gr[0];
    let wronskian = |a: f64| {
        let f: Vec<f64> = gl.iter().zip(&gr).map(|(l, r)| a * l + b * r).collect();
        let df = solution_derivative(v, &f, target);
        let w: Vec<f64> = (0..n).map(|i| psi_n[i] * df[i] - dpsi_n[i] * f[i]).collect();
        (f, df, w)
    };
    let a0 = sign_right / gl[n - 1];
    let (_, _, w0) = wronskian(a0);
    let ends = EndAmplitudes::new(v);
    let want = ends.ratio(psi_n, dpsi_n, en);
    let hat = |i: usize| psi_n[i] / w0[i];
    let dhat = |i: usize| dpsi_n[i] / w0[i];
    let trial = ends.ratio_at(hat(0), dhat(0), hat(n - 1), dhat(n - 1), target);
    // the right amplitude of the moved state scales like 1/a
    let q = trial / want;
    let a = if q.is_finite() && q > 0.0 { a0 * q } else { a0 };
    let (f, df, w) = wronskian(a);
    let dmin = check_denominator(v.grid(), &w, 0..n, opts.singular_ratio)?;
    let gap = en - target;
    let dw: Vec<f64> = (0..n).map(|i| gap * psi_n[i] * f[i]).collect();
    let ddw: Vec<f64> = (0..n)
        .map(|i| gap * (dpsi_n[i] * f[i] + psi_n[i] * df[i]))
        .collect();
    let body: Vec<f64> = (0..n)
        .map(|i| {
            let r = dw[i] / w[i];
            v.body().values()[i] - 2.0 * (ddw[i] / w[i] - r * r)
        })
        .collect();
    let (potential, capped) = capped_potential(v, body, opts)?;

    let mut out = Vec::with_capacity(states.len());
    for s in states {
        let (psi, dpsi): (Vec<f64>, Vec<f64>) = if s.n == idx {
            (
                (0..n).map(|i| psi_n[i] / w[i]).collect(),
                (0..n)
                    .map(|i| dpsi_n[i] / w[i] - psi_n[i] * dw[i] / (w[i] * w[i]))
                    .collect(),
            )
        } else {
            let pk = s.psi.values();
            let dpk = s.dpsi.values();
            let ek = s.energy;
            (0..n)
                .map(|i| {
                    let a = f[i] * dpk[i] - df[i] * pk[i];
                    let b = psi_n[i] * dpk[i] - dpsi_n[i] * pk[i];
                    let num = (ek - en) * psi_n[i] * a - (ek - target) * f[i] * b;
                    let dnum = (ek - en) * dpsi_n[i] * a - (ek - target) * df[i] * b;
                    (num / w[i], dnum / w[i] - num * dw[i] / (w[i] * w[i]))
                })
                .unzip()
        };
        let e = if s.n == idx { target } else { s.energy };
        out.push(transformed_state(&potential, s.n, e, psi, dpsi)?);
    }
    Ok(TransformResult {
        potential,
        states: out,
        step_log: vec![StepRecord {
            step,
            factorization_energies: vec![en, target],
            denominator_min: dmin,
            capped_points: capped,
            notes: vec![format!(
                "two-seed Wronskian: removes E = {en} and creates E = {target}"
            )],
        }],
    })
}

/// Closed-form shift of the box ground state `1 → 1 + t` on `[−π/2, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxShift {
    pub potential: SampledFn,
    /// Normalized ground state of `potential`, integrated directly.
    pub psi: SampledFn,
    pub energy: f64,
    /// The printed wavefunction `cos(√(1+t)·π/2)/D(x)`, unnormalized.
    pub printed_psi: SampledFn,
    /// `max|−ψ″ + Vψ − (1+t)ψ| / max|ψ|` for the printed wavefunction; NaN
    /// when it vanishes identically.
    pub printed_residual: f64,
}

/// `V(x) = 2t Ñ′/D̃ + 2t² Ñ²/D̃²` with `S = sin(sx)/s`, `s = √(1+t)`,
/// `Ñ = S cos x` and `D̃ = S sin x + cos(sx) cos x`, so that `D̃′ = −tÑ` and
/// `V = −2(ln D̃)″` with no differencing.
///
/// The printed wavefunction has an x-independent numerator and does not solve
/// the equation (its residual is reported); `psi` is the directly integrated
/// ground state instead.
pub fn box_shift_closed_form(t: f64, grid: Grid) -> Result<BoxShift> {
    if (grid.x_min() + PI / 2.0).abs() > 1e-12 || (grid.x_max() - PI / 2.0).abs() > 1e-12 {
        return invalid("the closed form is defined on [−π/2, π/2]");
    }
    if !t.is_finite() || t >= 3.0 {
        return invalid(format!(
            "t = {t} must keep 1 + t below the second level 4"
        ));
    }
    let e = 1.0 + t;
    let half = PI / 2.0;
    let (sc, printed_num): (Box<dyn Fn(f64) -> (f64, f64)>, f64) = if e > 1e-14 {
        let s = e.sqrt();
        (Box::new(move |x| ((s * x).sin() / s, (s * x).cos())), (s * half).cos())
    } else if e < -1e-14 {
        let y = (-e).sqrt();
        (Box::new(move |x| ((y * x).sinh() / y, (y * x).cosh())), (y * half).cosh())
    } else {
        (Box::new(|x| (x, 1.0)), 1.0)
    };
    let n = grid.len();
    let mut v = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut residual = Vec::with_capacity(n);
    for x in grid.nodes() {
        let (s, c) = sc(x);
        let num = s * x.cos();
        let den = s * x.sin() + c * x.cos();
        let dnum = c * x.cos() - s * x.sin();
        v.push(2.0 * t * dnum / den + 2.0 * t * t * num * num / (den * den));
        d.push(den);
        residual.push(printed_num * (t * dnum / (den * den) - e / den));
    }
    check_denominator(&grid, &d, 0..n, 1e-12)?;
    let printed: Vec<f64> = d.iter().map(|den| printed_num / den).collect();
    let pmax = printed.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let rmax = residual.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let printed_residual = if printed_num.abs() > 1e-12 {
        rmax / pmax
    } else {
        f64::NAN
    };
    let potential = SampledFn::new(grid, v)?;
    let wells = Potential::new(potential.clone(), BcKind::HardWalls, Vec::new())?;
    let ground = bound_states(&wells, 1)?.remove(0);
    Ok(BoxShift {
        potential,
        psi: ground.psi,
        energy: ground.energy,
        printed_psi: SampledFn::new(grid, printed)?,
        printed_residual,
    })
}

/// Running integrals of `ψ_n ψ_k` from one end, including the analytic tail
/// beyond a decaying edge.
struct Running<'a> {
    v: &'a Potential,
    from_left: bool,
}

impl Running<'_> {
    fn integral(&self, a: &[f64], ea: f64, b: &[f64], eb: f64) -> Vec<f64> {
        let h = self.v.grid().spacing();
        let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        let (vl, vr) = self.v.asymptotes();
        let n = prod.len();
        if self.from_left {
            let tail = if self.v.bc() == BcKind::DecayingLine {
                prod[0] / (kappa(vl, ea) + kappa(vl, eb))
            } else {
                0.0
            };
            cumulative(&prod, h).into_iter().map(|x| x + tail).collect()
        } else {
            let tail = if matches!(self.v.bc(), BcKind::DecayingLine | BcKind::DecayingHalfLine) {
                prod[n - 1] / (kappa(vr, ea) + kappa(vr, eb))
            } else {
                0.0
            };
            let rev: Vec<f64> = prod.iter().rev().copied().collect();
            let mut acc: Vec<f64> = cumulative(&rev, h).into_iter().map(|x| x + tail).collect();
            acc.reverse();
            acc
        }
    }

    /// `+1` when the integral grows with x.
    fn sign(&self) -> f64 {
        if self.from_left {
            1.0
        } else {
            -1.0
        }
    }
}

/// Rescales the spectral weight of level `level` by `√(1+λ)`, keeping every
/// energy: `V̂ = V − 2(ln(1 + λI))″` with `I` the running integral of `ψ_n²`
/// measured from the end where the weight is defined (the left end for wall
/// and half-line problems, the right tail on the line).
pub fn scale_swf(
    v: &Potential,
    states: &[BoundState],
    level: usize,
    lambda: f64,
    opts: &TransformOptions,
) -> Result<TransformResult> {
    check_transformable(v)?;
    if !(lambda > -1.0) || !lambda.is_finite() {
        return invalid(format!(
            "lambda = {lambda} must exceed −1 (λ = −1 removes the level)"
        ));
    }
    let idx = level_index(level)?;
    let states = tracked_states(v, states, idx + 1)?;
    let step = DarbouxStep::ScaleSwf { level, lambda };
    if lambda == 0.0 {
        return Ok(identity(v, &states, step, "lambda = 0 leaves the potential unchanged"));
    }
    let run = Running {
        v,
        from_left: v.bc() != BcKind::DecayingLine,
    };
    let sg = run.sign();
    let target = &states[idx];
    let (p, dp, en) = (target.psi.values(), target.dpsi.values(), target.energy);
    let n = p.len();
    let i_n = run.integral(p, en, p, en);
    let d: Vec<f64> = i_n.iter().map(|x| 1.0 + lambda * x).collect();
    let dmin = check_denominator(v.grid(), &d, 0..n, opts.singular_ratio)?;
    let body: Vec<f64> = (0..n)
        .map(|i| {
            let r = lambda * p[i] * p[i] / d[i];
            let second = sg * 2.0 * lambda * p[i] * dp[i] / d[i] - r * r;
            v.body().values()[i] - 2.0 * second
        })
        .collect();
    let (potential, capped) = capped_potential(v, body, opts)?;
    let root = (1.0 + lambda).sqrt();
    let mut out = Vec::with_capacity(states.len());
    for s in &states {
        let (psi, dpsi): (Vec<f64>, Vec<f64>) = if s.n == idx {
            (0..n)
                .map(|i| {
                    let psi = root * p[i] / d[i];
                    let dpsi = root * (dp[i] / d[i] - sg * lambda * p[i].powi(3) / (d[i] * d[i]));
                    (psi, dpsi)
                })
                .unzip()
        } else {
            let pk = s.psi.values();
            let dpk = s.dpsi.values();
            let j = run.integral(p, en, pk, s.energy);
            (0..n)
                .map(|i| {
                    let psi = pk[i] - lambda * p[i] * j[i] / d[i];
                    let dpsi = dpk[i]
                        - lambda
                            * (dp[i] * j[i] / d[i] + sg * p[i] * p[i] * pk[i] / d[i]
                                - sg * lambda * p[i].powi(3) * j[i] / (d[i] * d[i]));
                    (psi, dpsi)
                })
                .unzip()
        };
        out.push(transformed_state(&potential, s.n, s.energy, psi, dpsi)?);
    }
    Ok(TransformResult {
        potential,
        states: out,
        step_log: vec![StepRecord {
            step,
            factorization_energies: vec![en],
            denominator_min: dmin,
            capped_points: capped,
            notes: Vec::new(),
        }],
    })
}

/// Deletes level `level` by sending its spectral weight to zero.
///
/// The ground state goes through [`darboux_remove_ground`]. For an excited
/// level the λ → −1 limit of [`scale_swf`] is taken analytically: with
/// `J = 1 − I` written as the running integral of `ψ_n²` from the opposite
/// end, `V̂ = V − 2(ln J)″` is regular in the interior. On a hard-wall
/// problem `J` vanishes like `(R − x)³` at the far wall, which turns that
/// wall into a `6/(R − x)²` barrier.
pub fn remove_level_by_swf(
    v: &Potential,
    states: &[BoundState],
    level: usize,
    opts: &TransformOptions,
) -> Result<TransformResult> {
    check_transformable(v)?;
    let idx = level_index(level)?;
    let states = tracked_states(v, states, idx + 1)?;
    if idx == 0 {
        let mut r = darboux_remove_ground(v, &states, opts)?;
        r.step_log[0]
            .notes
            .push("zero weight of the ground state: single Darboux removal".into());
        return Ok(r);
    }
    let run = Running {
        v,
        from_left: v.bc() == BcKind::DecayingLine,
    };
    let sg = run.sign();
    let target = &states[idx];
    let (p, dp, en) = (target.psi.values(), target.dpsi.values(), target.energy);
    let n = p.len();
    let j = run.integral(p, en, p, en);
    let vanishing_end = !run.from_left && v.bc().right_wall();
    let range = interior(v, false, vanishing_end);
    let dmin = check_denominator(v.grid(), &j, range, opts.singular_ratio)?;
    let body: Vec<f64> = (0..n)
        .map(|i| {
            let r = p[i] * p[i] / j[i];
            let second = sg * 2.0 * p[i] * dp[i] / j[i] - r * r;
            v.body().values()[i] - 2.0 * second
        })
        .collect();
    let (potential, capped) = capped_potential(v, body, opts)?;
    let mut out = Vec::with_capacity(states.len() - 1);
    for s in states.iter().filter(|s| s.n != idx) {
        let pk = s.psi.values();
        let dpk = s.dpsi.values();
        let q = run.integral(p, en, pk, s.energy);
        let (psi, dpsi): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|i| {
                let psi = pk[i] - p[i] * q[i] / j[i];
                let dpsi = dpk[i]
                    - (dp[i] * q[i] / j[i] + sg * p[i] * p[i] * pk[i] / j[i]
                        - sg * p[i].powi(3) * q[i] / (j[i] * j[i]));
                (psi, dpsi)
            })
            .unzip();
        let new_n = if s.n > idx { s.n - 1 } else { s.n };
        out.push(transformed_state(&potential, new_n, s.energy, psi, dpsi)?);
    }
    let mut notes = vec!["zero-weight limit of the spectral-weight deformation".to_string()];
    if vanishing_end {
        notes.push("far wall becomes a 6/(R − x)² barrier".into());
    }
    Ok(TransformResult {
        potential,
        states: out,
        step_log: vec![StepRecord {
            step: DarbouxStep::Remove { level },
            factorization_energies: vec![en],
            denominator_min: dmin,
            capped_points: capped,
            notes,
        }],
    })
}

/// Norming constants that center a reflectionless well at `x = 0`:
/// `c_m² = 2κ_m ∏_{j≠m} |(κ_m + κ_j)/(κ_m − κ_j)|`.
pub fn symmetric_norms(kappas: &[f64]) -> Result<Vec<f64>> {
    check_kappas(kappas)?;
    Ok(kappas
        .iter()
        .enumerate()
        .map(|(m, &km)| {
            let prod: f64 = kappas
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != m)
                .map(|(_, &kj)| ((km + kj) / (km - kj)).abs())
                .product();
            (2.0 * km * prod).sqrt()
        })
        .collect())
}

fn check_kappas(kappas: &[f64]) -> Result<()> {
    if kappas.is_empty() {
        return invalid("at least one level is required");
    }
    if kappas.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
        return invalid("every κ must be positive");
    }
    for (i, a) in kappas.iter().enumerate() {
        if kappas[i + 1..].iter().any(|b| (a - b).abs() <= 1e-12 * a.max(*b)) {
            return invalid(format!("duplicate κ = {a}"));
        }
    }
    Ok(())
}

/// Solves the symmetric positive definite system `m z = b` by Cholesky after
/// diagonal equilibration; returns the solution and the pivot ratio.
fn equilibrated_cholesky(mut m: Vec<Vec<f64>>, b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = b.len();
    let s: Vec<f64> = (0..n).map(|i| 1.0 / m[i][i].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            m[i][j] *= s[i] * s[j];
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
    for j in 0..n {
        let mut d = m[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 0.0) {
            return None;
        }
        pmax = pmax.max(d);
        pmin = pmin.min(d);
        let root = d.sqrt();
        l[j][j] = root;
        for i in j + 1..n {
            let mut x = m[i][j];
            for k in 0..j {
                x -= l[i][k] * l[j][k];
            }
            l[i][j] = x / root;
        }
    }
    let mut y: Vec<f64> = (0..n).map(|i| b[i] * s[i]).collect();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    Some((y.iter().zip(&s).map(|(a, b)| a * b).collect(), pmax / pmin))
}

/// Components `ψ_m(x)` seen from the right: `(I + A)ψ = c ∘ e^{−κx}` with
/// `A_mn = c_m c_n e^{−(κ_m+κ_n)x}/(κ_m+κ_n)`, solved in the scaled form
/// `(diag(1/c²) + E K E) z = e^{−κx}`, `ψ = z/c`, `E = diag(e^{−κx})`.
fn bargmann_components(kappas: &[f64], norms: &[f64], x: f64) -> Option<(Vec<f64>, f64)> {
    let n = kappas.len();
    let e: Vec<f64> = kappas.iter().map(|k| (-k * x).exp()).collect();
    let m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let k = e[i] * e[j] / (kappas[i] + kappas[j]);
                    if i == j {
                        k + 1.0 / (norms[i] * norms[i])
                    } else {
                        k
                    }
                })
                .collect()
        })
        .collect();
    let (z, ratio) = equilibrated_cholesky(m, &e)?;
    Some((z.iter().zip(norms).map(|(a, c)| a / c).collect(), ratio))
}

/// Reflectionless well with bound states `−κ_m²` and right-tail norming
/// constants `c_m`, sampled on `grid` as a decaying-line potential.
///
/// `V = −4 Σ κ_m ψ_m²` from the normalized eigenfunctions. Each point is
/// evaluated from whichever side gives the better conditioned system: the
/// mirror image uses the left norming constants
/// `d_m = 2κ_m ∏|(κ_m+κ_j)/(κ_m−κ_j)| / c_m`.
pub fn bargmann_reflectionless(
    grid: Grid,
    kappas: &[f64],
    norms: &[f64],
    opts: &TransformOptions,
) -> Result<TransformResult> {
    check_kappas(kappas)?;
    if norms.len() != kappas.len() {
        return invalid("one norming constant per level is required");
    }
    if norms.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return invalid("norming constants must be positive");
    }
    let mut order: Vec<usize> = (0..kappas.len()).collect();
    order.sort_by(|a, b| kappas[*b].total_cmp(&kappas[*a]));
    let k: Vec<f64> = order.iter().map(|&i| kappas[i]).collect();
    let c: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let sym = symmetric_norms(&k)?;
    let d: Vec<f64> = sym.iter().zip(&c).map(|(s, c)| s * s / c).collect();

    let n = grid.len();
    let count = k.len();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = grid.x(i);
            let right = bargmann_components(&k, &c, x);
            let left = bargmann_components(&k, &d, -x).map(|(p, r)| {
                let p = p
                    .iter()
                    .enumerate()
                    .map(|(m, v)| if m % 2 == 0 { *v } else { -v })
                    .collect();
                (p, r)
            });
            let best = match (right, left) {
                (Some(a), Some(b)) => Some(if a.1 <= b.1 { a } else { b }),
                (a, b) => a.or(b),
            };
            match best {
                Some((p, ratio)) if ratio <= 1e14 => Ok(p),
                Some((_, ratio)) => Err(Error::Numerical(format!(
                    "reflectionless system ill-conditioned at x = {x} (pivot ratio {ratio:.3e})"
                ))),
                None => Err(Error::Numerical(format!(
                    "reflectionless system lost positive definiteness at x = {x}"
                ))),
            }
        })
        .collect();
    let mut psi = vec![vec![0.0; n]; count];
    for (i, row) in rows.into_iter().enumerate() {
        for (m, v) in row?.into_iter().enumerate() {
            psi[m][i] = v;
        }
    }
    let body: Vec<f64> = (0..n)
        .map(|i| -4.0 * (0..count).map(|m| k[m] * psi[m][i] * psi[m][i]).sum::<f64>())
        .collect();
    let (potential, capped) = capped_potential(
        &Potential::free(grid, BcKind::DecayingLine),
        body,
        opts,
    )?;
    let mut states = Vec::with_capacity(count);
    for (m, p) in psi.into_iter().enumerate() {
        let e = -k[m] * k[m];
        let dp = solution_derivative(&potential, &p, e);
        states.push(finish_state(&potential, m, e, p, dp)?);
    }
    Ok(TransformResult {
        potential,
        states,
        step_log: vec![StepRecord {
            step: DarbouxStep::Bargmann {
                kappas: k.clone(),
                norms: c,
            },
            factorization_energies: k.iter().map(|x| -x * x).collect(),
            denominator_min: 0.0,
            capped_points: capped,
            notes: Vec::new(),
        }],
    })
}

/// Norm bookkeeping of a state embedded in the continuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsecNorm {
    /// `∫_0^L ψ²` on the grid.
    pub truncated: f64,
    /// Exact `∫_L^∞ ψ² = 1/(λ D(L))`.
    pub tail: f64,
    pub tail_fraction: f64,
}

fn bsec_integral(k: f64, x: f64) -> f64 {
    x / 2.0 - (2.0 * k * x).sin() / (4.0 * k)
}

fn check_bsec(k: f64, lambda: f64) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return invalid(format!("k = {k} must be positive"));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return invalid(format!("lambda = {lambda} must be positive"));
    }
    Ok(())
}

fn bsec_potential(k: f64, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let d = 1.0 + lambda * bsec_integral(k, x);
    let s = (k * x).sin();
    -2.0 * (lambda * k * (2.0 * k * x).sin() / d - (lambda * s * s / d).powi(2))
}

/// State at `E = k²` embedded in the continuum of a half-line potential:
/// `V = −2(ln(1 + λI))″`, `I = ∫_0^x sin²(ks) ds`, `ψ = sin(kx)/(1 + λI)`.
/// The grid must start at `x = 0`; the state is normalized on the grid.
pub fn embed_bsec(k: f64, lambda: f64, grid: Grid, opts: &TransformOptions) -> Result<TransformResult> {
    check_bsec(k, lambda)?;
    if grid.x_min().abs() > 1e-12 {
        return invalid("the embedding grid must start at x = 0");
    }
    let body = grid.sample(|x| bsec_potential(k, lambda, x))?;
    let potential = Potential::truncated(body, BcKind::DecayingHalfLine, Vec::new())?;
    let (psi, dpsi): (Vec<f64>, Vec<f64>) = grid
        .nodes()
        .map(|x| {
            let d = 1.0 + lambda * bsec_integral(k, x);
            let s = (k * x).sin();
            (s / d, (k * (k * x).cos() * d - s * lambda * s * s) / (d * d))
        })
        .unzip();
    let nodes = count_nodes(&psi, 1e-12);
    let norm = bsec_norm(k, lambda, grid)?;
    let state = finish_state(&potential, nodes, k * k, psi, dpsi)?;
    let capped = potential
        .body()
        .values()
        .iter()
        .filter(|x| x.abs() >= opts.wall_cap)
        .count();
    Ok(TransformResult {
        potential,
        states: vec![state],
        step_log: vec![StepRecord {
            step: DarbouxStep::Bsec { k, lambda },
            factorization_energies: vec![k * k],
            denominator_min: 1.0,
            capped_points: capped,
            notes: vec![format!(
                "norm on [0, {}] = {:.6e}, exact tail = {:.6e}, tail fraction = {:.6e}",
                grid.x_max(),
                norm.truncated,
                norm.tail,
                norm.tail_fraction
            )],
        }],
    })
}

/// Truncated norm and exact tail of the unnormalized embedded state.
pub fn bsec_norm(k: f64, lambda: f64, grid: Grid) -> Result<BsecNorm> {
    check_bsec(k, lambda)?;
    let sq = grid.sample(|x| {
        let d = 1.0 + lambda * bsec_integral(k, x);
        ((k * x).sin() / d).powi(2)
    })?;
    let truncated = crate::grid::integrate(&sq);
    let tail = 1.0 / (lambda * (1.0 + lambda * bsec_integral(k, grid.x_max())));
    Ok(BsecNorm {
        truncated,
        tail,
        tail_fraction: tail / (truncated + tail),
    })
}

/// The embedding potential continued by zero over `[−left, 0]`, as a
/// decaying-line scatterer on `[−left, right]`.
pub fn bsec_whole_line(k: f64, lambda: f64, left: f64, right: f64, per_pi: usize) -> Result<Potential> {
    check_bsec(k, lambda)?;
    let grid = Grid::with_density(-left, right, per_pi)?;
    let body = grid.sample(|x| bsec_potential(k, lambda, x))?;
    Potential::truncated(body, BcKind::DecayingLine, Vec::new())
}

/// Full width at half maximum of the highest peak of `values` sampled at
/// increasing `energies`.
///
/// When the curve stays above half maximum all the way to one end of the
/// scan (a resonance sitting on a strong low-energy background), the width
/// is twice the half width measured on the other side. `None` if neither side
/// drops below half maximum.
pub fn resonance_fwhm(energies: &[f64], values: &[f64]) -> Option<f64> {
    let (peak_at, peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))?;
    let half = peak / 2.0;
    let crossing = |i: usize, j: usize| {
        let (a, b) = (values[i], values[j]);
        energies[i] + (half - a) / (b - a) * (energies[j] - energies[i])
    };
    let lo = (0..peak_at)
        .rev()
        .find(|&i| values[i] < half)
        .map(|i| crossing(i + 1, i));
    let hi = (peak_at + 1..values.len())
        .find(|&i| values[i] < half)
        .map(|i| crossing(i - 1, i));
    let centre = energies[peak_at];
    match (lo, hi) {
        (Some(a), Some(b)) => Some(b - a),
        (None, Some(b)) => Some(2.0 * (b - centre)),
        (Some(a), None) => Some(2.0 * (centre - a)),
        (None, None) => None,
    }
}

/// Brings level `level` up to within each gap of the next level, one
/// independent shift per gap.
pub fn degeneration_family(
    v: &Potential,
    states: &[BoundState],
    level: usize,
    gaps: &[f64],
    opts: &TransformOptions,
) -> Result<Vec<TransformResult>> {
    let idx = level_index(level)?;
    if gaps.is_empty() {
        return invalid("at least one gap is required");
    }
    if gaps.iter().any(|g| !(*g > 0.0)) {
        return invalid(
            "gaps must be positive: two bound states of a one-dimensional problem cannot share an energy",
        );
    }
    if gaps.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("gaps must be strictly decreasing");
    }
    let states = tracked_states(v, states, idx + 2)?;
    let spacing = states[idx + 1].energy - states[idx].energy;
    gaps.par_iter()
        .map(|g| shift_level(v, &states, level, spacing - g, opts))
        .collect()
}

/// Probability inside the central half of the domain.
pub fn central_mass(psi: &SampledFn) -> f64 {
    let g = psi.grid();
    let sq: Vec<f64> = psi.values().iter().map(|x| x * x).collect();
    let acc = cumulative(&sq, g.spacing());
    let quarter = (g.x_max() - g.x_min()) / 4.0;
    let a = g.nearest_index(g.x_min() + quarter);
    let b = g.nearest_index(g.x_max() - quarter);
    acc[b] - acc[a]
}

/// Applies one step to a potential and its tracked states.
///
/// Reflectionless and embedding steps build their potential from scratch on
/// the grid of `v`.
pub fn apply(
    v: &Potential,
    states: &[BoundState],
    step: &DarbouxStep,
    opts: &TransformOptions,
) -> Result<TransformResult> {
    match step {
        DarbouxStep::Remove { level } => remove_level_by_swf(v, states, *level, opts),
        DarbouxStep::Create { energy, sigma } => darboux_create(v, states, *energy, *sigma, opts),
        DarbouxStep::Shift { level, de } => shift_level(v, states, *level, *de, opts),
        DarbouxStep::ScaleSwf { level, lambda } => scale_swf(v, states, *level, *lambda, opts),
        DarbouxStep::Bsec { k, lambda } => embed_bsec(*k, *lambda, *v.grid(), opts),
        DarbouxStep::Bargmann { kappas, norms } => {
            bargmann_reflectionless(*v.grid(), kappas, norms, opts)
        }
    }
}
