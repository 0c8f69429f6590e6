//! Measurements behind the property suites: isospectrality ledger,
//! orthonormality and the ΔV sign rule.

use crate::darboux::TransformResult;
use crate::error::Result;
use crate::grid::integrate;
use crate::potential::{BoundState, Potential};
use crate::solver::bound_states;

/// Declared against measured energy of one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub level: usize,
    pub declared: f64,
    pub measured: f64,
}

impl LedgerEntry {
    pub fn deviation(&self) -> f64 {
        (self.measured - self.declared).abs()
    }
}

/// Solves the transformed potential directly and lines its levels up with
/// the declared ones.
pub fn isospectrality_ledger(result: &TransformResult) -> Result<Vec<LedgerEntry>> {
    let declared = result.energies();
    if declared.is_empty() {
        return Ok(Vec::new());
    }
    let measured = bound_states(&result.potential, declared.len())?;
    Ok(declared
        .iter()
        .zip(&measured)
        .enumerate()
        .map(|(i, (d, m))| LedgerEntry {
            level: i + 1,
            declared: *d,
            measured: m.energy,
        })
        .collect())
}

/// Largest `|⟨ψ_i, ψ_j⟩ − δ_ij|`.
pub fn orthonormality_defect(states: &[BoundState]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate().skip(i) {
            let overlap = integrate(&(&a.psi * &b.psi));
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((overlap - want).abs());
        }
    }
    Ok(worst)
}

/// Outcome of the ΔV sign rule for one shift.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignRule {
    /// Interior extrema of ψ_n that were checked.
    pub extrema: usize,
    /// Interior nodes of ψ_n that were checked.
    pub knots: usize,
    /// Positions where ΔV had the wrong sign.
    pub violations: Vec<f64>,
}

impl SignRule {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.extrema > 0
    }
}

/// For a shift of `state` by `de`, ΔV must have the sign of `de` at every
/// interior extremum of ψ_n and the opposite sign at every interior node.
pub fn sign_rule(before: &Potential, after: &Potential, state: &BoundState, de: f64) -> SignRule {
    let dv = after.body() - before.body();
    let psi = state.psi.values();
    let g = before.grid();
    let max = psi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut rule = SignRule::default();
    let check = |x: f64, want: f64, rule: &mut SignRule| {
        if dv.interpolate(x) * want <= 0.0 {
            rule.violations.push(x);
        }
    };
    for i in 1..psi.len() - 1 {
        let (a, b, c) = (psi[i - 1].abs(), psi[i].abs(), psi[i + 1].abs());
        if b > a && b >= c && b > 1e-2 * max {
            rule.extrema += 1;
            check(g.x(i), de, &mut rule);
        }
        if psi[i] != 0.0 && psi[i].signum() != psi[i + 1].signum() && psi[i + 1] != 0.0 {
            let t = psi[i] / (psi[i] - psi[i + 1]);
            rule.knots += 1;
            check(g.x(i) + t * g.spacing(), -de, &mut rule);
        }
    }
    rule
}

/// One property measured on one example.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub property: &'static str,
    pub example: &'static str,
    /// False when the property has no meaning for the boundary kind.
    pub applicable: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        !self.applicable || self.worst < self.tolerance
    }
}

/// Tolerances of the property suite.
pub const ISOSPECTRAL_TOL: f64 = 1e-5;
pub const ORTHONORMAL_TOL: f64 = 1e-6;
pub const FLUX_TOL: f64 = 1e-8;
pub const ROUND_TRIP_TOL: f64 = 1e-6;
/// Shifts in the sign-rule check use this fraction of the no-crossing room;
/// the rule describes the first-order response.
pub const SIGN_RULE_FRACTION: f64 = 0.1;

fn interior_diff(a: &Potential, b: &Potential) -> f64 {
    let g = a.grid();
    let m = 10.0 * g.spacing();
    a.body()
        .max_abs_diff_where(b.body(), |x| x > g.x_min() + m && x < g.x_max() - m)
}

/// Runs every property on one example potential.
pub fn property_suite(example: &crate::corpus::Example) -> Result<Vec<PropertyOutcome>> {
    use crate::darboux::{
        darboux_create, level_window, remove_level_by_swf, scale_swf, shift_level, TransformOptions,
    };
    use crate::potential::BcKind;
    use crate::solver::{bound_state_count, scattering};

    let v = &example.potential;
    let opts = TransformOptions::default();
    let count = match v.bc() {
        BcKind::HardWalls => 4,
        _ => bound_state_count(v)?.min(4),
    };
    let states = bound_states(v, count)?;
    let outcome = |property, applicable, worst, tolerance, detail: String| PropertyOutcome {
        property,
        example: example.name,
        applicable,
        worst,
        tolerance,
        detail,
    };
    let mut out = Vec::new();

    out.push(outcome(
        "orthonormality",
        true,
        orthonormality_defect(&states)?,
        ORTHONORMAL_TOL,
        format!("{count} oracle states"),
    ));

    // isospectrality ledger and sign rule over a set of steps
    let mut ledger_worst = 0.0f64;
    let mut steps = 0;
    let mut sign_violations = Vec::new();
    let mut sign_checked = 0;
    let mut record = |r: &crate::darboux::TransformResult| -> Result<()> {
        for e in isospectrality_ledger(r)? {
            ledger_worst = ledger_worst.max(e.deviation());
        }
        steps += 1;
        Ok(())
    };
    for level in 1..=count.min(2) {
        let (lo, hi) = level_window(v, &states, level)?;
        let e = states[level - 1].energy;
        let up = hi - e;
        let down = if lo.is_finite() { e - lo } else { up };
        for de in [SIGN_RULE_FRACTION * up.min(3.0), -SIGN_RULE_FRACTION * down.min(3.0)] {
            let r = shift_level(v, &states, level, de, &opts)?;
            record(&r)?;
            let rule = sign_rule(v, &r.potential, &states[level - 1], de);
            sign_checked += rule.extrema + rule.knots;
            if !rule.holds() {
                sign_violations.push(format!("n={level} dE={de:.4}"));
            }
        }
    }
    let scaled = scale_swf(v, &states, 1, 1.0, &opts)?;
    record(&scaled)?;
    record(&remove_level_by_swf(v, &states, 1, &opts)?)?;
    let created = if v.bc() == BcKind::DecayingLine {
        let c = darboux_create(v, &states, states[0].energy - 1.0, 0.5, &opts)?;
        record(&c)?;
        Some(c)
    } else {
        None
    };
    out.push(outcome(
        "isospectrality",
        true,
        ledger_worst,
        ISOSPECTRAL_TOL,
        format!("{steps} steps"),
    ));

    let flux = if v.bc() == BcKind::DecayingLine {
        let (l, r) = v.asymptotes();
        let floor = l.max(r);
        let mut worst = 0.0f64;
        for e in [0.25, 0.5, 1.0, 2.0, 4.0, 7.0, 10.0] {
            let s = scattering(v, floor + e)?;
            worst = worst.max((s.flux() - 1.0).abs());
        }
        outcome("flux", true, worst, FLUX_TOL, "7 energies".into())
    } else {
        outcome("flux", false, 0.0, FLUX_TOL, "no open channel on both sides".into())
    };
    out.push(flux);

    let back = scale_swf(&scaled.potential, &scaled.states, 1, -0.5, &opts)?;
    let mut round = interior_diff(&back.potential, v);
    let mut detail = String::from("scale 1 then -1/2");
    if let Some(c) = created {
        let r = remove_level_by_swf(&c.potential, &c.states, 1, &opts)?;
        round = round.max(interior_diff(&r.potential, v));
        detail.push_str("; create then remove");
    }
    out.push(outcome("involution", true, round, ROUND_TRIP_TOL, detail));

    out.push(PropertyOutcome {
        property: "sign-rule",
        example: example.name,
        applicable: true,
        worst: sign_violations.len() as f64,
        tolerance: 0.5,
        detail: if sign_violations.is_empty() {
            format!("{sign_checked} extrema and knots")
        } else {
            format!("violated for {}", sign_violations.join(", "))
        },
    });
    Ok(out)
}
