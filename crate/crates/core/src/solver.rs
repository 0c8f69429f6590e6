//! Direct problem: bound states, scattering amplitudes and the periodic
//! discriminant of a sampled potential.
//!
//! Bound states come from Numerov shooting from both ends. Each energy is
//! classified by the Sturm count `Z_L + Z_R + [ψ_L ψ_R W > 0]` at a matching
//! node, which brackets every level without crossing forbidden regions in the
//! unstable direction; the bracketed level is then polished as a root of the
//! matching Wronskian. Transfer matrices use a fourth-order Magnus step, which
//! keeps every step matrix exactly unimodular.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::SampledFn;
use crate::potential::{BcKind, BoundState, Potential, ScatteringResult};

/// Renormalization threshold while shooting.
const OVERFLOW: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative energy tolerance, `|ΔE| < tol · max(1, |E|)`.
    pub energy_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            energy_tol: 1e-13,
            max_iterations: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Edge {
    Wall,
    /// Constant continuation with `V − E = f > 0` beyond the grid.
    Tail,
}

/// Numerov shooting machinery for one potential.
pub(crate) struct Shooter<'a> {
    v: &'a [f64],
    h: f64,
    deltas: Vec<(usize, f64)>,
    left: Edge,
    right: Edge,
}

impl<'a> Shooter<'a> {
    pub(crate) fn new(p: &'a Potential) -> Result<Self> {
        let (left, right) = match p.bc() {
            BcKind::HardWalls => (Edge::Wall, Edge::Wall),
            BcKind::DecayingLine => (Edge::Tail, Edge::Tail),
            BcKind::DecayingHalfLine => (Edge::Wall, Edge::Tail),
            BcKind::Periodic => {
                return invalid("bound states of a periodic cell are not defined; use zones")
            }
        };
        if p.grid().len() < 7 {
            return invalid("shooting needs at least 7 grid points");
        }
        Ok(Self {
            v: p.body().values(),
            h: p.grid().spacing(),
            deltas: p.delta_nodes(),
            left,
            right,
        })
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    fn w(&self, i: usize, e: f64) -> f64 {
        1.0 - self.h * self.h * (self.v[i] - e) / 12.0
    }

    fn delta_at(&self, i: usize) -> Option<f64> {
        self.deltas.iter().find(|d| d.0 == i).map(|d| d.1)
    }

    /// Ratio ψ(next)/ψ(edge) of the decaying discrete solution in a constant
    /// region with `V − E = f > 0`.
    fn tail_ratio(&self, f: f64) -> f64 {
        let hh = self.h * self.h * f / 12.0;
        let c = (1.0 + 5.0 * hh) / (1.0 - hh);
        c + (c * c - 1.0).max(0.0).sqrt()
    }

    fn shoot_left(&self, e: f64, upto: usize) -> Vec<f64> {
        let n = self.len();
        let mut psi = vec![0.0; n];
        match self.left {
            Edge::Wall => {
                psi[0] = 0.0;
                psi[1] = self.h;
            }
            Edge::Tail => {
                psi[0] = 1.0;
                psi[1] = self.tail_ratio(self.v[0] - e);
            }
        }
        for i in 1..upto {
            let mut next = ((12.0 - 10.0 * self.w(i, e)) * psi[i]
                - self.w(i - 1, e) * psi[i - 1])
                / self.w(i + 1, e);
            if let Some(g) = self.delta_at(i) {
                next += g * psi[i] * self.h * (1.0 + 2.0 * (1.0 - self.w(i + 1, e)));
            }
            psi[i + 1] = next;
            if next.abs() > OVERFLOW {
                for p in psi.iter_mut().take(i + 2) {
                    *p /= OVERFLOW;
                }
            }
        }
        psi
    }

    fn shoot_right(&self, e: f64, downto: usize) -> Vec<f64> {
        let n = self.len();
        let mut psi = vec![0.0; n];
        match self.right {
            Edge::Wall => {
                psi[n - 1] = 0.0;
                psi[n - 2] = self.h;
            }
            Edge::Tail => {
                psi[n - 1] = 1.0;
                psi[n - 2] = self.tail_ratio(self.v[n - 1] - e);
            }
        }
        let mut i = n - 2;
        while i > downto {
            let mut next = ((12.0 - 10.0 * self.w(i, e)) * psi[i]
                - self.w(i + 1, e) * psi[i + 1])
                / self.w(i - 1, e);
            if let Some(g) = self.delta_at(i) {
                next += g * psi[i] * self.h * (1.0 + 2.0 * (1.0 - self.w(i - 1, e)));
            }
            psi[i - 1] = next;
            if next.abs() > OVERFLOW {
                for p in psi.iter_mut().skip(i - 1) {
                    *p /= OVERFLOW;
                }
            }
            i -= 1;
        }
        psi
    }

    /// Matching node: the rightmost classically allowed node, kept away from
    /// the ends and from delta nodes.
    fn match_index(&self, e: f64) -> usize {
        let n = self.len();
        let allowed = (0..n).rev().find(|&i| self.v[i] < e);
        // an attractive delta binds like a well; match just to its right
        let bound_delta = self
            .deltas
            .iter()
            .filter(|d| d.1 < 0.0)
            .map(|d| d.0 + 2)
            .max();
        let mut m = match allowed.max(bound_delta) {
            Some(i) => i,
            None => {
                let mut best = 0;
                for i in 0..n {
                    if self.v[i] < self.v[best] {
                        best = i;
                    }
                }
                best
            }
        };
        m = m.clamp(3, n - 4);
        while self.deltas.iter().any(|d| d.0.abs_diff(m) <= 1) && m > 3 {
            m -= 1;
        }
        m
    }

    fn deriv_at(&self, psi: &[f64], i: usize, e: f64) -> f64 {
        let a = 2.0 * self.w(i + 1, e) - 1.0;
        let b = 2.0 * self.w(i - 1, e) - 1.0;
        (a * psi[i + 1] - b * psi[i - 1]) / (2.0 * self.h)
    }

    /// Left and right solutions plus the matching Wronskian at node `m`.
    fn matched(&self, e: f64, m: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let l = self.shoot_left(e, m + 1);
        let r = self.shoot_right(e, m - 1);
        let wr = l[m] * self.deriv_at(&r, m, e) - self.deriv_at(&l, m, e) * r[m];
        (l, r, wr)
    }

    /// Number of eigenvalues strictly below `e`.
    pub(crate) fn count_below(&self, e: f64) -> usize {
        let m = self.match_index(e);
        let (l, r, wr) = self.matched(e, m);
        let zl = count_changes(&l[1..=m]);
        let zr = count_changes(&r[m..self.len() - 1]);
        zl + zr + usize::from(l[m] * r[m] * wr > 0.0)
    }

    /// Solution started at the left end and carried across the whole grid.
    pub(crate) fn full_from_left(&self, e: f64) -> Vec<f64> {
        self.shoot_left(e, self.len() - 1)
    }

    pub(crate) fn full_from_right(&self, e: f64) -> Vec<f64> {
        self.shoot_right(e, 0)
    }

    /// Eigenfunction at a converged energy, matched at node `m`.
    fn eigenfunction(&self, e: f64) -> Vec<f64> {
        let n = self.len();
        // Stitch where the state is large, in the middle of the allowed
        // region: each piece then stays away from the end it did not start
        // from, where its small energy error would show up as a large
        // relative error of a small ψ.
        let m = match (
            (0..n).find(|&i| self.v[i] < e),
            (0..n).rev().find(|&i| self.v[i] < e),
        ) {
            (Some(a), Some(b)) if b > a + 8 => {
                let l = self.shoot_left(e, b);
                let lo = (a + (b - a) / 4).max(3);
                let hi = (b - (b - a) / 4).min(n - 4);
                let mut best = lo;
                for i in lo..=hi {
                    let near_delta = self.deltas.iter().any(|d| d.0.abs_diff(i) <= 1);
                    if !near_delta && l[i].abs() > l[best].abs() {
                        best = i;
                    }
                }
                best
            }
            _ => self.match_index(e),
        };
        let (l, r, _) = self.matched(e, m);
        let scale = if r[m] != 0.0 { l[m] / r[m] } else { 0.0 };
        let mut psi = vec![0.0; n];
        psi[..=m].copy_from_slice(&l[..=m]);
        for i in m + 1..n {
            psi[i] = r[i] * scale;
        }
        psi
    }
}

fn count_changes(values: &[f64]) -> usize {
    let mut changes = 0;
    let mut last = 0.0f64;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if last != 0.0 && s != last {
            changes += 1;
        }
        last = s;
    }
    changes
}

/// Number of interior sign changes, ignoring samples below `floor · max|ψ|`.
pub fn count_nodes(psi: &[f64], floor: f64) -> usize {
    let max = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = floor * max;
    let kept: Vec<f64> = psi
        .iter()
        .copied()
        .filter(|v| v.abs() > cut)
        .collect();
    count_changes(&kept)
}

/// Derivative of a sampled solution of `ψ″ = f ψ`, consistent with the
/// Numerov discretization (fourth order in the interior).
pub fn solution_derivative(p: &Potential, psi: &[f64], energy: f64) -> Vec<f64> {
    let v = p.body().values();
    let h = p.grid().spacing();
    let n = psi.len();
    let f = |i: usize| v[i] - energy;
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let a = 1.0 - h * h * f(i + 1) / 6.0;
        let b = 1.0 - h * h * f(i - 1) / 6.0;
        d[i] = (a * psi[i + 1] - b * psi[i - 1]) / (2.0 * h);
    }
    let one_sided = |p0: f64, p1: f64, p2: f64, p3: f64, p4: f64| {
        (-25.0 * p0 + 48.0 * p1 - 36.0 * p2 + 16.0 * p3 - 3.0 * p4) / (12.0 * h)
    };
    let decaying_left = p.bc() == BcKind::DecayingLine;
    let decaying_right = matches!(p.bc(), BcKind::DecayingLine | BcKind::DecayingHalfLine);
    // ψ(h) = hψ′(1 + h²f/6 + h³f′/12) at a wall; f and f′ taken from the
    // first interior nodes so that the wall sample of V is never used
    d[0] = if p.bc().left_wall() && psi[0] == 0.0 {
        psi[1] / (h * (1.0 + h * h * (3.0 * f(1) - f(2)) / 12.0))
    } else if decaying_left && f(0) > 0.0 {
        exponential_edge_slope(psi[0], psi[1], h, f(0))
    } else {
        one_sided(psi[0], psi[1], psi[2], psi[3], psi[4])
    };
    d[n - 1] = if p.bc().right_wall() && psi[n - 1] == 0.0 {
        -psi[n - 2] / (h * (1.0 + h * h * (3.0 * f(n - 2) - f(n - 3)) / 12.0))
    } else if decaying_right && f(n - 1) > 0.0 {
        -exponential_edge_slope(psi[n - 1], psi[n - 2], h, f(n - 1))
    } else {
        -one_sided(psi[n - 1], psi[n - 2], psi[n - 3], psi[n - 4], psi[n - 5])
    };
    d
}

/// Slope at an edge beyond which `V − E = f > 0` stays constant, measured
/// into the grid: `ψ = A e^{κs} + B e^{−κs}` fitted to the first two samples
/// with the discrete Numerov growth factor.
fn exponential_edge_slope(p0: f64, p1: f64, h: f64, f: f64) -> f64 {
    let hh = h * h * f / 12.0;
    let c = (1.0 + 5.0 * hh) / (1.0 - hh);
    let r = c + (c * c - 1.0).max(0.0).sqrt();
    let a = (p1 - p0 / r) / (r - 1.0 / r);
    let b = p0 - a;
    r.ln() / h * (a - b)
}

/// Brent–Dekker root search on a bracketing interval.
pub(crate) fn brent(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    None
}

/// The lowest `count` bound states, ordered by energy.
pub fn bound_states(v: &Potential, count: usize) -> Result<Vec<BoundState>> {
    bound_states_with(v, count, &SolverOptions::default())
}

pub fn bound_states_with(
    v: &Potential,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<BoundState>> {
    if count == 0 {
        return invalid("count must be at least 1");
    }
    if v.deltas().iter().any(|d| {
        let i = v.grid().nearest_index(d.position);
        i == 0 || i + 1 == v.grid().len()
    }) {
        return invalid("deltas on the grid ends are only meaningful for periodic cells");
    }
    let sh = Shooter::new(v)?;
    let energies = eigenvalues(&sh, v, count, opts)?;
    energies
        .into_iter()
        .enumerate()
        .map(|(n, e)| build_state(&sh, v, n, e))
        .collect()
}

/// Number of bound states strictly below the continuum edge.
pub fn bound_state_count(v: &Potential) -> Result<usize> {
    let Some(edge) = v.continuum_edge() else {
        return invalid("hard-wall problems have infinitely many bound states");
    };
    let sh = Shooter::new(v)?;
    Ok(sh.count_below(edge - 1e-12 * edge.abs().max(1.0)))
}

fn energy_floor(sh: &Shooter, v: &Potential) -> f64 {
    let attractive: f64 = v
        .deltas()
        .iter()
        .filter(|d| d.strength < 0.0)
        .map(|d| d.strength.abs())
        .sum();
    let mut lo = v.body().min() - 1.0 - attractive * attractive;
    let mut step = 1.0 + lo.abs();
    for _ in 0..60 {
        if sh.count_below(lo) == 0 {
            break;
        }
        lo -= step;
        step *= 2.0;
    }
    lo
}

fn eigenvalues(sh: &Shooter, v: &Potential, count: usize, opts: &SolverOptions) -> Result<Vec<f64>> {
    let lo = energy_floor(sh, v);
    if sh.count_below(lo) != 0 {
        return Err(Error::Numerical(
            "could not find an energy below the spectrum".into(),
        ));
    }
    let hi = match v.continuum_edge() {
        Some(edge) => {
            let top = edge - 1e-12 * edge.abs().max(1.0);
            let found = sh.count_below(top);
            if found < count {
                return Err(Error::NotEnoughStates {
                    found,
                    requested: count,
                    edge,
                });
            }
            top
        }
        None => {
            let mut hi = v.body().max().max(lo + 1.0) + 1.0;
            let mut iter = 0;
            while sh.count_below(hi) < count {
                hi = lo + 2.0 * (hi - lo);
                iter += 1;
                if iter > 100 {
                    return Err(Error::Numerical("spectrum search did not terminate".into()));
                }
            }
            hi
        }
    };

    let mut out = Vec::with_capacity(count);
    let mut floor = lo;
    for n in 0..count {
        // isolate level n: count(a) == n, count(b) == n + 1
        let mut a = floor;
        let mut b = hi;
        let mut ca = sh.count_below(a);
        let mut cb = sh.count_below(b);
        let mut iter = 0;
        while !(ca == n && cb == n + 1) {
            let mid = 0.5 * (a + b);
            let cm = sh.count_below(mid);
            if cm <= n {
                a = mid;
                ca = cm;
            } else {
                b = mid;
                cb = cm;
            }
            iter += 1;
            if iter > opts.max_iterations {
                return Err(Error::Numerical(format!(
                    "could not isolate level {} (bracket [{a}, {b}])",
                    n + 1
                )));
            }
        }
        let tol = opts.energy_tol * a.abs().max(b.abs()).max(1.0);
        let m = sh.match_index(0.5 * (a + b));
        let polished = brent(|e| sh.matched(e, m).2, a, b, tol, opts.max_iterations);
        let e = match polished {
            Some(e) => e,
            None => {
                // Wronskian lost its sign change: fall back to pure counting
                let (mut a, mut b) = (a, b);
                let mut iter = 0;
                while b - a > tol {
                    let mid = 0.5 * (a + b);
                    if sh.count_below(mid) <= n {
                        a = mid;
                    } else {
                        b = mid;
                    }
                    iter += 1;
                    if iter > opts.max_iterations {
                        return Err(Error::Numerical(format!(
                            "level {} did not converge",
                            n + 1
                        )));
                    }
                }
                0.5 * (a + b)
            }
        };
        out.push(e);
        // count(b) == n + 1, so b already bounds the next level from below
        floor = b;
    }
    Ok(out)
}

fn build_state(sh: &Shooter, v: &Potential, n: usize, e: f64) -> Result<BoundState> {
    let psi = sh.eigenfunction(e);
    let dpsi = solution_derivative(v, &psi, e);
    let state = finish_state(v, n, e, psi, dpsi)?;
    let nodes = count_nodes(state.psi.values(), 1e-9);
    if nodes != n {
        return Err(Error::Numerical(format!(
            "level {} at E = {e} has {nodes} nodes",
            n + 1
        )));
    }
    Ok(state)
}

/// Normalizes `ψ` (and `ψ′` with it), fixes the sign so the first
/// significant sample is positive, and reads off the spectral weight.
pub(crate) fn finish_state(
    v: &Potential,
    n: usize,
    energy: f64,
    mut psi: Vec<f64>,
    mut dpsi: Vec<f64>,
) -> Result<BoundState> {
    let grid = *v.grid();
    let norm = crate::grid::simpson(&psi.iter().map(|p| p * p).collect::<Vec<_>>(), grid.spacing())
        .sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Numerical(format!("state {} has zero norm", n + 1)));
    }
    let max = psi.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    let lead = psi
        .iter()
        .find(|p| p.abs() > 1e-3 * max)
        .copied()
        .unwrap_or(1.0);
    let s = lead.signum() / norm;
    for p in psi.iter_mut().chain(dpsi.iter_mut()) {
        *p *= s;
    }
    let swf = spectral_weight(v, energy, &psi, &dpsi);
    Ok(BoundState {
        n,
        energy,
        psi: SampledFn::new(grid, psi)?,
        dpsi: SampledFn::new(grid, dpsi)?,
        swf,
    })
}

/// ψ′ at the left end, or the right-tail norming constant on the line.
pub(crate) fn spectral_weight(v: &Potential, energy: f64, psi: &[f64], dpsi: &[f64]) -> f64 {
    match v.bc() {
        BcKind::DecayingLine => {
            let k = (v.asymptotes().1 - energy).max(0.0).sqrt();
            psi[psi.len() - 1] * (k * v.grid().x_max()).exp()
        }
        _ => dpsi[0],
    }
}

/// Real 2×2 transfer matrix acting on `(ψ, ψ′)`.
pub type Transfer = [[f64; 2]; 2];

/// Double-double number `hi + lo`. The transfer product is carried in this
/// form: in forbidden regions |M| reaches 1e3 and more, and an f64 product
/// would lose `eps·|M|²` of the unit determinant to cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn renorm(s: f64, e: f64) -> Dd {
        let hi = s + e;
        Dd {
            hi,
            lo: e - (hi - s),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let e = (self.hi - (s - bb)) + (o.hi - bb);
        Dd::renorm(s, e + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn scale(self, a: f64) -> Dd {
        let p = self.hi * a;
        let e = self.hi.mul_add(a, -p);
        Dd::renorm(p, e + self.lo * a)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }
}

type DdTransfer = [[Dd; 2]; 2];

/// `a · m` with `a` exact in f64.
fn dd_mul(a: &Transfer, m: &DdTransfer) -> DdTransfer {
    let entry = |r: usize, c: usize| m[0][c].scale(a[r][0]).add(m[1][c].scale(a[r][1]));
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

/// Lagrange weights for the two Gauss points of interval `i`.
fn gauss_stencil(n: usize, i: usize) -> (usize, [[f64; 4]; 2]) {
    let start = i.saturating_sub(1).min(n - 4);
    let off = 0.5 / 3f64.sqrt();
    let taus = [i as f64 + 0.5 - off, i as f64 + 0.5 + off];
    let mut w = [[0.0; 4]; 2];
    for (g, tau) in taus.iter().enumerate() {
        for j in 0..4 {
            let mut l = 1.0;
            for m in 0..4 {
                if m != j {
                    l *= (tau - (start + m) as f64) / ((start + j) as f64 - (start + m) as f64);
                }
            }
            w[g][j] = l;
        }
    }
    (start, w)
}

fn transfer_product(v: &Potential, e: f64) -> DdTransfer {
    let vals = v.body().values();
    let n = vals.len();
    let h = v.grid().spacing();
    let deltas = v.delta_nodes();
    let c = 3f64.sqrt() * h * h / 12.0;
    let first = gauss_stencil(n, 0);
    let interior = gauss_stencil(n, 1);
    let last = gauss_stencil(n, n - 2);
    let mut m: DdTransfer = [[Dd::ONE, Dd::ZERO], [Dd::ZERO, Dd::ONE]];
    let mut next_delta = 0;
    for i in 0..n - 1 {
        while next_delta < deltas.len() && deltas[next_delta].0 == i {
            let g = deltas[next_delta].1;
            m = dd_mul(&[[1.0, 0.0], [g, 1.0]], &m);
            next_delta += 1;
        }
        let (start, w) = if i == 0 {
            first
        } else if i == n - 2 {
            last
        } else {
            (interior.0 + i - 1, interior.1)
        };
        let q = |g: usize| -> f64 {
            (0..4).map(|j| w[g][j] * vals[start + j]).sum::<f64>() - e
        };
        let (q1, q2) = (q(0), q(1));
        let alpha = -c * (q2 - q1);
        let beta = h;
        let gamma = 0.5 * h * (q1 + q2);
        let d = alpha * alpha + beta * gamma;
        let (ch, sh) = if d.abs() < 1e-8 {
            (1.0 + d / 2.0 + d * d / 24.0, 1.0 + d / 6.0 + d * d / 120.0)
        } else if d > 0.0 {
            let s = d.sqrt();
            (s.cosh(), s.sinh() / s)
        } else {
            let s = (-d).sqrt();
            (s.cos(), s.sin() / s)
        };
        let step = [
            [ch + sh * alpha, sh * beta],
            [sh * gamma, ch - sh * alpha],
        ];
        m = dd_mul(&step, &m);
    }
    m
}

/// Transfer matrix from `x_min` to `x_max` at energy `e`, deltas included as
/// exact derivative jumps.
pub fn transfer_matrix(v: &Potential, e: f64) -> Transfer {
    let m = transfer_product(v, e);
    [[m[0][0].hi, m[0][1].hi], [m[1][0].hi, m[1][1].hi]]
}

/// Determinant of the transfer matrix, evaluated before rounding the
/// entries to f64.
pub fn transfer_determinant(v: &Potential, e: f64) -> f64 {
    let m = transfer_product(v, e);
    let det = m[0][0].mul(m[1][1]).add(m[0][1].mul(m[1][0]).neg());
    det.hi + det.lo
}

/// Δ(E), the trace of the one-period transfer matrix.
pub fn band_discriminant(cell: &Potential, energy: f64) -> f64 {
    let m = transfer_product(cell, energy);
    let tr = m[0][0].add(m[1][1]);
    tr.hi + tr.lo
}

/// Reflection and transmission amplitudes for incidence from the left.
pub fn scattering(v: &Potential, energy: f64) -> Result<ScatteringResult> {
    if v.bc() != BcKind::DecayingLine {
        return invalid(format!(
            "scattering needs a decaying-line potential, got {}",
            v.bc().name()
        ));
    }
    let (vl, vr) = v.asymptotes();
    if !(energy > vl && energy > vr) {
        return invalid(format!(
            "energy {energy} is not above both asymptotic levels ({vl}, {vr})"
        ));
    }
    let kl = (energy - vl).sqrt();
    let kr = (energy - vr).sqrt();
    let x0 = v.grid().x_min();
    let x1 = v.grid().x_max();
    let m = transfer_matrix(v, energy);
    let i = Complex64::i();
    let out_phase = (i * kr * x1).exp();
    let psi_r = out_phase;
    let dpsi_r = i * kr * out_phase;
    // inverse of a unimodular matrix
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let psi_l = (m[1][1] * psi_r - m[0][1] * dpsi_r) / det;
    let dpsi_l = (-m[1][0] * psi_r + m[0][0] * dpsi_r) / det;
    let a = 0.5 * (psi_l + dpsi_l / (i * kl)) * (-i * kl * x0).exp();
    let b = 0.5 * (psi_l - dpsi_l / (i * kl)) * (i * kl * x0).exp();
    Ok(ScatteringResult {
        energy,
        r: b / a,
        t: 1.0 / a,
        k_left: kl,
        k_right: kr,
    })
}

/// Scattering over many energies, evaluated in parallel; the output order
/// matches the input order.
pub fn scattering_sweep(v: &Potential, energies: &[f64]) -> Result<Vec<ScatteringResult>> {
    energies.par_iter().map(|&e| scattering(v, e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, Grid};
    use crate::potential::Delta;
    use std::f64::consts::PI;

    fn box_potential(n: usize) -> Potential {
        Potential::hard_box(Grid::new(-PI / 2.0, PI / 2.0, n).unwrap())
    }

    fn soliton(depth_kappa: f64, l: f64) -> Potential {
        let grid = Grid::with_density(-l, l, 2000).unwrap();
        let body = grid
            .sample(|x| -2.0 * depth_kappa.powi(2) / (depth_kappa * x).cosh().powi(2))
            .unwrap();
        Potential::new(body, BcKind::DecayingLine, vec![]).unwrap()
    }

    #[test]
    fn box_levels_are_squares() {
        let states = bound_states(&box_potential(2001), 4).unwrap();
        for (s, exact) in states.iter().zip([1.0, 4.0, 9.0, 16.0]) {
            assert!((s.energy - exact).abs() < 1e-6, "{} vs {exact}", s.energy);
        }
    }

    #[test]
    fn box_states_have_expected_nodes_and_swf() {
        let states = bound_states(&box_potential(2001), 3).unwrap();
        for s in &states {
            assert_eq!(count_nodes(s.psi.values(), 1e-9), s.n);
            let norm = integrate(&(&s.psi * &s.psi));
            assert!((norm - 1.0).abs() < 1e-8);
        }
        // ψ_1 = √(2/π) cos x, so ψ′(−π/2) = √(2/π)
        assert!((states[0].swf - (2.0 / PI).sqrt()).abs() < 1e-9);
        // ψ_2 = √(2/π) sin 2x up to sign; positive near the left wall
        assert!((states[1].swf - 2.0 * (2.0 / PI).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn soliton_well_has_one_level() {
        let v = soliton(1.0, 20.0);
        let states = bound_states(&v, 1).unwrap();
        assert!((states[0].energy + 1.0).abs() < 1e-6);
        // ψ = sech(x)/√2 has the right-tail constant √2
        assert!((states[0].swf - 2f64.sqrt()).abs() < 1e-6);
        match bound_states(&v, 2) {
            Err(Error::NotEnoughStates { found: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn poschl_teller_box() {
        let grid = Grid::new(-PI / 2.0, PI / 2.0, 2001).unwrap();
        let body = grid
            .sample(|x| {
                let c = x.cos();
                if c.abs() < 1e-12 {
                    1e6
                } else {
                    (2.0 / (c * c)).min(1e6)
                }
            })
            .unwrap();
        let v = Potential::new(body, BcKind::HardWalls, vec![]).unwrap();
        let states = bound_states(&v, 3).unwrap();
        for (s, exact) in states.iter().zip([4.0, 9.0, 16.0]) {
            assert!((s.energy - exact).abs() < 1e-5, "{} vs {exact}", s.energy);
        }
    }

    #[test]
    fn refinement_is_stable() {
        let a = bound_states(&box_potential(2001), 4).unwrap();
        let b = bound_states(&box_potential(4001), 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.energy - y.energy).abs() < 1e-7);
        }
    }

    #[test]
    fn orthonormal_set() {
        let grid = Grid::new(-6.0, 6.0, 2401).unwrap();
        let body = grid.sample(|x| x * x).unwrap();
        let v = Potential::new(body, BcKind::HardWalls, vec![]).unwrap();
        let states = bound_states(&v, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let o = integrate(&(&states[i].psi * &states[j].psi));
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((o - target).abs() < 1e-6);
            }
        }
        // oscillator levels 2n + 1, box edges at ±4 barely matter
        for (n, s) in states.iter().enumerate() {
            assert!((s.energy - (2 * n + 1) as f64).abs() < 1e-5, "{}", s.energy);
        }
    }

    #[test]
    fn attractive_delta_binds() {
        let grid = Grid::new(-15.0, 15.0, 6001).unwrap();
        let v = Potential::new(
            SampledFn::zeros(grid),
            BcKind::DecayingLine,
            vec![Delta {
                position: 0.0,
                strength: -2.0,
            }],
        )
        .unwrap();
        let s = bound_states(&v, 1).unwrap();
        assert!((s[0].energy + 1.0).abs() < 1e-8, "{}", s[0].energy);
    }

    #[test]
    fn free_scattering_is_transparent() {
        let v = Potential::free(Grid::new(-5.0, 5.0, 1001).unwrap(), BcKind::DecayingLine);
        for e in [0.3, 1.0, 7.5] {
            let s = scattering(&v, e).unwrap();
            assert!(s.r.norm() < 1e-12);
            assert!((s.t.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn soliton_is_reflectionless() {
        let v = soliton(1.0, 20.0);
        let s = scattering(&v, 1.0).unwrap();
        assert!(s.r.norm() < 1e-6);
        assert!((s.t.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_delta_reflection() {
        let v = Potential::new(
            SampledFn::zeros(Grid::new(-2.0, 2.0, 401).unwrap()),
            BcKind::DecayingLine,
            vec![Delta {
                position: 0.0,
                strength: 2.0,
            }],
        )
        .unwrap();
        let s = scattering(&v, 1.0).unwrap();
        assert!((s.r.norm_sqr() - 0.5).abs() < 1e-8);
        assert!((s.flux() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scattering_rejects_low_energy() {
        let v = soliton(1.0, 20.0);
        assert!(scattering(&v, -0.5).is_err());
        assert!(scattering(&box_potential(101), 1.0).is_err());
    }

    #[test]
    fn free_discriminant_and_comb_edges() {
        let grid = Grid::new(0.0, PI, 2001).unwrap();
        let free = Potential::new(SampledFn::zeros(grid), BcKind::Periodic, vec![]).unwrap();
        for k in [0.3f64, 1.0, 1.7, 2.5] {
            let d = band_discriminant(&free, k * k);
            assert!((d - 2.0 * (k * PI).cos()).abs() < 1e-10);
        }
        let comb = Potential::new(
            SampledFn::zeros(grid),
            BcKind::Periodic,
            vec![Delta {
                position: 0.0,
                strength: 2.0,
            }],
        )
        .unwrap();
        for n in 1..=3 {
            let d = band_discriminant(&comb, (n * n) as f64);
            assert!((d.abs() - 2.0).abs() < 1e-10);
        }
        for e in [-0.5, 0.5, 2.0, 6.0] {
            let m = transfer_matrix(&comb, e);
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            assert!((det - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn brent_finds_roots() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-15, 100).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        assert!(brent(|x| x * x + 1.0, 0.0, 2.0, 1e-15, 100).is_none());
    }
}
