//! Waves on a one-dimensional lattice.
//!
//! `Hψ(n) = −ψ(n+1) − ψ(n−1) + (2 + V(n))ψ(n)`, so the free band is `[0, 4]`
//! with centre 2.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Amplitude allowed on the outermost sites of a decaying window.
pub const EDGE_AMPLITUDE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeBc {
    /// ψ vanishes just outside the site range.
    HardWalls,
    /// Infinite lattice with `V = 0` outside the range; states must decay
    /// inside the window.
    Decaying,
}

impl std::str::FromStr for LatticeBc {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard-walls" => Ok(LatticeBc::HardWalls),
            "decaying" => Ok(LatticeBc::Decaying),
            other => invalid(format!("unknown lattice boundary kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSystem {
    n_min: i64,
    v: Vec<f64>,
    bc: LatticeBc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub energy: f64,
    /// Normalized amplitudes, one per site starting at `n_min`.
    pub psi: Vec<f64>,
    pub nodes: usize,
}

/// Which end of the spectrum to take states from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumEnd {
    Lowest,
    Highest,
}

impl LatticeSystem {
    pub fn new(n_min: i64, v: Vec<f64>, bc: LatticeBc) -> Result<Self> {
        if v.len() < 2 {
            return invalid("a lattice needs at least two sites");
        }
        if v.iter().any(|x| !x.is_finite()) {
            return invalid("lattice potential must be finite");
        }
        Ok(Self { n_min, v, bc })
    }

    /// `V(n) = f(n)` on `n_min..=n_max`.
    pub fn from_fn(sites: RangeInclusive<i64>, bc: LatticeBc, f: impl Fn(i64) -> f64) -> Result<Self> {
        let (a, b) = (*sites.start(), *sites.end());
        if a >= b {
            return invalid(format!("site range [{a}, {b}] is empty"));
        }
        Self::new(a, sites.map(f).collect(), bc)
    }

    /// Single site `V(0) = v0` on `[−half_width, half_width]`.
    pub fn single_site(v0: f64, half_width: i64, bc: LatticeBc) -> Result<Self> {
        Self::from_fn(-half_width..=half_width, bc, |n| if n == 0 { v0 } else { 0.0 })
    }

    /// Linear slope `V(n) = c·n`.
    pub fn linear(c: f64, sites: RangeInclusive<i64>) -> Result<Self> {
        Self::from_fn(sites, LatticeBc::HardWalls, |n| c * n as f64)
    }

    /// Discretization of `−d²/dx² + V(x)` with lattice step `step`. Lattice
    /// energies divided by `step²` approximate the continuum ones.
    pub fn from_continuum(
        v: impl Fn(f64) -> f64,
        x_min: f64,
        x_max: f64,
        step: f64,
        bc: LatticeBc,
    ) -> Result<Self> {
        if !(step > 0.0 && x_max > x_min) {
            return invalid("continuum window needs x_max > x_min and a positive step");
        }
        let a = (x_min / step).ceil() as i64;
        let b = (x_max / step).floor() as i64;
        Self::from_fn(a..=b, bc, |n| step * step * v(n as f64 * step))
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.v.len() as i64 - 1
    }

    pub fn sites(&self) -> RangeInclusive<i64> {
        self.n_min..=self.n_max()
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn potential(&self) -> &[f64] {
        &self.v
    }

    pub fn bc(&self) -> LatticeBc {
        self.bc
    }

    /// `Hψ` with ψ = 0 outside the range.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let n = self.v.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { psi[i - 1] } else { 0.0 };
                let right = if i + 1 < n { psi[i + 1] } else { 0.0 };
                (2.0 + self.v[i]) * psi[i] - left - right
            })
            .collect()
    }

    /// Eigenvalues below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = f64::INFINITY;
        for &v in &self.v {
            let prev = if d == 0.0 { f64::MIN_POSITIVE } else { d };
            d = 2.0 + v - x - 1.0 / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let lo = self.v.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = self.v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        (lo, hi + 4.0)
    }

    /// Eigenvalue with zero-based index `k` by Sturm bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.v.len() {
            return invalid(format!("eigenvalue {k} requested from {} sites", self.v.len()));
        }
        let (mut a, mut b) = self.gershgorin();
        a -= 1.0;
        b += 1.0;
        while b - a > 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.count_below(m) > k {
                b = m;
            } else {
                a = m;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Normalized eigenvector for an eigenvalue `e` by inverse iteration.
    fn eigenvector(&self, e: f64) -> Vec<f64> {
        let n = self.v.len();
        let scale = self.gershgorin().1.abs().max(1.0);
        let shift = e + 1e3 * f64::EPSILON * scale;
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i * 7919) % 13) as f64 / 13.0).collect();
        for _ in 0..3 {
            x = solve_shifted(&self.v, shift, &x);
            normalize(&mut x);
        }
        x
    }

    fn finish(&self, energy: f64, mut psi: Vec<f64>) -> Result<LatticeState> {
        normalize(&mut psi);
        let max = psi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if let Some(first) = psi.iter().find(|p| p.abs() > 1e-3 * max) {
            if *first < 0.0 {
                psi.iter_mut().for_each(|p| *p = -*p);
            }
        }
        if self.bc == LatticeBc::Decaying {
            let n = psi.len();
            let edge = psi[0].abs().max(psi[n - 1].abs());
            if edge > EDGE_AMPLITUDE {
                return invalid(format!(
                    "state at E = {energy} has edge amplitude {edge:.2e}; enlarge the window or pick a state outside the band"
                ));
            }
        }
        let nodes = sign_changes(&psi, 1e-12 * max);
        Ok(LatticeState { energy, psi, nodes })
    }

    /// State with zero-based index `k` from the bottom.
    pub fn state(&self, k: usize) -> Result<LatticeState> {
        let e = self.eigenvalue(k)?;
        self.finish(e, self.eigenvector(e))
    }

    /// `count` states from one end of the spectrum, ordered by energy.
    pub fn states(&self, count: usize, end: SpectrumEnd) -> Result<Vec<LatticeState>> {
        let n = self.v.len();
        if count > n {
            return invalid(format!("{count} states requested from {n} sites"));
        }
        let indices: Vec<usize> = match end {
            SpectrumEnd::Lowest => (0..count).collect(),
            SpectrumEnd::Highest => (n - count..n).collect(),
        };
        indices.into_par_iter().map(|k| self.state(k)).collect()
    }
}

/// Lowest `count` states.
pub fn lattice_bound_states(sys: &LatticeSystem, count: usize) -> Result<Vec<LatticeState>> {
    sys.states(count, SpectrumEnd::Lowest)
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    x.iter_mut().for_each(|a| *a /= norm);
}

fn sign_changes(psi: &[f64], floor: f64) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &p in psi.iter().filter(|p| p.abs() > floor) {
        if last != 0.0 && p.signum() != last.signum() {
            count += 1;
        }
        last = p;
    }
    count
}

/// Solves `(H − shift)x = b` by LU with partial pivoting.
fn solve_shifted(v: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut d: Vec<f64> = v.iter().map(|x| 2.0 + x - shift).collect();
    let mut dl = vec![-1.0f64; n - 1];
    let mut du = vec![-1.0; n - 1];
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n - 1];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            let f = if d[i] == 0.0 { 0.0 } else { dl[i] / d[i] };
            dl[i] = f;
            d[i + 1] -= f * du[i];
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = f;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - f * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du[i + 1];
            }
            swapped[i] = true;
        }
    }
    let mut x = b.to_vec();
    for i in 0..n - 1 {
        if swapped[i] {
            let t = x[i];
            x[i] = x[i + 1];
            x[i + 1] = t - dl[i] * x[i];
        } else {
            x[i + 1] -= dl[i] * x[i];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        if i + 1 < n {
            s -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * x[i + 2];
        }
        x[i] = s / if d[i] == 0.0 { f64::EPSILON } else { d[i] };
    }
    x
}

/// Largest `|Hψ − Eψ|` over the sites.
pub fn residual(sys: &LatticeSystem, state: &LatticeState) -> f64 {
    sys.apply(&state.psi)
        .iter()
        .zip(&state.psi)
        .map(|(h, p)| (h - state.energy * p).abs())
        .fold(0.0, f64::max)
}

/// Rung `m` of the Wannier–Stark ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderState {
    pub m: i64,
    pub state: LatticeState,
    /// Largest `|J_{ν−1} + J_{ν+1} − (2ν/z)J_ν|` over the samples, with
    /// `ν = n − m` and `z = 2/C`.
    pub bessel_residual: f64,
    /// Largest deviation from the Miller-recurrence values of `J_{n−m}(2/C)`.
    pub bessel_deviation: f64,
}

/// `J_ν(z)` for `ν ∈ [−nu_max, nu_max]`, index `ν + nu_max`, by Miller's
/// backward recurrence normalized with `J_0 + 2ΣJ_{2k} = 1`.
pub fn bessel_j_sequence(z: f64, nu_max: usize) -> Vec<f64> {
    let start = nu_max + 20 + (z.abs() as usize) * 2 + 20;
    let mut j = vec![0.0f64; start + 2];
    j[start] = 1e-300;
    for nu in (1..=start).rev() {
        j[nu - 1] = 2.0 * nu as f64 / z * j[nu] - j[nu + 1];
        if j[nu - 1].abs() > 1e250 {
            for x in j.iter_mut().skip(nu - 1) {
                *x *= 1e-250;
            }
        }
    }
    let sum = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    let positive: Vec<f64> = j[..=nu_max].iter().map(|x| x / sum).collect();
    let mut out = Vec::with_capacity(2 * nu_max + 1);
    for nu in (1..=nu_max).rev() {
        let s = if nu % 2 == 0 { 1.0 } else { -1.0 };
        out.push(s * positive[nu]);
    }
    out.extend_from_slice(&positive);
    out
}

/// Ladder rungs `orders` of `V(n) = c·n` computed on the site window.
pub fn stark_ladder(
    c: f64,
    window: RangeInclusive<i64>,
    orders: RangeInclusive<i64>,
) -> Result<Vec<LadderState>> {
    if !(c > 0.0 && c.is_finite()) {
        return invalid("slope C must be positive");
    }
    let sys = LatticeSystem::linear(c, window.clone())?;
    let z = 2.0 / c;
    let n_min = sys.n_min();
    let len = sys.len();
    let nu_max = len + 2;
    let bessel = bessel_j_sequence(z, nu_max);
    let orders: Vec<i64> = orders.collect();
    orders
        .into_par_iter()
        .map(|m| {
            let target = 2.0 + c * m as f64;
            let k = sys.count_below(target - 0.5 * c);
            if sys.count_below(target + 0.5 * c) != k + 1 {
                return invalid(format!(
                    "rung {m} is not isolated in window [{}, {}]; enlarge the window",
                    window.start(),
                    window.end()
                ));
            }
            let e = sys.eigenvalue(k)?;
            let mut st = sys.finish(e, sys.eigenvector(e))?;
            let edge = st.psi[0].abs().max(st.psi[len - 1].abs());
            if edge > EDGE_AMPLITUDE {
                return invalid(format!(
                    "rung {m} has edge amplitude {edge:.2e} in window [{}, {}]; enlarge the window",
                    window.start(),
                    window.end()
                ));
            }
            let j_at = |i: usize| {
                let nu = n_min + i as i64 - m;
                bessel[(nu + nu_max as i64) as usize]
            };
            // the sign of ψ is fixed by convention; align with J before comparing
            let peak = (0..len)
                .max_by(|&a, &b| st.psi[a].abs().total_cmp(&st.psi[b].abs()))
                .unwrap_or(0);
            if st.psi[peak] * j_at(peak) < 0.0 {
                st.psi.iter_mut().for_each(|p| *p = -*p);
            }
            let sample = |i: i64| -> f64 {
                if i < 0 || i >= len as i64 {
                    0.0
                } else {
                    st.psi[i as usize]
                }
            };
            let mut bessel_residual = 0.0f64;
            for i in 0..len as i64 {
                let nu = (n_min + i - m) as f64;
                let r = sample(i - 1) + sample(i + 1) - 2.0 * nu / z * sample(i);
                bessel_residual = bessel_residual.max(r.abs());
            }
            let bessel_deviation = (0..len)
                .map(|i| (st.psi[i] - j_at(i)).abs())
                .fold(0.0, f64::max);
            Ok(LadderState {
                m,
                state: st,
                bessel_residual,
                bessel_deviation,
            })
        })
        .collect()
}

/// Lattice reflection and transmission for a wave `e^{ikn}` incident from
/// the left, with `E = 2 − 2cos k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeScattering {
    pub energy: f64,
    pub k: f64,
    pub r: Complex64,
    pub t: Complex64,
}

impl LatticeScattering {
    pub fn flux(&self) -> f64 {
        self.r.norm_sqr() + self.t.norm_sqr()
    }
}

/// Scattering on a decaying lattice whose potential vanishes outside the
/// site range.
pub fn lattice_scattering(sys: &LatticeSystem, energy: f64) -> Result<LatticeScattering> {
    if sys.bc() != LatticeBc::Decaying {
        return invalid("lattice scattering needs the decaying boundary kind");
    }
    if !(energy > 0.0 && energy < 4.0) {
        return invalid(format!(
            "E = {energy} is not strictly inside the band (0, 4)"
        ));
    }
    let k = ((2.0 - energy) / 2.0).acos();
    let wave = |n: i64, sign: f64| Complex64::from_polar(1.0, sign * k * n as f64);
    let n_max = sys.n_max();
    let n_min = sys.n_min();
    // transmitted wave with unit amplitude, run towards the left
    let mut next = wave(n_max + 1, 1.0);
    let mut here = wave(n_max, 1.0);
    for n in (n_min..=n_max).rev() {
        let v = sys.v[(n - n_min) as usize];
        let prev = (2.0 + v - energy) * here - next;
        next = here;
        here = prev;
    }
    // `here` is ψ(n_min − 1), `next` is ψ(n_min); both lie in the free region
    // together with ψ(n_min − 2) = (2 − E)ψ(n_min − 1) − ψ(n_min).
    let p1 = here;
    let p2 = (2.0 - energy) * here - next;
    let (a1, b1) = (wave(n_min - 1, 1.0), wave(n_min - 1, -1.0));
    let (a2, b2) = (wave(n_min - 2, 1.0), wave(n_min - 2, -1.0));
    let det = a1 * b2 - a2 * b1;
    let a = (p1 * b2 - p2 * b1) / det;
    let b = (a1 * p2 - a2 * p1) / det;
    Ok(LatticeScattering {
        energy,
        k,
        r: b / a,
        t: Complex64::new(1.0, 0.0) / a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_walls_follow_cosine_law() {
        let n = 30;
        let sys = LatticeSystem::from_fn(1..=n, LatticeBc::HardWalls, |_| 0.0).unwrap();
        let states = lattice_bound_states(&sys, n as usize).unwrap();
        for (k, s) in states.iter().enumerate() {
            let exact = 2.0
                - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((s.energy - exact).abs() < 1e-10);
            assert_eq!(s.nodes, k);
            assert!(residual(&sys, s) < 1e-10);
        }
        assert!(lattice_bound_states(&sys, 31).is_err());
    }

    #[test]
    fn single_well_and_barrier() {
        let well = LatticeSystem::single_site(-1.5, 40, LatticeBc::Decaying).unwrap();
        let s = &lattice_bound_states(&well, 1).unwrap()[0];
        assert!((s.energy + 0.5).abs() < 1e-8);
        let c = s.psi[40];
        for (i, p) in s.psi.iter().enumerate() {
            let n = (i as i64 - 40).unsigned_abs() as i32;
            assert!((p - c * 0.5f64.powi(n)).abs() < 1e-12);
        }
        assert!(lattice_bound_states(&well, 2).is_err());

        let barrier = LatticeSystem::single_site(1.5, 40, LatticeBc::Decaying).unwrap();
        let s = &barrier.states(1, SpectrumEnd::Highest).unwrap()[0];
        assert!((s.energy - 4.5).abs() < 1e-8);
        for i in 20..60 {
            assert!(s.psi[i] * s.psi[i + 1] < 0.0);
        }
        let c = s.psi[40];
        for (i, p) in s.psi.iter().enumerate() {
            let n = (i as i64 - 40).unsigned_abs() as i32;
            assert!((p - c * (-0.5f64).powi(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn bessel_sequence_matches_known_values() {
        let j = bessel_j_sequence(1.0, 5);
        assert!((j[5] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[6] - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((j[4] + 0.440_050_585_744_933_5).abs() < 1e-14);
        let s: f64 = bessel_j_sequence(4.0, 60).iter().map(|x| x * x).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stark_rungs_are_bessel_samples() {
        let rungs = stark_ladder(1.0, -40..=40, -3..=3).unwrap();
        for w in rungs.windows(2) {
            assert!((w[1].state.energy - w[0].state.energy - 1.0).abs() < 1e-8);
        }
        for r in &rungs {
            assert!(r.bessel_residual < 1e-9);
            assert!(r.bessel_deviation < 1e-9);
        }
        assert!(stark_ladder(0.25, -12..=12, 0..=0).is_err());
    }

    #[test]
    fn one_site_reflection() {
        let sys = LatticeSystem::single_site(1.5, 3, LatticeBc::Decaying).unwrap();
        let s = lattice_scattering(&sys, 2.0).unwrap();
        assert!((s.r.norm_sqr() - 0.36).abs() < 1e-8);
        assert!((s.flux() - 1.0).abs() < 1e-10);
        let free = LatticeSystem::single_site(0.0, 3, LatticeBc::Decaying).unwrap();
        let f = lattice_scattering(&free, 1.3).unwrap();
        assert!(f.r.norm() < 1e-12 && (f.t - 1.0).norm() < 1e-12);
        assert!(lattice_scattering(&sys, 0.0).is_err());
        assert!(lattice_scattering(&sys, 4.0).is_err());
    }
}
