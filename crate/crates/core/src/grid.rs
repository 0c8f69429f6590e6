//! Uniform grids and sampled real functions.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use crate::error::{invalid, Error, Result};

/// Uniform grid with an odd number of nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return invalid(format!("grid bounds must be finite, got [{x_min}, {x_max}]"));
        }
        if x_min >= x_max {
            return invalid(format!("grid needs x_min < x_max, got [{x_min}, {x_max}]"));
        }
        if n_points < 3 {
            return invalid(format!("grid needs at least 3 points, got {n_points}"));
        }
        if n_points % 2 == 0 {
            return invalid(format!("grid needs an odd number of points, got {n_points}"));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    /// Grid with `per_pi` intervals per length π, rounded up to an even
    /// interval count.
    pub fn with_density(x_min: f64, x_max: f64, per_pi: usize) -> Result<Self> {
        if per_pi == 0 {
            return invalid("grid density must be positive");
        }
        let intervals = ((x_max - x_min) / std::f64::consts::PI * per_pi as f64).ceil() as usize;
        let intervals = intervals.max(2);
        let intervals = intervals + intervals % 2;
        Self::new(x_min, x_max, intervals + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Index of the node nearest to `x`, if `x` lies on the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.spacing()).round();
        t.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Index of the node at `x`, or `None` when `x` is not a node.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let i = self.nearest_index(x);
        ((self.x(i) - x).abs() <= 1e-9 * self.spacing()).then_some(i)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Result<SampledFn> {
        SampledFn::new(*self, self.nodes().map(f).collect())
    }
}

/// Real function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "sample count {} does not match grid size {}",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite sample at x = {}", grid.x(i)));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at an arbitrary point by four-point Lagrange interpolation.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let t = ((x - self.grid.x_min()) / h).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let start = i.saturating_sub(1).min(n - 4.min(n));
        let width = 4.min(n);
        let mut acc = 0.0;
        for j in start..start + width {
            let mut w = 1.0;
            for m in start..start + width {
                if m != j {
                    w *= (t - m as f64) / (j as f64 - m as f64);
                }
            }
            acc += w * self.values[j];
        }
        acc
    }

    /// Largest absolute difference on nodes where `keep` holds.
    pub fn max_abs_diff_where(&self, other: &SampledFn, keep: impl Fn(f64) -> bool) -> f64 {
        self.grid
            .nodes()
            .zip(self.values.iter().zip(other.values.iter()))
            .filter(|(x, _)| keep(*x))
            .fold(0.0, |m, (_, (a, b))| m.max((a - b).abs()))
    }

    /// Writes the two-column `x,value` form with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, v) in self.grid.nodes().zip(&self.values) {
            let _ = writeln!(out, "{},{}", fmt_sig(x), fmt_sig(*v));
        }
        out
    }

    /// Parses the `x,value` form; the x column must be uniform with an odd
    /// node count.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| {
                    Error::Validation(format!("malformed CSV row {}: {line}", lineno + 1))
                })
            };
            xs.push(parse(cols.next())?);
            vs.push(parse(cols.next())?);
        }
        if xs.len() < 3 {
            return invalid("CSV needs at least three rows");
        }
        let grid = Grid::new(xs[0], xs[xs.len() - 1], xs.len())?;
        let h = grid.spacing();
        for (i, x) in xs.iter().enumerate() {
            if (grid.x(i) - x).abs() > 1e-6 * h {
                return invalid(format!("CSV x column is not uniform at row {}", i + 2));
            }
        }
        Self::new(grid, vs)
    }
}

impl Add for &SampledFn {
    type Output = SampledFn;
    fn add(self, rhs: &SampledFn) -> SampledFn {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        SampledFn {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SampledFn {
    type Output = SampledFn;
    fn sub(self, rhs: &SampledFn) -> SampledFn {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        SampledFn {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &SampledFn {
    type Output = SampledFn;
    fn mul(self, rhs: &SampledFn) -> SampledFn {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        SampledFn {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a * b).collect(),
        }
    }
}

/// Formats with 17 significant digits.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn make_grid(x_min: f64, x_max: f64, n_points: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n_points)
}

/// Composite Simpson rule over the whole grid.
pub fn integrate(f: &SampledFn) -> f64 {
    simpson(f.values(), f.grid().spacing())
}

pub(crate) fn simpson(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    debug_assert!(n % 2 == 1);
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, val) in v.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += val;
        } else {
            even += val;
        }
    }
    h / 3.0 * (v[0] + v[n - 1] + 4.0 * odd + 2.0 * even)
}

/// Running integral `F(x) = ∫_{x_min}^x f`.
///
/// Even nodes carry the Simpson partial sums, so `F(x_max)` equals
/// [`integrate`]. Odd nodes use the quadratic through the surrounding
/// panel, clamped between its neighbours when the panel is non-negative so
/// that `F` stays monotone for `f ≥ 0`.
pub fn cumulative_integral(f: &SampledFn) -> SampledFn {
    let h = f.grid().spacing();
    SampledFn {
        grid: *f.grid(),
        values: cumulative(f.values(), h),
    }
}

/// Running integral from the right end, `G(x) = ∫_x^{x_max} f`, accumulated
/// independently so that it keeps full relative accuracy where it is small.
pub fn cumulative_integral_from_right(f: &SampledFn) -> SampledFn {
    let h = f.grid().spacing();
    let rev: Vec<f64> = f.values().iter().rev().copied().collect();
    let mut acc = cumulative(&rev, h);
    acc.reverse();
    SampledFn {
        grid: *f.grid(),
        values: acc,
    }
}

pub(crate) fn cumulative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i + 2 < n {
        let (a, b, c) = (v[i], v[i + 1], v[i + 2]);
        let panel = h / 3.0 * (a + 4.0 * b + c);
        let mut half = h / 12.0 * (5.0 * a + 8.0 * b - c);
        if a >= 0.0 && b >= 0.0 && c >= 0.0 {
            half = half.clamp(0.0, panel);
        }
        out[i + 1] = out[i] + half;
        out[i + 2] = out[i] + panel;
        i += 2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spacing_and_nodes() {
        let g = make_grid(-PI / 2.0, PI / 2.0, 2001).unwrap();
        assert!((g.spacing() - PI / 2000.0).abs() < 1e-15);
        let g = make_grid(0.0, 1.0, 3).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(0.0, 1.0, 4).is_err());
        assert!(make_grid(0.0, 1.0, 1).is_err());
        assert!(make_grid(1.0, 0.0, 5).is_err());
        assert!(make_grid(f64::NAN, 1.0, 5).is_err());
        assert!(make_grid(0.0, f64::INFINITY, 5).is_err());
    }

    #[test]
    fn simpson_closed_forms() {
        let g = make_grid(0.0, PI, 2001).unwrap();
        let one = g.sample(|_| 1.0).unwrap();
        assert!((integrate(&one) - PI).abs() < 1e-13);
        let s2 = g.sample(|x| x.sin().powi(2)).unwrap();
        assert!((integrate(&s2) - PI / 2.0).abs() < 1e-10);
        let g = make_grid(-PI / 2.0, PI / 2.0, 2001).unwrap();
        let c2 = g.sample(|x| x.cos().powi(2)).unwrap();
        assert!((integrate(&c2) - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let g = make_grid(-1.0, 2.0, 7).unwrap();
        let f = g.sample(|x| 3.0 * x * x * x - x * x + 2.0).unwrap();
        let exact = 0.75 * (16.0 - 1.0) - (8.0 + 1.0) / 3.0 + 6.0;
        assert!((integrate(&f) - exact).abs() < 1e-12);
    }

    #[test]
    fn cumulative_examples() {
        let g = make_grid(0.0, 1.0, 101).unwrap();
        let f = cumulative_integral(&g.sample(|_| 1.0).unwrap());
        for (x, v) in g.nodes().zip(f.values()) {
            assert!((x - v).abs() < 1e-14);
        }
        let g = make_grid(0.0, PI, 2001).unwrap();
        let s2 = g.sample(|x| x.sin().powi(2)).unwrap();
        let f = cumulative_integral(&s2);
        assert!((f.values()[1000] - PI / 4.0).abs() < 1e-8);
        let norm = g.sample(|x| 2.0 / PI * x.sin().powi(2)).unwrap();
        let f = cumulative_integral(&norm);
        assert!((f.values()[2000] - 1.0).abs() < 1e-8);
        assert_eq!(f.values()[0], 0.0);
    }

    #[test]
    fn right_cumulative_matches_complement() {
        let g = make_grid(0.0, PI, 401).unwrap();
        let f = g.sample(|x| x.sin().powi(2) + 0.1).unwrap();
        let left = cumulative_integral(&f);
        let right = cumulative_integral_from_right(&f);
        let total = integrate(&f);
        for (l, r) in left.values().iter().zip(right.values()).step_by(2) {
            assert!((l + r - total).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_changes_integral_little() {
        let f = |x: f64| (x.sin() * x).exp();
        let a = integrate(&make_grid(0.0, PI, 2001).unwrap().sample(f).unwrap());
        let b = integrate(&make_grid(0.0, PI, 4001).unwrap().sample(f).unwrap());
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let f = g.sample(|x| x * x * x - 2.0 * x).unwrap();
        for &x in &[0.0, 0.03, 0.55, 0.97, 1.0] {
            assert!((f.interpolate(x) - (x * x * x - 2.0 * x)).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let g = make_grid(-1.0, 1.0, 5).unwrap();
        let f = g.sample(|x| (3.0 * x).sin() / 7.0).unwrap();
        let back = SampledFn::from_csv(&f.to_csv()).unwrap();
        assert_eq!(back.values(), f.values());
        assert!(f.to_csv().starts_with("x,value\n"));
    }

    #[test]
    fn with_density_gives_odd_counts() {
        let g = Grid::with_density(-PI / 2.0, PI / 2.0, 2000).unwrap();
        assert_eq!(g.len(), 2001);
        let g = Grid::with_density(0.0, 1.0, 7).unwrap();
        assert_eq!(g.len() % 2, 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn integrate_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, w in 0.1f64..4.0) {
                let g = make_grid(-1.0, 2.0, 401).unwrap();
                let f = g.sample(|x| (w * x).sin()).unwrap();
                let h = g.sample(|x| x * x - w).unwrap();
                let combo = &f.scaled(a) + &h.scaled(b);
                let lhs = integrate(&combo);
                let rhs = a * integrate(&f) + b * integrate(&h);
                prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
            }

            #[test]
            fn cumulative_ends_at_integral(w in 0.1f64..6.0, c in -1.0f64..1.0) {
                let g = make_grid(0.0, 3.0, 301).unwrap();
                let f = g.sample(|x| (w * x).cos() + c * x).unwrap();
                let cum = cumulative_integral(&f);
                prop_assert!((cum.values()[300] - integrate(&f)).abs() < 1e-10);
            }

            #[test]
            fn cumulative_monotone_for_nonnegative(w in 0.1f64..20.0) {
                let g = make_grid(0.0, 3.0, 201).unwrap();
                let f = g.sample(|x| (w * x).sin().powi(2)).unwrap();
                let cum = cumulative_integral(&f);
                for pair in cum.values().windows(2) {
                    prop_assert!(pair[1] >= pair[0]);
                }
            }
        }
    }
}
