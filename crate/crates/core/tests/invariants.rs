use std::f64::consts::{FRAC_PI_2, PI};

use isodesign_core::bands::{zones, PeriodicSystem};
use isodesign_core::checks::{isospectrality_ledger, orthonormality_defect};
use isodesign_core::darboux::{scale_swf, shift_level, TransformOptions};
use isodesign_core::lattice::{self, LatticeBc, LatticeSystem, SpectrumEnd};
use isodesign_core::solver::{count_nodes, scattering};
use isodesign_core::*;
use proptest::prelude::*;

fn bumpy_box(a: f64, b: f64) -> Potential {
    let g = Grid::with_density(-FRAC_PI_2, FRAC_PI_2, 1000).unwrap();
    let body = g.sample(|x| a * (2.0 * x).cos() + b * x).unwrap();
    Potential::new(body, BcKind::HardWalls, vec![]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transfer_determinant_is_one(a in -3.0..3.0f64, b in -2.0..2.0f64, e in -5.0..30.0f64) {
        let det = transfer_determinant(&bumpy_box(a, b), e);
        prop_assert!((det - 1.0).abs() < 1e-10, "det = {det}");
    }

    #[test]
    fn flux_is_conserved(g1 in -3.0..3.0f64, g2 in -3.0..3.0f64, depth in 0.0..4.0f64, e in 0.05..20.0f64) {
        let grid = Grid::new(-15.0, 15.0, 3001).unwrap();
        let body = grid.sample(|x| -depth / (x - 1.0).cosh().powi(2)).unwrap();
        let deltas = vec![
            Delta { position: -2.0, strength: g1 },
            Delta { position: 2.0, strength: g2 },
        ];
        let v = Potential::new(body, BcKind::DecayingLine, deltas).unwrap();
        let s = scattering(&v, e).unwrap();
        prop_assert!((s.flux() - 1.0).abs() < 1e-8, "flux {}", s.flux());
    }

    #[test]
    fn node_counts_follow_levels(a in -4.0..4.0f64, b in -3.0..3.0f64) {
        let states = bound_states(&bumpy_box(a, b), 5).unwrap();
        for (k, s) in states.iter().enumerate() {
            prop_assert_eq!(count_nodes(s.psi.values(), 1e-9), k);
        }
        prop_assert!(states.windows(2).all(|w| w[1].energy > w[0].energy));
        prop_assert!(orthonormality_defect(&states).unwrap() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shifts_keep_every_other_level(a in -2.0..2.0f64, b in -1.5..1.5f64, level in 1usize..=3, frac in -0.8..0.8f64) {
        let v = bumpy_box(a, b);
        let states = bound_states(&v, 4).unwrap();
        let lo = if level == 1 { states[0].energy - 3.0 } else { states[level - 2].energy };
        let hi = states[level].energy;
        let e = states[level - 1].energy;
        let de = if frac >= 0.0 { frac * (hi - e) } else { frac * (e - lo) };
        prop_assume!(de.abs() > 1e-3);
        let r = shift_level(&v, &states, level, de, &TransformOptions::default()).unwrap();
        for entry in isospectrality_ledger(&r).unwrap() {
            prop_assert!(entry.deviation() < 1e-5, "{entry:?}");
        }
        prop_assert!((r.states[level - 1].energy - (e + de)).abs() < 1e-12);
    }

    #[test]
    fn weight_scales_by_root_of_one_plus_lambda(level in 1usize..=3, lambda in -0.9..5.0f64) {
        let v = bumpy_box(1.0, 0.5);
        let states = bound_states(&v, 4).unwrap();
        let r = scale_swf(&v, &states, level, lambda, &TransformOptions::default()).unwrap();
        let oracle = bound_states(&r.potential, 4).unwrap();
        for (k, (before, after)) in states.iter().zip(&oracle).enumerate() {
            prop_assert!((after.energy - before.energy).abs() < 1e-5);
            let ratio = after.swf / before.swf;
            let want = if k + 1 == level { (1.0 + lambda).sqrt() } else { 1.0 };
            let tol = if k + 1 == level { 1e-6 } else { 1e-5 };
            prop_assert!((ratio - want).abs() < tol, "level {} ratio {ratio} want {want}", k + 1);
        }
    }

    #[test]
    fn comb_edges_sit_on_squares(g in 0.2..6.0f64) {
        let p = PeriodicSystem::dirac_comb(g, PI, 1000).unwrap();
        let z = zones(&p, 10.0).unwrap();
        for n in 1..=3 {
            let e = (n * n) as f64;
            prop_assert!(z.iter().any(|zone| (zone.e_hi - e).abs() < 1e-8), "edge {e} missing in {z:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lattice_states_are_orthonormal(v in prop::collection::vec(-3.0..3.0f64, 4..24)) {
        let sys = LatticeSystem::new(0, v.clone(), LatticeBc::HardWalls).unwrap();
        let states = sys.states(v.len(), SpectrumEnd::Lowest).unwrap();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let dot: f64 = a.psi.iter().zip(&b.psi).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-10);
            }
            prop_assert!(lattice::residual(&sys, a) < 1e-10);
        }
    }

    #[test]
    fn sturm_counts_are_monotone(v in prop::collection::vec(-3.0..3.0f64, 2..30), xs in prop::collection::vec(-6.0..8.0f64, 2..10)) {
        let sys = LatticeSystem::new(0, v, LatticeBc::HardWalls).unwrap();
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let counts: Vec<usize> = xs.iter().map(|&x| sys.count_below(x)).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn flipping_the_potential_mirrors_the_band(v in prop::collection::vec(-3.0..3.0f64, 2..20)) {
        let n = v.len();
        let up = LatticeSystem::new(0, v.clone(), LatticeBc::HardWalls).unwrap();
        let down = LatticeSystem::new(0, v.iter().map(|x| -x).collect(), LatticeBc::HardWalls).unwrap();
        for k in 0..n {
            let a = up.eigenvalue(k).unwrap();
            let b = down.eigenvalue(n - 1 - k).unwrap();
            prop_assert!((a - (4.0 - b)).abs() < 1e-10);
        }
        // the eigenvectors map by (−1)^n
        let s = up.state(0).unwrap();
        let t = down.state(n - 1).unwrap();
        let dot: f64 = s.psi.iter().zip(&t.psi).enumerate()
            .map(|(i, (x, y))| if i % 2 == 0 { x * y } else { -x * y })
            .sum();
        prop_assert!((dot.abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lattice_flux_is_conserved(v in prop::collection::vec(-5.0..5.0f64, 1..8), e in 0.01..3.99f64) {
        let mut padded = vec![0.0];
        padded.extend(v);
        padded.push(0.0);
        let sys = LatticeSystem::new(-3, padded, LatticeBc::Decaying).unwrap();
        let s = lattice::lattice_scattering(&sys, e).unwrap();
        prop_assert!((s.flux() - 1.0).abs() < 1e-10);
    }
}
