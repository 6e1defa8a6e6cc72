mod common;

use common::*;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use otgcf::classifier::Halfspace;
use otgcf::maps::{estimate_moments, TransportMap};
use otgcf::numerics::{singular_values, Matrix};
use otgcf::solvers::*;

fn settings() -> SolverSettings<f64> {
    SolverSettings::precise()
}

fn sym(k: f64) -> Bounds<f64> {
    Bounds::symmetric(k).unwrap()
}

/// `min_b mean((a−1)xᵢ + b)²` subject to `w(a xᵢ + b) ≥ t`, as a function of `a`.
fn affine_1d_cost(x: &[f64], w: f64, t: f64, a: f64) -> f64 {
    let n = x.len() as f64;
    let free = -x.iter().map(|&v| (a - 1.0) * v).sum::<f64>() / n;
    let b = if w > 0.0 {
        free.max(x.iter().map(|&v| t / w - a * v).fold(f64::NEG_INFINITY, f64::max))
    } else {
        free.min(x.iter().map(|&v| t / w - a * v).fold(f64::INFINITY, f64::min))
    };
    x.iter().map(|&v| ((a - 1.0) * v + b).powi(2)).sum::<f64>() / n
}

#[test]
fn affine_psd_matches_1d_grid() {
    for seed in 0..6 {
        let pts = random_group(seed, 12, 1);
        let hs = random_halfspace(seed, &pts, 0.6);
        let k = [1.01, 1.5, 2.0, 3.5, 5.0, 1.2][seed as usize];
        let x = pts.column(0);
        let (_, best) = minimize_1d(|a| affine_1d_cost(&x, hs.normal[0], hs.threshold(), a), 1.0 / k, k);
        let r = solve_affine_psd(&pts, &hs, sym(k), &settings()).unwrap();
        assert!(r.converged);
        assert!((r.objective - best).abs() < 1e-5, "seed {seed}: {} vs {best}", r.objective);
    }
}

#[test]
fn affine_diag_decouples_on_axis_boundary() {
    for seed in 0..4 {
        let pts = random_group(seed + 10, 15, 2);
        let mut hs = random_halfspace(seed, &pts, 0.5);
        hs.normal = vec![1.0, 0.0];
        hs.offset = {
            let mut s = pts.column(0);
            s.sort_by(f64::total_cmp);
            s[7]
        };
        let k = 2.0;
        let x = pts.column(0);
        let (_, best) = minimize_1d(|a| affine_1d_cost(&x, 1.0, hs.threshold(), a), 1.0 / k, k);
        let r = solve_affine_diag(&pts, &hs, sym(k), &settings()).unwrap();
        assert!((r.objective - best).abs() < 1e-5, "{} vs {best}", r.objective);
        let m = r.map.affine().unwrap();
        assert!((m.a[(1, 1)] - 1.0).abs() < 1e-4 && m.b[1].abs() < 1e-4);
    }
}

#[test]
fn affine_full_single_point_is_projection() {
    let pts = Matrix::from_f64_rows(&[&[0.3, -0.2]]);
    let hs = Halfspace::new(vec![0.6, 0.8], 1.0).unwrap();
    let gap = hs.threshold() - (0.6 * 0.3 - 0.8 * 0.2);
    let r = solve_affine_full(&pts, &hs, Bounds::unbounded(), &settings()).unwrap();
    assert!((r.objective - gap * gap).abs() < 1e-6, "{} vs {}", r.objective, gap * gap);
}

#[test]
fn affine_full_rejects_lower_bound() {
    let pts = random_group(1, 5, 2);
    let hs = random_halfspace(1, &pts, 0.5);
    let err = solve_affine_full(&pts, &hs, sym(2.0), &settings()).unwrap_err();
    assert!(matches!(err, otgcf::Error::UnsupportedConstraint(_)));
}

#[test]
fn gaussian_full_matches_1d_grid() {
    for seed in 0..6 {
        let pts = random_group(seed + 20, 10, 1);
        let hs = random_halfspace(seed, &pts, 0.7);
        let k = [1.01, 1.5, 2.0, 3.5, 5.0, 1.2][seed as usize];
        let p = estimate_moments(&pts).unwrap();
        let (mu, var) = (p.mean[0], p.cov[(0, 0)]);
        let (w, t) = (hs.normal[0], hs.threshold());
        let cost = |a: f64| {
            let bound = (0..pts.rows()).map(|i| t / w - a * (pts[(i, 0)] - mu));
            let m = if w > 0.0 { mu.max(bound.fold(f64::NEG_INFINITY, f64::max)) } else { mu.min(bound.fold(f64::INFINITY, f64::min)) };
            (m - mu).powi(2) + var * (a - 1.0).powi(2)
        };
        let (_, best) = minimize_1d(cost, 1.0 / k, k);
        let r = solve_gaussian_full(&pts, &hs, sym(k), &settings()).unwrap();
        assert!(r.converged, "seed {seed}: {:?}", r.status);
        assert!((r.objective - best).abs() < 1e-5, "seed {seed}: {} vs {best}", r.objective);
    }
}

#[test]
fn gaussian_scaled_matches_grid() {
    for seed in 0..6 {
        let pts = random_group(seed + 30, 14, 2);
        let hs = random_halfspace(seed, &pts, 0.6);
        let k = [1.01, 1.5, 2.0, 3.5, 5.0, 1.2][seed as usize];
        let p = estimate_moments(&pts).unwrap();
        let tr = p.cov.trace();
        let ww = dotp(&hs.normal, &hs.normal);
        let cost = |r: f64| {
            let need = (0..pts.rows())
                .map(|i| hs.threshold() - r * (dotp(&hs.normal, pts.row(i)) - dotp(&hs.normal, &p.mean)))
                .fold(f64::NEG_INFINITY, f64::max);
            let gap = (need - dotp(&hs.normal, &p.mean)).max(0.0);
            (r - 1.0).powi(2) * tr + gap * gap / ww
        };
        let (_, best) = minimize_1d(cost, 1.0 / k, k);
        let r = solve_gaussian_scaled(&pts, &hs, sym(k), &settings()).unwrap();
        assert!(r.converged);
        assert!((r.objective - best).abs() < 1e-5, "seed {seed}: {} vs {best}", r.objective);
    }
}

#[test]
fn gaussian_commutative_matches_active_set() {
    for seed in 0..6 {
        let pts = random_group(seed + 40, 6, 2);
        let hs = random_halfspace(seed, &pts, 0.6);
        let k = [1.01, 1.5, 2.0, 3.5, 5.0, 1.2][seed as usize];
        let p = estimate_moments(&pts).unwrap();
        let cov = DMatrix::from_fn(2, 2, |i, j| p.cov[(i, j)]);
        let eig = SymmetricEigen::new(cov);
        let roots: Vec<f64> = eig.eigenvalues.iter().map(|l| l.sqrt()).collect();
        // θ = (s₁, s₂, μ₁, μ₂); objective Σ(√λ − s)² + ‖μ − μ_P‖² minus its constant
        let h = DMatrix::from_diagonal_element(4, 4, 2.0);
        let q = DVector::from_vec(vec![-2.0 * roots[0], -2.0 * roots[1], -2.0 * p.mean[0], -2.0 * p.mean[1]]);
        let c = roots.iter().map(|r| r * r).sum::<f64>() + p.mean.iter().map(|m| m * m).sum::<f64>();
        let mut g_rows = Vec::new();
        let mut hv = Vec::new();
        for j in 0..2 {
            let mut lo = [0.0; 4];
            lo[j] = 1.0;
            g_rows.push(lo);
            hv.push(roots[j] / k);
            let mut hi = [0.0; 4];
            hi[j] = -1.0;
            g_rows.push(hi);
            hv.push(-roots[j] * k);
        }
        for i in 0..pts.rows() {
            let y: Vec<f64> = (0..2).map(|c| pts[(i, c)] - p.mean[c]).collect();
            let mut row = [0.0, 0.0, hs.normal[0], hs.normal[1]];
            for j in 0..2 {
                let u = eig.eigenvectors.column(j);
                row[j] = (hs.normal[0] * u[0] + hs.normal[1] * u[1]) * (u[0] * y[0] + u[1] * y[1]) / roots[j];
            }
            g_rows.push(row);
            hv.push(hs.threshold());
        }
        let g = DMatrix::from_fn(g_rows.len(), 4, |r, c| g_rows[r][c]);
        let (_, obj) = active_set_qp(&h, &q, &g, &DVector::from_vec(hv)).unwrap();
        let r = solve_gaussian_commutative(&pts, &hs, sym(k), &settings()).unwrap();
        assert!(r.converged);
        assert!((r.objective - (obj + c)).abs() < 1e-5, "seed {seed}: {} vs {}", r.objective, obj + c);
    }
}

#[test]
fn lipschitz_two_points_matches_active_set() {
    for seed in 0..6 {
        let pts = random_group(seed + 50, 2, 1);
        let hs = Halfspace::new(vec![1.0], pts.column(0).into_iter().fold(f64::NEG_INFINITY, f64::max) + 0.5).unwrap();
        let k = [1.01, 1.5, 0.1, 0.01, 5.0, 1.2][seed as usize];
        let gap = (pts[(0, 0)] - pts[(1, 0)]).abs();
        let h = DMatrix::from_diagonal_element(2, 2, 1.0);
        let q = DVector::from_vec(vec![-pts[(0, 0)], -pts[(1, 0)]]);
        let c = 0.5 * (pts[(0, 0)].powi(2) + pts[(1, 0)].powi(2));
        let g = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, -1.0, -1.0, 1.0]);
        let hv = DVector::from_vec(vec![hs.threshold(), hs.threshold(), -k * gap, -k * gap]);
        let (_, obj) = active_set_qp(&h, &q, &g, &hv).unwrap();
        let r = solve_group_lipschitz(&pts, &hs, k, &settings()).unwrap();
        assert!(r.converged);
        assert!((r.objective - (obj + c)).abs() < 1e-5, "seed {seed}: {} vs {}", r.objective, obj + c);
    }
}

#[test]
fn lipschitz_unbounded_equals_independent() {
    let pts = random_group(3, 20, 3);
    let hs = random_halfspace(3, &pts, 0.5);
    let a = solve_independent(&pts, &hs).unwrap();
    let b = solve_group_lipschitz(&pts, &hs, f64::INFINITY, &settings()).unwrap();
    assert!((a.objective - b.objective).abs() < 1e-6);
}

#[test]
fn relaxation_chains_hold() {
    for seed in 0..10 {
        let d = 2 + (seed as usize % 3);
        let pts = random_group(seed + 100, 25, d);
        let hs = random_halfspace(seed, &pts, 0.6);
        for k in [1.01, 2.0, 5.0] {
            let s = settings();
            let ind = solve_independent(&pts, &hs).unwrap().objective;
            let upper = Bounds::new(k, f64::INFINITY).unwrap();
            let full = solve_affine_full(&pts, &hs, upper, &s).unwrap();
            let psd_upper = solve_affine_psd(&pts, &hs, upper, &s).unwrap();
            let psd = solve_affine_psd(&pts, &hs, sym(k), &s).unwrap();
            let diag = solve_affine_diag(&pts, &hs, sym(k), &s).unwrap();
            let scaled = solve_gaussian_scaled(&pts, &hs, sym(k), &s).unwrap();
            let emp_scaled = scaled.objective_sum / pts.rows() as f64;
            let chain = [ind, full.objective, psd_upper.objective, psd.objective, diag.objective, emp_scaled];
            for w in chain.windows(2) {
                assert!(w[0] <= w[1] + 1e-6, "seed {seed} K {k}: affine chain {chain:?}");
            }
            let gf = solve_gaussian_full(&pts, &hs, sym(k), &s).unwrap();
            let gc = solve_gaussian_commutative(&pts, &hs, sym(k), &s).unwrap();
            let g = [gf.objective, gc.objective, scaled.objective];
            assert!(gf.converged && gc.converged && scaled.converged);
            for w in g.windows(2) {
                assert!(w[0] <= w[1] + 1e-6, "seed {seed} K {k}: gaussian chain {g:?}");
            }
        }
    }
}

#[test]
fn converged_maps_respect_constraints() {
    for seed in 0..6 {
        let pts = random_group(seed + 200, 20, 3);
        let hs = random_halfspace(seed, &pts, 0.8);
        for k in [1.01, 1.5, 2.0, 3.5, 5.0] {
            let reports = [
                solve_affine_psd(&pts, &hs, sym(k), &settings()).unwrap(),
                solve_affine_diag(&pts, &hs, sym(k), &settings()).unwrap(),
                solve_gaussian_full(&pts, &hs, sym(k), &settings()).unwrap(),
                solve_gaussian_commutative(&pts, &hs, sym(k), &settings()).unwrap(),
                solve_gaussian_scaled(&pts, &hs, sym(k), &settings()).unwrap(),
            ];
            for r in reports {
                let a = match &r.map {
                    TransportMap::Affine(m) => m.clone(),
                    TransportMap::GaussianPair { map, .. } => map.clone(),
                    _ => unreachable!(),
                };
                let sv = singular_values(&a.a).unwrap();
                assert!(sv.iter().all(|&s| s >= 1.0 / k - 1e-6 && s <= k + 1e-6), "{sv:?}");
                let out = r.map.apply_all(&pts).unwrap();
                assert!((0..pts.rows()).all(|i| hs.slack(out.row(i)) >= -1e-9));
            }
        }
    }
}

#[test]
fn gaussian_full_coupling_is_tight() {
    for seed in 0..6 {
        let pts = random_group(seed + 300, 30, 3);
        let hs = random_halfspace(seed, &pts, 0.6);
        let r = solve_gaussian_full(&pts, &hs, sym(2.0), &settings()).unwrap();
        assert!(r.converged);
        let TransportMap::GaussianPair { source, map, .. } = &r.map else { panic!() };
        let q = r.raw_target.as_ref().unwrap();
        let pushed = source.cov.congruence(&map.a);
        let num = q.cov.sub(&pushed).as_matrix().frobenius_norm();
        let den = q.cov.as_matrix().frobenius_norm();
        assert!(num / den <= 1e-4, "seed {seed}: {}", num / den);
    }
}

#[test]
fn wider_box_never_hurts() {
    for seed in 0..4 {
        let pts = random_group(seed + 400, 20, 2);
        let hs = random_halfspace(seed, &pts, 0.9);
        let narrow = solve_affine_psd(&pts, &hs, sym(1.01), &settings()).unwrap().objective;
        let wide = solve_affine_psd(&pts, &hs, sym(5.0), &settings()).unwrap().objective;
        assert!(wide <= narrow + 1e-6);
    }
}

#[test]
fn bilipschitz_translation_case() {
    // collinear group, halfspace along the line: a translation is optimal and feasible for K=k=1
    let pts = Matrix::from_f64_rows(&[&[0.0, 0.0], &[1.0, 0.0], &[2.5, 0.0]]);
    let hs = Halfspace::new(vec![0.0, 1.0], 2.0).unwrap();
    let opts = BiLipschitzOptions::default();
    let r = solve_group_bilipschitz(&pts, &hs, sym(1.0), &opts).unwrap();
    assert!(r.converged, "{:?}", r.status);
    let shift = hs.threshold();
    assert!((r.objective - shift * shift).abs() < 1e-5, "{}", r.objective);
    let TransportMap::Pointwise(p) = &r.map else { panic!() };
    assert!(pointwise_feasible(&pts, &p.outputs, Some(&hs), &sym(1.0), 1e-5));
}

#[test]
fn bilipschitz_outputs_are_feasible() {
    for seed in 0..3 {
        let pts = random_group(seed + 500, 12, 2);
        let hs = random_halfspace(seed, &pts, 0.6);
        let b = sym(1.5);
        let r = solve_group_bilipschitz(&pts, &hs, b, &BiLipschitzOptions { seed, ..Default::default() }).unwrap();
        let TransportMap::Pointwise(p) = &r.map else { panic!() };
        if r.converged {
            assert!(pointwise_feasible(&pts, &p.outputs, Some(&hs), &b, 1e-5));
            let lip = solve_group_lipschitz(&pts, &hs, 1.5, &settings()).unwrap();
            assert!(r.objective >= lip.objective - 1e-6);
        }
    }
}
