//! Gaussian mixtures: EM fitting and the component-wise counterfactual coupling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::Halfspace;
use crate::error::{Error, Result};
use crate::maps::{closed_form_w2, GaussianDensity, GaussianMoments, GmmCounterfactual, GmmModel, TransportMap};
use crate::numerics::{sq_dist, sym_eig, Matrix, SymMatrix};
use crate::scalar::Scalar;
use crate::solvers::{solve_gaussian_full_moments, Bounds, SolveReport, SolveStatus, SolverSettings};

/// Added to every component covariance.
pub const GMM_RIDGE: f64 = 1e-6;
const MAX_RESEEDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Stop once the log-likelihood gains less than `tol·|ℓ|`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GmmFit<T> {
    pub model: GmmModel<T>,
    /// Log-likelihood after every E-step; non-decreasing.
    pub log_likelihood: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeds: usize,
}

#[derive(Clone)]
struct Params<T> {
    weights: Vec<T>,
    means: Vec<Vec<T>>,
    covs: Vec<SymMatrix<T>>,
}

impl<T: Scalar> Params<T> {
    fn components(&self) -> Result<Vec<GaussianMoments<T>>> {
        self.means
            .iter()
            .zip(&self.covs)
            .map(|(m, c)| {
                Ok(GaussianMoments {
                    mean: m.clone(),
                    cov: c.clone(),
                    ridge: T::lit(GMM_RIDGE),
                })
            })
            .collect()
    }
}

fn kmeans_pp<T: Scalar>(points: &Matrix<T>, m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = points.rows();
    let mut centres = vec![points.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), &centres[0]).as_f64()).collect();
    while centres.len() < m {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &v) in d2.iter().enumerate() {
                if u < v {
                    idx = i;
                    break;
                }
                u -= v;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(points.row(i), &c).as_f64());
        }
        centres.push(c);
    }
    centres
}

/// Log-likelihood and responsibilities.
fn e_step<T: Scalar>(points: &Matrix<T>, p: &Params<T>) -> Result<(T, Matrix<T>)> {
    let (n, m) = (points.rows(), p.weights.len());
    let dens = p
        .components()?
        .iter()
        .map(GaussianDensity::new)
        .collect::<Result<Vec<_>>>()?;
    let mut resp = Matrix::zeros(n, m);
    let mut ll = T::zero();
    for i in 0..n {
        let lp: Vec<T> = (0..m)
            .map(|j| Ok(p.weights[j].ln() + dens[j].log_density(points.row(i))?))
            .collect::<Result<_>>()?;
        let top = lp.iter().copied().fold(T::neg_infinity(), T::max);
        let s: T = lp.iter().map(|&v| (v - top).exp()).sum();
        let lse = top + s.ln();
        ll += lse;
        for j in 0..m {
            resp[(i, j)] = (lp[j] - lse).exp();
        }
    }
    Ok((ll, resp))
}

fn m_step<T: Scalar>(points: &Matrix<T>, resp: &Matrix<T>) -> (Vec<T>, Params<T>) {
    let (n, d, m) = (points.rows(), points.cols(), resp.cols());
    let mut counts = vec![T::zero(); m];
    let mut means = vec![vec![T::zero(); d]; m];
    for i in 0..n {
        for j in 0..m {
            let r = resp[(i, j)];
            counts[j] += r;
            for c in 0..d {
                means[j][c] += r * points[(i, c)];
            }
        }
    }
    let mut covs = Vec::with_capacity(m);
    for j in 0..m {
        let nj = counts[j].max(T::min_positive_value());
        means[j].iter_mut().for_each(|v| *v /= nj);
        let mut cov = Matrix::zeros(d, d);
        for i in 0..n {
            let r = resp[(i, j)];
            for a in 0..d {
                let da = points[(i, a)] - means[j][a];
                for b in a..d {
                    cov[(a, b)] += r * da * (points[(i, b)] - means[j][b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / nj;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
            cov[(a, a)] += T::lit(GMM_RIDGE);
        }
        covs.push(SymMatrix::new(cov).expect("square"));
    }
    let nt = T::from_usize_lossy(n);
    let weights = counts.iter().map(|&c| c / nt).collect();
    (counts, Params { weights, means, covs })
}

fn sample_cov<T: Scalar>(points: &Matrix<T>) -> SymMatrix<T> {
    let resp = Matrix::from_fn(points.rows(), 1, |_, _| T::one());
    m_step(points, &resp).1.covs.remove(0)
}

/// EM with k-means++ starts. An emptied component is moved to the point worst explained by the
/// current means; after three such moves the fit fails.
pub fn fit_gmm<T: Scalar>(points: &Matrix<T>, m: usize, config: &EmConfig) -> Result<GmmFit<T>> {
    let (n, d) = (points.rows(), points.cols());
    if m == 0 {
        return Err(Error::InvalidInput("mixture needs at least one component".into()));
    }
    if n < m * (d + 1) {
        return Err(Error::NotEnoughSamples(format!(
            "{m} components in {d} dimensions need {} points, got {n}",
            m * (d + 1)
        )));
    }
    if !points.is_finite() {
        return Err(Error::InvalidInput("non-finite points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let global = sample_cov(points);
    let centres = kmeans_pp(points, m, &mut rng);
    let mut params = Params {
        weights: vec![T::one() / T::from_usize_lossy(m); m],
        means: centres,
        covs: vec![global.clone(); m],
    };
    // start from a hard nearest-centre partition
    let hard = Matrix::from_fn(n, m, |i, j| {
        let best = (0..m)
            .min_by(|&a, &b| {
                sq_dist(points.row(i), &params.means[a])
                    .partial_cmp(&sq_dist(points.row(i), &params.means[b]))
                    .expect("finite")
            })
            .expect("m ≥ 1");
        if best == j {
            T::one()
        } else {
            T::zero()
        }
    });
    let (counts, fresh) = m_step(points, &hard);
    if counts.iter().all(|&c| c > T::zero()) {
        params = fresh;
    }

    let empty_mass = T::lit(1e-8) * T::from_usize_lossy(n);
    let mut reseeds = 0;
    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    let mut resp = Matrix::zeros(n, m);
    let mut previous: Option<Params<T>> = None;
    let mut iterations = 0;
    loop {
        let (ll, r) = e_step(points, &params)?;
        if let Some(&last) = trace.last() {
            if ll < last {
                // the ridge makes the update only approximately monotone; keep the better fit
                params = previous.take().expect("a previous iterate exists");
                converged = true;
                break;
            }
        }
        let gain = trace.last().map(|&last| ll - last);
        trace.push(ll);
        resp = r;
        if gain.is_some_and(|g| g <= T::lit(config.tol) * ll.abs().max(T::one())) {
            converged = true;
            break;
        }
        if iterations == config.max_iter {
            break;
        }
        iterations += 1;
        let (counts, next) = m_step(points, &resp);
        if let Some(j) = counts.iter().position(|&c| c < empty_mass) {
            if reseeds == MAX_RESEEDS {
                return Err(Error::EmptyComponent(j));
            }
            reseeds += 1;
            let nearest = |i: usize| params.means.iter().map(|c| sq_dist(points.row(i), c)).fold(T::infinity(), T::min);
            let far = (0..n)
                .max_by(|&a, &b| nearest(a).partial_cmp(&nearest(b)).expect("finite").then(b.cmp(&a)))
                .expect("n ≥ 1");
            params.means[j] = points.row(far).to_vec();
            params.covs[j] = global.clone();
            params.weights = vec![T::one() / T::from_usize_lossy(m); m];
            trace.clear();
            previous = None;
            continue;
        }
        previous = Some(std::mem::replace(&mut params, next));
    }
    let sum: T = params.weights.iter().copied().sum();
    let weights: Vec<T> = params.weights.iter().map(|&w| w / sum).collect();
    let model = GmmModel::new(weights, params.components()?, resp)?;
    Ok(GmmFit {
        model,
        log_likelihood: trace,
        iterations,
        converged,
        reseeds,
    })
}

/// Component-wise coupling: each source component gets its own full-Gaussian solve with the
/// halfspace rows of the points routed to it.
///
/// Every `A_j` lies in the spectral box, so their weighted average does as well; the averaged
/// map is still checked and a violation marks the report non-converged.
pub fn solve_gmm_map<T: Scalar>(
    gmm: &GmmModel<T>,
    hs: &Halfspace<T>,
    points: &Matrix<T>,
    bounds: Bounds<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    let start = std::time::Instant::now();
    let d = gmm.dim();
    if points.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: points.cols(),
        });
    }
    let router = gmm.router()?;
    let routes: Vec<usize> = (0..points.rows())
        .map(|i| router.route(points.row(i)))
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(gmm.m());
    for (j, comp) in gmm.components.iter().enumerate() {
        let members: Vec<usize> = (0..points.rows()).filter(|&i| routes[i] == j).collect();
        let sub = Matrix::from_fn(members.len(), d, |r, c| points[(members[r], c)]);
        reports.push(solve_gaussian_full_moments(&sub, hs, comp, bounds, settings)?);
    }

    let mut maps = Vec::with_capacity(gmm.m());
    let mut targets = Vec::with_capacity(gmm.m());
    let mut objective = T::zero();
    let mut failed = Vec::new();
    let (mut iterations, mut pr, mut dr) = (0, T::zero(), T::zero());
    for (j, r) in reports.into_iter().enumerate() {
        let TransportMap::GaussianPair { target, map, .. } = r.map else {
            unreachable!("full Gaussian solve returns a Gaussian pair")
        };
        objective += gmm.weights[j] * closed_form_w2(&gmm.components[j], &target)?;
        if !r.converged {
            failed.push(j);
        }
        iterations += r.iterations;
        pr = pr.max(r.primal_residual);
        dr = dr.max(r.dual_residual);
        maps.push(map);
        targets.push(target);
    }
    let cf = GmmCounterfactual {
        source: gmm.clone(),
        targets,
        maps,
    };
    let (abar, _) = cf.average_map();
    let spec = sym_eig(&SymMatrix::new(abar)?)?;
    let global_ok = spec.min() >= bounds.lo() - T::tol(1e-5) && spec.max() <= bounds.hi() + T::tol(1e-5);

    let map = TransportMap::Gmm(cf);
    let outputs = map.apply_all(points)?;
    let sum: T = (0..points.rows()).map(|i| sq_dist(points.row(i), outputs.row(i))).sum();
    let converged = failed.is_empty() && global_ok;
    let status = if converged {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    Ok(SolveReport {
        map,
        objective,
        objective_sum: sum,
        converged,
        status,
        iterations,
        primal_residual: pr,
        dual_residual: dr,
        wall_time: start.elapsed().as_secs_f64(),
        raw_target: None,
        failed_components: failed,
    })
}
