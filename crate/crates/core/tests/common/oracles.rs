//! Random model/parameter/data draws and central finite-difference checks
//! of the score, ℓ̈ and the three perturbation matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simplex_core::data::Dataset;
use simplex_core::diagnostics::{perturbation_matrix, Scheme};
use simplex_core::dist::log_density_unchecked;
use simplex_core::estimate::{hessian, score};
use simplex_core::model::{assemble, loglik, LinkKind, ModelConfig, ModelSpec};
use simplex_core::simulate::ResponseSimulator;

const MEAN_POOL: [&str; 5] = [
    "b1 + b2*x1 + b3*x2",
    "b1 + b2*exp(b3*x1)",
    "b1 + x2^b2 + b3*x1",
    "b1 + b2*x1/(x2 + b3)",
    "b1*sqrt(x2) + b2*x1*x1",
];

const DISPERSION_POOL: [&str; 5] =
    ["g1", "g1 + g2*z1", "g1 + g2*exp(g3*z1)", "g1 + g2*x1 + g3*z1*z1", "g1 + g2*log(x2)"];

pub struct Problem {
    pub spec: ModelSpec,
    pub data: Dataset,
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub covariate_scheme: Scheme,
}

pub fn random_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = MEAN_POOL[rng.random_range(0..MEAN_POOL.len())];
    let disp = DISPERSION_POOL[rng.random_range(0..DISPERSION_POOL.len())];
    let mut cfg = ModelConfig::new(mean, disp);
    cfg.mean_link = [LinkKind::Logit, LinkKind::Probit, LinkKind::Cloglog, LinkKind::Loglog][rng.random_range(0..4)];
    cfg.dispersion_link = [LinkKind::Log, LinkKind::Sqrt][rng.random_range(0..2)];
    let spec = cfg.build().expect("pool formulas are valid");

    let n = 12;
    let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x2: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let z1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let names = ["y", "x1", "x2", "z1"].map(String::from).to_vec();
    let placeholder = Dataset::new(names, vec![vec![0.5; n], x1, x2, z1], "y").unwrap();
    // Redraw parameters until every mean is away from the boundary.
    let (beta, gamma, st) = loop {
        let beta = DVector::from_fn(spec.k(), |_, _| rng.random_range(-0.5..0.5));
        let gamma = DVector::from_fn(spec.q(), |i, _| match (cfg.dispersion_link, i) {
            (LinkKind::Log, 0) => rng.random_range(-2.0..-0.5),
            (LinkKind::Sqrt, 0) => rng.random_range(0.4..0.8),
            _ => rng.random_range(-0.2..0.2),
        });
        if let Ok(st) = assemble(&spec, &placeholder, &beta, &gamma) {
            if st.mu.iter().all(|&m| (0.01..=0.99).contains(&m)) {
                break (beta, gamma, st);
            }
        }
    };
    let sim = ResponseSimulator::new(st.mu.as_slice(), st.sigma2.as_slice()).unwrap();
    let y = sim.draw(seed, 0);
    let data = placeholder.with_response(y).unwrap();

    let in_mean = |c: &str| spec.mean().covariate_index(c).is_some();
    let in_disp = |c: &str| spec.dispersion().covariate_index(c).is_some();
    let m = ["x1", "x2"].into_iter().find(|c| in_mean(c)).map(String::from);
    // A covariate shared by both predictors is perturbed in both.
    let d = match &m {
        Some(c) if in_disp(c) => Some(c.clone()),
        _ => ["z1", "x1", "x2"].into_iter().find(|c| in_disp(c) && !in_mean(c)).map(String::from),
    };
    Problem { spec, data, beta, gamma, covariate_scheme: Scheme::Covariate { mean: m, dispersion: d } }
}

/// max |A − F| / max |F|.
pub fn rel_err(a: &DMatrix<f64>, f: &DMatrix<f64>) -> f64 {
    let scale = f.amax();
    if scale == 0.0 {
        return a.amax();
    }
    (a - f).amax() / scale
}

fn step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

fn theta_split(p: &Problem, theta: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let k = p.spec.k();
    (theta.rows(0, k).into_owned(), theta.rows(k, p.spec.q()).into_owned())
}

fn score_at(p: &Problem, data: &Dataset, theta: &DVector<f64>) -> DVector<f64> {
    let (b, g) = theta_split(p, theta);
    score(&assemble(&p.spec, data, &b, &g).expect("state near the draw"))
}

fn modify(data: &Dataset, column: &str, t: usize, by: f64) -> Dataset {
    let names = data.names().to_vec();
    let cols = names
        .iter()
        .map(|n| {
            let mut c = data.column(n).unwrap().to_vec();
            if n == column {
                c[t] += by;
            }
            c
        })
        .collect();
    Dataset::new(names, cols, data.response_name()).unwrap()
}

fn sd(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Relative errors (score, ℓ̈, Δ case weights, Δ response, Δ covariate).
pub fn derivative_errors(p: &Problem) -> [f64; 5] {
    let (k, q, n) = (p.spec.k(), p.spec.q(), p.data.n());
    let theta = DVector::from_iterator(k + q, p.beta.iter().chain(p.gamma.iter()).copied());
    let st = assemble(&p.spec, &p.data, &p.beta, &p.gamma).unwrap();

    let ll = |data: &Dataset, th: &DVector<f64>| {
        let (b, g) = theta_split(p, th);
        loglik(&p.spec, data, &b, &g).unwrap()
    };
    let mut fd_score = DMatrix::zeros(k + q, 1);
    let mut fd_hess = DMatrix::zeros(k + q, k + q);
    for i in 0..k + q {
        let h = step(theta[i]);
        let (mut up, mut dn) = (theta.clone(), theta.clone());
        up[i] += h;
        dn[i] -= h;
        fd_score[i] = (ll(&p.data, &up) - ll(&p.data, &dn)) / (2.0 * h);
        fd_hess.set_column(i, &((score_at(p, &p.data, &up) - score_at(p, &p.data, &dn)) / (2.0 * h)));
    }
    let e_score = rel_err(&DMatrix::from_column_slice(k + q, 1, score(&st).as_slice()), &fd_score);
    let e_hess = rel_err(&hessian(&st), &fd_hess);

    // Case weights: column t is the score of observation t alone.
    let per_obs = |th: &DVector<f64>| {
        let (b, g) = theta_split(p, th);
        let s = assemble(&p.spec, &p.data, &b, &g).unwrap();
        DVector::from_fn(n, |t, _| log_density_unchecked(s.y[t], 1.0 - s.y[t], s.mu[t], s.sigma2[t]))
    };
    let mut fd_cw = DMatrix::zeros(k + q, n);
    for i in 0..k + q {
        let h = step(theta[i]);
        let (mut up, mut dn) = (theta.clone(), theta.clone());
        up[i] += h;
        dn[i] -= h;
        fd_cw.set_row(i, &((per_obs(&up) - per_obs(&dn)) / (2.0 * h)).transpose());
    }
    let e_cw = rel_err(&perturbation_matrix(&p.spec, &p.data, &st, &Scheme::CaseWeights).unwrap(), &fd_cw);

    // Response: y_t ↦ y_t + δ √V(μ_t).
    let y = p.data.response_name().to_string();
    let mut fd_resp = DMatrix::zeros(k + q, n);
    for t in 0..n {
        let s = (st.mu[t] * (1.0 - st.mu[t])).powi(3).sqrt();
        let h = 1e-6;
        let up = score_at(p, &modify(&p.data, &y, t, h * s), &theta);
        let dn = score_at(p, &modify(&p.data, &y, t, -h * s), &theta);
        fd_resp.set_column(t, &((up - dn) / (2.0 * h)));
    }
    let e_resp = rel_err(&perturbation_matrix(&p.spec, &p.data, &st, &Scheme::Response).unwrap(), &fd_resp);

    // Covariate: the named columns shift by δ times their sample sd.
    let Scheme::Covariate { mean, dispersion } = &p.covariate_scheme else { unreachable!() };
    let mut shifted: Vec<(String, f64)> = Vec::new();
    for c in [mean, dispersion].into_iter().flatten() {
        if !shifted.iter().any(|(n, _)| n == c) {
            shifted.push((c.clone(), sd(p.data.column(c).unwrap())));
        }
    }
    let mut fd_cov = DMatrix::zeros(k + q, n);
    for t in 0..n {
        let h = 1e-6;
        let (mut up, mut dn) = (p.data.clone(), p.data.clone());
        for (c, s) in &shifted {
            up = modify(&up, c, t, h * s);
            dn = modify(&dn, c, t, -h * s);
        }
        fd_cov.set_column(t, &((score_at(p, &up, &theta) - score_at(p, &dn, &theta)) / (2.0 * h)));
    }
    let e_cov = rel_err(&perturbation_matrix(&p.spec, &p.data, &st, &p.covariate_scheme).unwrap(), &fd_cov);

    [e_score, e_hess, e_cw, e_resp, e_cov]
}

/// Largest |z| of (mean observed information − Fisher information) over
/// the upper triangle, from `datasets` response draws at the true θ on the
/// n-row central design, and whether the β×γ Fisher block is exactly zero.
pub fn information_identity(datasets: usize, n: usize, seed: u64) -> (f64, bool) {
    use simplex_core::estimate::{fisher_information, observed_information};
    use simplex_core::study::Scenario;

    let sc = Scenario { n, seed, ..Scenario::default() };
    let spec = sc.model.build().unwrap();
    let design = sc.design().unwrap();
    let beta = DVector::from_column_slice(&sc.beta);
    let gamma = DVector::from_column_slice(&sc.gamma);
    let truth = assemble(&spec, &design, &beta, &gamma).unwrap();
    let fisher = fisher_information(&truth);
    let (k, q) = (spec.k(), spec.q());
    let block_zero = fisher.view((0, k), (k, q)).iter().all(|&v| v == 0.0);

    let sim = ResponseSimulator::new(truth.mu.as_slice(), truth.sigma2.as_slice()).unwrap();
    let p = k + q;
    let mut sum = DMatrix::zeros(p, p);
    let mut sum_sq = DMatrix::zeros(p, p);
    for r in 0..datasets as u64 {
        let data = design.with_response(sim.draw(seed, r)).unwrap();
        let obs = observed_information(&assemble(&spec, &data, &beta, &gamma).unwrap());
        sum_sq += obs.component_mul(&obs);
        sum += obs;
    }
    let m = datasets as f64;
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in i..p {
            let mean = sum[(i, j)] / m;
            let var = (sum_sq[(i, j)] / m - mean * mean) * m / (m - 1.0);
            let se = (var / m).sqrt();
            worst = worst.max((mean - fisher[(i, j)]).abs() / se);
        }
    }
    (worst, block_zero)
}
