use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::info::{fisher_beta, fisher_gamma, score, score_beta, score_gamma};
use super::linalg::{inverse_spd, solve_spd};
use super::start::{starting_values, StartVariant};
use super::EstimateError;
use crate::data::Dataset;
use crate::model::{assemble, loglik, DesignState, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    FisherScoring,
    QuasiNewton,
    #[default]
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartingMode {
    #[default]
    TwoStep,
    UserSupplied {
        beta: Vec<f64>,
        gamma: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub step_halving_max: usize,
    pub algorithm: Algorithm,
    pub starting_mode: StartingMode,
    pub start_variant: StartVariant,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            grad_tolerance: 1e-7,
            step_halving_max: 20,
            algorithm: Algorithm::Hybrid,
            starting_mode: StartingMode::TwoStep,
            start_variant: StartVariant::WithOffset,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.max_iterations == 0 {
            return Err(EstimateError::Options("max_iterations must be at least 1".into()));
        }
        if !(self.grad_tolerance > 0.0) {
            return Err(EstimateError::Options("grad_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Start,
    Fisher,
    QuasiNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub phase: Phase,
    pub loglik: f64,
    pub max_abs_score: f64,
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub data: Dataset,
    pub options: FitOptions,
    pub start_beta: DVector<f64>,
    pub start_gamma: DVector<f64>,
    pub beta_hat: DVector<f64>,
    pub gamma_hat: DVector<f64>,
    /// blockdiag(K_ββ⁻¹, K_γγ⁻¹); the β×γ block is exactly zero.
    pub cov: DMatrix<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub notes: Vec<String>,
    pub terminal_state: DesignState,
}

impl FittedModel {
    pub fn k(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn q(&self) -> usize {
        self.gamma_hat.len()
    }

    pub fn theta(&self) -> DVector<f64> {
        self.terminal_state.theta()
    }

    pub fn std_errors(&self) -> DVector<f64> {
        self.cov.diagonal().map(f64::sqrt)
    }

    pub fn max_abs_score(&self) -> f64 {
        score(&self.terminal_state).amax()
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Allowed log-likelihood decrease when accepting a step: the rounding
/// noise of a sum of that magnitude.
fn noise(l: f64) -> f64 {
    4.0 * f64::EPSILON * (1.0 + l.abs())
}

struct Run<'a> {
    spec: &'a ModelSpec,
    data: &'a Dataset,
    opts: &'a FitOptions,
    iteration: usize,
}

impl Run<'_> {
    fn ll(&self, beta: &DVector<f64>, gamma: &DVector<f64>) -> f64 {
        loglik(self.spec, self.data, beta, gamma).ok().filter(|v| v.is_finite()).unwrap_or(f64::NEG_INFINITY)
    }

    fn state(&self, beta: &DVector<f64>, gamma: &DVector<f64>) -> Result<DesignState, EstimateError> {
        assemble(self.spec, self.data, beta, gamma)
            .map_err(|source| EstimateError::Iteration { iteration: self.iteration, source })
    }

    /// Halves `dir` until the log-likelihood does not drop; `None` if every
    /// trial fails.
    fn halve<F: Fn(f64) -> (DVector<f64>, DVector<f64>)>(
        &self,
        l0: f64,
        trial: F,
    ) -> Option<(DVector<f64>, DVector<f64>, f64)> {
        let mut lambda = 1.0;
        for _ in 0..=self.opts.step_halving_max {
            let (b, g) = trial(lambda);
            let l = self.ll(&b, &g);
            if l >= l0 - noise(l0) {
                return Some((b, g, l));
            }
            lambda *= 0.5;
        }
        None
    }

    /// One alternating Fisher iteration. Returns the new state and whether
    /// any block moved.
    fn fisher_step(&self, st: DesignState) -> Result<(DesignState, bool), EstimateError> {
        let mut moved = false;
        let mut st = st;
        let kb = fisher_beta(&st);
        let db = solve_spd(&kb, &score_beta(&st)).ok_or_else(|| {
            EstimateError::Singular(format!("Fisher information for β at iteration {}", self.iteration))
        })?;
        if let Some((b, g, _)) = self.halve(st.loglik, |l| (&st.beta + &db * l, st.gamma.clone())) {
            st = self.state(&b, &g)?;
            moved = true;
        }
        let kg = fisher_gamma(&st);
        let dg = solve_spd(&kg, &score_gamma(&st)).ok_or_else(|| {
            EstimateError::Singular(format!("Fisher information for γ at iteration {}", self.iteration))
        })?;
        if let Some((b, g, _)) = self.halve(st.loglik, |l| (st.beta.clone(), &st.gamma + &dg * l)) {
            st = self.state(&b, &g)?;
            moved = true;
        }
        Ok((st, moved))
    }
}

fn split(theta: &DVector<f64>, k: usize) -> (DVector<f64>, DVector<f64>) {
    (theta.rows(0, k).into_owned(), theta.rows(k, theta.len() - k).into_owned())
}

/// Maximum likelihood fit. Non-convergence is reported through
/// `converged = false`, not as an error.
pub fn fit(spec: &ModelSpec, data: &Dataset, opts: &FitOptions) -> Result<FittedModel, EstimateError> {
    opts.validate()?;
    let (k, q, n) = (spec.k(), spec.q(), data.n());
    if n <= k + q {
        return Err(EstimateError::TooFewObservations { n, params: k + q });
    }
    let mut notes = Vec::new();
    let (beta0, gamma0) = match &opts.starting_mode {
        StartingMode::TwoStep => {
            let s = starting_values(spec, data, opts.start_variant)?;
            notes.extend(s.notes);
            (s.beta, s.gamma)
        }
        StartingMode::UserSupplied { beta, gamma } => {
            if beta.len() != k || gamma.len() != q {
                return Err(EstimateError::Options(format!(
                    "user-supplied start has {} + {} values, model needs {k} + {q}",
                    beta.len(),
                    gamma.len()
                )));
            }
            (DVector::from_column_slice(beta), DVector::from_column_slice(gamma))
        }
    };

    let mut run = Run { spec, data, opts, iteration: 0 };
    let mut st = run.state(&beta0, &gamma0)?;
    let mut u = score(&st);
    let mut trace =
        vec![TraceEntry { iteration: 0, phase: Phase::Start, loglik: st.loglik, max_abs_score: max_abs(&u) }];

    let mut phase = match opts.algorithm {
        Algorithm::QuasiNewton => Phase::QuasiNewton,
        _ => Phase::Fisher,
    };
    let mut best_score = max_abs(&u);
    let mut stalls = 0;
    let mut bfgs: Option<Bfgs> = None;
    let mut converged = max_abs(&u) <= opts.grad_tolerance;

    while !converged && run.iteration < opts.max_iterations {
        run.iteration += 1;
        match phase {
            Phase::Fisher | Phase::Start => {
                let (next, moved) = run.fisher_step(st)?;
                st = next;
                u = score(&st);
                let s = max_abs(&u);
                if !moved || s >= best_score {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                best_score = best_score.min(s);
                if stalls >= 3 {
                    match opts.algorithm {
                        Algorithm::Hybrid => {
                            notes.push(format!("switched to quasi-Newton after iteration {}", run.iteration));
                            phase = Phase::QuasiNewton;
                        }
                        _ => {
                            trace.push(TraceEntry {
                                iteration: run.iteration,
                                phase: Phase::Fisher,
                                loglik: st.loglik,
                                max_abs_score: s,
                            });
                            break;
                        }
                    }
                }
                trace.push(TraceEntry {
                    iteration: run.iteration,
                    phase: Phase::Fisher,
                    loglik: st.loglik,
                    max_abs_score: s,
                });
            }
            Phase::QuasiNewton => {
                let b = bfgs.get_or_insert_with(|| Bfgs::new(k + q, st.loglik));
                match b.step(&run, &st, &u)? {
                    Some(next) => {
                        st = next;
                        u = score(&st);
                    }
                    None => {
                        trace.push(TraceEntry {
                            iteration: run.iteration,
                            phase,
                            loglik: st.loglik,
                            max_abs_score: max_abs(&u),
                        });
                        notes.push(format!("quasi-Newton line search failed at iteration {}", run.iteration));
                        break;
                    }
                }
                trace.push(TraceEntry {
                    iteration: run.iteration,
                    phase,
                    loglik: st.loglik,
                    max_abs_score: max_abs(&u),
                });
            }
        }
        converged = max_abs(&u) <= opts.grad_tolerance;
    }

    let kb = inverse_spd(&fisher_beta(&st))
        .ok_or_else(|| EstimateError::Singular("Fisher information for β at the estimate".into()))?;
    let kg = inverse_spd(&fisher_gamma(&st))
        .ok_or_else(|| EstimateError::Singular("Fisher information for γ at the estimate".into()))?;
    let mut cov = DMatrix::zeros(k + q, k + q);
    cov.view_mut((0, 0), (k, k)).copy_from(&kb);
    cov.view_mut((k, k), (q, q)).copy_from(&kg);

    Ok(FittedModel {
        spec: spec.clone(),
        data: data.clone(),
        options: opts.clone(),
        start_beta: beta0,
        start_gamma: gamma0,
        beta_hat: st.beta.clone(),
        gamma_hat: st.gamma.clone(),
        cov,
        loglik: st.loglik,
        converged,
        iterations: run.iteration,
        trace,
        notes,
        terminal_state: st,
    })
}

/// BFGS ascent on ℓ with an inverse-Hessian approximation of −ℓ̈.
struct Bfgs {
    hinv: DMatrix<f64>,
}

impl Bfgs {
    fn new(p: usize, l: f64) -> Self {
        Self { hinv: DMatrix::identity(p, p) / l.abs().max(1.0) }
    }

    fn step(
        &mut self,
        run: &Run<'_>,
        st: &DesignState,
        u: &DVector<f64>,
    ) -> Result<Option<DesignState>, EstimateError> {
        let k = st.k();
        let theta = st.theta();
        let mut dir = &self.hinv * u;
        let mut slope = u.dot(&dir);
        if !(slope > 0.0) {
            // Lost positive definiteness: restart from scaled steepest ascent.
            self.hinv = DMatrix::identity(theta.len(), theta.len()) / st.loglik.abs().max(1.0);
            dir = &self.hinv * u;
            slope = u.dot(&dir);
        }
        let l0 = st.loglik;
        let s0 = u.amax();
        let mut alpha = 1.0;
        for _ in 0..60 {
            let cand = &theta + &dir * alpha;
            let (b, g) = split(&cand, k);
            let l = run.ll(&b, &g);
            let armijo = l >= l0 + 1e-4 * alpha * slope;
            // Within rounding noise the likelihood cannot rank points; fall
            // back to requiring a smaller gradient.
            let flat = l >= l0 - noise(l0);
            if armijo || flat {
                let next = run.state(&b, &g)?;
                let u1 = score(&next);
                if armijo || u1.amax() < s0 {
                    let s = &cand - &theta;
                    let yv = u - &u1; // gradient change of −ℓ
                    let sy = s.dot(&yv);
                    if sy > 1e-300 {
                        let hy = &self.hinv * &yv;
                        let rho = 1.0 / sy;
                        let yhy = yv.dot(&hy);
                        self.hinv += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                            - (&hy * s.transpose() + &s * hy.transpose()) * rho;
                    }
                    return Ok(Some(next));
                }
            }
            alpha *= 0.5;
        }
        Ok(None)
    }
}
