//! Structural invariants of residuals, curvatures and deletion refits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simplex_core::diagnostics::{delete_and_refit, hat_matrix, influence, weighted_residuals, Scheme, Subset};
use simplex_core::estimate::{fisher_beta, fit, FitOptions, FittedModel};

pub fn schemes(fit: &FittedModel) -> Vec<Scheme> {
    let mut v = vec![Scheme::CaseWeights, Scheme::Response];
    let mean = fit.spec.mean().covariates().first().cloned();
    let disp = fit.spec.dispersion().covariates().first().cloned();
    if mean.is_some() || disp.is_some() {
        v.push(Scheme::Covariate { mean, dispersion: disp });
    }
    v
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// H* idempotent within 1e−8 and trace k; diagonal in [0, 1).
pub fn hat_invariants(f: &FittedModel) -> Result<(), String> {
    let h = hat_matrix(&f.terminal_state).map_err(|e| e.to_string())?;
    let idem = (&h * &h - &h).amax();
    ensure(idem < 1e-8, || format!("H*H* − H* = {idem:e}"))?;
    let tr = h.trace();
    ensure((tr - f.k() as f64).abs() < 1e-8, || format!("trace {tr} vs k = {}", f.k()))?;
    let r = weighted_residuals(f).map_err(|e| e.to_string())?;
    ensure(r.h_star_diag.iter().all(|&v| (0.0..1.0).contains(&v)), || "h*_tt outside [0, 1)".into())
}

/// Residuals recomputed from raw matrices with an independent inverse.
pub fn residual_recomputation(f: &FittedModel) -> Result<(), String> {
    let st = &f.terminal_state;
    let r = weighted_residuals(f).map_err(|e| e.to_string())?;
    let kinv = fisher_beta(st).try_inverse().ok_or("singular K_ββ")?;
    for t in 0..st.n() {
        let mm = st.mu[t] * (1.0 - st.mu[t]);
        let dev = (st.y[t] - st.mu[t]).powi(2) / (st.y[t] * (1.0 - st.y[t]) * mm * mm);
        let u = (dev + 1.0 / (mm * mm)) / mm;
        let v = st.sigma2[t] * (3.0 * st.sigma2[t] / mm + 1.0 / (mm * mm * mm));
        let w = v / (st.sigma2[t] * st.g1[t] * st.g1[t]);
        let x = st.x_tilde.row(t);
        let h = w / st.sigma2[t] * (x * &kinv * x.transpose())[(0, 0)];
        let naive = u * (st.y[t] - st.mu[t]) / (v * (1.0 - h)).sqrt();
        let err = (naive - r.r_beta[t]).abs() / naive.abs().max(1.0);
        ensure(err < 1e-10, || format!("observation {}: {naive} vs {}", t + 1, r.r_beta[t]))?;
    }
    Ok(())
}

/// I_max unit norm, C_t ≥ 0, C_max/2 the top eigenvalue of B, C_t = 2|B_tt|,
/// C_max dominating random directions, and Δ column sums zero for case weights.
pub fn curvature_invariants(f: &FittedModel, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for scheme in schemes(f) {
        for subset in Subset::ALL {
            let tag = format!("{}/{}", scheme.label(), subset.label());
            let r = influence(f, &scheme, subset).map_err(|e| format!("{tag}: {e}"))?;
            ensure((r.i_max.norm() - 1.0).abs() < 1e-12, || format!("{tag}: ‖I_max‖ = {}", r.i_max.norm()))?;
            ensure(r.c_t.iter().all(|&c| c >= 0.0), || format!("{tag}: negative C_t"))?;
            let b = r.b_matrix();
            let scale = b.amax().max(1e-300);
            let top = SymmetricEigen::new(0.5 * (&b + b.transpose())).eigenvalues.max();
            ensure((r.c_max / 2.0 - top).abs() < 1e-10 * scale, || {
                format!("{tag}: C_max/2 {} vs {top}", r.c_max / 2.0)
            })?;
            for t in 0..b.nrows() {
                let direct = 2.0 * b[(t, t)].abs();
                ensure((r.c_t[t] - direct).abs() < 1e-10 * scale, || {
                    format!("{tag}: C_t[{t}] {} vs {direct}", r.c_t[t])
                })?;
            }
            ensure((r.curvature(&r.i_max) - r.c_max).abs() < 1e-9 * scale, || format!("{tag}: C(I_max) ≠ C_max"))?;
            for _ in 0..20 {
                let d = DVector::from_fn(b.nrows(), |_, _| rng.random_range(-1.0..1.0));
                let c = r.curvature(&d);
                ensure(c >= -1e-10 * scale && c <= r.c_max * (1.0 + 1e-10), || {
                    format!("{tag}: direction curvature {c}")
                })?;
            }
            if scheme == Scheme::CaseWeights {
                let sums = r.delta.column_sum();
                ensure(sums.amax() < 1e-5, || format!("{tag}: Δ column sum {:e}", sums.amax()))?;
            }
        }
    }
    // With no partition the subset machinery must reproduce the full curvature.
    let full = influence(f, &Scheme::CaseWeights, Subset::Theta).map_err(|e| e.to_string())?;
    let direct = -fit_hessian_inverse(f)?;
    ensure((&full.core - &direct).amax() < 1e-10 * direct.amax(), || "theta core differs from −ℓ̈⁻¹".into())
}

fn fit_hessian_inverse(f: &FittedModel) -> Result<DMatrix<f64>, String> {
    simplex_core::estimate::hessian(&f.terminal_state).try_inverse().ok_or_else(|| "singular ℓ̈".into())
}

/// Deleting cases and refitting equals fitting the reduced data from scratch.
pub fn deletion_matches_scratch(f: &FittedModel, cases: &[usize]) -> Result<(), String> {
    let d = delete_and_refit(f, cases).map_err(|e| e.to_string())?;
    let reduced = f.data.without_rows(cases).map_err(|e| e.to_string())?;
    let scratch = fit(&f.spec, &reduced, &FitOptions::default()).map_err(|e| e.to_string())?;
    let diff = (d.refit.theta() - scratch.theta()).amax();
    ensure(diff < 1e-8, || format!("refit differs from scratch by {diff:e}"))?;
    let empty = delete_and_refit(f, &[]).map_err(|e| e.to_string())?;
    ensure(empty.rows.iter().all(|r| r.change_pct == 0.0 && r.se_change_pct == 0.0), || {
        "deleting nothing changed the estimates".into()
    })
}
