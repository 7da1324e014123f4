//! The five commands. Each writes its reports into the output directory and
//! echoes the resolved configuration into its JSON output.

use std::fs;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use simplex_core::data::Dataset;
use simplex_core::diagnostics::{
    delete_and_refit, influence, simulated_envelope, weighted_residuals, InfluenceReport, Scheme, Subset,
};
use simplex_core::estimate::{constant_dispersion, fit, two_sided_p, FittedModel};
use simplex_core::model::{link_eval, LinkKind, LinkMode};
use simplex_core::study::run_scenario;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{cell, write_csv, write_json};

pub fn header(cfg: &RunConfig, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    // The only field allowed to differ between identical runs.
    m.insert("generated_at".into(), json!(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<std::path::PathBuf, CliError> {
    let dir = cfg.out_dir();
    fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
    Ok(dir.join(name))
}

fn json_out<T: Serialize>(cfg: &RunConfig, name: &str, value: &T) -> Result<(), CliError> {
    let path = out_file(cfg, name)?;
    write_json(&path, value).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn csv_out(cfg: &RunConfig, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let path = out_file(cfg, name)?;
    write_csv(&path, header, rows).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn with(mut m: serde_json::Map<String, Value>, body: Value) -> Value {
    if let Value::Object(b) = body {
        m.extend(b);
    }
    Value::Object(m)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Blom plotting positions mapped through Φ⁻¹.
fn normal_scores(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let p = (i as f64 - 0.375) / (n as f64 + 0.25);
            link_eval(LinkKind::Probit, LinkMode::Forward, p).expect("p in (0, 1)")
        })
        .collect()
}

fn load(cfg: &RunConfig) -> Result<(simplex_core::model::ModelSpec, Dataset), CliError> {
    let spec = cfg.model()?.build()?;
    let d = cfg.data()?;
    let data = Dataset::from_path(&d.path, &d.response)?;
    Ok((spec, data))
}

fn fitted(cfg: &RunConfig) -> Result<FittedModel, CliError> {
    let (spec, data) = load(cfg)?;
    let f = fit(&spec, &data, &cfg.fit)?;
    if !f.converged {
        return Err(CliError::NotConverged(format!(
            "{} iterations, max |score| {:e}",
            f.iterations,
            f.max_abs_score()
        )));
    }
    Ok(f)
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<(), CliError> {
    let (spec, data) = load(cfg)?;
    let f = fit(&spec, &data, &cfg.fit)?;
    let se = f.std_errors();
    let theta = f.theta();
    let names = f.spec.beta_names().iter().chain(f.spec.gamma_names());
    let parameters: Vec<Value> = names
        .enumerate()
        .map(|(i, name)| {
            let z = theta[i] / se[i];
            json!({"name": name, "estimate": theta[i], "se": se[i], "z": z, "p_value": two_sided_p(z)})
        })
        .collect();
    let body = json!({
        "n": data.n(),
        "converged": f.converged,
        "iterations": f.iterations,
        "loglik": f.loglik,
        "max_abs_score": f.max_abs_score(),
        "parameters": parameters,
        "constant_dispersion": constant_dispersion(&f),
        "covariance": matrix_rows(&f.cov),
        "start": {"beta": f.start_beta.as_slice(), "gamma": f.start_gamma.as_slice()},
        "trace": f.trace,
        "notes": f.notes,
    });
    json_out(cfg, "fit.json", &with(header(cfg, "fit"), body))?;
    if !f.converged {
        return Err(CliError::NotConverged(format!(
            "{} iterations, max |score| {:e}; fit.json records the last iterate",
            f.iterations,
            f.max_abs_score()
        )));
    }

    let r = weighted_residuals(&f)?;
    let st = &f.terminal_state;
    let rows = (0..data.n())
        .map(|t| {
            vec![
                (t + 1).to_string(),
                cell(st.y[t]),
                cell(st.mu[t]),
                cell(st.sigma2[t]),
                cell(r.r_beta[t]),
                cell(r.h_star_diag[t]),
            ]
        })
        .collect();
    csv_out(cfg, "residuals.csv", &["index", "y", "mu_hat", "sigma2_hat", "r_beta", "h_star"], rows)
}

pub fn cmd_envelope(cfg: &RunConfig) -> Result<(), CliError> {
    let f = fitted(cfg)?;
    let b = simulated_envelope(&f, cfg.envelope.replicates, cfg.seed, cfg.envelope.refit)?;
    let scores = normal_scores(b.observed.len());
    let rows = (0..b.observed.len())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                cell(scores[i]),
                cell(b.observed[i]),
                cell(b.lower[i]),
                cell(b.median[i]),
                cell(b.upper[i]),
            ]
        })
        .collect();
    csv_out(cfg, "envelope.csv", &["order", "normal_score", "observed", "lower", "median", "upper"], rows)?;
    let body = json!({
        "omega_lo": b.omega_lo,
        "omega_hi": b.omega_hi,
        "coverage": b.coverage(),
        "n_replicates": b.n_replicates,
        "n_skipped": b.n_skipped,
        "refit": b.refit,
    });
    json_out(cfg, "envelope.json", &with(header(cfg, "envelope"), body))
}

/// File stem for a scheme; covariate schemes carry their covariate names.
fn scheme_stem(s: &Scheme) -> String {
    match s {
        Scheme::Covariate { mean, dispersion } => {
            let mut stem = "covariate".to_string();
            for name in [mean, dispersion].into_iter().flatten() {
                if !stem.ends_with(&format!("_{name}")) {
                    stem.push('_');
                    stem.push_str(name);
                }
            }
            stem
        }
        other => other.label().to_string(),
    }
}

fn influence_csv(cfg: &RunConfig, stem: &str, reports: &[InfluenceReport]) -> Result<(), CliError> {
    let mut header = vec!["index".to_string()];
    for r in reports {
        for col in ["i_max", "c_t", "flagged"] {
            header.push(format!("{}_{col}", r.subset.label()));
        }
    }
    let n = reports[0].c_t.len();
    let rows = (0..n)
        .map(|t| {
            let mut row = vec![(t + 1).to_string()];
            for r in reports {
                row.push(cell(r.i_max[t]));
                row.push(cell(r.c_t[t]));
                row.push(u8::from(r.flagged.contains(&t)).to_string());
            }
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_out(cfg, &format!("influence_{stem}.csv"), &header, rows)
}

pub fn cmd_influence(cfg: &RunConfig) -> Result<(), CliError> {
    let f = fitted(cfg)?;
    let mut schemes = Vec::new();
    let mut stems: Vec<String> = Vec::new();
    for scheme in &cfg.influence.schemes {
        let stem = scheme_stem(scheme);
        if stems.contains(&stem) {
            return Err(CliError::Config(format!("influence scheme '{stem}' listed twice")));
        }
        let reports = Subset::ALL.iter().map(|&s| influence(&f, scheme, s)).collect::<Result<Vec<_>, _>>()?;
        influence_csv(cfg, &stem, &reports)?;
        let subsets: serde_json::Map<String, Value> = reports
            .iter()
            .map(|r| {
                let flagged: Vec<usize> = r.flagged.iter().map(|t| t + 1).collect();
                (r.subset.label().to_string(), json!({"c_max": r.c_max, "threshold": r.threshold, "flagged": flagged}))
            })
            .collect();
        schemes.push(json!({"scheme": scheme, "file": format!("influence_{stem}.csv"), "subsets": subsets}));
        stems.push(stem);
    }

    let mut deletions = Vec::new();
    let mut rows = Vec::new();
    for (k, set) in cfg.influence.deletion_sets.iter().enumerate() {
        if set.contains(&0) {
            return Err(CliError::Config("deletion sets number cases from 1".into()));
        }
        let cases: Vec<usize> = set.iter().map(|c| c - 1).collect();
        let d = delete_and_refit(&f, &cases)?;
        let label = set.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        for r in &d.rows {
            rows.push(vec![
                (k + 1).to_string(),
                label.clone(),
                r.name.clone(),
                cell(r.estimate_old),
                cell(r.estimate_new),
                cell(r.change_pct_signed),
                cell(r.se_old),
                cell(r.se_new),
                cell(r.se_change_pct_signed),
                cell(r.p_value_new),
            ]);
        }
        let cases_1: Vec<usize> = d.cases.iter().map(|c| c + 1).collect();
        deletions.push(json!({
            "cases": cases_1,
            "converged": d.refit.converged,
            "rows": d.rows,
            "dispersion": d.dispersion,
        }));
    }
    if !deletions.is_empty() {
        csv_out(
            cfg,
            "deletion.csv",
            &[
                "set",
                "cases",
                "parameter",
                "estimate",
                "estimate_deleted",
                "change_pct",
                "se",
                "se_deleted",
                "se_change_pct",
                "p_value_deleted",
            ],
            rows,
        )?;
    }
    let body = json!({"n": f.data.n(), "schemes": schemes, "deletions": deletions});
    json_out(cfg, "influence.json", &with(header(cfg, "influence"), body))
}

pub fn cmd_mc_study(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.mc_study.scenarios.is_empty() {
        return Err(CliError::Config("mc_study.scenarios is empty".into()));
    }
    let mut summaries = Vec::new();
    for (i, sc) in cfg.mc_study.scenarios.iter().enumerate() {
        if cfg.mc_study.scenarios[..i].iter().any(|o| o.name == sc.name) {
            return Err(CliError::Config(format!("scenario name '{}' is not unique", sc.name)));
        }
        if sc.name.is_empty() || !sc.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(CliError::Config(format!("scenario name '{}' must be a plain identifier", sc.name)));
        }
        let r = run_scenario(sc)?;
        let scores = normal_scores(r.mean_order_statistics.len());
        let rows = r
            .mean_order_statistics
            .iter()
            .zip(&scores)
            .enumerate()
            .map(|(j, (m, z))| vec![(j + 1).to_string(), cell(*z), cell(*m)])
            .collect();
        let file = format!("mc_{}.csv", sc.name);
        csv_out(cfg, &file, &["order", "normal_score", "mean_residual"], rows)?;
        summaries.push(json!({
            "name": sc.name,
            "file": file,
            "lambda": r.lambda,
            "mu_range": r.mu_range,
            "mu_hat_range": r.mu_hat_range,
            "mean": r.mean,
            "variance": r.variance,
            "skewness": r.skewness,
            "kurtosis": r.kurtosis,
            "omega_lo": r.omega_lo,
            "omega_hi": r.omega_hi,
            "successes": r.successes,
            "failures": r.failures,
        }));
    }
    json_out(cfg, "mc_study.json", &with(header(cfg, "mc-study"), json!({"scenarios": summaries})))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let g = &cfg.simulate;
    let data = g.generate(cfg.seed)?;
    let names = data.names().to_vec();
    // Full precision keeps responses near 1 from rounding onto the boundary.
    let rows = (0..data.n())
        .map(|t| names.iter().map(|c| crate::report::sig(data.column(c).expect("own column")[t], 17)).collect())
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    csv_out(cfg, &g.output, &header, rows)?;
    let body = json!({"n": data.n(), "output": g.output});
    json_out(cfg, "simulate.json", &with(self::header(cfg, "simulate"), body))
}
