//! Quadrature oracles for the simplex law.

use simplex_core::dist::{integrate, log_density, response_variance, sample, SimplexParams};

pub const MU_GRID: [f64; 5] = [0.05, 0.2, 0.5, 0.8, 0.95];
pub const SIGMA2_GRID: [f64; 4] = [0.1, 1.0, 10.0, 50.0];

pub fn grid() -> impl Iterator<Item = SimplexParams> {
    MU_GRID.into_iter().flat_map(|m| SIGMA2_GRID.into_iter().map(move |s| SimplexParams::new(m, s).unwrap()))
}

fn density(p: &SimplexParams) -> impl Fn(f64) -> f64 + '_ {
    move |y| if y <= 0.0 || y >= 1.0 { 0.0 } else { log_density(y, p).unwrap().exp() }
}

/// |∫f − 1|, integrating on either side of μ where the mass concentrates.
pub fn normalization_error(p: &SimplexParams) -> f64 {
    let f = density(p);
    let total = integrate(&f, 0.0, p.mu(), 1e-13, 1e-13).value + integrate(&f, p.mu(), 1.0, 1e-13, 1e-13).value;
    (total - 1.0).abs()
}

pub fn quadrature_cdf(p: &SimplexParams, y: f64) -> f64 {
    let f = density(p);
    if y <= p.mu() {
        integrate(&f, 0.0, y, 1e-12, 1e-10).value
    } else {
        1.0 - integrate(&f, y, 1.0, 1e-12, 1e-10).value
    }
}

/// Kolmogorov–Smirnov p-value (asymptotic with the Stephens correction) of
/// `n` draws against the quadrature CDF.
pub fn ks_p_value(p: &SimplexParams, n: usize, seed: u64) -> f64 {
    let mut y = sample(p, n, seed).unwrap();
    y.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = quadrature_cdf(p, v);
            (c - i as f64 / nf).abs().max(((i + 1) as f64 / nf - c).abs())
        })
        .fold(0.0, f64::max);
    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        sum += 2.0 * (if k % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    sum.clamp(0.0, 1.0)
}

/// Relative difference between the closed-form variance and ∫(y − μ)²f.
pub fn variance_error(p: &SimplexParams) -> f64 {
    let f = density(p);
    let g = |y: f64| (y - p.mu()).powi(2) * f(y);
    let v = integrate(g, 0.0, p.mu(), 1e-14, 1e-12).value + integrate(g, p.mu(), 1.0, 1e-14, 1e-12).value;
    (response_variance(p).unwrap() - v).abs() / v
}
