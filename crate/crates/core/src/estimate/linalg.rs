use nalgebra::{Cholesky, DMatrix, DVector};

/// Least-squares coefficients via the normal equations. A singular XᵀX is
/// regularized with a ridge of 1e-8·trace/k; the second value reports it.
pub(crate) fn least_squares(x: &DMatrix<f64>, r: &DVector<f64>) -> Option<(DVector<f64>, bool)> {
    let xtx = x.transpose() * x;
    let xtr = x.transpose() * r;
    if let Some(sol) = solve_spd(&xtx, &xtr) {
        return Some((sol, false));
    }
    let k = xtx.nrows();
    let ridge = 1e-8 * xtx.trace() / k as f64;
    if !(ridge > 0.0 && ridge.is_finite()) {
        return None;
    }
    let reg = xtx + DMatrix::identity(k, k) * ridge;
    Cholesky::new(reg).map(|c| (c.solve(&xtr), true))
}

/// Solves A x = b for symmetric positive-definite A, rejecting matrices
/// whose Cholesky pivots span more than 1e14.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let c = Cholesky::new(a.clone())?;
    if !well_conditioned(&c) {
        return None;
    }
    let x = c.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) fn inverse_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let c = Cholesky::new(a.clone())?;
    if !well_conditioned(&c) {
        return None;
    }
    let mut inv = c.inverse();
    super::info::symmetrize(&mut inv);
    Some(inv)
}

fn well_conditioned(c: &Cholesky<f64, nalgebra::Dyn>) -> bool {
    let l = c.l_dirty();
    let d: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    min > 0.0 && max / min < 1e14
}
