//! Binary-response GLMs with logit and log links, fitted by iteratively
//! reweighted least squares (Fisher scoring) with step-halving.
//!
//! Each iteration solves the weighted least-squares normal equations with a
//! Cholesky factorisation. A step is halved, up to `max_halvings` times, while
//! it lowers the log-likelihood or (log link) pushes a fitted mean to 1 or
//! above. Convergence is declared on relative deviance change.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Logit,
    Log,
}

impl Link {
    #[inline]
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Logit => expit(eta),
            Link::Log => eta.exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Log => "log",
        }
    }
}

#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-major design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DesignMatrix {
    /// Builds a design from covariate rows, prepending the intercept column.
    pub fn with_intercept<I, R>(rows: I) -> Result<Self, GlmError>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut values = Vec::new();
        let mut n = 0;
        let mut cols = None;
        for row in rows {
            let row = row.as_ref();
            match cols {
                None => cols = Some(row.len() + 1),
                Some(c) if c != row.len() + 1 => {
                    return Err(GlmError::InvalidInput(format!(
                        "row {n} has {} covariates, expected {}",
                        row.len(),
                        c - 1
                    )))
                }
                _ => {}
            }
            values.push(1.0);
            values.extend_from_slice(row);
            n += 1;
        }
        Self::from_row_major(n, cols.unwrap_or(1), values)
    }

    /// Wraps row-major values as-is; the caller supplies the intercept column.
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, GlmError> {
        if values.len() != rows * cols {
            return Err(GlmError::InvalidInput(format!(
                "{} values for a {rows}x{cols} design",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GlmError::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(DesignMatrix { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    fn linear_predictor(&self, beta: &[f64], out: &mut [f64]) {
        for (i, eta) in out.iter_mut().enumerate() {
            *eta = dot(self.row(i), beta);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative deviance change that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Fitted means closer than this to 0 (or, for the logit link, to 1)
    /// mean the coefficients are diverging.
    pub boundary_eps: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            max_halvings: 10,
            boundary_eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub link: Link,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    /// Log link only: some event rows have fitted mean 1 at the optimum.
    pub at_boundary: bool,
    pub iterations: usize,
    pub deviance: f64,
    /// Inverse Fisher information at the estimate, row-major p x p.
    pub covariance: Vec<f64>,
}

impl GlmFit {
    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    /// Model-based standard error of coefficient `j`.
    pub fn std_error(&self, j: usize) -> f64 {
        self.covariance[j * self.n_params() + j].sqrt()
    }

    /// `key=value` lines with coefficients, deviance and iteration count.
    pub fn report(&self) -> String {
        let mut s = format!(
            "link={}\nconverged={}\nat_boundary={}\niterations={}\ndeviance={}\n",
            self.link.name(),
            self.converged,
            self.at_boundary,
            self.iterations,
            self.deviance
        );
        for (j, b) in self.coefficients.iter().enumerate() {
            s.push_str(&format!("beta{j}={b}\nse{j}={}\n", self.std_error(j)));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonConvergenceReason {
    MaxIterations,
    StepHalvingExhausted,
    /// The likelihood is maximised on the edge of the parameter space
    /// (fitted means of 0 or 1), typically an empty stratum.
    Boundary,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GlmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("fit did not converge ({reason:?}) after {} iterations, deviance {}", partial.iterations, partial.deviance)]
    NonConvergence {
        reason: NonConvergenceReason,
        partial: Box<GlmFit>,
    },
    #[error("weighted information matrix is singular")]
    SingularInformation,
}

/// Bernoulli log-likelihood at `beta`; `-inf` when a mean leaves (0, 1].
pub fn log_likelihood(x: &DesignMatrix, y: &[f64], link: Link, beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..x.rows() {
        let eta = dot(x.row(i), beta);
        ll += row_log_likelihood(link, eta, y[i]);
    }
    ll
}

#[inline]
fn row_log_likelihood(link: Link, eta: f64, y: f64) -> f64 {
    match link {
        // log(1 + e^eta) computed stably
        Link::Logit => {
            let softplus = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            y * eta - softplus
        }
        Link::Log => {
            if eta >= 0.0 {
                if y == 1.0 && eta == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                y * eta + (1.0 - y) * (-eta.exp_m1()).ln()
            }
        }
    }
}

/// Gradient of [`log_likelihood`] with respect to `beta`.
pub fn score(x: &DesignMatrix, y: &[f64], link: Link, beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        let row = x.row(i);
        let eta = dot(row, beta);
        let mu = link.inverse(eta);
        let r = match link {
            Link::Logit => y[i] - mu,
            Link::Log => (y[i] - mu) / (1.0 - mu),
        };
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
    }
    g
}

fn check_inputs(x: &DesignMatrix, y: &[f64]) -> Result<(), GlmError> {
    if y.len() != x.rows() {
        return Err(GlmError::InvalidInput(format!(
            "{} responses for {} rows",
            y.len(),
            x.rows()
        )));
    }
    if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(GlmError::InvalidInput(format!("response {i} is not 0/1")));
    }
    if x.rows() < x.cols() {
        return Err(GlmError::InvalidInput(format!(
            "{} rows cannot identify {} parameters",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

/// Intercept-only starting point, feasible for both links.
fn default_start(y: &[f64], p: usize, link: Link) -> Vec<f64> {
    let n = y.len() as f64;
    let mean = (y.iter().sum::<f64>() + 0.5) / (n + 1.0);
    let mut beta = vec![0.0; p];
    beta[0] = match link {
        Link::Logit => (mean / (1.0 - mean)).ln(),
        Link::Log => mean.ln(),
    };
    beta
}

/// Barrier weights for log-link fits, whose optimum may put some fitted means
/// at exactly 1. The final weight moves the coefficients by far less than the
/// convergence tolerance.
const BARRIER_SCHEDULE: [f64; 6] = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12];

/// Event rows with a linear predictor above `-BOUNDARY_ETA` sit on the
/// boundary of the log-link parameter space.
const BOUNDARY_ETA: f64 = 1e-6;

/// Smallest distance from the boundary, on the linear-predictor scale, at
/// which a log-link warm start is used as given.
const START_MARGIN: f64 = 1e-2;

/// Log-likelihood plus `tau * sum log(-eta)` over event rows (log link).
fn objective(x: &DesignMatrix, y: &[f64], link: Link, beta: &[f64], tau: f64) -> f64 {
    let mut v = 0.0;
    for i in 0..x.rows() {
        let eta = dot(x.row(i), beta);
        v += row_log_likelihood(link, eta, y[i]);
        if tau > 0.0 && y[i] == 1.0 {
            if eta >= 0.0 {
                return f64::NEG_INFINITY;
            }
            v += tau * (-eta).ln();
        }
    }
    v
}

/// Negative Hessian and gradient of [`objective`] at the linear predictor
/// `eta`. For the logit link this is the Fisher information and score.
fn newton_system(x: &DesignMatrix, y: &[f64], link: Link, eta: &[f64], tau: f64) -> (DMatrix<f64>, DVector<f64>) {
    let p = x.cols();
    let mut info = DMatrix::<f64>::zeros(p, p);
    let mut grad = DVector::<f64>::zeros(p);
    for i in 0..x.rows() {
        let row = x.row(i);
        let e = eta[i];
        let (w, g) = match link {
            Link::Logit => {
                let mu = expit(e);
                (mu * (1.0 - mu), y[i] - mu)
            }
            Link::Log if y[i] == 1.0 => {
                if tau > 0.0 {
                    (tau / (e * e), 1.0 + tau / e)
                } else {
                    (0.0, 1.0)
                }
            }
            Link::Log => {
                let odds = -1.0 / e.exp_m1() - 1.0; // mu / (1 - mu)
                (odds * (1.0 + odds), -odds)
            }
        };
        if !(w.is_finite() && g.is_finite()) {
            continue;
        }
        for a in 0..p {
            grad[a] += g * row[a];
            let wa = w * row[a];
            for b in 0..=a {
                info[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    (info, grad)
}

/// Fisher information `X' W X` with the link's working weights.
fn fisher_information(x: &DesignMatrix, link: Link, beta: &[f64]) -> DMatrix<f64> {
    let p = x.cols();
    let mut info = DMatrix::<f64>::zeros(p, p);
    for i in 0..x.rows() {
        let row = x.row(i);
        let mu = link.inverse(dot(row, beta));
        let w = match link {
            Link::Logit => mu * (1.0 - mu),
            Link::Log => mu / (1.0 - mu),
        };
        if !w.is_finite() {
            continue;
        }
        for a in 0..p {
            for b in 0..p {
                info[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    info
}

/// Cholesky factor; with `relative`, pivots tiny next to the largest
/// diagonal entry also count as singular.
fn cholesky(m: DMatrix<f64>, relative: bool) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>, GlmError> {
    let p = m.nrows();
    let max_diag = (0..p).map(|j| m[(j, j)]).fold(0.0f64, f64::max);
    let chol = m.cholesky().ok_or(GlmError::SingularInformation)?;
    let l = chol.l_dirty();
    let min_pivot = (0..p).map(|j| l[(j, j)] * l[(j, j)]).fold(f64::INFINITY, f64::min);
    if !(max_diag > 0.0) || !(min_pivot > 0.0) || (relative && min_pivot <= 1e-12 * max_diag) {
        return Err(GlmError::SingularInformation);
    }
    Ok(chol)
}

pub fn fit_glm(x: &DesignMatrix, y: &[f64], link: Link, opts: &FitOptions) -> Result<GlmFit, GlmError> {
    fit_glm_from(x, y, link, opts, None)
}

enum StageEnd {
    Converged,
    OutOfIterations,
    Stuck(NonConvergenceReason),
}

/// Newton ascent on [`objective`] at a fixed barrier weight.
fn newton_stage(
    x: &DesignMatrix,
    y: &[f64],
    link: Link,
    opts: &FitOptions,
    tau: f64,
    beta: &mut [f64],
    iterations: &mut usize,
) -> StageEnd {
    let p = x.cols();
    let mut eta = vec![0.0; x.rows()];
    let mut trial = vec![0.0; p];
    let mut value = objective(x, y, link, beta, tau);
    let mut settled = false;
    while *iterations < opts.max_iter {
        *iterations += 1;
        x.linear_predictor(beta, &mut eta);
        let (info, grad) = newton_system(x, y, link, &eta, tau);
        let direction = match cholesky(info, tau == 0.0) {
            Ok(c) => c.solve(&grad),
            Err(_) => return StageEnd::Stuck(NonConvergenceReason::Boundary),
        };
        // Newton decrement: the predicted gain of a full step, doubled.
        let decrement = grad.dot(&direction);
        if settled || decrement / 2.0 < opts.tol * (value.abs() + 0.1) * 1e-2 {
            // quadratic convergence: one last full step lands on the optimum
            for j in 0..p {
                trial[j] = beta[j] + direction[j];
            }
            let v = objective(x, y, link, &trial, tau);
            if v.is_finite() && v >= value - 1e-12 * (1.0 + value.abs()) {
                beta.copy_from_slice(&trial);
            }
            return StageEnd::Converged;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            for j in 0..p {
                trial[j] = beta[j] + step * direction[j];
            }
            let v = objective(x, y, link, &trial, tau);
            if v.is_finite() && v >= value - 1e-12 * (1.0 + value.abs()) {
                accepted = Some(v);
                break;
            }
            step *= 0.5;
        }
        let Some(v) = accepted else {
            // No representable ascent left along the Newton direction. If the
            // predicted gain is already inside the deviance tolerance the
            // iterate is as good as converged.
            if decrement / 2.0 < opts.tol * (value.abs() + 0.1) {
                return StageEnd::Converged;
            }
            return StageEnd::Stuck(NonConvergenceReason::StepHalvingExhausted);
        };
        beta.copy_from_slice(&trial);
        let change = (v - value).abs() / (value.abs() + 0.1);
        value = v;
        settled = change < opts.tol && step == 1.0;
    }
    StageEnd::OutOfIterations
}

/// Fits from `start` when given and feasible, else from the intercept-only
/// point.
///
/// Log-link fits follow a log-barrier path so that optima with some fitted
/// means equal to 1 are reached without the weights blowing up. When the
/// solution turns out to be interior, a final unpenalised Newton pass makes it
/// exact.
pub fn fit_glm_from(
    x: &DesignMatrix,
    y: &[f64],
    link: Link,
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<GlmFit, GlmError> {
    check_inputs(x, y)?;
    let n = x.rows();
    let p = x.cols();

    // Every response is an event: the log-link likelihood attains its
    // maximum of 0 at beta = 0 (all means exactly 1).
    if link == Link::Log && y.iter().all(|&v| v == 1.0) {
        return Ok(GlmFit {
            link,
            coefficients: vec![0.0; p],
            converged: true,
            at_boundary: true,
            iterations: 0,
            deviance: 0.0,
            covariance: vec![f64::NAN; p * p],
        });
    }

    let mut beta = default_start(y, p, link);
    cholesky(fisher_information(x, link, &beta), true)?;
    if let Some(s) = start.filter(|s| s.len() == p) {
        let mut s = s.to_vec();
        if link == Link::Log {
            // A warm start taken from a boundary optimum would begin the
            // barrier path with unbounded curvature. Lowering the intercept
            // moves every mean off 1 by the same factor.
            let top = (0..n).map(|i| dot(x.row(i), &s)).fold(f64::NEG_INFINITY, f64::max);
            if top > -START_MARGIN {
                s[0] -= top + START_MARGIN;
            }
        }
        if log_likelihood(x, y, link, &s).is_finite() {
            beta = s;
        }
    }

    let mut iterations = 0;
    let mut end = StageEnd::Converged;
    let schedule: &[f64] = match link {
        Link::Logit => &[0.0],
        Link::Log => &BARRIER_SCHEDULE,
    };
    for &tau in schedule {
        end = newton_stage(x, y, link, opts, tau, &mut beta, &mut iterations);
        if !matches!(end, StageEnd::Converged) {
            break;
        }
    }

    let mut eta = vec![0.0; n];
    x.linear_predictor(&beta, &mut eta);
    let near_one = |eta: &[f64]| (0..n).any(|i| y[i] == 1.0 && eta[i] > -BOUNDARY_ETA);
    let mut at_boundary = link == Link::Log && near_one(&eta);
    if link == Link::Log && matches!(end, StageEnd::Converged) && !at_boundary {
        let mut polished = beta.clone();
        let mut extra = 0;
        if let StageEnd::Converged = newton_stage(x, y, link, opts, 0.0, &mut polished, &mut extra) {
            x.linear_predictor(&polished, &mut eta);
            if !near_one(&eta) {
                beta = polished;
            }
        }
        x.linear_predictor(&beta, &mut eta);
        at_boundary = near_one(&eta);
    }

    let final_tau = if at_boundary { BARRIER_SCHEDULE[BARRIER_SCHEDULE.len() - 1] } else { 0.0 };
    let covariance = match cholesky(newton_system(x, y, link, &eta, final_tau).0, !at_boundary) {
        Ok(c) => {
            let inv = c.inverse();
            (0..p * p).map(|k| inv[(k / p, k % p)]).collect()
        }
        Err(_) => vec![f64::NAN; p * p],
    };
    let mut fit = GlmFit {
        link,
        converged: matches!(end, StageEnd::Converged),
        at_boundary,
        iterations,
        deviance: -2.0 * log_likelihood(x, y, link, &beta),
        coefficients: beta,
        covariance,
    };

    let failure = match end {
        StageEnd::Converged => {
            // A mean of 1 is a legitimate log-link optimum; means running to
            // 0 (or to 1 under the logit link) signal diverging coefficients.
            let diverging = eta.iter().any(|&e| {
                let mu = link.inverse(e);
                mu < opts.boundary_eps || (link == Link::Logit && mu > 1.0 - opts.boundary_eps)
            });
            diverging.then_some(NonConvergenceReason::Boundary)
        }
        StageEnd::OutOfIterations => Some(NonConvergenceReason::MaxIterations),
        StageEnd::Stuck(reason) => Some(reason),
    };
    match failure {
        None => Ok(fit),
        Some(reason) => {
            fit.converged = false;
            Err(GlmError::NonConvergence {
                reason,
                partial: Box::new(fit),
            })
        }
    }
}

/// `g^{-1}(x . beta)` for a full design row (intercept included).
pub fn predict_mean(fit: &GlmFit, x: &[f64]) -> f64 {
    fit.link.inverse(dot(x, &fit.coefficients))
}

/// Response residuals `y - mu_hat`.
pub fn residuals(fit: &GlmFit, x: &DesignMatrix, y: &[f64]) -> Vec<f64> {
    (0..x.rows())
        .map(|i| y[i] - predict_mean(fit, x.row(i)))
        .collect()
}
