//! Contagion, infectiousness and indirect effects from a logistic mediator
//! model and a log-linear outcome model fitted on the mediator-positive
//! stratum.
//!
//! With `m_v = P(Y_a = 1 | V_a = v, c)` and
//! `r_v = P(Y_e = 1 | V_a = v, Y_a = 1, c)`, the effects at covariate point
//! `c` are plug-ins of four model-implied means:
//!
//! | scale      | contagion                 | infectiousness            |
//! |------------|---------------------------|---------------------------|
//! | difference | `r_0 (m_1 - m_0)`         | `m_1 (r_1 - r_0)`         |
//! | ratio      | `m_1 / m_0`               | `r_1 / r_0 = exp(gamma_1)`|
//! | odds ratio | OR of `r_0 m_1` vs `r_0 m_0` | OR of `r_1 m_1` vs `r_0 m_1` |
//!
//! The indirect effect compares `r_1 m_1` with `r_0 m_0` and equals the sum
//! (difference) or product (ratio, odds ratio) of the two components.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::extract::{Field, GroupRecord};
use crate::glm::{expit, fit_glm_from, DesignMatrix, FitOptions, GlmError, GlmFit, Link};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EffectsError {
    #[error("no analysis records")]
    NoRecords,
    #[error("empty stratum: {0}")]
    EmptyStratum(String),
    #[error(transparent)]
    Glm(#[from] GlmError),
}

/// Regressors shared by the mediator and outcome models. `V_a` is always
/// the first regressor after the intercept and is not listed here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub covariates: Vec<Field>,
}

impl ModelSpec {
    /// Independent groups: ego vaccination and the sick mutual contacts.
    pub fn group() -> Self {
        ModelSpec {
            covariates: vec![Field::VE, Field::UA, Field::LA],
        }
    }

    /// Pairs sampled from a network: adds the ego-side contact counts.
    pub fn network() -> Self {
        ModelSpec {
            covariates: vec![Field::VE, Field::UA, Field::LA, Field::UE, Field::LE],
        }
    }

    /// Network model that also conditions on sick mutual contacts.
    pub fn network_with_mutual() -> Self {
        let mut spec = Self::network();
        spec.covariates.extend([Field::MU, Field::MV]);
        spec
    }

    pub fn n_params(&self) -> usize {
        2 + self.covariates.len()
    }

    pub fn row(&self, r: &GroupRecord) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n_params());
        row.push(1.0);
        row.push(f64::from(r.v_a));
        row.extend(self.covariates.iter().map(|&f| r.get(f)));
        row
    }

    pub fn design<'a>(&self, records: impl IntoIterator<Item = &'a GroupRecord>) -> Result<DesignMatrix, GlmError> {
        let mut values = Vec::new();
        let mut n = 0;
        for r in records {
            values.extend(self.row(r));
            n += 1;
        }
        DesignMatrix::from_row_major(n, self.n_params(), values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Difference,
    Ratio,
    OddsRatio,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Difference => "difference",
            Scale::Ratio => "ratio",
            Scale::OddsRatio => "odds-ratio",
        }
    }

    pub fn null_value(self) -> f64 {
        match self {
            Scale::Difference => 0.0,
            Scale::Ratio | Scale::OddsRatio => 1.0,
        }
    }
}

/// Which records supply the covariate means used as the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPoint {
    #[default]
    AllRecords,
    MediatorPositive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    pub scale: Scale,
    pub contagion: f64,
    pub infectiousness: f64,
    pub indirect: f64,
    pub eval_point: Vec<f64>,
}

pub fn fit_mediator_model(
    records: &[GroupRecord],
    spec: &ModelSpec,
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<GlmFit, EffectsError> {
    if records.is_empty() {
        return Err(EffectsError::NoRecords);
    }
    if !varies(records.iter().map(|r| r.v_a)) {
        return Err(EffectsError::EmptyStratum(
            "V_a takes a single value".into(),
        ));
    }
    let x = spec.design(records)?;
    let y: Vec<f64> = records.iter().map(|r| f64::from(r.y_a)).collect();
    Ok(fit_glm_from(&x, &y, Link::Logit, opts, start)?)
}

/// Log-link fit of `Y_eTs` on the records with `Y_aT = 1`.
pub fn fit_outcome_model(
    records: &[GroupRecord],
    spec: &ModelSpec,
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<GlmFit, EffectsError> {
    let subset: Vec<&GroupRecord> = records.iter().filter(|r| r.y_a == 1).collect();
    if subset.is_empty() {
        return Err(EffectsError::EmptyStratum("no records with Y_aT = 1".into()));
    }
    if !varies(subset.iter().map(|r| r.v_a)) {
        return Err(EffectsError::EmptyStratum(
            "V_a takes a single value among Y_aT = 1".into(),
        ));
    }
    if subset.iter().all(|r| r.y_e == 0) {
        return Err(EffectsError::EmptyStratum(
            "no events of Y_eTs among Y_aT = 1".into(),
        ));
    }
    let x = spec.design(subset.iter().copied())?;
    let y: Vec<f64> = subset.iter().map(|r| f64::from(r.y_e)).collect();
    Ok(fit_glm_from(&x, &y, Link::Log, opts, start)?)
}

fn varies(mut values: impl Iterator<Item = u8>) -> bool {
    match values.next() {
        None => false,
        Some(first) => values.any(|v| v != first),
    }
}

/// Componentwise mean of the spec covariates (`V_a` excluded).
pub fn covariate_evaluation_point(records: &[GroupRecord], spec: &ModelSpec, which: EvalPoint) -> Vec<f64> {
    let pool: Vec<&GroupRecord> = match which {
        EvalPoint::AllRecords => records.iter().collect(),
        EvalPoint::MediatorPositive => records.iter().filter(|r| r.y_a == 1).collect(),
    };
    let n = pool.len().max(1) as f64;
    spec.covariates
        .iter()
        .map(|&f| pool.iter().map(|r| r.get(f)).sum::<f64>() / n)
        .collect()
}

/// The four model-implied means at one covariate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedMeans {
    /// `P(Y_a = 1 | V_a = 0, c)`
    pub m0: f64,
    /// `P(Y_a = 1 | V_a = 1, c)`
    pub m1: f64,
    /// `P(Y_e = 1 | V_a = 0, Y_a = 1, c)`
    pub r0: f64,
    /// `P(Y_e = 1 | V_a = 1, Y_a = 1, c)`
    pub r1: f64,
}

impl ImpliedMeans {
    pub fn at(mediator: &GlmFit, outcome: &GlmFit, c: &[f64]) -> Self {
        let lin = |fit: &GlmFit, v: f64| {
            let b = &fit.coefficients;
            b[0] + b[1] * v + b[2..].iter().zip(c).map(|(x, y)| x * y).sum::<f64>()
        };
        ImpliedMeans {
            m0: expit(lin(mediator, 0.0)),
            m1: expit(lin(mediator, 1.0)),
            r0: lin(outcome, 0.0).exp(),
            r1: lin(outcome, 1.0).exp(),
        }
    }
}

fn odds_ratio(p: f64, q: f64) -> f64 {
    p * (1.0 - q) / (q * (1.0 - p))
}

pub fn contagion_effect(mediator: &GlmFit, outcome: &GlmFit, c: &[f64], scale: Scale) -> f64 {
    let m = ImpliedMeans::at(mediator, outcome, c);
    match scale {
        Scale::Difference => m.r0 * (m.m1 - m.m0),
        Scale::Ratio if m.r0 == 0.0 => 1.0,
        Scale::Ratio => m.m1 / m.m0,
        Scale::OddsRatio if m.r0 == 0.0 => 1.0,
        Scale::OddsRatio => odds_ratio(m.r0 * m.m1, m.r0 * m.m0),
    }
}

pub fn infectiousness_effect(mediator: &GlmFit, outcome: &GlmFit, c: &[f64], scale: Scale) -> f64 {
    let m = ImpliedMeans::at(mediator, outcome, c);
    match scale {
        Scale::Difference => m.m1 * (m.r1 - m.r0),
        Scale::Ratio => outcome.coefficients[1].exp(),
        Scale::OddsRatio => odds_ratio(m.r1 * m.m1, m.r0 * m.m1),
    }
}

/// Indirect effect computed directly from `r_1 m_1` and `r_0 m_0`.
pub fn indirect_effect(mediator: &GlmFit, outcome: &GlmFit, c: &[f64], scale: Scale) -> f64 {
    let m = ImpliedMeans::at(mediator, outcome, c);
    let treated = m.r1 * m.m1;
    let untreated = m.r0 * m.m0;
    match scale {
        Scale::Difference => treated - untreated,
        Scale::Ratio if m.r0 == 0.0 => m.r1 / m.r0.max(f64::MIN_POSITIVE),
        Scale::Ratio => treated / untreated,
        Scale::OddsRatio => odds_ratio(treated, untreated),
    }
}

/// Contagion ratio written directly in the mediator-model coefficients:
/// `(e^{eta1} + e^{eta0 + eta1 + lc}) / (1 + e^{eta0 + eta1 + lc})`, with
/// `lc` the covariate part of the linear predictor.
pub fn contagion_ratio_closed_form(eta0: f64, eta1: f64, covariate_part: f64) -> f64 {
    let e = (eta0 + eta1 + covariate_part).exp();
    (eta1.exp() + e) / (1.0 + e)
}

pub fn effect_estimate(mediator: &GlmFit, outcome: &GlmFit, c: &[f64], scale: Scale) -> EffectEstimate {
    EffectEstimate {
        scale,
        contagion: contagion_effect(mediator, outcome, c, scale),
        infectiousness: infectiousness_effect(mediator, outcome, c, scale),
        indirect: indirect_effect(mediator, outcome, c, scale),
        eval_point: c.to_vec(),
    }
}

/// Both fits plus the evaluation point for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModels {
    pub mediator: GlmFit,
    pub outcome: GlmFit,
    pub eval_point: Vec<f64>,
}

impl FittedModels {
    pub fn fit(
        records: &[GroupRecord],
        spec: &ModelSpec,
        eval: EvalPoint,
        opts: &FitOptions,
    ) -> Result<Self, EffectsError> {
        Self::fit_from(records, spec, eval, opts, None)
    }

    /// Fit, optionally warm-starting both models from `start`.
    pub fn fit_from(
        records: &[GroupRecord],
        spec: &ModelSpec,
        eval: EvalPoint,
        opts: &FitOptions,
        start: Option<&FittedModels>,
    ) -> Result<Self, EffectsError> {
        let mediator = fit_mediator_model(records, spec, opts, start.map(|s| s.mediator.coefficients.as_slice()))?;
        let outcome = fit_outcome_model(records, spec, opts, start.map(|s| s.outcome.coefficients.as_slice()))?;
        Ok(FittedModels {
            mediator,
            outcome,
            eval_point: covariate_evaluation_point(records, spec, eval),
        })
    }

    pub fn estimate(&self, scale: Scale) -> EffectEstimate {
        effect_estimate(&self.mediator, &self.outcome, &self.eval_point, scale)
    }
}

/// Running first and second moments of residual cross-products.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CrossMoment {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl CrossMoment {
    pub fn push(&mut self, product: f64) {
        self.n += 1;
        self.sum += product;
        self.sum_sq += product * product;
    }

    pub fn merge(&mut self, other: &CrossMoment) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Monte Carlo standard error of [`CrossMoment::mean`].
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }

    /// Mean in units of its standard error (0 when both are 0).
    pub fn z(&self) -> f64 {
        let se = self.std_error();
        if se == 0.0 {
            0.0
        } else {
            self.mean() / se
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResidualDiagnostic {
    pub mediator: CrossMoment,
    pub outcome: CrossMoment,
}

impl ResidualDiagnostic {
    pub fn merge(&mut self, other: &ResidualDiagnostic) {
        self.mediator.merge(&other.mediator);
        self.outcome.merge(&other.outcome);
    }
}

/// Accumulates `Res_k * Res_h` over randomly matched disjoint pairs of
/// records. Mediator residuals use every record; outcome residuals use the
/// `Y_aT = 1` records the outcome model describes.
pub fn residual_products(residuals: &[f64], rng: &mut (impl Rng + ?Sized)) -> CrossMoment {
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.shuffle(rng);
    let mut m = CrossMoment::default();
    for chunk in order.chunks_exact(2) {
        m.push(residuals[chunk[0]] * residuals[chunk[1]]);
    }
    m
}

pub fn residual_cross_correlation<R: Rng + ?Sized>(
    records: &[GroupRecord],
    spec: &ModelSpec,
    mediator: &GlmFit,
    outcome: &GlmFit,
    rng: &mut R,
) -> Result<ResidualDiagnostic, EffectsError> {
    let x = spec.design(records)?;
    let y: Vec<f64> = records.iter().map(|r| f64::from(r.y_a)).collect();
    let med = crate::glm::residuals(mediator, &x, &y);

    let subset: Vec<&GroupRecord> = records.iter().filter(|r| r.y_a == 1).collect();
    let xs = spec.design(subset.iter().copied())?;
    let ys: Vec<f64> = subset.iter().map(|r| f64::from(r.y_e)).collect();
    let out = crate::glm::residuals(outcome, &xs, &ys);

    Ok(ResidualDiagnostic {
        mediator: residual_products(&med, rng),
        outcome: residual_products(&out, rng),
    })
}
