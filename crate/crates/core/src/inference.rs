//! Bootstrap inference for the ratio-scale effects and the Monte Carlo
//! harness that estimates coverage and power over simulated datasets.

use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

use crate::effects::{EffectEstimate, EffectsError, EvalPoint, FittedModels, ModelSpec, Scale};
use crate::epidemic::{
    assign_vaccination, draw_contact_counts, simulate_epidemic, simulate_independent_groups, DiseaseParams,
    GroupSimulation, OutsideMode, ParamError, Trajectory, VaccinationAssignment,
};
use crate::extract::{build_group_records, build_records, GroupRecord, SummaryOptions};
use crate::glm::FitOptions;
use crate::netgraph::{extract_independent_pairs, generate_family_network, scaled_out_tie_prob, AlterEgoPair, NetError, Network};
use crate::par;
use crate::rng::{derive_seed, substream, tag};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("number of bootstrap replicates must be at least 1")]
    NoReplicates,
    #[error("full-data fit failed: {0}")]
    Estimation(#[from] EffectsError),
    #[error("none of the {0} bootstrap replicates produced a converged fit")]
    AllReplicatesFailed(usize),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario degenerate: {0}")]
    Degenerate(InferenceError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Network(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EffectTriple {
    pub contagion: f64,
    pub infectiousness: f64,
    pub indirect: f64,
}

impl EffectTriple {
    fn from_estimate(e: &EffectEstimate) -> Self {
        EffectTriple {
            contagion: e.contagion,
            infectiousness: e.infectiousness,
            indirect: e.indirect,
        }
    }

    pub fn get(&self, effect: Effect) -> f64 {
        match effect {
            Effect::Contagion => self.contagion,
            Effect::Infectiousness => self.infectiousness,
            Effect::Indirect => self.indirect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    Contagion,
    Infectiousness,
    Indirect,
}

impl Effect {
    pub fn name(self) -> &'static str {
        match self {
            Effect::Contagion => "contagion",
            Effect::Infectiousness => "infectiousness",
            Effect::Indirect => "indirect",
        }
    }
}

/// Settings shared by point estimation and the bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationOptions {
    pub spec: ModelSpec,
    pub eval: EvalPoint,
    pub fit: FitOptions,
    pub n_bootstrap: usize,
}

impl EstimationOptions {
    pub fn new(spec: ModelSpec, n_bootstrap: usize) -> Self {
        EstimationOptions {
            spec,
            eval: EvalPoint::AllRecords,
            fit: FitOptions::default(),
            n_bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Ratio-scale estimate on the full data.
    pub point: EffectEstimate,
    pub se: EffectTriple,
    pub ci_low: EffectTriple,
    pub ci_high: EffectTriple,
    pub n_requested: usize,
    pub n_converged: usize,
}

impl BootstrapResult {
    /// More than 10% of replicates failed to fit.
    pub fn flagged(&self) -> bool {
        (self.n_requested - self.n_converged) * 10 > self.n_requested
    }

    pub fn ci(&self, effect: Effect) -> (f64, f64) {
        (self.ci_low.get(effect), self.ci_high.get(effect))
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// at rank `p (n + 1)`, clamped to the sample range. `sorted` must be
/// ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = p * (n as f64 + 1.0);
    if rank <= 1.0 {
        return sorted[0];
    }
    if rank >= n as f64 {
        return sorted[n - 1];
    }
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Resamples groups with replacement, refits both models and summarises the
/// ratio-scale effects across converged replicates.
///
/// One seed is drawn from `rng`; replicate `j` then uses its own substream,
/// so the result does not depend on how replicates are scheduled.
pub fn bootstrap_effects<R: Rng + ?Sized>(
    records: &[GroupRecord],
    opts: &EstimationOptions,
    rng: &mut R,
) -> Result<BootstrapResult, InferenceError> {
    if opts.n_bootstrap == 0 {
        return Err(InferenceError::NoReplicates);
    }
    let full = FittedModels::fit(records, &opts.spec, opts.eval, &opts.fit)?;
    let point = full.estimate(Scale::Ratio);
    let base: u64 = rng.random();
    let k = records.len();

    let replicates: Vec<Option<EffectTriple>> = par::map_indices(opts.n_bootstrap, |j| {
        let mut r = substream(base, &[tag::BOOTSTRAP, j as u64]);
        let sample: Vec<GroupRecord> = (0..k).map(|_| records[r.random_range(0..k)]).collect();
        FittedModels::fit_from(&sample, &opts.spec, opts.eval, &opts.fit, Some(&full))
            .ok()
            .map(|m| EffectTriple::from_estimate(&m.estimate(Scale::Ratio)))
            .filter(|t| t.contagion.is_finite() && t.infectiousness.is_finite() && t.indirect.is_finite())
    });
    let ok: Vec<EffectTriple> = replicates.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(InferenceError::AllReplicatesFailed(opts.n_bootstrap));
    }

    let summarise = |get: fn(&EffectTriple) -> f64| {
        let mut v: Vec<f64> = ok.iter().map(get).collect();
        v.sort_by(f64::total_cmp);
        (sample_sd(&v), quantile(&v, 0.025), quantile(&v, 0.975))
    };
    let c = summarise(|t| t.contagion);
    let i = summarise(|t| t.infectiousness);
    let d = summarise(|t| t.indirect);
    Ok(BootstrapResult {
        point,
        se: EffectTriple {
            contagion: c.0,
            infectiousness: i.0,
            indirect: d.0,
        },
        ci_low: EffectTriple {
            contagion: c.1,
            infectiousness: i.1,
            indirect: d.1,
        },
        ci_high: EffectTriple {
            contagion: c.2,
            infectiousness: i.2,
            indirect: d.2,
        },
        n_requested: opts.n_bootstrap,
        n_converged: ok.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Reject,
    FailToReject,
}

/// Rejects the null of no effect when the ratio-scale interval excludes 1.
/// Endpoints are inclusive.
pub fn test_null(result: &BootstrapResult, effect: Effect) -> Decision {
    let (lo, hi) = result.ci(effect);
    if lo <= 1.0 && 1.0 <= hi {
        Decision::FailToReject
    } else {
        Decision::Reject
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Null,
    Alternative,
}

impl Hypothesis {
    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::Null => "null",
            Hypothesis::Alternative => "alternative",
        }
    }
}

/// How the analysis groups are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudyDesign {
    /// `num_groups` complete graphs of alter, ego and Poisson(`mean_contacts`)
    /// mutual contacts.
    Groups { num_groups: usize, mean_contacts: f64 },
    /// One family-cluster network; pairs extracted once and reused.
    Network {
        num_groups: usize,
        group_size: usize,
        out_tie_prob: f64,
    },
}

impl StudyDesign {
    /// Number of groups (group design) or network nodes.
    pub fn size(&self) -> usize {
        match *self {
            StudyDesign::Groups { num_groups, .. } => num_groups,
            StudyDesign::Network { num_groups, group_size, .. } => num_groups * group_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub label: String,
    pub design: StudyDesign,
    pub vacc_prob: f64,
    pub disease: DiseaseParams,
    pub hypothesis: Hypothesis,
    pub n_sims: usize,
    pub estimation: EstimationOptions,
    pub summaries: SummaryOptions,
    pub seed: u64,
}

/// Reading of the transmission probabilities for the independent-groups
/// alternative, whose source lists `p_v = 0.5, p_u = 0.05`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AltReading {
    /// `p_u = 0.05`, `p_v = 0.5`: vaccinated cases transmit more.
    Literal,
    /// `p_u = 0.5`, `p_v = 0.05`: vaccinated cases transmit less.
    Swapped,
}

fn flu(p_outside: f64, p_u: f64, p_v: f64, delta: f64, outside_mode: OutsideMode) -> DiseaseParams {
    DiseaseParams {
        p_outside,
        p_unvaccinated: p_u,
        p_vaccinated: p_v,
        delta,
        incubation: 1,
        infectious_period: 3,
        follow_up: 100,
        outside_mode,
    }
}

fn scaled(n: usize, factor: f64) -> usize {
    ((n as f64 * factor).ceil() as usize).max(1)
}

impl ScenarioConfig {
    /// Independent groups of alter, ego and Poisson(3) mutual contacts.
    pub fn independent_groups(num_groups: usize, hypothesis: Hypothesis, reading: AltReading) -> Self {
        let disease = match (hypothesis, reading) {
            (Hypothesis::Null, _) => flu(0.01, 0.4, 0.4, 1.0, OutsideMode::EveryDay),
            (Hypothesis::Alternative, AltReading::Swapped) => flu(0.01, 0.5, 0.05, 0.1, OutsideMode::EveryDay),
            (Hypothesis::Alternative, AltReading::Literal) => flu(0.01, 0.05, 0.5, 0.1, OutsideMode::EveryDay),
        };
        ScenarioConfig {
            label: format!("groups-{}", hypothesis.name()),
            design: StudyDesign::Groups {
                num_groups,
                mean_contacts: 3.0,
            },
            vacc_prob: 0.4,
            disease,
            hypothesis,
            n_sims: 500,
            estimation: EstimationOptions::new(ModelSpec::group(), 500),
            summaries: SummaryOptions::default(),
            seed: 20_240_601,
        }
    }

    /// Family-cluster network of `nodes` nodes in groups of five, with the
    /// out-of-group tie probability scaled from 0.0001 at 10000 nodes.
    pub fn family_network(nodes: usize, hypothesis: Hypothesis) -> Self {
        let group_size = 5;
        let disease = match hypothesis {
            Hypothesis::Null => flu(0.01, 0.5, 0.5, 1.0, OutsideMode::FirstDayOnly),
            Hypothesis::Alternative => flu(0.01, 0.5, 0.01, 0.2, OutsideMode::FirstDayOnly),
        };
        ScenarioConfig {
            label: format!("network-{}", hypothesis.name()),
            design: StudyDesign::Network {
                num_groups: nodes / group_size,
                group_size,
                out_tie_prob: scaled_out_tie_prob(0.0001, 10_000, nodes, group_size),
            },
            vacc_prob: 0.5,
            disease,
            hypothesis,
            n_sims: 200,
            estimation: EstimationOptions::new(ModelSpec::network(), 1000),
            summaries: SummaryOptions::default(),
            seed: 20_240_602,
        }
    }

    /// Shrinks the replicate and bootstrap counts by `factor` (rounded up).
    pub fn scaled(mut self, factor: f64) -> Self {
        self.n_sims = scaled(self.n_sims, factor);
        self.estimation.n_bootstrap = scaled(self.estimation.n_bootstrap, factor);
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.disease.validate()?;
        if !(0.0..=1.0).contains(&self.vacc_prob) {
            return Err(ParamError::Probability {
                name: "vacc_prob",
                value: self.vacc_prob,
            }
            .into());
        }
        if let StudyDesign::Network { out_tie_prob, .. } = self.design {
            if !(0.0..=1.0).contains(&out_tie_prob) {
                return Err(NetError::BadProbability(out_tie_prob).into());
            }
        }
        if let StudyDesign::Groups { mean_contacts, .. } = self.design {
            if !(mean_contacts > 0.0 && mean_contacts.is_finite()) {
                return Err(ParamError::PoissonMean(mean_contacts).into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    /// Independent groups at 200, 500 and 1000 groups.
    Groups,
    /// Family networks of 8000, 10000 and 12000 nodes.
    Network,
}

impl Table {
    pub fn sizes(self) -> [usize; 3] {
        match self {
            Table::Groups => [200, 500, 1000],
            Table::Network => [8000, 10_000, 12_000],
        }
    }
}

/// The cells of a results table, null then alternative for each size.
/// Cell `i` gets seed `derive_seed(seed, [i])`; `scale` shrinks the
/// replicate and bootstrap counts.
pub fn table_scenarios(table: Table, scale: f64, seed: u64) -> Vec<ScenarioConfig> {
    let mut cells = Vec::new();
    for size in table.sizes() {
        for hypothesis in [Hypothesis::Null, Hypothesis::Alternative] {
            let cfg = match table {
                Table::Groups => ScenarioConfig::independent_groups(size, hypothesis, AltReading::Swapped),
                Table::Network => ScenarioConfig::family_network(size, hypothesis),
            };
            let mut cfg = cfg.scaled(scale);
            cfg.seed = derive_seed(seed, &[cells.len() as u64]);
            cells.push(cfg);
        }
    }
    cells
}

/// The fixed network and its extracted pairs for a network scenario.
#[derive(Debug, Clone)]
pub struct NetworkFixture {
    pub network: Network,
    pub pairs: Vec<AlterEgoPair>,
}

/// Generates the network of a network scenario from its `NETWORK` substream.
pub fn generate_network(config: &ScenarioConfig) -> Result<Option<Network>, ScenarioError> {
    config.validate()?;
    match config.design {
        StudyDesign::Groups { .. } => Ok(None),
        StudyDesign::Network {
            num_groups,
            group_size,
            out_tie_prob,
        } => Ok(Some(generate_family_network(
            num_groups,
            group_size,
            out_tie_prob,
            &mut substream(config.seed, &[tag::NETWORK]),
        )?)),
    }
}

/// Extracts the pairs of `network` from the scenario's `EXTRACT` substream.
pub fn fixture_from_network(config: &ScenarioConfig, network: Network) -> NetworkFixture {
    let pairs = extract_independent_pairs(&network, &mut substream(config.seed, &[tag::EXTRACT]))
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    NetworkFixture { network, pairs }
}

/// Generates the network and extracts pairs (network design only).
pub fn prepare_fixture(config: &ScenarioConfig) -> Result<Option<NetworkFixture>, ScenarioError> {
    Ok(generate_network(config)?.map(|net| fixture_from_network(config, net)))
}

/// One simulated dataset before the analysis records are derived.
#[derive(Debug, Clone)]
pub enum SimulatedData {
    Groups(Vec<GroupSimulation>),
    Network {
        vaccination: VaccinationAssignment,
        trajectory: Trajectory,
    },
}

/// Simulates replicate `replicate` of a scenario. Network scenarios need
/// the fixture.
pub fn simulate_dataset(
    config: &ScenarioConfig,
    fixture: Option<&NetworkFixture>,
    replicate: usize,
) -> Result<SimulatedData, ScenarioError> {
    let r = replicate as u64;
    match (config.design, fixture) {
        (StudyDesign::Groups { num_groups, mean_contacts }, _) => {
            let contacts = draw_contact_counts(
                num_groups,
                mean_contacts,
                &mut substream(config.seed, &[r, tag::GROUP_SIZES]),
            )?;
            let sims = simulate_independent_groups(
                &contacts,
                config.vacc_prob,
                &config.disease,
                &mut substream(config.seed, &[r, tag::EPIDEMIC]),
            )?;
            Ok(SimulatedData::Groups(sims))
        }
        (StudyDesign::Network { .. }, Some(fx)) => {
            let vaccination = assign_vaccination(
                fx.network.node_count(),
                config.vacc_prob,
                &mut substream(config.seed, &[r, tag::VACCINATE]),
            )?;
            let trajectory = simulate_epidemic(
                &fx.network,
                &vaccination,
                &config.disease,
                &mut substream(config.seed, &[r, tag::EPIDEMIC]),
            )?;
            Ok(SimulatedData::Network { vaccination, trajectory })
        }
        (StudyDesign::Network { .. }, None) => {
            let fx = prepare_fixture(config)?.expect("network design yields a fixture");
            simulate_dataset(config, Some(&fx), replicate)
        }
    }
}

/// Analysis records of a simulated dataset.
pub fn dataset_records(config: &ScenarioConfig, fixture: Option<&NetworkFixture>, data: &SimulatedData) -> Vec<GroupRecord> {
    match (data, fixture) {
        (SimulatedData::Groups(sims), _) => build_group_records(sims, &config.disease, config.summaries),
        (SimulatedData::Network { vaccination, trajectory }, Some(fx)) => build_records(
            &fx.network,
            trajectory,
            vaccination,
            &fx.pairs,
            &config.disease,
            config.summaries,
        ),
        (SimulatedData::Network { .. }, None) => Vec::new(),
    }
}

/// Simulates one dataset and derives its analysis records.
pub fn simulate_records(
    config: &ScenarioConfig,
    fixture: Option<&NetworkFixture>,
    replicate: usize,
) -> Result<Vec<GroupRecord>, ScenarioError> {
    match (config.design, fixture) {
        (StudyDesign::Network { .. }, None) => {
            let fx = prepare_fixture(config)?.expect("network design yields a fixture");
            simulate_records(config, Some(&fx), replicate)
        }
        _ => {
            let data = simulate_dataset(config, fixture, replicate)?;
            Ok(dataset_records(config, fixture, &data))
        }
    }
}

/// Bootstrap generator used for replicate `replicate`.
pub fn bootstrap_rng(config: &ScenarioConfig, replicate: usize) -> crate::rng::SimRng {
    substream(config.seed, &[replicate as u64, tag::BOOTSTRAP])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub bootstrap: BootstrapResult,
    pub n_records: usize,
    pub n_mediator_positive: usize,
}

/// Simulate, build records and bootstrap, using a prepared fixture.
pub fn run_replicate(
    config: &ScenarioConfig,
    fixture: Option<&NetworkFixture>,
    replicate: usize,
) -> Result<ReplicateResult, ScenarioError> {
    let records = simulate_records(config, fixture, replicate)?;
    let mut rng = bootstrap_rng(config, replicate);
    let bootstrap = bootstrap_effects(&records, &config.estimation, &mut rng).map_err(ScenarioError::Degenerate)?;
    Ok(ReplicateResult {
        replicate,
        bootstrap,
        n_records: records.len(),
        n_mediator_positive: records.iter().filter(|r| r.y_a == 1).count(),
    })
}

/// One end-to-end replicate; deterministic in `(config.seed, replicate)`.
pub fn run_scenario_once(config: &ScenarioConfig, replicate: usize) -> Result<ReplicateResult, ScenarioError> {
    let fixture = prepare_fixture(config)?;
    run_replicate(config, fixture.as_ref(), replicate)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EffectSummary {
    pub mean_estimate: f64,
    pub mean_se: f64,
    /// Percent coverage of 1 under the null; power (100 minus coverage)
    /// under the alternative.
    pub coverage_or_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub size: usize,
    pub hypothesis: Hypothesis,
    pub infectiousness: EffectSummary,
    pub contagion: EffectSummary,
    pub n_used: usize,
    pub n_excluded: usize,
}

pub fn summarize(
    label: &str,
    size: usize,
    hypothesis: Hypothesis,
    results: &[Result<ReplicateResult, ScenarioError>],
) -> SummaryRow {
    let used: Vec<&ReplicateResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let n = used.len().max(1) as f64;
    let summary = |effect: Effect| {
        let covered = used
            .iter()
            .filter(|r| test_null(&r.bootstrap, effect) == Decision::FailToReject)
            .count() as f64;
        let coverage = 100.0 * covered / n;
        EffectSummary {
            mean_estimate: used
                .iter()
                .map(|r| EffectTriple::from_estimate(&r.bootstrap.point).get(effect))
                .sum::<f64>()
                / n,
            mean_se: used.iter().map(|r| r.bootstrap.se.get(effect)).sum::<f64>() / n,
            coverage_or_power: match hypothesis {
                Hypothesis::Null => coverage,
                Hypothesis::Alternative => 100.0 - coverage,
            },
        }
    };
    SummaryRow {
        label: label.to_string(),
        size,
        hypothesis,
        infectiousness: summary(Effect::Infectiousness),
        contagion: summary(Effect::Contagion),
        n_used: used.len(),
        n_excluded: results.len() - used.len(),
    }
}

/// All replicates of a scenario, in replicate order.
pub fn run_experiment(config: &ScenarioConfig) -> Result<Vec<Result<ReplicateResult, ScenarioError>>, ScenarioError> {
    let fixture = prepare_fixture(config)?;
    Ok(par::map_indices(config.n_sims, |r| run_replicate(config, fixture.as_ref(), r)))
}

pub fn monte_carlo_experiment(config: &ScenarioConfig) -> Result<SummaryRow, ScenarioError> {
    let results = run_experiment(config)?;
    Ok(summarize(&config.label, config.design.size(), config.hypothesis, &results))
}

pub const SUMMARY_HEADER: &str = "scenario,n_or_network_size,effect,mean_estimate,mean_se,coverage_or_power,n_used,n_excluded";

/// Two CSV lines per row (infectiousness, then contagion).
pub fn write_summary_csv<W: Write>(w: &mut W, rows: &[SummaryRow]) -> io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for row in rows {
        for (name, s) in [("infectiousness", &row.infectiousness), ("contagion", &row.contagion)] {
            writeln!(
                w,
                "{},{},{},{:.6},{:.6},{:.2},{},{}",
                row.label, row.size, name, s.mean_estimate, s.mean_se, s.coverage_or_power, row.n_used, row.n_excluded
            )?;
        }
    }
    Ok(())
}

/// Effect report: one CSV row per scale with the point estimates, followed
/// by the bootstrap summary of the ratio-scale effects.
pub fn write_effect_report<W: Write>(
    w: &mut W,
    models: &FittedModels,
    spec: &ModelSpec,
    boot: &BootstrapResult,
) -> io::Result<()> {
    let names: Vec<&str> = spec.covariates.iter().map(|f| f.name()).collect();
    writeln!(w, "scale,contagion,infectiousness,indirect,eval_point")?;
    for scale in [Scale::Difference, Scale::Ratio, Scale::OddsRatio] {
        let e = models.estimate(scale);
        let point: Vec<String> = names
            .iter()
            .zip(&e.eval_point)
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        writeln!(
            w,
            "{},{},{},{},{}",
            scale.name(),
            e.contagion,
            e.infectiousness,
            e.indirect,
            point.join(";")
        )?;
    }
    writeln!(w)?;
    writeln!(w, "effect,estimate,se,ci_low,ci_high,reject_null,n_requested,n_converged")?;
    for effect in [Effect::Contagion, Effect::Infectiousness, Effect::Indirect] {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            effect.name(),
            EffectTriple::from_estimate(&boot.point).get(effect),
            boot.se.get(effect),
            boot.ci_low.get(effect),
            boot.ci_high.get(effect),
            test_null(boot, effect) == Decision::Reject,
            boot.n_requested,
            boot.n_converged
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_rule() {
        let v = [1.0, 2.0, 3.0, 4.0];
        // rank 0.5 * 5 = 2.5 -> halfway between 2 and 3
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.01), 1.0);
        assert_eq!(quantile(&v, 0.99), 4.0);
        assert_eq!(quantile(&[7.0], 0.025), 7.0);
        assert_eq!(quantile(&[7.0], 0.975), 7.0);
    }

    fn result_with_ci(lo: f64, hi: f64) -> BootstrapResult {
        let t = |v| EffectTriple {
            contagion: v,
            infectiousness: v,
            indirect: v,
        };
        BootstrapResult {
            point: EffectEstimate {
                scale: Scale::Ratio,
                contagion: 1.0,
                infectiousness: 1.0,
                indirect: 1.0,
                eval_point: vec![],
            },
            se: t(0.1),
            ci_low: t(lo),
            ci_high: t(hi),
            n_requested: 10,
            n_converged: 10,
        }
    }

    #[test]
    fn null_test_examples() {
        assert_eq!(test_null(&result_with_ci(0.3, 0.8), Effect::Contagion), Decision::Reject);
        assert_eq!(test_null(&result_with_ci(0.8, 1.3), Effect::Contagion), Decision::FailToReject);
        assert_eq!(test_null(&result_with_ci(1.0, 1.4), Effect::Infectiousness), Decision::FailToReject);
    }

    #[test]
    fn flag_when_many_replicates_fail() {
        let mut r = result_with_ci(0.5, 1.5);
        assert!(!r.flagged());
        r.n_requested = 100;
        r.n_converged = 89;
        assert!(r.flagged());
        r.n_converged = 90;
        assert!(!r.flagged());
    }

    #[test]
    fn scaling_rounds_up() {
        let c = ScenarioConfig::independent_groups(200, Hypothesis::Null, AltReading::Swapped).scaled(0.001);
        assert_eq!(c.n_sims, 1);
        assert_eq!(c.estimation.n_bootstrap, 1);
    }

    #[test]
    fn summary_csv_layout() {
        let row = SummaryRow {
            label: "x".into(),
            size: 200,
            hypothesis: Hypothesis::Null,
            infectiousness: EffectSummary {
                mean_estimate: 1.0,
                mean_se: 0.1,
                coverage_or_power: 95.0,
            },
            contagion: EffectSummary::default(),
            n_used: 9,
            n_excluded: 1,
        };
        let mut out = Vec::new();
        write_summary_csv(&mut out, &[row]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert_eq!(lines[1], "x,200,infectiousness,1.000000,0.100000,95.00,9,1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn table_layout() {
        let cells = table_scenarios(Table::Groups, 0.1, 5);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].design.size(), 200);
        assert_eq!(cells[1].hypothesis, Hypothesis::Alternative);
        assert_eq!(cells[5].design.size(), 1000);
        assert_eq!(cells[0].n_sims, 50);
        assert_ne!(cells[0].seed, cells[1].seed);
        let net = table_scenarios(Table::Network, 1.0, 5);
        assert_eq!(net.iter().map(|c| c.design.size()).collect::<Vec<_>>(), [8000, 8000, 10_000, 10_000, 12_000, 12_000]);
    }
}
