//! Acceptance suite. Runs every criterion at full size and prints one
//! PASS/FAIL line each; exits non-zero if any fails.
//!
//! `cargo test --release --test acceptance` runs everything (about twenty
//! minutes on one core). Criterion numbers given as arguments select a
//! subset: `cargo test --release --test acceptance -- 5 7 8`.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use vaxnet::effects::{residual_cross_correlation, EvalPoint, FittedModels, ModelSpec, ResidualDiagnostic, Scale};
use vaxnet::extract::Field;
use vaxnet::glm::{fit_glm, log_likelihood, score, DesignMatrix, FitOptions, GlmError, Link};
use vaxnet::inference::{
    monte_carlo_experiment, prepare_fixture, simulate_records, AltReading, Hypothesis, ScenarioConfig, SummaryRow,
};
use vaxnet::netgraph::{
    check_zone_independence, extract_independent_pairs, generate_family_network, pairs_at_distance, AlterEgoPair,
    Network,
};
use vaxnet::rng::substream;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn in_band(value: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&value)
}

fn row_text(r: &SummaryRow) -> String {
    format!(
        "inf {:.3} (se {:.3}, {:.1}%), con {:.3} (se {:.3}, {:.1}%), used {}/{}",
        r.infectiousness.mean_estimate,
        r.infectiousness.mean_se,
        r.infectiousness.coverage_or_power,
        r.contagion.mean_estimate,
        r.contagion.mean_se,
        r.contagion.coverage_or_power,
        r.n_used,
        r.n_used + r.n_excluded
    )
}

fn groups_null() -> Outcome {
    let cfg = ScenarioConfig::independent_groups(500, Hypothesis::Null, AltReading::Swapped);
    let r = monte_carlo_experiment(&cfg).unwrap();
    let checks = [
        within(r.infectiousness.mean_estimate, 1.0, 0.03),
        within(r.contagion.mean_estimate, 1.0, 0.05),
        within(r.infectiousness.coverage_or_power, 92.2, 4.0),
        within(r.contagion.coverage_or_power, 93.6, 4.0),
    ];
    Outcome {
        pass: checks.iter().all(|&c| c),
        detail: format!("K=500: {} [want inf 1±0.03, con 1±0.05, coverage 92.2±4 / 93.6±4]", row_text(&r)),
    }
}

fn groups_alternative() -> Outcome {
    let big = monte_carlo_experiment(&ScenarioConfig::independent_groups(1000, Hypothesis::Alternative, AltReading::Swapped))
        .unwrap();
    let small = monte_carlo_experiment(&ScenarioConfig::independent_groups(200, Hypothesis::Alternative, AltReading::Swapped))
        .unwrap();
    let checks = [
        within(big.infectiousness.mean_estimate, 0.445, 0.05),
        within(big.contagion.mean_estimate, 0.258, 0.03),
        big.infectiousness.coverage_or_power >= 95.0,
        big.contagion.coverage_or_power >= 95.0,
        in_band(small.infectiousness.coverage_or_power, 40.0, 60.0),
    ];
    Outcome {
        pass: checks.iter().all(|&c| c),
        detail: format!(
            "K=1000: {}; K=200 inf power {:.1}% [want inf 0.445±0.05, con 0.258±0.03, power >= 95%, K=200 inf power 40-60%]",
            row_text(&big),
            small.infectiousness.coverage_or_power
        ),
    }
}

fn network_null() -> Outcome {
    let mut cfg = ScenarioConfig::family_network(8000, Hypothesis::Null);
    cfg.estimation.n_bootstrap = 200;
    let k = prepare_fixture(&cfg).unwrap().map_or(0, |f| f.pairs.len());
    let r = monte_carlo_experiment(&cfg).unwrap();
    let checks = [
        within(r.infectiousness.mean_estimate, 1.0, 0.02),
        r.contagion.coverage_or_power >= 92.0,
        r.infectiousness.coverage_or_power >= 98.0,
        in_band(k as f64, 350.0, 600.0),
    ];
    Outcome {
        pass: checks.iter().all(|&c| c),
        detail: format!(
            "8000 nodes, K={k}: {} [want inf 1±0.02, con coverage >= 92%, inf coverage >= 98%, K in 350-600]",
            row_text(&r)
        ),
    }
}

fn network_alternative() -> Outcome {
    let cfg = ScenarioConfig::family_network(12_000, Hypothesis::Alternative);
    let k = prepare_fixture(&cfg).unwrap().map_or(0, |f| f.pairs.len());
    let r = monte_carlo_experiment(&cfg).unwrap();
    let checks = [
        within(r.infectiousness.mean_estimate, 0.609, 0.06),
        within(r.contagion.mean_estimate, 0.164, 0.02),
        r.contagion.coverage_or_power >= 98.0,
        in_band(r.infectiousness.coverage_or_power, 50.0, 75.0),
    ];
    Outcome {
        pass: checks.iter().all(|&c| c),
        detail: format!(
            "12000 nodes, K={k}: {}, excluded {} [want inf 0.609±0.06, con 0.164±0.02, con power >= 98%, inf power 50-75%]",
            row_text(&r),
            r.n_excluded
        ),
    }
}

fn decomposition_identity() -> Outcome {
    let mut rng = substream(501, &[]);
    let (mut fits, mut tried) = (0, 0);
    let (mut worst_ratio, mut worst_diff) = (0.0f64, 0.0f64);
    while fits < 1000 {
        tried += 1;
        let hypothesis = if rng.random_bool(0.5) { Hypothesis::Null } else { Hypothesis::Alternative };
        let mut cfg = ScenarioConfig::independent_groups(rng.random_range(150..600), hypothesis, AltReading::Swapped);
        cfg.disease.p_unvaccinated = rng.random_range(0.2..0.6);
        cfg.disease.p_vaccinated = rng.random_range(0.02..0.6);
        cfg.disease.delta = rng.random_range(0.1..1.0);
        cfg.seed = rng.random();
        let records = simulate_records(&cfg, None, 0).unwrap();
        let opts = &cfg.estimation;
        let Ok(m) = FittedModels::fit(&records, &opts.spec, opts.eval, &opts.fit) else {
            continue;
        };
        fits += 1;
        let r = m.estimate(Scale::Ratio);
        worst_ratio = worst_ratio.max(((r.indirect - r.contagion * r.infectiousness) / r.indirect).abs());
        let d = m.estimate(Scale::Difference);
        worst_diff = worst_diff.max((d.indirect - (d.contagion + d.infectiousness)).abs());
    }
    Outcome {
        pass: worst_ratio < 1e-10 && worst_diff < 1e-10,
        detail: format!(
            "{fits} converged fits ({tried} datasets): max ratio rel error {worst_ratio:.2e}, max difference abs error {worst_diff:.2e} [want < 1e-10]"
        ),
    }
}

fn pooled_diagnostic(cfg: &ScenarioConfig, spec: &ModelSpec, sims: usize) -> (ResidualDiagnostic, usize) {
    let fixture = prepare_fixture(cfg).unwrap();
    let mut pooled = ResidualDiagnostic::default();
    let mut used = 0;
    for r in 0..sims {
        let records = simulate_records(cfg, fixture.as_ref(), r).unwrap();
        let Ok(m) = FittedModels::fit(&records, spec, EvalPoint::AllRecords, &cfg.estimation.fit) else {
            continue;
        };
        let d = residual_cross_correlation(&records, spec, &m.mediator, &m.outcome, &mut substream(cfg.seed, &[r as u64, 99]))
            .unwrap();
        pooled.merge(&d);
        used += 1;
    }
    (pooled, used)
}

fn residual_uncorrelatedness() -> Outcome {
    let cfg = ScenarioConfig::family_network(8000, Hypothesis::Null);
    let sims = 100;
    let (full, used) = pooled_diagnostic(&cfg, &ModelSpec::network(), sims);
    let reduced = ModelSpec {
        covariates: vec![Field::VE, Field::UA, Field::LA],
    };
    let (control, control_used) = pooled_diagnostic(&cfg, &reduced, sims);
    let quiet = full.mediator.z().abs() <= 3.0 && full.outcome.z().abs() <= 3.0;
    let teeth = control.mediator.z().abs() > 3.0 || control.outcome.z().abs() > 3.0;
    Outcome {
        pass: quiet && teeth,
        detail: format!(
            "full model ({used} sims): mediator z {:.2}, outcome z {:.2}; without U_e/L_e ({control_used} sims): mediator z {:.2}, outcome z {:.2} [want |z| <= 3 for the full model, > 3 for the control]",
            full.mediator.z(),
            full.outcome.z(),
            control.mediator.z(),
            control.outcome.z()
        ),
    }
}

/// Binary covariate with `(events, non-events)` counts at x = 0 and x = 1.
fn two_by_two(x0: (usize, usize), x1: (usize, usize)) -> (DesignMatrix, Vec<f64>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (xv, (ev, non)) in [(0.0, x0), (1.0, x1)] {
        for k in 0..ev + non {
            rows.push([xv]);
            y.push(if k < ev { 1.0 } else { 0.0 });
        }
    }
    (DesignMatrix::with_intercept(rows).unwrap(), y)
}

fn glm_oracles() -> Outcome {
    let opts = FitOptions::default();
    let mut rng = substream(701, &[]);

    let mut worst_saturated = 0.0f64;
    for _ in 0..200 {
        let cell = |rng: &mut vaxnet::rng::SimRng| (rng.random_range(1..60), rng.random_range(1..60));
        let (c0, c1) = (cell(&mut rng), cell(&mut rng));
        let (x, y) = two_by_two(c0, c1);
        let p0 = c0.0 as f64 / (c0.0 + c0.1) as f64;
        let p1 = c1.0 as f64 / (c1.0 + c1.1) as f64;
        let logit = |p: f64| (p / (1.0 - p)).ln();
        for (link, want) in [
            (Link::Logit, [logit(p0), logit(p1) - logit(p0)]),
            (Link::Log, [p0.ln(), p1.ln() - p0.ln()]),
        ] {
            let fit = fit_glm(&x, &y, link, &opts).unwrap();
            for (got, want) in fit.coefficients.iter().zip(want) {
                worst_saturated = worst_saturated.max((got - want).abs());
            }
        }
    }

    let mut worst_score = 0.0f64;
    for _ in 0..200 {
        let n = 150;
        let rows: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), f64::from(rng.random_bool(0.5))]).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.2))).collect();
        let x = DesignMatrix::with_intercept(rows).unwrap();
        let beta = [rng.random_range(-2.5..-1.0), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        for link in [Link::Logit, Link::Log] {
            let g = score(&x, &y, link, &beta);
            for j in 0..3 {
                let h = 1e-5;
                let (mut up, mut down) = (beta, beta);
                up[j] += h;
                down[j] -= h;
                let fd = (log_likelihood(&x, &y, link, &up) - log_likelihood(&x, &y, link, &down)) / (2.0 * h);
                worst_score = worst_score.max((fd - g[j]).abs() / g[j].abs().max(1.0));
            }
        }
    }

    let empty_log = two_by_two((30, 70), (0, 40));
    let separated_logit = two_by_two((30, 70), (40, 0));
    let nonconv = |(x, y): (DesignMatrix, Vec<f64>), link| {
        matches!(fit_glm(&x, &y, link, &opts), Err(GlmError::NonConvergence { .. }))
    };
    let empty_ok = nonconv(empty_log, Link::Log) && nonconv(separated_logit, Link::Logit);

    Outcome {
        pass: worst_saturated < 1e-8 && worst_score < 1e-5 && empty_ok,
        detail: format!(
            "saturated max error {worst_saturated:.2e} [< 1e-8], score vs finite difference max rel error {worst_score:.2e} [< 1e-5], empty/separated strata non-convergence: {empty_ok}"
        ),
    }
}

fn extraction_validity() -> Outcome {
    let mut rng = substream(801, &[]);
    let mut failures = 0;
    let mut total_pairs = 0;
    for _ in 0..1000 {
        let groups = rng.random_range(1..120);
        let size = rng.random_range(1..7);
        let p = rng.random_range(0.0..0.02);
        let net = generate_family_network(groups, size, p, &mut rng).unwrap();
        let selection = extract_independent_pairs(&net, &mut rng);
        let pairs: Vec<AlterEgoPair> = selection.iter().map(|(p, _)| *p).collect();
        total_pairs += pairs.len();
        if check_zone_independence(&net, &selection).is_err() || !pairs_at_distance(&net, &pairs, 4) {
            failures += 1;
        }
    }
    let triangle = extract_independent_pairs(&Network::complete(3), &mut rng).len();
    let two_edges = extract_independent_pairs(&Network::from_ties(4, [(0, 1), (2, 3)]).unwrap(), &mut rng).len();
    let one_edge = extract_independent_pairs(&Network::from_ties(2, [(0, 1)]).unwrap(), &mut rng).len();
    let toys = (triangle, two_edges, one_edge) == (1, 2, 1);
    Outcome {
        pass: failures == 0 && toys,
        detail: format!(
            "1000 networks, {total_pairs} pairs, {failures} failing selections; toys triangle/two-edge/single-edge = {triangle}/{two_edges}/{one_edge} [want 0 failures, 1/2/1]"
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("independent groups, null", groups_null),
        ("independent groups, alternative", groups_alternative),
        ("network, null", network_null),
        ("network, alternative", network_alternative),
        ("decomposition identity", decomposition_identity),
        ("residual uncorrelatedness", residual_uncorrelatedness),
        ("GLM oracles", glm_oracles),
        ("extraction validity", extraction_validity),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {n} ({name}): {} ({:.0}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
