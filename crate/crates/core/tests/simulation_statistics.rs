use crowdcell_core::annotation::{aggregate_corpus, estimate_consensus_accuracy, CellClass, ConsensusRule, ItemId};
use crowdcell_core::simulation::*;

/// P(at least 3 of 5 successes) for success probability `p`.
fn tail(p: f64) -> f64 {
    (3..=5)
        .map(|j| {
            let c = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0][j];
            c * p.powi(j as i32) * (1.0 - p).powi(5 - j as i32)
        })
        .sum()
}

/// Conditions on the item's draw: workers are independent given it.
fn analytic(alpha: f64, rho: f64) -> f64 {
    alpha * tail((1.0 - rho) * alpha + rho) + (1.0 - alpha) * tail((1.0 - rho) * alpha)
}

#[test]
fn independent_workers_match_the_binomial_estimate() {
    let model = WorkerModel::reference("m");
    let alpha = model.accuracy(CellClass::Circular);
    let est = consensus_accuracy(&model, CellClass::Circular, &DifficultyModel::independent(), 100_000, 5, 3, 1);
    let expected = estimate_consensus_accuracy(alpha, 5, 3).unwrap();
    assert!((est.value - expected).abs() <= 3.0 * est.standard_error, "{est:?} vs {expected}");
    assert!((est.value - 0.9811).abs() <= 0.003);
}

#[test]
fn correlated_workers_match_the_conditional_formula() {
    let model = WorkerModel::reference("m");
    for class in CellClass::ALL {
        for rho in [0.25, 0.6] {
            let est = consensus_accuracy(&model, class, &DifficultyModel::correlated(rho), 40_000, 5, 3, 5);
            let expected = analytic(model.accuracy(class), rho);
            assert!((est.value - expected).abs() <= 4.0 * est.standard_error, "{class} {rho}: {est:?} vs {expected}");
        }
    }
}

#[test]
fn consensus_falls_as_correlation_grows() {
    let model = WorkerModel::reference("m");
    let mut prev = f64::INFINITY;
    for i in 0..=10 {
        let rho = i as f64 / 10.0;
        let est = consensus_accuracy(&model, CellClass::Circular, &DifficultyModel::correlated(rho), 20_000, 5, 3, 2);
        assert!(est.value <= prev + 2.0 * est.standard_error, "rho {rho}");
        prev = est.value;
    }
}

#[test]
fn marginal_accuracy_ignores_correlation() {
    let model = WorkerModel::reference("m");
    for class in CellClass::ALL {
        for rho in [0.0, 0.5, 1.0] {
            let est = vote_accuracy(&model, class, &DifficultyModel::correlated(rho), 20_000, 5, 3);
            // votes on one item share its difficulty, so use an item-level
            // bound: at rho = 1 the five votes are one draw
            let se = (model.accuracy(class) * (1.0 - model.accuracy(class)) / 20_000.0).sqrt();
            assert!((est.value - model.accuracy(class)).abs() <= 3.0 * se, "{class} {rho} {est:?}");
        }
    }
}

#[test]
fn calibration_reaches_observed_consensus() {
    let model = WorkerModel::reference("m");
    let targets = [0.9173, 0.7072, 0.6400];
    let settings = CalibrationSettings {
        n_items: 20_000,
        seed: 11,
        ..Default::default()
    };
    let cal = calibrate_correlation(&model, targets, &settings).unwrap();
    for c in &cal {
        assert!(c.rho > 0.0);
        assert!((c.achieved.value - c.target).abs() <= 0.02, "{c:?}");
        assert!(c.rho_interval.0 <= c.rho && c.rho <= c.rho_interval.1);
        // the analytic curve crosses the target near the calibrated rho
        assert!((analytic(c.alpha, c.rho) - c.target).abs() <= 0.02);
    }
    // the independence limit needs no correlation
    let limit = [0, 1, 2].map(|i| estimate_consensus_accuracy(model.accuracy(CellClass::ALL[i]), 5, 3).unwrap());
    let cal = calibrate_correlation(&model, limit, &settings).unwrap();
    for c in &cal {
        assert!(c.rho_interval.0 < 1e-2, "{c:?}");
    }
}

#[test]
fn calibrated_corpus_reproduces_consensus_accuracies() {
    let model = WorkerModel::reference("m");
    let targets = [0.9173, 0.7072, 0.6400];
    let settings = CalibrationSettings {
        n_items: 20_000,
        seed: 3,
        ..Default::default()
    };
    let cal = calibrate_correlation(&model, targets, &settings).unwrap();
    for c in &cal {
        let cfg = ExperimentConfig::new(5, 5, model.clone(), DifficultyModel::correlated(c.rho), 99);
        let items: Vec<(ItemId, CellClass)> = (0..20_000)
            .map(|i| (ItemId::new(format!("{}-{i}", c.class)), c.class))
            .collect();
        let votes = run_experiment(&cfg, &items).unwrap();
        let agg = aggregate_corpus(&votes, &ConsensusRule::default()).unwrap();
        let correct = agg.results.iter().filter(|r| r.label() == Some(c.class)).count();
        let acc = correct as f64 / items.len() as f64;
        assert!((acc - c.target).abs() <= 0.02, "{}: {acc}", c.class);
    }
}
