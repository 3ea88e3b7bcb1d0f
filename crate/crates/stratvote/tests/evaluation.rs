use stratvote::eval::{evaluate, EvalConfig, Mode};
use stratvote::generate::{generate_synthetic, GeneratorConfig, PopulationEntry};
use stratvote_core::{Eta, Family, Model};

fn mixed() -> stratvote::data::Dataset {
    let cfg = GeneratorConfig {
        num_voters: 24,
        rounds_per_voter: 12,
        population: vec![
            PopulationEntry {
                weight: 0.5,
                models: vec![Model::Pragmatist { k: 2 }, Model::LocalDominance { r: 0.1 }],
            },
            PopulationEntry {
                weight: 0.5,
                models: vec![
                    Model::AttainabilityUtility {
                        alpha: 1.0,
                        beta: 10.0,
                    },
                    Model::CalculusOfVoting {
                        eta: Eta::Fixed(16),
                    },
                ],
            },
        ],
        noise: 0.1,
        ..GeneratorConfig::default()
    };
    generate_synthetic(&cfg, 21).unwrap().dataset
}

#[test]
fn upper_bound_dominates_leave_one_out() {
    let ds = mixed();
    let cfg = EvalConfig::default();
    for family in [
        Family::Pragmatist,
        Family::LocalDominance,
        Family::LeaderBiasedLd,
        Family::Tmg,
        Family::AttainabilityUtility,
        Family::CalculusOfVoting,
    ] {
        let loo = evaluate(family, &ds, Mode::Loo, &cfg).unwrap();
        let up = evaluate(family, &ds, Mode::Upper, &cfg).unwrap();
        let (l, u) = (
            loo.overall.weighted_f().unwrap(),
            up.overall.weighted_f().unwrap(),
        );
        assert!(u + 1e-9 >= l, "{family}: upper {u} < loo {l}");
    }
}

#[test]
fn truthful_data_is_fit_perfectly_by_truth() {
    let cfg = GeneratorConfig {
        num_voters: 10,
        rounds_per_voter: 8,
        population: vec![PopulationEntry {
            weight: 1.0,
            models: vec![Model::Truth],
        }],
        ..GeneratorConfig::default()
    };
    let ds = generate_synthetic(&cfg, 2).unwrap().dataset;
    let r = evaluate(Family::Truth, &ds, Mode::Loo, &EvalConfig::default()).unwrap();
    assert_eq!(r.overall.weighted_f(), Some(1.0));
    assert!(r.parameters.is_empty());
}

#[test]
fn slices_partition_the_records() {
    let ds = mixed();
    let r = evaluate(Family::Pragmatist, &ds, Mode::Loo, &EvalConfig::default()).unwrap();
    let total = r.overall.samples;
    assert_eq!(total as usize, ds.records.len());
    assert_eq!(r.scenarios.iter().map(|s| s.samples).sum::<u64>(), total);
    assert_eq!(r.poll_sizes.iter().map(|s| s.samples).sum::<u64>(), total);
    let errors: u64 = r
        .errors
        .iter()
        .map(|e| e.correct + e.unjustified + e.inconsistent + e.unexplained)
        .sum();
    assert_eq!(errors, total);
    assert_eq!(r.predictions.len(), ds.records.len());
}

#[test]
fn network_baseline_runs_and_is_seeded() {
    let ds = mixed();
    let mut cfg = EvalConfig::default();
    cfg.nn.epochs = 50;
    cfg.seed = 5;
    let a = evaluate(Family::NeuralNet, &ds, Mode::Loo, &cfg).unwrap();
    let b = evaluate(Family::NeuralNet, &ds, Mode::Loo, &cfg).unwrap();
    assert_eq!(a.predictions, b.predictions);
    let f = a.overall.weighted_f().unwrap();
    assert!((0.0..=1.0).contains(&f));
}
