use stratvote::generate::{
    generate_synthetic, sample_actual_scores, GeneratorConfig, PollSizeWeight, PopulationEntry,
};
use stratvote_core::behavior::{classify_scenario, Scenario};
use stratvote_core::{decide, Model, Poll};

fn truthful(voters: usize, rounds: u32) -> GeneratorConfig {
    GeneratorConfig {
        num_voters: voters,
        rounds_per_voter: rounds,
        population: vec![PopulationEntry {
            weight: 1.0,
            models: vec![Model::Truth],
        }],
        ..GeneratorConfig::default()
    }
}

#[test]
fn scenarios_are_balanced() {
    let g = generate_synthetic(&truthful(300, 20), 3).unwrap();
    let mut counts = [0usize; 6];
    for r in &g.dataset.records {
        let sc = classify_scenario(&r.utilities, &r.poll).unwrap();
        counts[Scenario::ALL.iter().position(|&s| s == sc).unwrap()] += 1;
    }
    let total = g.dataset.records.len() as f64;
    assert_eq!(total, 6000.0);
    for c in counts {
        let f = c as f64 / total;
        assert!((f - 1.0 / 6.0).abs() <= 0.02, "{counts:?}");
    }
}

#[test]
fn same_seed_same_data() {
    let cfg = truthful(20, 5);
    let a = generate_synthetic(&cfg, 9).unwrap();
    let b = generate_synthetic(&cfg, 9).unwrap();
    let c = generate_synthetic(&cfg, 10).unwrap();
    assert_eq!(a.dataset.records, b.dataset.records);
    assert_ne!(a.dataset.records, c.dataset.records);
}

#[test]
fn noise_free_actions_follow_the_voter_model() {
    let cfg = GeneratorConfig {
        population: vec![PopulationEntry {
            weight: 1.0,
            models: vec![Model::Pragmatist { k: 2 }, Model::LocalDominance { r: 0.1 }],
        }],
        ..truthful(30, 10)
    };
    let g = generate_synthetic(&cfg, 4).unwrap();
    for r in &g.dataset.records {
        let m = g.voter_models[&r.voter_id];
        assert_eq!(decide(&m, &r.utilities, &r.poll).unwrap(), r.action);
    }
}

#[test]
fn poll_sizes_come_from_the_mix() {
    let cfg = GeneratorConfig {
        poll_sizes: vec![
            PollSizeWeight { n: 8, weight: 0.5 },
            PollSizeWeight {
                n: 1000,
                weight: 0.5,
            },
        ],
        ..truthful(20, 10)
    };
    let g = generate_synthetic(&cfg, 1).unwrap();
    for r in &g.dataset.records {
        assert!(r.poll.n() == 8 || r.poll.n() == 1000);
        assert_eq!(r.poll.scores().iter().sum::<u64>(), r.poll.n());
    }
}

#[test]
fn bad_mixes_are_rejected() {
    let mut cfg = truthful(5, 5);
    cfg.population[0].weight = 0.7;
    assert!(generate_synthetic(&cfg, 0).is_err());
}

#[test]
fn actual_scores_centre_on_the_poll() {
    let poll = Poll::new(vec![500, 300, 200]).unwrap();
    let draws = 2000u64;
    let mut sums = [0u64; 3];
    for seed in 0..draws {
        let s = sample_actual_scores(&poll, seed);
        assert_eq!(s.n(), 1000);
        for (acc, v) in sums.iter_mut().zip(s.scores()) {
            *acc += v;
        }
    }
    for (i, &want) in [500.0, 300.0, 200.0].iter().enumerate() {
        let mean = sums[i] as f64 / draws as f64;
        assert!((mean - want).abs() / want < 0.01, "{i}: {mean}");
    }
}
