use concentration::features::{extract_features, FeatureWindowConfig};
use concentration::keypoint_io::Label;
use concentration::synth::{
    derive_seed, generate_dataset, generate_dataset_with, generate_trace, SynthConfig,
};
use concentration::Execution;

#[test]
fn dataset_shape_and_labels() {
    let cfg = SynthConfig {
        seed: 1,
        ..SynthConfig::default()
    };
    let traces = generate_dataset(&cfg, 200).unwrap();
    assert_eq!(traces.len(), 400);
    let high = traces
        .iter()
        .filter(|t| t.label() == Some(Label::High))
        .count();
    assert_eq!(high, 200);
    let windows: usize = traces
        .iter()
        .map(|t| {
            extract_features(t, &FeatureWindowConfig::default())
                .unwrap()
                .vectors
                .len()
        })
        .sum();
    assert_eq!(windows, 800);
}

#[test]
fn generation_is_deterministic_and_execution_independent() {
    let cfg = SynthConfig {
        seed: 31,
        ..SynthConfig::default()
    };
    let a = generate_dataset_with(&cfg, 10, Execution::Sequential).unwrap();
    let b = generate_dataset_with(&cfg, 10, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let other = generate_dataset(&SynthConfig { seed: 32, ..cfg }, 10).unwrap();
    assert_ne!(a, other);
}

#[test]
fn trace_seeds_are_derived_from_the_master_seed() {
    let cfg = SynthConfig {
        seed: 9,
        ..SynthConfig::default()
    };
    let traces = generate_dataset(&cfg, 2).unwrap();
    let third = generate_trace(
        &SynthConfig {
            seed: derive_seed(9, 2),
            ..cfg
        },
        Label::High,
    )
    .unwrap();
    assert_eq!(traces[2], third);
}

#[test]
fn classes_separate_on_every_feature() {
    let cfg = SynthConfig {
        seed: 14,
        ..SynthConfig::default()
    };
    let traces = generate_dataset(&cfg, 200).unwrap();
    let mut by_class: [Vec<[f64; 4]>; 2] = Default::default();
    for t in &traces {
        let slot = t.label().unwrap().as_u8() as usize;
        for v in extract_features(t, &FeatureWindowConfig::default())
            .unwrap()
            .vectors
        {
            by_class[slot].push(v.values());
        }
    }
    for f in 0..4 {
        let stats = |rows: &[[f64; 4]]| {
            let n = rows.len() as f64;
            let mean = rows.iter().map(|r| r[f]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var / n)
        };
        let (m_low, v_low) = stats(&by_class[0]);
        let (m_high, v_high) = stats(&by_class[1]);
        let se = (v_low + v_high).sqrt();
        assert!(
            m_low - m_high > 3.0 * se,
            "feature {f}: low {m_low} high {m_high} se {se}"
        );
    }
}

#[test]
fn invalid_jitter_ordering_is_rejected() {
    let cfg = SynthConfig {
        jitter_high: 0.02,
        jitter_low: 0.01,
        ..SynthConfig::default()
    };
    assert!(generate_trace(&cfg, Label::Low).is_err());
}
