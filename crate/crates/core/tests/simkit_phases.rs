use emergence::dyngraph::Dataset;
use emergence::evalkit::label_offline;
use emergence::simkit::{simulate, SimConfig};

/// The offline labeler should find nearly every scheduled boundary in the
/// objective measure, for both simulators.
fn recovered(dataset: Dataset, seed: u64) -> usize {
    let mut c = SimConfig::preset(dataset, seed);
    c.n_steps = 10_000;
    c.record_stride = 50;
    let trace = simulate(&c).unwrap();
    let truth: Vec<usize> = trace
        .schedule_change_points()
        .into_iter()
        .map(|p| (p * c.record_stride).div_ceil(c.objective_stride))
        .collect();
    assert_eq!(truth.len(), 10);
    let labels = label_offline(&trace.header.objective, truth.len()).unwrap();
    truth.iter().filter(|&&t| labels.iter().any(|&l| l.abs_diff(t) <= 1)).count()
}

#[test]
fn flock_phases_are_recoverable() {
    for seed in 0..3 {
        let hits = recovered(Dataset::Flock, seed);
        assert!(hits >= 8, "seed {seed}: {hits}/10");
    }
}

#[test]
fn pedestrian_phases_are_recoverable() {
    for seed in 0..3 {
        let hits = recovered(Dataset::Pedestrian, seed);
        assert!(hits >= 8, "seed {seed}: {hits}/10");
    }
}
