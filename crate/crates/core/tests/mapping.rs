use gmmap::mapper::Branch;
use gmmap::synth::{build_dataset, RenderNoise, SceneKind};
use gmmap::{HashGridSpec, MapperConfig, MapperState, ObservedFrame, SogmmConfig};

fn room_frames(n: usize) -> Vec<ObservedFrame> {
    let ds = build_dataset(SceneKind::Room, n).unwrap();
    (0..n)
        .map(|k| {
            let (cloud, depths) = ds.world_frame(k, &RenderNoise::default(), 8).unwrap();
            ObservedFrame::new(cloud, depths).unwrap()
        })
        .collect()
}

#[test]
fn state_invariants_hold_after_every_frame() {
    let frames = room_frames(8);
    let (mcfg, scfg) = (MapperConfig::default(), SogmmConfig::with_bandwidth(0.05));
    let mut state = MapperState::new(HashGridSpec::default()).unwrap();
    let mut fitted_points = 0u64;
    let mut previous: Vec<gmmap::Component<4>> = Vec::new();
    for frame in &frames {
        let cached_before = state.cache().len();
        let r = state.process_frame(frame, &mcfg, &scfg).unwrap();
        if r.branch == Branch::Fit {
            fitted_points += (cached_before + r.n_relevant) as u64;
        }
        let g = state.global().unwrap();
        assert!((g.weight_sum() - 1.0).abs() <= 1e-9);
        assert_eq!(g.support_count, fitted_points);
        assert_eq!(r.n_components, g.len());
        assert!(g.len() >= previous.len());
        // Append-only: earlier components keep their parameters; only
        // weights are rescaled.
        for (old, new) in previous.iter().zip(&g.components) {
            assert_eq!(old.mean, new.mean);
            assert_eq!(old.covariance, new.covariance);
        }
        for (_, ids) in state.table().canonical_cells() {
            assert!(ids.iter().all(|&i| (i as usize) < g.len()));
        }
        previous = g.components.clone();
    }
    assert_eq!(state.frame_counter(), frames.len() as u64);
    assert!(state.phi().is_some());
}

#[test]
fn first_frame_is_fully_relevant_and_repeat_is_not() {
    let frames = room_frames(2);
    let (mcfg, scfg) = (MapperConfig::default(), SogmmConfig::with_bandwidth(0.05));
    let mut state = MapperState::new(HashGridSpec::default()).unwrap();
    let first = state.process_frame(&frames[0], &mcfg, &scfg).unwrap();
    assert_eq!(first.n_relevant, first.n_points);
    assert_eq!(first.branch, Branch::Fit);
    let again = state.process_frame(&frames[0], &mcfg, &scfg).unwrap();
    // The model now explains the frame; at most the calibration tail is relevant.
    assert!(again.n_relevant * 10 < again.n_points, "{} of {}", again.n_relevant, again.n_points);
    assert!(again.n_submap.unwrap() <= again.n_components);
}

#[test]
fn submap_and_full_scoring_agree_with_fixed_phi() {
    let frames = room_frames(3);
    let scfg = SogmmConfig::with_bandwidth(0.05);
    let mut with = MapperState::new(HashGridSpec::default()).unwrap();
    let mut without = MapperState::new(HashGridSpec::default()).unwrap();
    let on = MapperConfig {
        phi: Some(-2.0),
        ..MapperConfig::default()
    };
    let off = MapperConfig { use_submap: false, ..on.clone() };
    for f in &frames {
        let a = with.process_frame(f, &on, &scfg).unwrap();
        let b = without.process_frame(f, &off, &scfg).unwrap();
        let diff = a.n_relevant.abs_diff(b.n_relevant);
        assert!(diff * 20 <= a.n_points, "{} vs {}", a.n_relevant, b.n_relevant);
        assert!(b.n_submap.is_none());
    }
}

#[test]
fn resuming_from_a_saved_model_rebuilds_the_table() {
    let frames = room_frames(2);
    let (mcfg, scfg) = (MapperConfig::default(), SogmmConfig::with_bandwidth(0.05));
    let mut state = MapperState::new(HashGridSpec::default()).unwrap();
    for f in &frames {
        state.process_frame(f, &mcfg, &scfg).unwrap();
    }
    let model = state.global().unwrap().clone();
    let resumed = MapperState::from_model(HashGridSpec::default(), model).unwrap();
    assert_eq!(resumed.table().canonical_cells(), state.table().canonical_cells());
    assert_eq!(resumed.n_components(), state.n_components());
}
