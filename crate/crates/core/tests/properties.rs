use std::collections::BTreeSet;

use proptest::prelude::*;
use unobstruct::agents::{run_agent, Agent, AgentOptions, NoiseSpec};
use unobstruct::gen::{generate_scene, generate_scenes, GenConfig};
use unobstruct::graph::{TargetGraph, DEFAULT_PATH_CAP};
use unobstruct::manifest::Manifest;
use unobstruct::metrics::{evaluate_dataset, hungarian, mp_ned, set_prf};
use unobstruct::rewards::{group_advantages, reward_batch, RewardConfig};
use unobstruct::trace::{parse_som, DEFAULT_RESOLVE_RADIUS};
use unobstruct::vqa::{render_som, synth_scene, Cues, VqaRecord};
use unobstruct::{Execution, GeometryConfig, Mask, ObjectId, RelationGraph, Setting};

fn path_set() -> impl Strategy<Value = Vec<Vec<ObjectId>>> {
    prop::collection::vec(prop::collection::vec(1u32..8, 1..6), 0..5)
}

proptest! {
    #[test]
    fn mp_ned_is_a_bounded_symmetric_distance(a in path_set(), b in path_set()) {
        let d = mp_ned(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - mp_ned(&b, &a)).abs() < 1e-12);
        prop_assert_eq!(mp_ned(&a, &a), 0.0);
    }

    #[test]
    fn mp_ned_ignores_path_order(mut a in path_set(), b in path_set()) {
        let d = mp_ned(&a, &b);
        a.reverse();
        prop_assert!((d - mp_ned(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn prf_stays_in_the_unit_interval(
        a in prop::collection::btree_set(0u32..10, 0..6),
        b in prop::collection::btree_set(0u32..10, 0..6),
    ) {
        let s = set_prf(&a, &b);
        for v in [s.precision, s.recall, s.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(s.f1 == 1.0, a == b);
    }

    #[test]
    fn hungarian_beats_the_identity_assignment(
        m in (1usize..7).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.0f64..10.0, n), n))
    ) {
        let a = hungarian(&m).unwrap();
        let diagonal: f64 = (0..m.len()).map(|i| m[i][i]).sum();
        prop_assert!(a.cost <= diagonal + 1e-9);
        let cols: BTreeSet<usize> = a.pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(cols.len(), m.len());
    }

    #[test]
    fn advantages_sum_to_zero(r in prop::collection::vec(-5.0f64..5.0, 1..65)) {
        let g = group_advantages(&r).unwrap();
        prop_assert!(g.advantages.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn rle_round_trips(w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
        let bits: Vec<bool> = (0..w * h).map(|i| (seed.rotate_left(i % 64) ^ u64::from(i)) & 3 == 0).collect();
        let m = Mask::from_bools(w, h, &bits).unwrap();
        let back = Mask::from_rle(w, h, &m.to_rle()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn rendered_traces_parse_back(seed in 0u64..500) {
        let scene = generate_scene(&GenConfig { seed, ..GenConfig::default() }).unwrap();
        let rg = RelationGraph::from_scene(&scene, &GeometryConfig::default()).unwrap();
        for &t in rg.ids() {
            let g = rg.target_graph(t).unwrap();
            let paths = g.enumerate_paths(DEFAULT_PATH_CAP).unwrap();
            let answer: Vec<ObjectId> = g.top_level().into_iter().collect();
            let text = render_som(t, &paths, &answer, &rg, &Cues::default());
            let parsed = parse_som(&text);
            prop_assert!(parsed.format_ok);
            prop_assert_eq!(&parsed.think_paths, &paths);
            prop_assert_eq!(TargetGraph::from_paths(t, &parsed.think_paths).top_level(), g.top_level());
        }
    }
}

fn dataset(count: u64) -> Manifest {
    let cfg = GenConfig {
        seed: 77,
        ..GenConfig::default()
    };
    let scenes: Vec<_> = generate_scenes(&cfg, count, Execution::Sequential)
        .unwrap()
        .into_iter()
        .map(std::sync::Arc::new)
        .collect();
    let mut records = Vec::new();
    for s in &scenes {
        let samples = synth_scene(
            s,
            &[Setting::OracleSom, Setting::Nlp],
            &cfg.geometry,
            &Cues::default(),
            64,
        )
        .unwrap();
        records.extend(samples.into_iter().map(|x| VqaRecord::new(x, None)));
    }
    Manifest::from_vqa_in_memory(records, &scenes).unwrap()
}

#[test]
fn sequential_and_parallel_results_agree() {
    let manifest = dataset(30);
    let noise = Agent::Corrupted(NoiseSpec {
        seed: 4,
        p_drop_path: 0.3,
        p_drop_answer: 0.3,
        p_swap: 0.3,
        p_break_format: 0.1,
    });
    let opts = AgentOptions::default();
    let seq = run_agent(&manifest, &noise, &opts, Execution::Sequential).unwrap();
    let par = run_agent(&manifest, &noise, &opts, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let a = evaluate_dataset(&seq, &manifest, DEFAULT_RESOLVE_RADIUS, Execution::Sequential).unwrap();
    let b = evaluate_dataset(&par, &manifest, DEFAULT_RESOLVE_RADIUS, Execution::Parallel).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.report, b.report);
    let cfg = RewardConfig::default();
    assert_eq!(
        reward_batch(
            &seq,
            &manifest,
            &cfg,
            DEFAULT_RESOLVE_RADIUS,
            Execution::Sequential
        )
        .unwrap(),
        reward_batch(&par, &manifest, &cfg, DEFAULT_RESOLVE_RADIUS, Execution::Parallel).unwrap()
    );
}

#[test]
fn missing_predictions_count_as_failures() {
    let manifest = dataset(3);
    let mut preds = run_agent(
        &manifest,
        &Agent::Oracle,
        &AgentOptions::default(),
        Execution::Sequential,
    )
    .unwrap();
    let dropped = preds.pop().unwrap();
    let ev = evaluate_dataset(&preds, &manifest, DEFAULT_RESOLVE_RADIUS, Execution::Sequential).unwrap();
    let last = ev
        .samples
        .iter()
        .find(|s| s.sample_id == dropped.sample_id)
        .unwrap();
    assert!(!last.format_ok);
    assert_eq!(last.mp_ned, 1.0);
    assert!(evaluate_dataset(&[], &manifest, DEFAULT_RESOLVE_RADIUS, Execution::Sequential).is_err());
}
