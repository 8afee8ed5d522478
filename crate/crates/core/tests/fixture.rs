use std::path::Path;

use unobstruct::geometry::{render_ratio_percent, RelationRecord};
use unobstruct::graph::{scene_graph_records, DEFAULT_PATH_CAP};
use unobstruct::scene::{load_scene, normalize_ids};
use unobstruct::trace::{ResolvedTrace, DEFAULT_RESOLVE_RADIUS};
use unobstruct::vqa::{synth_for_target, Cues, VqaRecord};
use unobstruct::{Difficulty, GeometryConfig, RelationGraph, SceneRecord, Setting};

fn scene() -> SceneRecord {
    load_scene(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/scene4616_view3.json")).unwrap()
}

#[test]
fn fixture_loads_with_the_named_objects() {
    let s = scene();
    assert_eq!(s.scene_id, "data_ifl_46/scene4616");
    assert_eq!(s.view_id, "3");
    assert_eq!(s.object(4).unwrap().name, "right sugar box");
    assert_eq!(s.object(1).unwrap().centroid, (383, 585));
    assert_eq!(s.object(3).unwrap().centroid, (831, 677));
    assert!(normalize_ids(&s).1.is_identity());
}

#[test]
fn fixture_relations_have_the_published_ratios() {
    let rg = RelationGraph::from_scene(&scene(), &GeometryConfig::default()).unwrap();
    let r13 = rg.relation(4, 3).unwrap();
    assert_eq!(r13.ratio, 0.0681);
    assert_eq!(render_ratio_percent(r13.ratio), 7);
    let r11 = rg.relation(4, 1).unwrap();
    assert_eq!(r11.ratio, 0.04);
    assert_eq!(render_ratio_percent(r11.ratio), 4);
    assert_eq!(rg.relations().count(), 2);

    let rec = RelationRecord::from(r13);
    let json = serde_json::to_value(&rec).unwrap();
    assert_eq!(json["obj1"], 3);
    assert_eq!(json["obj2"], 4);
    assert_eq!(json["relation"], "3 occludes 4");
    assert_eq!(json["mask_ratio"], 0.0681);
    // The contact point is the rounded centroid of the overlap strip.
    assert_eq!(
        (json["point"]["x"].clone(), json["point"]["y"].clone()),
        (776.into(), 722.into())
    );
}

#[test]
fn fixture_graph_records() {
    let records = scene_graph_records(&scene(), &GeometryConfig::default(), DEFAULT_PATH_CAP).unwrap();
    let t4 = records.iter().find(|r| r.target_object == 4).unwrap();
    assert_eq!(t4.obstruction_paths, vec![vec![1, 4], vec![3, 4]]);
    assert_eq!(
        (t4.k_min, t4.num_paths, t4.new_difficulty),
        (1, 2, Difficulty::Medium)
    );
    assert!(t4.audit().is_empty());
    for r in records.iter().filter(|r| r.target_object != 4) {
        assert_eq!(r.new_difficulty, Difficulty::NoOcc);
        assert_eq!(r.top_objects, vec![r.target_object]);
    }
}

#[test]
fn fixture_samples_round_trip_through_the_parser() {
    let s = scene();
    let rg = RelationGraph::from_scene(&s, &GeometryConfig::default()).unwrap();
    for setting in [Setting::OracleSom, Setting::Nlp] {
        let sample = synth_for_target(&s, &rg, 4, setting, &Cues::default(), DEFAULT_PATH_CAP)
            .unwrap()
            .unwrap();
        let resolved =
            ResolvedTrace::from_output(&sample.answer_text, setting, Some(&s), DEFAULT_RESOLVE_RADIUS);
        assert!(resolved.format_ok);
        assert_eq!(resolved.think_paths, vec![vec![1, 4], vec![3, 4]]);
        assert_eq!(resolved.answer.iter().copied().collect::<Vec<_>>(), vec![1, 3]);
        let record = VqaRecord::new(sample, None);
        assert_eq!(record.sample_id, format!("data_ifl_46/scene4616/3/4/{setting}"));
    }
    let nlp = synth_for_target(&s, &rg, 4, Setting::Nlp, &Cues::default(), DEFAULT_PATH_CAP)
        .unwrap()
        .unwrap();
    assert_eq!(
        nlp.question,
        "<image>\nTo grasp right sugar box, which object is on top of it?"
    );
    assert_eq!(nlp.image_ref, "scene4616_view3_ori.png");
}
