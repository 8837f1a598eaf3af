//! Evidence bundles over randomly built memories.

mod common;

use epilog_core::evidence::{assemble, check_coherence, write_report, BUNDLE_FILE};
use epilog_core::model::Timestamp;
use epilog_core::query::{run_query, EvalContext};
use epilog_core::space::ArenaMap;
use proptest::prelude::*;

use common::{last_t, ops, replay, script, PEOPLE, THINGS};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assembled_bundles_are_coherent(ops in ops()) {
        let events = script(&ops);
        let (store, _) = replay(&events, last_t(&events));
        let map = ArenaMap::default_arena();
        let cx = EvalContext::new(Timestamp(last_t(&events).0 + 60_000));
        let mut queries: Vec<String> = store.episodes().map(|e| format!("DESCRIBE {}", e.id)).collect();
        queries.extend(["WHEN KIND=task".to_string(), "FEELING".into(), "FIND EPISODES ORDER BY RELEVANCE LIMIT 3".into()]);
        queries.extend(PEOPLE.iter().chain(THINGS.iter()).map(|e| format!("STATE OF {e}")));
        for q in queries {
            let answer = run_query(&store, &q, &cx).unwrap();
            if answer.supporting_ids.is_empty() {
                prop_assert!(assemble(&store, &answer, &map, &cx).is_err());
                continue;
            }
            let bundle = assemble(&store, &answer, &map, &cx).unwrap();
            let c = check_coherence(&answer, &bundle, &store, &map, &cx);
            prop_assert!(c.coherent, "{}: {:?}", q, c.reasons);
            prop_assert_eq!(bundle.map_svg.is_empty(), bundle.location == "outside the arena");

            let mut forged = bundle.clone();
            forged.context = format!("{} / Elsewhere", forged.context);
            prop_assert!(!check_coherence(&answer, &forged, &store, &map, &cx).coherent);
        }
    }
}

#[test]
fn reports_are_byte_identical() {
    let events = script(&[(0, 0, 0), (1, 10, 0), (10, 10, 300), (7, 10, 2), (9, 10, 13), (4, 10, 0), (4, 10, 0)]);
    let (store, _) = replay(&events, last_t(&events));
    let map = ArenaMap::default_arena();
    let cx = EvalContext::new(Timestamp(last_t(&events).0 + 3_600_000));
    let answer = run_query(&store, "DESCRIBE LAST WHERE KIND=task", &cx).unwrap();
    let bundle = assemble(&store, &answer, &map, &cx).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let written = write_report(&bundle, a.path()).unwrap();
    write_report(&bundle, b.path()).unwrap();
    assert!(!written.is_empty());
    for path in &written {
        let name = path.file_name().unwrap();
        assert_eq!(std::fs::read(path).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    let text = std::fs::read_to_string(a.path().join(BUNDLE_FILE)).unwrap();
    assert!(text.contains("I moved towards the bed"), "{text}");
}
