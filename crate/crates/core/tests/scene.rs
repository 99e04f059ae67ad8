use packroute::bench::generators::{generate, SUITE};
use packroute::bench::run::{run_benchmark, RunConfig};
use packroute::bench::scene::{
    from_json_str, load_result, load_scene, replay, save_result, save_scene, ResultFile, ResultPayload,
};
use packroute::constraints::PairSelection;
use packroute::frameworks::solve_from;
use packroute::solver::SolverOptions;
use packroute::{Error, ProblemSpec};

#[test]
fn scenes_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for name in SUITE.iter().chain(&["priorwork3", "aircraft"]) {
        let spec = generate(name, 14).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        save_scene(&path, &spec).unwrap();
        assert_eq!(load_scene(&path).unwrap(), spec, "{name}");
    }
}

#[test]
fn malformed_field_is_named() {
    let spec = generate("cuboid2", 4).unwrap();
    let text = serde_json::to_string_pretty(&spec).unwrap();
    let broken = text.replacen("\"mass\": 2.0", "\"mass\": \"heavy\"", 1);
    assert_ne!(text, broken);
    match from_json_str::<ProblemSpec>(&broken) {
        Err(Error::Parse { field, line, .. }) => {
            assert_eq!(field, "bodies[0].mass");
            assert!(line > 1);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn invalid_values_are_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = generate("cuboid2", 4).unwrap();
    spec.routes[0].from.port = 7;
    let path = dir.path().join("bad.json");
    save_scene(&path, &spec).unwrap();
    assert!(load_scene(&path).is_err());
    assert!(matches!(load_scene(&dir.path().join("missing.json")), Err(Error::Io { .. })));
}

#[test]
fn results_replay_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let spec = generate("lshape2", 10).unwrap();
    let cfg = RunConfig {
        restarts: 3,
        seed: 8,
        ..RunConfig::default()
    };
    let result = run_benchmark(&spec, &cfg).unwrap();
    let file = ResultFile::new(spec, ResultPayload::Benchmark(Box::new(result))).unwrap();
    let path = dir.path().join("r.json");
    save_result(&path, &file).unwrap();
    let loaded = load_result(&path).unwrap();
    // Wall times are not persisted; everything else is.
    let same = serde_json::to_string(&loaded).unwrap() == serde_json::to_string(&file).unwrap();
    assert!(same);
    let r = replay(&loaded, 1e-6).unwrap();
    assert!(r.identical, "{r:?}");
    assert_eq!(r.max_violation, loaded.result.report().max_violation);
}

#[test]
fn single_solve_results_carry_geometry() {
    let spec = generate("cuboid2", 6).unwrap();
    let x0 = spec.certificate.clone().unwrap();
    let rep = solve_from(&spec, &x0, &SolverOptions::default(), &PairSelection::All).unwrap();
    let file = ResultFile::new(spec.clone(), ResultPayload::Solve(rep)).unwrap();
    assert_eq!(file.geometry.bodies.len(), 2);
    assert_eq!(file.geometry.bodies[0].spheres.len(), 6);
    assert_eq!(file.geometry.routes.len(), spec.routes.len());
    for r in &file.geometry.routes {
        assert_eq!(r.nodes.len(), 2);
    }
    let text = serde_json::to_string(&file).unwrap();
    assert!(text.contains("\"kind\":\"solve\""));
}
