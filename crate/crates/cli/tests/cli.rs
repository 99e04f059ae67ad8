use std::path::Path;
use std::process::{Command, Output};

fn packroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_packroute"))
        .args(args)
        .env_remove("PACKROUTE_JOBS")
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_solve_validate() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("c2.json");
    let result = dir.path().join("c2.result.json");
    assert!(packroute(&["generate", "cuboid2", "--spheres", "10", s(&scene)]).status.success());

    let o = packroute(&["solve", s(&scene), "--restarts", "4", "--seed", "2", "--preset", "f1"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("feasible=true"));
    assert!(result.exists());

    let o = packroute(&["validate", s(&result)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("identical=true"));
}

#[test]
fn job_count_does_not_change_the_result_file() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("l2.json");
    assert!(packroute(&["generate", "lshape2", "--spheres", "8", s(&scene)]).status.success());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let o = packroute(&["solve", s(&scene), "--restarts", "3", "--out", s(&a)]);
    assert!(o.status.success(), "{}", text(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_packroute"))
        .args(["solve", s(&scene), "--restarts", "3", "--out", s(&b)])
        .env("PACKROUTE_JOBS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn malformed_scene_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("bad.json");
    assert!(packroute(&["generate", "cuboid2", "--spheres", "4", s(&scene)]).status.success());
    let body = std::fs::read_to_string(&scene).unwrap().replacen("\"radius\": 0.5", "\"radius\": [1]", 1);
    std::fs::write(&scene, body).unwrap();
    let o = packroute(&["solve", s(&scene)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("bodies[0].spheres[0].radius"), "{}", text(&o));
}

#[test]
fn placement_only_frameworks_refuse_routes() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("c2.json");
    assert!(packroute(&["generate", "cuboid2", "--spheres", "4", s(&scene)]).status.success());
    for fw in ["atc", "soi"] {
        let o = packroute(&["solve", s(&scene), "--framework", fw]);
        assert_eq!(o.status.code(), Some(2), "{fw}: {}", text(&o));
    }
    let o = packroute(&["solve", s(&scene), "--framework", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manual_init_uses_the_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("c2.json");
    assert!(packroute(&["generate", "cuboid2", "--spheres", "6", s(&scene)]).status.success());
    let o = packroute(&["solve", s(&scene), "--init", "manual", "--restarts", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
}

#[test]
fn bench_writes_one_result_per_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let o = packroute(&["bench", "lshape2", "--spheres", "6", "--restarts", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(out.join("lshape2.result.json").exists());
    assert!(text(&o).contains("gap="));
}

#[test]
fn decompose_and_enumerate() {
    let dir = tempfile::tempdir().unwrap();
    let body = dir.path().join("body.json");
    let o = packroute(&["decompose", "cuboid(1,1,2)", "20", "--out", s(&body)]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("20 spheres"));
    assert!(body.exists());

    let o = packroute(&["enumerate", "cuboid2"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("layouts"));

    let o = packroute(&["decompose", "sphere(2)", "3"]);
    assert_eq!(o.status.code(), Some(2));
}
