use std::process::{Command, Output};

fn bigramsey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bigramsey")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    bigramsey(args).status.code().expect("exit code")
}

const TRIANGLE: &str = r#"{"size":3,"relations":{"R0":[[0,1],[1,2],[0,2]]}}"#;

#[test]
fn exit_code_contract() {
    assert_eq!(code(&["types", "--class", "og", "--structure", TRIANGLE]), 0);
    assert_eq!(code(&["oracle", "--class", "og", "--structure", TRIANGLE, "--depth", "2"]), 1);
    assert_eq!(code(&["types", "--class", "og", "--structure", "{\"size\":2,\"relations\":{\"R9\":[]}}"]), 2);
    assert_eq!(code(&["types", "--class", "nonsense", "--structure", TRIANGLE]), 2);
    assert_eq!(code(&["skeletons"]), 2);
    assert_eq!(code(&["types", "--class", "og_3", "--structure", TRIANGLE]), 3);
    assert_eq!(code(&["oracle", "--class", "og", "--structure", TRIANGLE, "--depth", "6", "--budget", "5"]), 4);
    assert_eq!(code(&["oracle", "--class", "og", "--structure", r#"{"size":4}"#, "--depth", "6", "--sweep", "always"]), 4);
}

#[test]
fn errors_go_to_stderr() {
    let out = bigramsey(&["types", "--class", "og_3", "--structure", TRIANGLE]);
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("not a member of class og_3"), "{err}");
}

#[test]
fn files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let class = dir.path().join("class.json");
    let structure = dir.path().join("h.json");
    std::fs::write(&class, r#"{"kind":"og_k","k":4}"#).unwrap();
    std::fs::write(&structure, TRIANGLE).unwrap();
    let out = bigramsey(&["types", "--class", class.to_str().unwrap(), "--structure", structure.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "{\"count\":3,\"types\":[\"(0: (1: l0 l1) l2)\",\"(0: l0 (1: l1 l2))\",\"(0: l0 l1 l2)\"]}\n");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let runs: &[&[&str]] = &[
        &["oracle", "--class", "ot", "--structure", r#"{"size":3,"relations":{"R0":[[0,1],[1,2],[0,2]]}}"#, "--depth", "6"],
        &["flim", "--class", "oog", "--depth", "6"],
        &["gadget", "--class", "opo", "--structure", r#"{"size":2,"relations":{"R0":[[0,1]]}}"#, "--verify"],
        &["skeletons", "--size", "4", "--format", "dot"],
    ];
    for args in runs {
        let a = bigramsey(args);
        let b = bigramsey(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn forbidden_class_from_json() {
    // forbidding the directed 3-cycle still admits the one-point gadget
    let class = r#"{"kind":"forb","signature":[{"name":"R0","symmetric":false}],"forbidden":[{"size":3,"relations":{"R0":[[0,1],[1,2],[2,0]]}}]}"#;
    let out = bigramsey(&["gadget", "--class", class, "--structure", r#"{"size":1}"#, "--verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let forb_edge = r#"{"kind":"forb","forbidden":[{"size":2,"relations":{"R0":[[0,1]]}}]}"#;
    assert_eq!(code(&["gadget", "--class", forb_edge, "--structure", r#"{"size":1}"#]), 3);
}
