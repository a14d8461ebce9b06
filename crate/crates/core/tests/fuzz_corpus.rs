//! Replays the checked-in fuzz seeds through the parser entry points.

use std::path::{Path, PathBuf};

use equiwave::expr::Expr;
use equiwave::profiles::{MetricProfile, ProfileSpec, TargetProfile};
use equiwave::scenario::Scenario;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn expression_seeds_parse_and_reprint() {
    for (path, bytes) in seeds("parse_expr") {
        let e = Expr::parse(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|err| panic!("{}: {err}", path.display()));
        let again = Expr::parse(&e.to_string()).unwrap();
        assert_eq!(e.to_string(), again.to_string());
    }
}

#[test]
fn scenario_seeds_validate() {
    for (path, bytes) in seeds("parse_scenario") {
        Scenario::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|err| panic!("{}: {err}", path.display()));
    }
}

#[test]
fn profile_spec_seeds_build_a_profile() {
    for (path, bytes) in seeds("parse_profile_spec") {
        let spec: ProfileSpec = serde_json::from_slice(&bytes).unwrap();
        let ok = MetricProfile::from_spec(&spec).is_ok() || TargetProfile::from_spec(&spec).is_ok();
        assert!(ok, "{}", path.display());
    }
}
