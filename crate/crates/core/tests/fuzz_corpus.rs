//! Replays the checked-in fuzz corpus through the parser entry points.

use std::path::PathBuf;

use fracneumann::io::parse_solution_csv;
use fracneumann::{Expression, RunConfig};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn expression_seeds_parse() {
    for (name, data) in seeds("expression") {
        let text = std::str::from_utf8(&data).unwrap();
        let expr = Expression::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let _ = expr.eval(0.25, 0.75);
    }
}

#[test]
fn config_seeds_behave() {
    for (name, data) in seeds("config") {
        let result = RunConfig::parse(std::str::from_utf8(&data).unwrap());
        assert_eq!(result.is_ok(), name != "unknown_key", "{name}: {result:?}");
    }
}

#[test]
fn solution_csv_seeds_behave() {
    for (name, data) in seeds("solution_csv") {
        let result = parse_solution_csv(data.as_slice());
        let expect_ok = matches!(name.as_str(), "header_only" | "three_cells");
        assert_eq!(result.is_ok(), expect_ok, "{name}: {result:?}");
    }
}
