//! The fuzz seed corpora double as format fixtures: every seed must parse,
//! except those named `seed-bad*`, which must not.

use std::fs;
use std::path::Path;

use manifold_icp::io;
use manifold_icp::kinematics::TrajectoryProtocol;

fn accepts(target: &str, text: &str) -> bool {
    match target {
        "parse_spd_matrix" => io::parse_spd_matrix(text).is_ok(),
        "parse_cloud" => io::parse_cloud(text).is_ok(),
        "parse_correspondences" => io::parse_correspondences(text).is_ok(),
        "parse_transform" => io::parse_transform(text).is_ok(),
        "parse_model" => io::parse_model(text).is_ok(),
        "parse_dataset" => io::parse_dataset(text).is_ok(),
        "parse_nn_map" => io::parse_nn_map(text).is_ok(),
        "parse_protocol" => text.parse::<TrajectoryProtocol>().is_ok(),
        other => panic!("no parser for corpus directory {other}"),
    }
}

#[test]
fn seeds_match_their_parsers() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let mut checked = 0;
    for dir in fs::read_dir(&root).unwrap() {
        let dir = dir.unwrap().path();
        let target = dir.file_name().unwrap().to_str().unwrap().to_string();
        for seed in fs::read_dir(&dir).unwrap() {
            let seed = seed.unwrap().path();
            let name = seed.file_name().unwrap().to_str().unwrap().to_string();
            if !name.starts_with("seed-") {
                continue;
            }
            let text = fs::read_to_string(&seed).unwrap();
            assert_eq!(accepts(&target, &text), !name.starts_with("seed-bad"), "{}", seed.display());
            checked += 1;
        }
    }
    assert!(checked >= 8, "only {checked} seeds found");
}
