use std::path::PathBuf;

use dddm::data::{make_dataset, DatasetSpec};
use dddm::eval::render_scatter;
use dddm::sampler::initial_draws;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/scatter.svg")
}

// Regenerate with UPDATE_GOLDEN=1 after an intentional rendering change.
#[test]
fn scatter_matches_golden_file() {
    let ds = make_dataset(&DatasetSpec::Mixture8 { radius: 4.0, std: 0.3 }, 100, 0).unwrap();
    let (_, noise) = initial_draws(0, 100, 2);
    let svg = render_scatter(&[(&ds.points, "data"), (&noise, "noise")]).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden_path(), &svg).unwrap();
    }
    let want = std::fs::read_to_string(golden_path()).unwrap();
    assert_eq!(svg, want);
}
