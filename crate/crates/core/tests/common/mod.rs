#![allow(dead_code)]

use std::path::PathBuf;

use rigmotion_core::animstring::{parse_animstring, to_clip};
use rigmotion_core::{parse_object_json, Clip, Skeleton};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn skeleton(name: &str) -> Skeleton {
    parse_object_json(&fixture(name)).expect("fixture skeleton parses")
}

pub fn clip(name: &str) -> Clip {
    to_clip(&parse_animstring(&fixture(name)).expect("fixture parses")).expect("fixture converts")
}

pub fn whale() -> Skeleton {
    skeleton("whale.object.json")
}
