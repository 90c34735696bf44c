#![allow(dead_code)]

pub mod dd;

use leoroute_core::Scenario;

pub fn desk_scenario() -> Scenario {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/desk.toml");
    Scenario::load(std::path::Path::new(path)).expect("desk scenario loads")
}
