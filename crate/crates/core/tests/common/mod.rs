#![allow(dead_code)]

use std::path::PathBuf;

use merton_lattice::config::RunConfig;
use merton_lattice::lattice::{discretize_jumps, DiscreteJumpLaw};
use merton_lattice::model::{validate_model, MertonModel};

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/configs")
}

pub fn config_path(name: &str) -> PathBuf {
    configs_dir().join(format!("{name}.json"))
}

pub fn load(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every shipped config, sorted by file name.
pub fn shipped() -> Vec<(String, RunConfig)> {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .expect("configs directory")
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "json").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), load(&n))).collect()
}

pub fn model_of(cfg: &RunConfig) -> MertonModel {
    validate_model(cfg.model.clone()).expect("shipped model is valid")
}

pub fn jumps_of(cfg: &RunConfig, model: &MertonModel, n: usize) -> DiscreteJumpLaw {
    discretize_jumps(model.jumps(), n, cfg.engine.jump_mode, cfg.engine.tail_samples).expect("jump law")
}
