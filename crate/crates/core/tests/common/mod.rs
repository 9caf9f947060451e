#![allow(dead_code)]

pub mod oracles;
pub mod tables;

use std::path::{Path, PathBuf};

use uep::{load_channel, Dmc};

pub fn channel_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../channels")
        .join(name)
}

pub fn all_channels() -> Vec<(String, Dmc)> {
    let dir = channel_path("");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let w = load_channel(dir.join(&n)).unwrap();
            (n, w)
        })
        .collect()
}

/// Bundled channels with two inputs and two or three outputs.
pub fn binary_input_channels() -> Vec<(String, Dmc)> {
    all_channels()
        .into_iter()
        .filter(|(_, w)| w.inputs() == 2 && w.outputs() <= 3)
        .collect()
}

pub fn bsc(eps: f64) -> Dmc {
    Dmc::bsc(eps).unwrap()
}

pub fn load(path: &Path) -> Dmc {
    load_channel(path).unwrap()
}
