#![allow(dead_code)]

use deeprotect::autoencoder::{train_dataset, HyperParams};
use deeprotect::dataset::{synthesize, window, SynthSpec};
use deeprotect::evaluation::ClassifierSet;
use deeprotect::{Autoencoder, Classifiers, Dataset};

pub const SEED: u64 = 7;
pub const SENSORS: usize = 3;
pub const WINDOW: usize = 10;
pub const HIDDEN: [usize; 2] = [15, 7];
pub const CLF_BETA: f64 = 1e-6;

/// Raw synthetic windows: 3 sensors, windows of 10 samples.
pub fn raw_windows(samples: usize) -> Dataset {
    let spec = SynthSpec::standard(SENSORS, WINDOW).unwrap();
    let stream = synthesize::<f64>(SEED, SENSORS, samples, &spec).unwrap();
    window(&stream, WINDOW).unwrap()
}

pub struct Fixture {
    pub raw: Dataset,
    pub scaled: Dataset,
    pub stack: Autoencoder,
    pub classifiers: Classifiers,
}

pub fn fixture(samples: usize, iters: usize) -> Fixture {
    let raw = raw_windows(samples);
    let hyper = HyperParams { iters, seed: SEED, ..HyperParams::default() };
    let stack = train_dataset(&raw, &HIDDEN, &hyper).unwrap();
    let scaled = stack.scaler().unwrap().scale_dataset(&raw).unwrap();
    let classifiers = ClassifierSet::fit(&scaled, &stack, CLF_BETA, CLF_BETA).unwrap();
    Fixture { raw, scaled, stack, classifiers }
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(dir: &std::path::Path, args: &[&str]) -> Output {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_deeprotect"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Errors reported by validating `instance` against one of the schemas in `docs/schemas`.
pub fn schema_errors(schema_file: &str, instance: &serde_json::Value) -> Vec<String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(schema_file);
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator.iter_errors(instance).map(|e| e.to_string()).collect()
}
