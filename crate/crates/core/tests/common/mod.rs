#![allow(dead_code)]

pub mod oracle;

use synthsearch::classifier::ModelSpec;
use synthsearch::corpus::{LabeledDataset, SplitRatios};
use synthsearch::features::{EmbeddingConfig, ProjectionMode};
use synthsearch::metrics::CbaVariant;
use synthsearch::pipeline::Workspace;
use synthsearch::search::{Baseline, StrategyParams};

/// Fewer projections and smaller GA runs keep integration tests fast.
pub fn quick_params() -> StrategyParams {
    let mut p = StrategyParams::default();
    p.ga.population = 6;
    p
}

pub fn workspace(ds: &LabeledDataset, seed: u64) -> Workspace {
    Workspace::from_dataset(ds, &SplitRatios::default(), seed, EmbeddingConfig::default(), ProjectionMode::TopVariance(4))
        .expect("toy corpus prepares")
}

pub fn spec() -> ModelSpec {
    let mut s = ModelSpec::default();
    s.hyperparameters.insert("epochs".into(), "120".into());
    s
}

pub fn baseline(ws: &Workspace) -> Baseline {
    ws.baseline(&spec(), CbaVariant::Printed).unwrap()
}
