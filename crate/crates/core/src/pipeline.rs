//! Glue from a labeled dataset to a ready-to-search workspace.

use thiserror::Error;

use crate::classifier::ModelSpec;
use crate::corpus::{stratified_split, CorpusError, LabeledDataset, Split, SplitRatios};
use crate::features::{dimension_variances, enumerate_projections, EmbeddingConfig, FeatureError, FeatureSpace, Projection, ProjectionMode};
use crate::metrics::CbaVariant;
use crate::search::{Baseline, SearchContext, SearchError, StrategyParams};
use crate::synthgen::{GenerationBudget, Generator, SyntheticBatch};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("optimization split required: the opt_test partition is empty")]
    NoOptimizationSplit,
}

/// A split with its fitted feature space and the projections to scan.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub split: Split,
    pub space: FeatureSpace,
    pub projections: Vec<Projection>,
}

impl Workspace {
    pub fn prepare(split: Split, embedding: EmbeddingConfig, mode: ProjectionMode) -> Result<Self, PipelineError> {
        if split.opt_test.is_empty() {
            return Err(PipelineError::NoOptimizationSplit);
        }
        let mut space = FeatureSpace::fit(&split.train, embedding)?;
        space.warm(&split.opt_test);
        space.warm(&split.holdout);
        let train_vectors = space.embed(&split.train);
        let variances = dimension_variances(train_vectors.values(), space.dims());
        let projections = enumerate_projections(space.dims(), mode, &variances)?;
        Ok(Workspace {
            split,
            space,
            projections,
        })
    }

    pub fn from_dataset(
        ds: &LabeledDataset,
        ratios: &SplitRatios,
        seed: u64,
        embedding: EmbeddingConfig,
        mode: ProjectionMode,
    ) -> Result<Self, PipelineError> {
        Workspace::prepare(stratified_split(ds, ratios, seed)?, embedding, mode)
    }

    pub fn baseline(&self, spec: &ModelSpec, variant: CbaVariant) -> Result<Baseline, SearchError> {
        Baseline::fit(&self.split, &self.space, spec, &[], variant)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn context<'a>(
        &'a self,
        spec: &'a ModelSpec,
        generator: &'a dyn Generator,
        params: &'a StrategyParams,
        gen_budget: GenerationBudget,
        variant: CbaVariant,
        extra_training: &'a [SyntheticBatch],
        baseline: &'a Baseline,
    ) -> SearchContext<'a> {
        SearchContext {
            split: &self.split,
            space: &self.space,
            spec,
            generator,
            projections: &self.projections,
            gen_budget,
            cba_variant: variant,
            params,
            extra_training,
            baseline,
        }
    }
}
