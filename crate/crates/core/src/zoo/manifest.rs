use serde::{Deserialize, Serialize};

use crate::nn::{LayerSpec, ModelSpec, ParameterBundle};
use crate::zoo::models::{build_model, Derivation, ModelName};
use crate::Result;

/// One row of the zoo manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub status: Derivation,
    pub expected_params: usize,
    pub computed_params: usize,
    pub input_len: usize,
    pub input_channels: usize,
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ManifestEntry {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            name: self.name.clone(),
            input_len: self.input_len,
            input_channels: self.input_channels,
            num_classes: self.num_classes,
            layers: self.layers.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooManifest {
    pub models: Vec<ManifestEntry>,
}

/// The shipped zoo with computed counts filled in.
pub fn zoo_manifest() -> ZooManifest {
    ZooManifest {
        models: ModelName::ALL
            .into_iter()
            .map(|name| {
                let spec = build_model(name);
                ManifestEntry {
                    computed_params: spec.param_count().expect("zoo specs are valid"),
                    name: spec.name,
                    status: name.status(),
                    expected_params: name.expected_params(),
                    input_len: spec.input_len,
                    input_channels: spec.input_channels,
                    num_classes: spec.num_classes,
                    layers: spec.layers,
                }
            })
            .collect(),
    }
}

/// Result of recounting one manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub name: String,
    pub status: Derivation,
    pub expected: usize,
    /// Closed-form count; `None` if the spec does not shape-propagate.
    pub computed: Option<usize>,
    /// Scalars in an instantiated parameter bundle.
    pub allocated: Option<usize>,
    pub delta: Option<i64>,
    pub matches: bool,
    /// Mismatches on described or reconstructed models are hard
    /// failures; a searched model only reports its delta.
    pub hard_failure: bool,
    pub error: Option<String>,
}

pub fn verify_manifest(manifest: &ZooManifest) -> Vec<CountRow> {
    manifest
        .models
        .iter()
        .map(|e| {
            let spec = e.spec();
            let counted: Result<(usize, usize)> = spec
                .param_count()
                .and_then(|c| Ok((c, ParameterBundle::zeros(&spec)?.scalar_count())));
            let (computed, allocated, error) = match counted {
                Ok((c, a)) => (Some(c), Some(a), None),
                Err(err) => (None, None, Some(err.to_string())),
            };
            let delta = computed.map(|c| c as i64 - e.expected_params as i64);
            let matches = delta == Some(0) && allocated == computed;
            let hard_failure = !matches && (e.status != Derivation::Searched || computed.is_none());
            CountRow {
                name: e.name.clone(),
                status: e.status,
                expected: e.expected_params,
                computed,
                allocated,
                delta,
                matches,
                hard_failure,
                error,
            }
        })
        .collect()
}

/// [`verify_manifest`] on the shipped zoo.
pub fn verify_param_counts() -> Vec<CountRow> {
    verify_manifest(&zoo_manifest())
}
