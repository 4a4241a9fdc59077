//! Model bundles: a trained ensemble plus everything needed to apply it.
//!
//! Bundles are JSON with reals written as shortest round-trip decimal
//! strings, so a bundle re-serializes byte-identically and predicts
//! bit-identically after loading.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{FeatureSchema, NormalizerParams, PreprocessStep};
use crate::error::{Error, Result};
use crate::tree::{DecisionTree, Ensemble, EnsembleKind, Node, NodeKind};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub ensemble: Ensemble,
    pub normalizer: NormalizerParams,
    pub schema: FeatureSchema,
    pub config: RunConfig,
    pub seed: u64,
    pub config_hash: String,
    pub preprocessing_log: Vec<PreprocessStep>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NodeJson {
    Split {
        f: usize,
        #[serde(with = "crate::real")]
        t: f64,
        #[serde(with = "crate::real")]
        cover: f64,
        l: Box<NodeJson>,
        r: Box<NodeJson>,
    },
    Leaf {
        #[serde(with = "crate::real")]
        v: f64,
        #[serde(with = "crate::real")]
        cover: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleJson {
    format_version: u32,
    kind: EnsembleKind,
    #[serde(with = "crate::real")]
    base_value: f64,
    trees: Vec<NodeJson>,
    normalizer: NormalizerParams,
    schema: FeatureSchema,
    config: RunConfig,
    seed: u64,
    config_hash: String,
    preprocessing_log: Vec<PreprocessStep>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

fn to_json_node(tree: &DecisionTree, i: usize) -> NodeJson {
    let node = &tree.nodes()[i];
    match node.kind {
        NodeKind::Leaf { value } => NodeJson::Leaf {
            v: value,
            cover: node.cover,
        },
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } => NodeJson::Split {
            f: feature,
            t: threshold,
            cover: node.cover,
            l: Box::new(to_json_node(tree, left)),
            r: Box::new(to_json_node(tree, right)),
        },
    }
}

fn from_json_node(json: NodeJson, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    match json {
        NodeJson::Leaf { v, cover } => nodes.push(Node::leaf(v, cover)),
        NodeJson::Split { f, t, cover, l, r } => {
            nodes.push(Node::leaf(0.0, cover));
            let left = from_json_node(*l, nodes);
            let right = from_json_node(*r, nodes);
            nodes[id] = Node::split(f, t, left, right, cover);
        }
    }
    id
}

impl ModelBundle {
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let d = self.schema.n_features();
        if let Some(j) = self.ensemble.max_feature() {
            if j >= d {
                return Err(Error::Schema(format!(
                    "bundle splits on feature {j} but its schema has {d} features"
                )));
            }
        }
        if self.normalizer.n_features() != d {
            return Err(Error::Schema(format!(
                "bundle normalizer covers {} features, schema has {d}",
                self.normalizer.n_features()
            )));
        }
        if self.config.model.ensemble_kind() != self.ensemble.kind {
            return Err(Error::Schema(
                "bundle config and ensemble kind disagree".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let json = BundleJson {
            format_version: FORMAT_VERSION,
            kind: self.ensemble.kind,
            base_value: self.ensemble.base_value,
            trees: self
                .ensemble
                .trees
                .iter()
                .map(|t| to_json_node(t, 0))
                .collect(),
            normalizer: self.normalizer.clone(),
            schema: self.schema.clone(),
            config: self.config.clone(),
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            preprocessing_log: self.preprocessing_log.clone(),
        };
        let mut s = serde_json::to_string(&json).map_err(|e| Error::json("bundle", &e))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = deserialize_deep(text)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: probe.format_version,
                supported: FORMAT_VERSION,
            });
        }
        let json: BundleJson = deserialize_deep(text)?;
        let trees = json
            .trees
            .into_iter()
            .map(|root| {
                let mut nodes = Vec::new();
                from_json_node(root, &mut nodes);
                DecisionTree::from_nodes(nodes)
            })
            .collect::<Result<Vec<_>>>()?;
        let bundle = ModelBundle {
            ensemble: Ensemble::new(json.kind, trees, json.base_value)?,
            normalizer: json.normalizer,
            schema: json.schema,
            config: json.config,
            seed: json.seed,
            config_hash: json.config_hash,
            preprocessing_log: json.preprocessing_log,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

/// Trees may nest deeper than serde_json's default recursion limit.
fn deserialize_deep<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let value = T::deserialize(&mut de).map_err(|e| Error::json("bundle", &e))?;
    de.end().map_err(|e| Error::json("bundle", &e))?;
    Ok(value)
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    bundle.validate()?;
    fs::write(path, bundle.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelBundle::from_json(&text)
}
