use crate::model::{AttributeKind, Configuration, RuleKind};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("component {component} does not exist in configuration {config}")]
    InvalidComponent { config: Configuration, component: usize },

    #[error("rule {kind:?} is not applicable to {attribute:?} in component {component} of {config}")]
    NotApplicable {
        config: Configuration,
        component: usize,
        attribute: AttributeKind,
        kind: RuleKind,
    },

    #[error("invalid rule value for {kind:?}: {detail}")]
    InvalidRuleValue { kind: RuleKind, detail: String },

    #[error("generation exhausted after {attempts} attempts: {reason}")]
    GenerationExhausted { attempts: u32, reason: &'static str },

    #[error("invalid generator configuration: {0}")]
    InvalidGeneratorConfig(String),

    #[error("rows 1 and 2 agree on no rule")]
    NoConsistentRules,

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("class label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {loss}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },

    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("training labels are degenerate: class {class} absent for {key}")]
    DegenerateLabels { key: String, class: usize },

    #[error("no trained network for {0}")]
    MissingNet(String),

    #[error("model missing for this mode: {0}")]
    MissingModel(&'static str),

    #[error("configuration mismatch: expected {expected}, found {found}")]
    ConfigMismatch {
        expected: Configuration,
        found: Configuration,
    },

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
