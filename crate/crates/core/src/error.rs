use thiserror::Error;

use crate::model::{Lifecycle, SliceId};

/// Errors raised while building or validating domain values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// The document does not match the scenario schema.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// A value parsed but breaks one of its type's rules.
    #[error("{ty}: {rule}")]
    Invariant { ty: &'static str, rule: String },

    #[error("duplicate S-NSSAI {0}")]
    DuplicateSnssai(SliceId),

    #[error("illegal lifecycle transition {from:?} -> {to:?}")]
    IllegalTransition { from: Lifecycle, to: Lifecycle },

    #[error("unknown pool `{0}`")]
    UnknownPool(String),
}

impl ModelError {
    pub(crate) fn invariant(ty: &'static str, rule: impl Into<String>) -> Self {
        ModelError::Invariant {
            ty,
            rule: rule.into(),
        }
    }
}
