//! One error currency for the whole binary: a machine-readable kind plus a
//! human message. Every failure path ends up as the JSON record
//! `{"error":{"kind":...,"message":...}}` on stderr and a nonzero exit.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabError {
    pub kind: String,
    pub message: String,
}

impl LabError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        LabError {
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new("invalid-spec", message)
    }

    pub fn incomplete(message: impl Into<String>) -> Self {
        Self::new("incomplete-run", message)
    }

    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "kind": self.kind, "message": self.message } })
    }
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for LabError {}

/// Core errors render as "kind: detail"; keep only the detail here since the
/// kind travels in its own field.
fn detail(kind: &str, rendered: String) -> String {
    rendered
        .strip_prefix(kind)
        .and_then(|r| r.strip_prefix(": "))
        .map(str::to_string)
        .unwrap_or(rendered)
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::new("io", e.to_string())
    }
}

impl From<signorini_core::grid::GridError> for LabError {
    fn from(e: signorini_core::grid::GridError) -> Self {
        // grid construction rejects only malformed specs (even N, bad dimension)
        LabError::new("invalid-spec", e.message())
    }
}

impl From<signorini_core::operators::OperatorError> for LabError {
    fn from(e: signorini_core::operators::OperatorError) -> Self {
        LabError::new(e.kind(), e.message())
    }
}

impl From<signorini_core::solver::SolveError> for LabError {
    fn from(e: signorini_core::solver::SolveError) -> Self {
        LabError::new(e.kind(), detail(e.kind(), e.to_string()))
    }
}

impl From<signorini_core::regularity::RegularityError> for LabError {
    fn from(e: signorini_core::regularity::RegularityError) -> Self {
        LabError::new(e.kind(), detail(e.kind(), e.to_string()))
    }
}

impl From<signorini_core::oracle::OracleError> for LabError {
    fn from(e: signorini_core::oracle::OracleError) -> Self {
        LabError::new(e.kind(), detail(e.kind(), e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_is_machine_readable() {
        let e = LabError::new("invalid-spec", "grid size must be odd");
        let v = e.record();
        assert_eq!(v["error"]["kind"], "invalid-spec");
        assert_eq!(v["error"]["message"], "grid size must be odd");
        assert_eq!(e.to_string(), "invalid-spec: grid size must be odd");
    }

    #[test]
    fn detail_strips_one_kind_prefix() {
        assert_eq!(
            detail("invalid-spec", "invalid-spec: message".into()),
            "message"
        );
        assert_eq!(
            detail("invalid-spec", "plain message".into()),
            "plain message"
        );
    }

    #[test]
    fn grid_errors_map_to_invalid_spec() {
        let err: LabError = signorini_core::grid::build_grid(2, 64)
            .map(|_| ())
            .unwrap_err()
            .into();
        assert_eq!(err.kind, "invalid-spec");
        assert!(err.message.contains("odd"));
    }

    #[test]
    fn transform_errors_keep_their_kind() {
        use signorini_core::linalg::SymMat;
        use signorini_core::operators::{normalize_family, BellmanFamily, LinearOperator};
        let fam = BellmanFamily::new(
            vec![
                LinearOperator {
                    matrix: SymMat::from_row_major(2, &[1.0, 0.95, 0.95, 1.0]).0,
                    c: 0.0,
                },
                LinearOperator {
                    matrix: SymMat::from_row_major(2, &[0.05, 0.0, 0.0, 2.0]).0,
                    c: 0.0,
                },
            ],
            0.05,
            3.0,
        )
        .unwrap();
        let err: LabError = normalize_family(&fam, 0).unwrap_err().into();
        assert_eq!(err.kind, "non-monotone-after-transform");
    }
}
