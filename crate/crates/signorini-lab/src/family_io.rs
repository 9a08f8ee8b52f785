//! Bellman family files: JSON with explicit ellipticity constants and
//! row-major member matrices. Construction re-runs the full family
//! validation, so a file that decodes cleanly can still be rejected
//! (asymmetry, eigenvalues outside [lambda, Lambda], lost dominance).

use std::path::Path;

use serde::{Deserialize, Serialize};
use signorini_core::linalg::SymMat;
use signorini_core::operators::{BellmanFamily, LinearOperator};

use crate::error::LabError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyFile {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub members: Vec<MemberFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberFile {
    /// Row-major n x n entries; n is inferred (4 -> 2D, 9 -> 3D).
    pub matrix: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

pub fn read_family(path: &Path) -> Result<BellmanFamily, LabError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::invalid(format!("family file {}: {e}", path.display())))?;
    let file: FamilyFile =
        serde_json::from_str(&text).map_err(|e| LabError::invalid(e.to_string()))?;
    if file.members.is_empty() {
        return Err(LabError::invalid("family file has no members"));
    }
    let n = match file.members[0].matrix.len() {
        4 => 2,
        9 => 3,
        k => {
            return Err(LabError::invalid(format!(
                "member matrix has {k} entries; expected 4 (2D) or 9 (3D)"
            )))
        }
    };
    let mut members = Vec::with_capacity(file.members.len());
    for (i, m) in file.members.iter().enumerate() {
        if m.matrix.len() != n * n {
            return Err(LabError::invalid(format!(
                "member {i} has inconsistent dimension"
            )));
        }
        let (matrix, sym_defect) = SymMat::from_row_major(n, &m.matrix);
        if sym_defect > 1e-12 {
            return Err(LabError::invalid(format!(
                "member {i} is not symmetric (defect {sym_defect:.3e})"
            )));
        }
        members.push(LinearOperator { matrix, c: m.c });
    }
    Ok(BellmanFamily::new(members, file.lambda, file.big_lambda)?)
}

pub fn write_family(path: &Path, family: &BellmanFamily) -> Result<(), LabError> {
    let n = family.n();
    let members = family
        .members()
        .iter()
        .map(|m| {
            let mut matrix = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    matrix.push(m.matrix.a[i][j]);
                }
            }
            MemberFile { matrix, c: m.c }
        })
        .collect();
    let file = FamilyFile {
        lambda: family.lambda,
        big_lambda: family.big_lambda,
        members,
    };
    let text = serde_json::to_string_pretty(&file).expect("static structure");
    crate::runner::write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_members() {
        let fam = BellmanFamily::new(
            vec![
                LinearOperator {
                    matrix: SymMat::from_row_major(2, &[1.5, 0.2, 0.2, 1.0]).0,
                    c: -0.3,
                },
                LinearOperator {
                    matrix: SymMat::identity(2),
                    c: 0.0,
                },
            ],
            0.8,
            1.7,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("family.json");
        write_family(&path, &fam).unwrap();
        let back = read_family(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.lambda, 0.8);
        assert_eq!(back.big_lambda, 1.7);
        for (a, b) in fam.members().iter().zip(back.members()) {
            assert_eq!(a.c, b.c);
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(a.matrix.a[i][j], b.matrix.a[i][j]);
                }
            }
        }
    }

    #[test]
    fn asymmetric_member_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("family.json");
        std::fs::write(
            &path,
            r#"{"lambda": 0.5, "Lambda": 2.0, "members": [{"matrix": [1.0, 0.3, 0.1, 1.0]}]}"#,
        )
        .unwrap();
        let err = read_family(&path).unwrap_err();
        assert!(err.message.contains("symmetric"), "{}", err.message);
    }

    #[test]
    fn wrong_entry_count_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("family.json");
        std::fs::write(
            &path,
            r#"{"lambda": 0.5, "Lambda": 2.0, "members": [{"matrix": [1.0, 0.0, 1.0]}]}"#,
        )
        .unwrap();
        assert!(read_family(&path).is_err());
    }
}
