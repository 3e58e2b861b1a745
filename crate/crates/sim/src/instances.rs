//! Built-in Beta instances and JSON instance files.
//!
//! An instance file lists arms best-first:
//!
//! ```json
//! {"arms": [{"type": "beta", "a": 3, "b": 1.3}, {"type": "bernoulli", "p": 0.4}]}
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use onebit_core::{ArmDistribution, EngineError, Instance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("unknown built-in instance {0}; expected 1, 2, 3 or 4")]
    UnknownId(u32),
    #[error("cannot read instance file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid instance: {0}")]
    Invalid(#[from] EngineError),
}

impl InstanceError {
    pub fn is_io(&self) -> bool {
        matches!(self, InstanceError::Io { .. })
    }
}

const BUILTIN: [([f64; 5], [f64; 5]); 4] = [
    ([3.0, 1.3, 1.3, 1.3, 1.3], [1.3, 3.0, 3.0, 3.0, 3.0]),
    ([3.0, 3.0, 2.7, 2.0, 1.3], [1.3, 2.0, 2.7, 3.0, 3.0]),
    ([3.0, 3.0, 3.0, 3.0, 3.0], [1.3, 2.0, 2.0, 2.0, 2.0]),
    ([2.0, 1.3, 1.3, 1.3, 1.3], [3.0, 3.0, 3.0, 3.0, 3.0]),
];

/// The four five-armed Beta instances, numbered 1 to 4.
pub fn builtin_instance(id: u32) -> Result<Instance, InstanceError> {
    let (a, b) = usize::try_from(id)
        .ok()
        .and_then(|i| i.checked_sub(1))
        .and_then(|i| BUILTIN.get(i))
        .ok_or(InstanceError::UnknownId(id))?;
    let arms = a
        .iter()
        .zip(b)
        .map(|(&a, &b)| ArmDistribution::Beta { a, b })
        .collect();
    Ok(Instance::new(arms)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub arms: Vec<ArmDistribution>,
}

pub fn parse_instance(json: &str, path: &Path) -> Result<Instance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(json).map_err(|source| InstanceError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Instance::new(file.arms)?)
}

pub fn load_instance_file(path: &Path) -> Result<Instance, InstanceError> {
    let json = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance(&json, path)
}

/// Where an instance came from, as echoed into experiment metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceSource {
    Builtin(u32),
    File(PathBuf),
}

impl InstanceSource {
    /// `"1"`..`"4"` select a built-in; anything else is a path.
    pub fn parse(arg: &str) -> InstanceSource {
        match arg.parse::<u32>() {
            Ok(id) => InstanceSource::Builtin(id),
            Err(_) => InstanceSource::File(PathBuf::from(arg)),
        }
    }

    pub fn load(&self) -> Result<Instance, InstanceError> {
        match self {
            InstanceSource::Builtin(id) => builtin_instance(*id),
            InstanceSource::File(path) => load_instance_file(path),
        }
    }
}

impl fmt::Display for InstanceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceSource::Builtin(id) => write!(f, "{id}"),
            InstanceSource::File(path) => write!(f, "{}", path.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_means() {
        let one = builtin_instance(1).unwrap();
        assert_eq!(one.num_arms(), 5);
        assert!((one.means()[0] - 3.0 / 4.3).abs() < 1e-15);
        assert!(one.means()[1..].iter().all(|&m| (m - 1.3 / 4.3).abs() < 1e-15));
        assert_eq!(builtin_instance(2).unwrap().means()[2], 0.5);
        assert_eq!(builtin_instance(4).unwrap().means()[0], 0.4);
        let three = builtin_instance(3).unwrap();
        assert!((three.means()[0] - 3.0 / 4.3).abs() < 1e-15);
        assert_eq!(three.means()[1], 0.6);
    }

    #[test]
    fn unknown_ids() {
        for id in [0, 5, 99] {
            assert!(matches!(builtin_instance(id), Err(InstanceError::UnknownId(_))));
        }
    }

    #[test]
    fn parses_all_arm_types() {
        let json = r#"{"arms": [
            {"type": "beta", "a": 3, "b": 1.3},
            {"type": "bernoulli", "p": 0.5},
            {"type": "fixed", "values": [0.0, 0.5]}
        ]}"#;
        let inst = parse_instance(json, Path::new("x.json")).unwrap();
        assert_eq!(inst.means(), &[3.0 / 4.3, 0.5, 0.25]);
    }

    #[test]
    fn unsorted_means_rejected() {
        let json = r#"{"arms": [{"type": "bernoulli", "p": 0.3}, {"type": "bernoulli", "p": 0.6}]}"#;
        let err = parse_instance(json, Path::new("x.json")).unwrap_err();
        assert!(matches!(err, InstanceError::Invalid(EngineError::MeanOrdering { .. })));
        assert!(err.to_string().contains("mu_2 < mu_1"), "{err}");
    }

    #[test]
    fn bad_json_and_params() {
        assert!(matches!(
            parse_instance("{\"arms\": [{\"type\": \"gauss\"}]}", Path::new("x")),
            Err(InstanceError::Parse { .. })
        ));
        let json = r#"{"arms": [{"type": "beta", "a": -1, "b": 1}, {"type": "bernoulli", "p": 0.1}]}"#;
        assert!(matches!(
            parse_instance(json, Path::new("x")),
            Err(InstanceError::Invalid(EngineError::InvalidArm { index: 0, .. }))
        ));
        let err = load_instance_file(Path::new("/nonexistent/inst.json")).unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn source_parsing() {
        assert_eq!(InstanceSource::parse("3"), InstanceSource::Builtin(3));
        assert_eq!(
            InstanceSource::parse("inst.json"),
            InstanceSource::File(PathBuf::from("inst.json"))
        );
    }
}
