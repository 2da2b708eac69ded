//! Named operators loaded from `<Name>.schema.json` files.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use thiserror::Error;

use super::{individual, Operator};
use crate::schema::{parse_schema, SchemaError};
use crate::toyml::ImplKind;

/// The schema documents shipped with the crate, by operator name.
pub const BUNDLED_SCHEMAS: &[(&str, &str)] = &[
    (
        "BoostedEnsemble",
        include_str!("../../schemas/BoostedEnsemble.schema.json"),
    ),
    ("Concat", include_str!("../../schemas/Concat.schema.json")),
    (
        "DecisionStump",
        include_str!("../../schemas/DecisionStump.schema.json"),
    ),
    ("J48", include_str!("../../schemas/J48.schema.json")),
    ("KNN", include_str!("../../schemas/KNN.schema.json")),
    ("LR", include_str!("../../schemas/LR.schema.json")),
    (
        "LogRegGD",
        include_str!("../../schemas/LogRegGD.schema.json"),
    ),
    (
        "MinMaxScaler",
        include_str!("../../schemas/MinMaxScaler.schema.json"),
    ),
    ("NoOp", include_str!("../../schemas/NoOp.schema.json")),
    ("PCA", include_str!("../../schemas/PCA.schema.json")),
    (
        "PrunedTree",
        include_str!("../../schemas/PrunedTree.schema.json"),
    ),
    ("SVM", include_str!("../../schemas/SVM.schema.json")),
    ("Scaler", include_str!("../../schemas/Scaler.schema.json")),
    (
        "SelectKVariance",
        include_str!("../../schemas/SelectKVariance.schema.json"),
    ),
    (
        "StandardScaler",
        include_str!("../../schemas/StandardScaler.schema.json"),
    ),
];

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema for {name}: {source}")]
    Schema {
        name: String,
        #[source]
        source: SchemaError,
    },
    #[error("{0} contains no *.schema.json files")]
    Empty(PathBuf),
}

/// Maps operator names to planned operators.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    entries: IndexMap<String, Operator>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// The schemas shipped with the crate.
    pub fn bundled() -> Self {
        let mut registry = Registry::new();
        for (name, text) in BUNDLED_SCHEMAS {
            registry
                .add_schema_text(name, text)
                .expect("bundled schemas are valid");
        }
        registry
    }

    /// Every `<Name>.schema.json` in `dir`, in file-name order.
    pub fn from_dir(dir: &Path) -> Result<Self, RegistryError> {
        let io = |source| RegistryError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_str().is_some_and(|s| s.ends_with(".schema.json")))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(RegistryError::Empty(dir.to_path_buf()));
        }
        let mut registry = Registry::new();
        for path in files {
            let file_name = path
                .file_name()
                .and_then(|s| s.to_str())
                .unwrap_or_default();
            let name = file_name.trim_end_matches(".schema.json").to_string();
            let text = std::fs::read_to_string(&path).map_err(|source| RegistryError::Io {
                path: path.clone(),
                source,
            })?;
            registry.add_schema_text(&name, &text)?;
        }
        Ok(registry)
    }

    /// Registers an operator from schema text; a native implementation is
    /// attached when one exists for the name.
    pub fn add_schema_text(&mut self, name: &str, text: &str) -> Result<(), RegistryError> {
        let schema = parse_schema(text).map_err(|source| RegistryError::Schema {
            name: name.to_string(),
            source,
        })?;
        self.insert(individual(name, schema, ImplKind::for_operator(name)));
        Ok(())
    }

    /// Registers (or replaces) an operator under its own name.
    pub fn insert(&mut self, op: Operator) {
        self.entries.insert(op.name().to_string(), op);
    }

    pub fn get(&self, name: &str) -> Option<&Operator> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_schemas_parse_and_bind() {
        let registry = Registry::bundled();
        let j48 = registry.get("J48").unwrap().as_individual().unwrap();
        assert_eq!(j48.implementation(), Some(ImplKind::PrunedTree));
        assert!(registry
            .get("PCA")
            .unwrap()
            .as_individual()
            .unwrap()
            .implementation()
            .is_none());
        assert_eq!(registry.names().count(), BUNDLED_SCHEMAS.len());
    }

    #[test]
    fn directory_matches_bundled() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
        let from_dir = Registry::from_dir(&dir).unwrap();
        let bundled = Registry::bundled();
        for name in bundled.names() {
            assert_eq!(from_dir.get(name), bundled.get(name), "{name}");
        }
    }
}
