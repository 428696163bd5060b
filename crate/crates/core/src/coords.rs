use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoordinatesError {
    #[error("repository owner must be non-empty and contain no '/'")]
    InvalidOwner,
    #[error("repository name must be non-empty and contain no '/'")]
    InvalidName,
}

/// Identifies a hosted repository.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RepoCoordinates {
    pub owner: String,
    pub name: String,
    pub clone_url: String,
    #[serde(default)]
    pub default_branch: Option<String>,
}

impl RepoCoordinates {
    /// Coordinates for a GitHub-hosted repository.
    pub fn github(owner: &str, name: &str) -> Result<Self, CoordinatesError> {
        let clone_url = format!("https://github.com/{owner}/{name}.git");
        Self::new(owner, name, clone_url)
    }

    pub fn new(owner: &str, name: &str, clone_url: String) -> Result<Self, CoordinatesError> {
        validate_segment(owner).map_err(|_| CoordinatesError::InvalidOwner)?;
        validate_segment(name).map_err(|_| CoordinatesError::InvalidName)?;
        Ok(Self {
            owner: owner.to_string(),
            name: name.to_string(),
            clone_url,
            default_branch: None,
        })
    }

    /// Directory name used in the artifact store: `{owner}__{name}`.
    pub fn store_key(&self) -> String {
        format!("{}__{}", self.owner, self.name)
    }

    pub fn slug(&self) -> String {
        format!("{}/{}", self.owner, self.name)
    }
}

fn validate_segment(segment: &str) -> Result<(), ()> {
    let trimmed = segment.trim();
    if trimmed.is_empty()
        || trimmed != segment
        || segment.contains('/')
        || segment.contains('\\')
        || segment == "."
        || segment == ".."
    {
        return Err(());
    }
    Ok(())
}
