//! Directory datasets: `<root>/<category>/<image file>`, one seed per image.
//!
//! The sample id is `<category>/<file stem>`.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::imaging;
use crate::model::{validate_dataset, CategorySet, SampleId, SeedSample, ValidationReport};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "webp", "gif"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Lists every image under the category subdirectories of `root`, sorted by id.
/// Category names are not checked here; see [`validate`].
pub fn load_dir(root: &Path) -> Result<Vec<SeedSample>, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::NotADirectory(root.to_path_buf()));
    }
    let mut samples = Vec::new();
    for cat in fs::read_dir(root).map_err(io(root))? {
        let cat = cat.map_err(io(root))?;
        let cat_path = cat.path();
        if !cat_path.is_dir() {
            continue;
        }
        let category = cat.file_name().to_string_lossy().into_owned();
        for file in fs::read_dir(&cat_path).map_err(io(&cat_path))? {
            let path = file.map_err(io(&cat_path))?.path();
            if !path.is_file() || !is_image(&path) {
                continue;
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            samples.push(SeedSample {
                id: SampleId::new(format!("{category}/{stem}")),
                category: category.as_str().into(),
                image_ref: path.to_string_lossy().into_owned(),
            });
        }
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.image_ref.cmp(&b.image_ref)));
    Ok(samples)
}

pub fn read_image(sample: &SeedSample) -> std::io::Result<Vec<u8>> {
    fs::read(&sample.image_ref)
}

/// Loads and validates a directory dataset against a category set.
pub fn validate(root: &Path, categories: &CategorySet) -> Result<(Vec<SeedSample>, ValidationReport), DatasetError> {
    let samples = load_dir(root)?;
    let report = validate_dataset(&samples, categories, |s| {
        read_image(s).is_ok_and(|b| imaging::header_readable(&b))
    });
    Ok((samples, report))
}
