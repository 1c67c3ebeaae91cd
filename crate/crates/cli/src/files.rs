use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use spatial_core::eval::read_jsonl;
use spatial_core::geometry::DepthMap;
use spatial_core::scene::io::{load_scene, resolve_ref};
use spatial_core::scene::SceneFrame;
use spatial_core::Error;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn jsonl<T: serde::Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    Ok(read_jsonl(path)?)
}

/// A validated scene plus its depth map.
pub struct LoadedScene {
    pub path: PathBuf,
    pub frame: SceneFrame,
    pub depth: DepthMap,
}

pub fn load_with_depth(path: &Path) -> anyhow::Result<LoadedScene> {
    let frame = load_scene(path)?;
    let depth_path = resolve_ref(path, &frame.depth_ref);
    if !depth_path.is_file() {
        return Err(Error::Usage(format!("missing depth file {}", depth_path.display())).into());
    }
    let depth = DepthMap::load(&depth_path)?;
    let k = &frame.intrinsics;
    if (depth.width(), depth.height()) != (k.width, k.height) {
        return Err(Error::Validation {
            field: "depth_ref".into(),
            reason: format!(
                "{} is {}x{}, intrinsics say {}x{}",
                depth_path.display(),
                depth.width(),
                depth.height(),
                k.width,
                k.height
            ),
        }
        .into());
    }
    Ok(LoadedScene {
        path: path.to_path_buf(),
        frame,
        depth,
    })
}

/// Explicit scene files followed by the sorted `*.json` files of `dir`.
pub fn scene_paths(explicit: &[PathBuf], dir: Option<&Path>) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = explicit.to_vec();
    if let Some(dir) = dir {
        let mut found = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
            let p = entry.map_err(|e| io_err(dir, e))?.path();
            if p.extension().is_some_and(|e| e == "json") {
                found.push(p);
            }
        }
        found.sort();
        out.extend(found);
    }
    if out.is_empty() {
        return Err(Error::Usage("no scenes given; pass --scene or --scenes-dir".into()).into());
    }
    Ok(out)
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| io_err(dir, e))
        .with_context(|| format!("creating {}", dir.display()))
}
