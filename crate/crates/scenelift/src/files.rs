//! Structured-text files: scene (JSON), intrinsics, categories, robot profiles, property
//! tables and the pipeline configuration (TOML, or JSON by extension).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use scenelift_core::align::RansacConfig;
use scenelift_core::background::BackgroundBuildConfig;
use scenelift_core::camera::Intrinsics;
use scenelift_core::composite::BlendConfig;
use scenelift_core::placement::RobotProfile;
use scenelift_core::properties::PropertyTable;
use scenelift_core::registration::IcpConfig;
use scenelift_core::scene::SceneConfig;

use crate::error::{Error, Result};
use crate::raster_io::ensure_parent;

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses TOML, or JSON when the extension is `.json`.
pub fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    if is_json(path) {
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    } else {
        toml::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let s = toml::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_scene(path: &Path) -> Result<SceneConfig> {
    let text = read_text(path)?;
    let scene: SceneConfig = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    scene.validate()?;
    Ok(scene)
}

pub fn read_intrinsics(path: &Path) -> Result<Intrinsics> {
    let k: Intrinsics = read_structured(path)?;
    k.validate().map_err(|e| Error::format(path, e))?;
    Ok(k)
}

/// `{ "<id>" = "<category>" }`.
pub fn read_categories(path: &Path) -> Result<BTreeMap<u16, String>> {
    let raw: BTreeMap<String, String> = read_structured(path)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<u16>()
                .map(|id| (id, v))
                .map_err(|_| Error::format(path, format!("`{k}` is not an instance id")))
        })
        .collect()
}

/// A preset name (`tabletop-arm`, `humanoid`) or a profile file.
pub fn load_profile(name: &str) -> Result<RobotProfile> {
    if let Some(p) = RobotProfile::preset(name) {
        return Ok(p);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Error::Config(format!("`{name}` is neither a robot preset nor a profile file")));
    }
    let p: RobotProfile = read_structured(path)?;
    p.validate()?;
    Ok(p)
}

/// The built-in table, extended or overridden by `extra` (`[entries."<category>"]` blocks).
pub fn load_property_table(extra: Option<&Path>) -> Result<PropertyTable> {
    let base = PropertyTable::builtin();
    match extra {
        Some(p) => Ok(base.merged(read_structured(p)?)),
        None => Ok(base),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub image: Option<PathBuf>,
    pub depth: Option<PathBuf>,
    pub intrinsics: Option<PathBuf>,
    /// Instance-mask raster.
    pub masks: Option<PathBuf>,
    pub ground_mask: Option<PathBuf>,
    /// Object-free image; colors the background mesh when given.
    pub background_image: Option<PathBuf>,
    /// Holds `object_<id>.obj` (or `<id>.obj`) per instance.
    pub mesh_dir: Option<PathBuf>,
    pub categories: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSection {
    /// Preset name or profile file.
    pub profile: String,
    pub samples: usize,
    pub margin: f64,
}

impl Default for RobotSection {
    fn default() -> Self {
        RobotSection {
            profile: "tabletop-arm".into(),
            samples: 2000,
            margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertiesSection {
    /// Extra category table merged over the built-in one.
    pub table: Option<PathBuf>,
    /// Remote estimator URL; the `SCENELIFT_PROPERTY_ENDPOINT` variable is used when unset.
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Propagated to every stochastic stage.
    pub seed: u64,
    pub paths: Paths,
    pub ransac: RansacConfig,
    pub icp: IcpConfig,
    pub background: BackgroundBuildConfig,
    pub blend: BlendConfig,
    pub robot: RobotSection,
    pub properties: PropertiesSection,
}

impl PipelineConfig {
    /// Loads a config file; relative paths in it are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = read_structured(path)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.rebase(&base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.image,
            &mut p.depth,
            &mut p.intrinsics,
            &mut p.masks,
            &mut p.ground_mask,
            &mut p.background_image,
            &mut p.mesh_dir,
            &mut p.categories,
            &mut p.output,
        ] {
            if let Some(v) = slot.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        if let Some(v) = self.properties.table.as_mut() {
            if v.is_relative() {
                *v = base.join(&*v);
            }
        }
    }

    /// Every path that recovery needs, checked for existence before any compute.
    pub fn recover_paths(&self) -> Result<RecoverPaths> {
        let p = &self.paths;
        let required = [
            (&p.image, "image"),
            (&p.depth, "depth"),
            (&p.intrinsics, "intrinsics"),
            (&p.masks, "masks"),
            (&p.mesh_dir, "mesh_dir"),
            (&p.output, "output"),
        ];
        let missing: Vec<&str> = required.iter().filter(|(v, _)| v.is_none()).map(|(_, n)| *n).collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("required paths not set: {}", missing.join(", "))));
        }
        let exists = |v: &Option<PathBuf>| -> Result<Option<PathBuf>> {
            match v {
                Some(v) if !v.exists() => Err(Error::io(v, std::io::Error::from(std::io::ErrorKind::NotFound))),
                other => Ok(other.clone()),
            }
        };
        let need = |v: &Option<PathBuf>| exists(v).map(|v| v.expect("checked above"));
        Ok(RecoverPaths {
            image: need(&p.image)?,
            depth: need(&p.depth)?,
            intrinsics: need(&p.intrinsics)?,
            masks: need(&p.masks)?,
            mesh_dir: need(&p.mesh_dir)?,
            ground_mask: exists(&p.ground_mask)?,
            background_image: exists(&p.background_image)?,
            categories: exists(&p.categories)?,
            output: p.output.clone().expect("checked above"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverPaths {
    pub image: PathBuf,
    pub depth: PathBuf,
    pub intrinsics: PathBuf,
    pub masks: PathBuf,
    pub mesh_dir: PathBuf,
    pub ground_mask: Option<PathBuf>,
    pub background_image: Option<PathBuf>,
    pub categories: Option<PathBuf>,
    pub output: PathBuf,
}

/// `object_<id>.obj`, falling back to `<id>.obj`.
pub fn find_object_mesh(dir: &Path, id: u16) -> Option<PathBuf> {
    [format!("object_{id}.obj"), format!("{id}.obj")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
}
