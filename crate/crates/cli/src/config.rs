//! Key-value configuration files and flag/file/default resolution.
//!
//! Format: one `key = value` per line, `#` starts a comment, blank lines are
//! ignored. Keys are the long flag names with `-` replaced by `_`, so
//! `--rho-co 0.2` and `rho_co = 0.2` mean the same thing. One file may carry
//! keys for several subcommands.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Every key any subcommand accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "annotations",
    "box_jitter",
    "classes_per_scene",
    "context_threshold",
    "contextual_fp",
    "csv",
    "dataset",
    "detections",
    "drop_empty",
    "first_image_id",
    "fp_rate",
    "ground_truth",
    "height",
    "id_policy",
    "image_list",
    "images",
    "interpolation",
    "iou_thresholds",
    "labels",
    "logit_scale",
    "match_iou",
    "matrix",
    "max_detections",
    "max_objects",
    "min_objects",
    "nms",
    "nms_iou",
    "orientation",
    "out",
    "p_correct",
    "p_detect",
    "prior",
    "report",
    "rho",
    "rho_co",
    "rho_co_values",
    "rho_values",
    "scenes",
    "seed",
    "smoothing",
    "source_tag",
    "strict_coco",
    "top_k",
    "truth",
    "use_cooccurrence",
    "width",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key `{key}`", n + 1));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: key `{key}` given twice", n + 1));
            }
        }
        Ok(Self { values })
    }
}

/// Resolves options with precedence flag > config file > default and
/// records the effective values for `--print-config`.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    effective: BTreeMap<&'static str, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Self {
            file,
            effective: BTreeMap::new(),
        }
    }

    fn file_value<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.file.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`: {e}"))),
        }
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &'static str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &value {
            self.effective.insert(key, v.to_string());
        }
        Ok(value)
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &'static str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let value = self.optional(key, flag)?.unwrap_or(default);
        self.effective.insert(key, value.to_string());
        Ok(value)
    }

    /// A boolean switch: the flag can only turn it on, the file may set either.
    pub fn switch(&mut self, key: &'static str, flag: bool, default: bool) -> Result<bool, CliError> {
        let value = if flag { true } else { self.file_value(key)?.unwrap_or(default) };
        self.effective.insert(key, value.to_string());
        Ok(value)
    }

    pub fn path(&mut self, key: &'static str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        let value = match flag {
            Some(p) => Some(p),
            None => self.file.values.get(key).map(PathBuf::from),
        };
        if let Some(p) = &value {
            self.effective.insert(key, p.display().to_string());
        }
        Ok(value)
    }

    pub fn required_path(&mut self, key: &'static str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        self.path(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required option --{}", key.replace('_', "-"))))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + Display + Clone>(&mut self, key: &'static str, flag: Option<String>, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let raw = match flag {
            Some(v) => Some(v),
            None => self.file.values.get(key).cloned(),
        };
        let values = match raw {
            None => default.to_vec(),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|e| CliError::Usage(format!("`{key}`: cannot parse `{s}`: {e}")))
                })
                .collect::<Result<Vec<T>, _>>()?,
        };
        let shown: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.effective.insert(key, shown.join(","));
        Ok(values)
    }

    /// Effective configuration in the config file format.
    pub fn dump(&self) -> String {
        self.effective.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
