//! Flat `key = value` configuration text with `[section]` headers, plus the
//! typed views used by training and inference. Unknown keys are rejected so
//! typos fail loudly.

use crate::canny::CannyParams;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::model::ModelConfig;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Parsed configuration: section → key → raw value string.
#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::format(format!(
                    "line {}: expected `key = value` or `[section]`, got `{raw}`",
                    ln + 1
                )));
            };
            let prev = cfg
                .sections
                .entry(section.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
            if prev.is_some() {
                return Err(Error::format(format!(
                    "line {}: duplicate key `{}` in section `{section}`",
                    ln + 1,
                    key.trim()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    /// Serializes back to the text format (sections and keys sorted).
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (section, entries) in &self.sections {
            if !section.is_empty() {
                let _ = writeln!(out, "[{section}]");
            }
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// Errors if any present key is not in the allowed list for its section.
    pub fn reject_unknown(&self, allowed: &[(&str, &[&str])]) -> Result<()> {
        for (section, entries) in &self.sections {
            let keys = allowed
                .iter()
                .find(|(s, _)| s == section)
                .map(|(_, k)| *k)
                .ok_or_else(|| {
                    Error::format(format!("unknown config section `{section}`"))
                })?;
            for k in entries.keys() {
                if !keys.contains(&k.as_str()) {
                    return Err(Error::format(format!(
                        "unknown key `{k}` in section `[{section}]`; valid: {}",
                        keys.join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    fn typed<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        match self.get(section, key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::format(format!("[{section}] {key}: cannot parse `{raw}`"))
            }),
        }
    }

    fn list4(&self, section: &str, key: &str, default: [usize; 4]) -> Result<[usize; 4]> {
        let Some(raw) = self.get(section, key) else { return Ok(default) };
        let parts: Vec<usize> = raw
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(format!("[{section}] {key}: bad list `{raw}`")))?;
        parts
            .try_into()
            .map_err(|_| Error::format(format!("[{section}] {key}: expected 4 entries")))
    }
}

/// Keys understood by `model_config`, `loss_weights`, and `train_settings`.
pub const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "model",
        &["input_size", "stage_channels", "stage_depths", "n_filters", "c_edge", "seed"],
    ),
    ("loss", &["lambda", "alpha", "canny_sigma", "canny_low", "canny_high"]),
    (
        "train",
        &[
            "epochs",
            "batch_size",
            "lr",
            "lr_decay_every",
            "seed",
            "augment_flip",
            "augment_crop",
            "augment_rotate",
            "data_root",
        ],
    ),
];

/// The `[model]` section with paper defaults for anything absent.
pub fn model_config(cfg: &Config) -> Result<ModelConfig> {
    let d = ModelConfig::default();
    let mc = ModelConfig {
        input_size: cfg.typed("model", "input_size", d.input_size)?,
        stage_channels: cfg.list4("model", "stage_channels", d.stage_channels)?,
        stage_depths: cfg.list4("model", "stage_depths", d.stage_depths)?,
        n_filters: cfg.typed("model", "n_filters", d.n_filters)?,
        c_edge: cfg.typed("model", "c_edge", d.c_edge)?,
        seed: cfg.typed("model", "seed", d.seed)?,
    };
    mc.validate()?;
    Ok(mc)
}

/// Serializes a model configuration into a `[model]` section (the form the
/// checkpoint embeds).
pub fn render_model_config(mc: &ModelConfig) -> String {
    let mut cfg = Config::default();
    cfg.set("model", "input_size", mc.input_size);
    cfg.set("model", "stage_channels", join4(&mc.stage_channels));
    cfg.set("model", "stage_depths", join4(&mc.stage_depths));
    cfg.set("model", "n_filters", mc.n_filters);
    cfg.set("model", "c_edge", mc.c_edge);
    cfg.set("model", "seed", mc.seed);
    cfg.render()
}

fn join4(xs: &[usize; 4]) -> String {
    xs.map(|x| x.to_string()).join(",")
}

/// The `[loss]` section.
pub fn loss_weights(cfg: &Config) -> Result<LossWeights> {
    let d = LossWeights::default();
    let lambda = match cfg.get("loss", "lambda") {
        None => d.lambda,
        Some(raw) => {
            let parts: Vec<f64> = raw
                .split(',')
                .map(|p| p.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(format!("[loss] lambda: bad list `{raw}`")))?;
            parts
                .try_into()
                .map_err(|_| Error::format("[loss] lambda: expected 4 entries"))?
        }
    };
    let lw = LossWeights {
        lambda,
        alpha: cfg.typed("loss", "alpha", d.alpha)?,
        canny: CannyParams {
            sigma: cfg.typed("loss", "canny_sigma", d.canny.sigma)?,
            low: cfg.typed("loss", "canny_low", d.canny.low)?,
            high: cfg.typed("loss", "canny_high", d.canny.high)?,
        },
    };
    lw.validate()?;
    Ok(lw)
}
