use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array_model::ArrayConfig;
use crate::cube_pipeline::{ApertureSplit, CfarParams};
use crate::evaluation::StudyConfig;
use crate::extrapolator::TrainConfig;
use crate::scene_sim::{SimParams, SplitFractions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 86-element array, 44 inner elements, 128 hidden units.
    Paper,
    /// 32-element array, 16 inner elements, 64 hidden units.
    Desk,
}

/// Everything a command needs. JSON config files use these field names;
/// missing fields take the `paper` preset values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub large_elements: usize,
    pub small_elements: usize,
    pub spacing_wavelengths: f64,
    pub hidden_size: usize,
    pub sim: SimParams,
    pub split: SplitFractions,
    pub train: TrainConfig,
    pub study: StudyConfig,
    pub cfar: CfarParams,
    pub master_seed: u64,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Paper)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (m, l, hidden) = match preset {
            Preset::Paper => (86, 44, 128),
            Preset::Desk => (32, 16, 64),
        };
        Self {
            large_elements: m,
            small_elements: l,
            spacing_wavelengths: 0.5,
            hidden_size: hidden,
            sim: SimParams::default(),
            split: SplitFractions::default(),
            train: TrainConfig::default(),
            study: StudyConfig::default(),
            cfar: CfarParams::default(),
            master_seed: 0,
            dataset: None,
            model: None,
        }
    }

    /// Config file layered over a preset: keys present in the file win.
    pub fn load(path: &Path, preset: Preset) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut base = serde_json::to_value(Self::preset(preset)).expect("config serializes");
        merge(&mut base, file);
        serde_json::from_value(base).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Rejects odd or empty outer parts, `L >= M` and empty SNR sets before
    /// any work starts.
    pub fn validate(&self) -> Result<()> {
        self.aperture_split()?;
        self.large_array()?;
        if self.hidden_size == 0 {
            return Err(Error::Config("hidden size must be at least 1".into()));
        }
        self.sim.validate()?;
        self.split.validate()?;
        self.train.validate()?;
        self.study.validate()?;
        self.cfar.validate()?;
        Ok(())
    }

    pub fn aperture_split(&self) -> Result<ApertureSplit> {
        ApertureSplit::new(self.large_elements, self.small_elements)
    }

    pub fn large_array(&self) -> Result<ArrayConfig> {
        ArrayConfig::new(self.large_elements, self.spacing_wavelengths)
    }
}

/// Recursive JSON object merge; non-object values replace.
fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let p = RunConfig::preset(Preset::Paper);
        assert_eq!((p.large_elements, p.small_elements, p.hidden_size), (86, 44, 128));
        let d = RunConfig::preset(Preset::Desk);
        assert_eq!((d.large_elements, d.small_elements, d.hidden_size), (32, 16, 64));
        assert_eq!(d.sim.snr_set_db, p.sim.snr_set_db);
        p.validate().unwrap();
        d.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_geometry_and_empty_snr_set() {
        let mut c = RunConfig::preset(Preset::Desk);
        c.small_elements = 15;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.small_elements = 32;
        assert!(c.validate().is_err());
        c.small_elements = 40;
        assert!(c.validate().is_err());
        let mut c = RunConfig::preset(Preset::Desk);
        c.sim.snr_set_db.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn file_overrides_preset_fields_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"hidden_size": 8, "train": {"max_epochs": 3}, "sim": {"snr_set_db": [5.0]}}"#)
            .unwrap();
        let c = RunConfig::load(&path, Preset::Desk).unwrap();
        assert_eq!(c.hidden_size, 8);
        assert_eq!(c.large_elements, 32);
        assert_eq!(c.train.max_epochs, 3);
        assert_eq!(c.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(c.sim.snr_set_db, vec![5.0]);
        std::fs::write(&path, r#"{"large_elements": "many"}"#).unwrap();
        assert!(matches!(RunConfig::load(&path, Preset::Desk), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::load(&dir.path().join("missing.json"), Preset::Desk),
            Err(Error::Io { .. })
        ));
    }
}
