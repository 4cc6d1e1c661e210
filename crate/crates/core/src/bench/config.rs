//! TOML experiment files.
//!
//! Tables and keys mirror [`SystemConfig`], [`Geometry`] and [`SweepSpec`]
//! field for field. Every key is optional and falls back to the base
//! configuration, except that a `[sweep]` table needs `variable` and
//! `values`. `power` and `noise_var` are given in dBm:
//!
//! ```toml
//! [system]
//! n_ris = 32
//! power = 20.0      # dBm
//! noise_var = -100.0 # dBm
//! beta_r = 0.08
//!
//! [geometry]
//! user_pos = [5.0, 120.0, 1.5]
//!
//! [sweep]
//! variable = "sigma_m_sq"
//! values = [0.01, 0.1, 1.0]
//! trials = 100
//! seed = 7
//! ```

use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::sweep::SweepSpec;
use crate::channels::Geometry;
use crate::error::{Error, Result};
use crate::model::{dbm_to_watts, SystemConfig};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemTable {
    n_tx: Option<usize>,
    n_rx: Option<usize>,
    n_streams: Option<usize>,
    n_ris: Option<usize>,
    bits: Option<u32>,
    power: Option<f64>,
    noise_var: Option<f64>,
    beta_t: Option<f64>,
    beta_r: Option<f64>,
    sigma_d_sq: Option<f64>,
    sigma_m_sq: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryTable {
    bs_pos: Option<[f64; 3]>,
    ris_pos: Option<[f64; 3]>,
    user_pos: Option<[f64; 3]>,
    pl0_db: Option<f64>,
    alpha_bu: Option<f64>,
    alpha_br: Option<f64>,
    alpha_ru: Option<f64>,
    shadow_std_db: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    system: SystemTable,
    #[serde(default)]
    geometry: GeometryTable,
    sweep: Option<SweepSpec>,
}

/// A parsed experiment file, already merged onto its base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FileConfig {
    pub system: SystemConfig,
    pub geometry: Geometry,
    pub sweep: Option<SweepSpec>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}

/// Parses `text` and applies it on top of `base`.
pub fn parse_config(text: &str, base: &SystemConfig) -> Result<FileConfig> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut system = base.clone();
    overlay!(
        system, raw.system, n_tx, n_rx, n_streams, n_ris, bits, beta_t, beta_r, sigma_d_sq,
        sigma_m_sq
    );
    if let Some(dbm) = raw.system.power {
        system.power = dbm_to_watts(dbm);
    }
    if let Some(dbm) = raw.system.noise_var {
        system.noise_var = dbm_to_watts(dbm);
    }
    let mut geometry = Geometry::default();
    overlay!(
        geometry,
        raw.geometry,
        bs_pos,
        ris_pos,
        user_pos,
        pl0_db,
        alpha_bu,
        alpha_br,
        alpha_ru,
        shadow_std_db
    );
    Ok(FileConfig {
        system: system.validate()?,
        geometry: geometry.validate()?,
        sweep: raw.sweep.map(SweepSpec::validate).transpose()?,
    })
}

pub fn load_config(path: &Path, base: &SystemConfig) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, base)
}
