//! Angular-space segmentation and the per-region model registry.
//!
//! The quarter space [0°, 90°] of user azimuths is tiled into regions of
//! width β; one network is trained and stored per region, over the region
//! expanded by the GPS error Δθ_az on both sides. Every other azimuth is
//! served by the region sharing its |sin θ|: [`fold_azimuth`] finds it,
//! and when the sine was negative the selected network runs with
//! conjugated measurement matrices ([`mirror_measurement`]) and its output
//! is mapped back with [`conjugate_recover`].

use std::path::Path;

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::AngularBasis;
use crate::linalg::dagger;
use crate::measurement::MeasurementConfig;
use crate::neural::{load_model, model_from_slice, model_to_vec, AutoencoderModel};
use crate::rng::sha256_hex;
use crate::{Error, Result};

pub const REGISTRY_FORMAT_VERSION: u32 = 1;

/// One tile of the quarter space plus its GPS-expanded training range.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub index: usize,
    pub theta_start: f64,
    pub theta_end: f64,
    pub expanded_start: f64,
    pub expanded_end: f64,
}

impl Region {
    /// Half-open membership, closed at 90° for the last tile.
    fn contains(&self, folded_deg: f64, is_last: bool) -> bool {
        if is_last {
            folded_deg >= self.theta_start && folded_deg <= self.theta_end
        } else {
            folded_deg >= self.theta_start && folded_deg < self.theta_end
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistryConfig {
    pub beta_deg: f64,
    pub gps_err_deg: f64,
}

impl RegistryConfig {
    pub fn new(beta_deg: f64, gps_err_deg: f64) -> Result<Self> {
        let cfg = RegistryConfig { beta_deg, gps_err_deg };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_deg > 0.0 && self.beta_deg <= 90.0) {
            return Err(Error::InvalidParam(format!(
                "region width must lie in (0, 90] degrees, got {}",
                self.beta_deg
            )));
        }
        if !(self.gps_err_deg >= 0.0 && self.gps_err_deg.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "GPS azimuth error must be a finite non-negative angle, got {}",
                self.gps_err_deg
            )));
        }
        Ok(())
    }

    /// Number of networks: ⌈90/β⌉ (guarded so a rounded-up quotient never
    /// produces an empty last tile).
    pub fn n_net(&self) -> usize {
        let n = (90.0 / self.beta_deg).ceil() as usize;
        if n > 1 && (n as f64 - 1.0) * self.beta_deg >= 90.0 {
            n - 1
        } else {
            n.max(1)
        }
    }
}

/// Tile [0°, 90°] into ⌈90/β⌉ regions. The last may be narrower; every
/// training range is the tile padded by Δθ_az on each side, so adjacent
/// training ranges overlap by 2Δθ_az.
pub fn segment(cfg: &RegistryConfig) -> Result<Vec<Region>> {
    cfg.validate()?;
    let n_net = cfg.n_net();
    let mut regions = Vec::with_capacity(n_net);
    for index in 0..n_net {
        let theta_start = index as f64 * cfg.beta_deg;
        let theta_end = ((index + 1) as f64 * cfg.beta_deg).min(90.0);
        regions.push(Region {
            index,
            theta_start,
            theta_end,
            expanded_start: theta_start - cfg.gps_err_deg,
            expanded_end: theta_end + cfg.gps_err_deg,
        });
    }
    Ok(regions)
}

fn wrap_half_open(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Map any azimuth to the quarter-space angle with the same |sin| and a
/// flag saying whether the sine was negative (serve with conjugated
/// matrices). Angles at exactly ±90° keep the flag false: the steering
/// vector is real there, so conjugation is a no-op.
pub fn fold_azimuth(theta_az_deg: f64) -> (f64, bool) {
    let t = wrap_half_open(theta_az_deg);
    if (0.0..=90.0).contains(&t) {
        (t, false)
    } else if t > 90.0 {
        (180.0 - t, false)
    } else if t == -90.0 {
        (90.0, false)
    } else {
        let m = -t;
        let folded = if m <= 90.0 { m } else { 180.0 - m };
        (folded, true)
    }
}

/// Outcome of the online network lookup for one user azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub region_index: usize,
    pub conjugate_flag: bool,
    pub effective_azimuth_deg: f64,
}

/// Conjugate the measurement pair, the trick that lets one trained network
/// serve the mirrored quarter: Φ² = (Φ¹Bᴴ)*B.
pub fn mirror_measurement(cfg: &MeasurementConfig) -> MeasurementConfig {
    MeasurementConfig {
        w_rf: cfg.w_rf.conjugated(),
        w_bb: cfg.w_bb.mapv(|z| z.conj()),
        sigma2: cfg.sigma2,
    }
}

/// Map the served network's angular estimate back to the mirrored user:
/// x̂² = Bᴴ(Bx̂¹)*.
pub fn conjugate_recover(x_hat: &Array1<Complex64>, basis: &AngularBasis) -> Result<Array1<Complex64>> {
    if x_hat.len() != basis.n() {
        return Err(Error::DimMismatch(format!(
            "estimate has {} entries, basis expects {}",
            x_hat.len(),
            basis.n()
        )));
    }
    let spatial = basis.matrix().dot(x_hat).mapv(|z| z.conj());
    Ok(dagger(basis.matrix()).dot(&spatial))
}

/// Planar bearing of the user as seen from the BS array, relative to the
/// array boresight, wrapped to (−180°, 180°].
pub fn azimuth_from_coords(bs_xy: (f64, f64), user_xy: (f64, f64), boresight_deg: f64) -> Result<f64> {
    let dx = user_xy.0 - bs_xy.0;
    let dy = user_xy.1 - bs_xy.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::InvalidParam(
            "user and BS coordinates coincide; bearing undefined".into(),
        ));
    }
    let bearing = dy.atan2(dx).to_degrees();
    Ok(wrap_half_open(bearing - boresight_deg))
}

#[derive(Serialize, Deserialize)]
struct IndexRegion {
    index: usize,
    theta_start_deg: f64,
    theta_end_deg: f64,
    expanded_start_deg: f64,
    expanded_end_deg: f64,
    model_file: String,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
struct RegistryIndex {
    format_version: u32,
    beta_deg: f64,
    gps_err_deg: f64,
    n_net: usize,
    regions: Vec<IndexRegion>,
}

/// The stored set of per-region networks plus the segmentation that
/// produced them. Loading yields an immutable snapshot; selection is a
/// pure read.
#[derive(Debug, Clone)]
pub struct Registry {
    config: RegistryConfig,
    regions: Vec<Region>,
    models: Vec<Option<AutoencoderModel>>,
}

fn model_file_name(index: usize) -> String {
    format!("region_{index}.model")
}

impl Registry {
    pub fn empty(config: RegistryConfig) -> Result<Self> {
        let regions = segment(&config)?;
        let models = vec![None; regions.len()];
        Ok(Registry { config, regions, models })
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn is_complete(&self) -> bool {
        self.models.iter().all(Option::is_some)
    }

    /// Attach a trained model to its region. The model's recorded region
    /// must agree with the tile, and all models in one registry must share
    /// antenna/chain counts.
    pub fn insert_model(&mut self, index: usize, model: AutoencoderModel) -> Result<()> {
        let region = self.regions.get(index).ok_or_else(|| {
            Error::InvalidParam(format!(
                "region index {index} out of range (n_net = {})",
                self.regions.len()
            ))
        })?;
        let meta = &model.meta;
        if (meta.region_start_deg - region.theta_start).abs() > 1e-9
            || (meta.region_end_deg - region.theta_end).abs() > 1e-9
        {
            return Err(Error::InvalidParam(format!(
                "model trained for [{}, {}] does not match region {index} = [{}, {}]",
                meta.region_start_deg, meta.region_end_deg, region.theta_start, region.theta_end
            )));
        }
        if let Some(existing) = self.models.iter().flatten().next() {
            if existing.n() != model.n() || existing.r() != model.r() {
                return Err(Error::InvalidParam(format!(
                    "registry holds (N, R) = ({}, {}) models; got ({}, {})",
                    existing.n(),
                    existing.r(),
                    model.n(),
                    model.r()
                )));
            }
        }
        self.models[index] = Some(model);
        Ok(())
    }

    pub fn model(&self, index: usize) -> Result<&AutoencoderModel> {
        match self.models.get(index) {
            Some(Some(m)) => Ok(m),
            Some(None) => Err(Error::MissingRegionModel(index)),
            None => Err(Error::InvalidParam(format!(
                "region index {index} out of range (n_net = {})",
                self.regions.len()
            ))),
        }
    }

    /// Algorithm: fold the azimuth into the quarter space, find its tile,
    /// and report whether the caller must conjugate the measurement.
    pub fn select(&self, theta_az_deg: f64) -> Result<Selection> {
        let (folded, conjugate_flag) = fold_azimuth(theta_az_deg);
        let last = self.regions.len() - 1;
        let region_index = self
            .regions
            .iter()
            .position(|r| r.contains(folded, r.index == last))
            .expect("folded angle always lands in the tiling");
        self.model(region_index)?;
        Ok(Selection {
            region_index,
            conjugate_flag,
            effective_azimuth_deg: folded,
        })
    }

    /// Write one model file per region plus `registry.json`. The index is
    /// written last via a temp file and rename, so a concurrent reader
    /// never sees an index that references half-written models.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut index_regions = Vec::with_capacity(self.regions.len());
        for region in &self.regions {
            let model = self.model(region.index)?;
            let bytes = model_to_vec(model)?;
            let file_name = model_file_name(region.index);
            std::fs::write(dir.join(&file_name), &bytes)?;
            index_regions.push(IndexRegion {
                index: region.index,
                theta_start_deg: region.theta_start,
                theta_end_deg: region.theta_end,
                expanded_start_deg: region.expanded_start,
                expanded_end_deg: region.expanded_end,
                model_file: file_name,
                sha256: sha256_hex(&bytes),
            });
        }
        let index = RegistryIndex {
            format_version: REGISTRY_FORMAT_VERSION,
            beta_deg: self.config.beta_deg,
            gps_err_deg: self.config.gps_err_deg,
            n_net: self.regions.len(),
            regions: index_regions,
        };
        let mut bytes = serde_json::to_vec_pretty(&index)?;
        bytes.push(b'\n');
        let tmp = dir.join("registry.json.tmp");
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, dir.join("registry.json"))?;
        Ok(())
    }

    /// Read a registry directory, checking the index version, the n_net
    /// invariant, the region tiling, and every model file's checksum.
    pub fn load(dir: &Path) -> Result<Self> {
        let index_path = dir.join("registry.json");
        let index_bytes = std::fs::read(&index_path)
            .map_err(|e| Error::Malformed(format!("cannot read {}: {e}", index_path.display())))?;
        let index: RegistryIndex = serde_json::from_slice(&index_bytes)?;
        if index.format_version != REGISTRY_FORMAT_VERSION {
            return Err(Error::FormatVersion(index.format_version));
        }
        let config = RegistryConfig::new(index.beta_deg, index.gps_err_deg)?;
        if index.n_net != config.n_net() {
            return Err(Error::Malformed(format!(
                "index claims n_net = {}, but ⌈90/{}⌉ = {}",
                index.n_net,
                index.beta_deg,
                config.n_net()
            )));
        }
        let mut registry = Registry::empty(config)?;
        if index.regions.len() != registry.regions.len() {
            return Err(Error::Malformed(format!(
                "index lists {} regions, expected {}",
                index.regions.len(),
                registry.regions.len()
            )));
        }
        for (expected, entry) in registry.regions.clone().iter().zip(&index.regions) {
            if entry.index != expected.index
                || entry.theta_start_deg != expected.theta_start
                || entry.theta_end_deg != expected.theta_end
                || entry.expanded_start_deg != expected.expanded_start
                || entry.expanded_end_deg != expected.expanded_end
            {
                return Err(Error::Malformed(format!(
                    "region {} in the index does not tile [0, 90] for beta = {}",
                    entry.index, index.beta_deg
                )));
            }
            let path = dir.join(&entry.model_file);
            let bytes = std::fs::read(&path).map_err(|_| Error::MissingRegionModel(entry.index))?;
            if sha256_hex(&bytes) != entry.sha256 {
                return Err(Error::Checksum(entry.model_file.clone()));
            }
            registry.insert_model(entry.index, model_from_slice(&bytes)?)?;
        }
        Ok(registry)
    }

    /// Read a single region's model straight from a registry directory.
    pub fn load_region_model(dir: &Path, index: usize) -> Result<AutoencoderModel> {
        let path = dir.join(model_file_name(index));
        if !path.exists() {
            return Err(Error::MissingRegionModel(index));
        }
        load_model(&path)
    }
}
