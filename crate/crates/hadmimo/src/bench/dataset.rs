//! Training-set generation and the dataset file format.
//!
//! One dataset holds `count` channels drawn from a region's expanded
//! azimuth range; each channel contributes M (clean, noisy) angular column
//! pairs, stored real-stacked as 2N-vectors. On disk: a one-line JSON
//! header, then raw little-endian doubles (x then x_noisy per sample),
//! with the payload's SHA-256 recorded in the header.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_paths, synth_channel, AngularBasis, SimParams};
use crate::measurement::sigma2_from_snr_db;
use crate::regions::Region;
use crate::rng::{draw_cn01, sample_stream, sha256_hex, RNG_ALGORITHM};
use crate::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Infinite SNR (the noiseless mode) has no JSON float literal; it is
/// stored as null.
mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    /// Number of channels; the sample count is `count * m`.
    pub count: usize,
    pub n_paths: usize,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub delta_theta_deg: f64,
    pub region_start_deg: f64,
    pub region_end_deg: f64,
    pub expanded_start_deg: f64,
    pub expanded_end_deg: f64,
    pub seed: u64,
    pub rng_algorithm: String,
    pub payload_sha256: String,
}

/// In-memory dataset: row `i*m + j` holds antenna column `j` of channel
/// `i`, real parts then imaginary parts.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub x: Array2<f64>,
    pub x_noisy: Array2<f64>,
}

/// Draw `count` channels per the sampling procedure: azimuth uniform over
/// the region's expanded range, paths around it, one angular-domain noise
/// realization per antenna column. Channel `i` uses stream `(seed, i)`, so
/// the output is reproducible and order-independent.
pub fn gen_dataset(
    region: &Region,
    template: &SimParams,
    count: usize,
    snr_db: f64,
    seed: u64,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidParam("dataset needs at least one channel".into()));
    }
    if !(region.expanded_end > region.expanded_start) {
        return Err(Error::InvalidParam(format!(
            "empty azimuth range [{}, {})",
            region.expanded_start, region.expanded_end
        )));
    }
    let (n, m) = (template.n_bs, template.n_ue);
    let basis = AngularBasis::new(n)?;
    let sigma = sigma2_from_snr_db(snr_db).sqrt();
    let rows = count * m;
    let mut x = Array2::zeros((rows, 2 * n));
    let mut x_noisy = Array2::zeros((rows, 2 * n));

    for ch in 0..count {
        let mut rng = sample_stream(seed, ch as u64);
        let azimuth = rng.random_range(region.expanded_start..region.expanded_end);
        let params = SimParams { azimuth_deg: azimuth, ..*template };
        let paths = sample_paths(&params, &mut rng)?;
        let h = synth_channel(&paths, n, m)?;
        let xa = basis.to_angular(&h)?;
        for col in 0..m {
            let row = ch * m + col;
            for k in 0..n {
                let clean = xa[[k, col]];
                let noisy = clean + sigma * draw_cn01(&mut rng);
                x[[row, k]] = clean.re;
                x[[row, n + k]] = clean.im;
                x_noisy[[row, k]] = noisy.re;
                x_noisy[[row, n + k]] = noisy.im;
            }
        }
    }

    let header = DatasetHeader {
        format_version: DATASET_FORMAT_VERSION,
        n,
        m,
        count,
        n_paths: template.n_paths,
        snr_db,
        delta_theta_deg: template.spread_deg,
        region_start_deg: region.theta_start,
        region_end_deg: region.theta_end,
        expanded_start_deg: region.expanded_start,
        expanded_end_deg: region.expanded_end,
        seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        payload_sha256: String::new(),
    };
    Ok(Dataset { header, x, x_noisy })
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    fn payload(&self) -> Vec<u8> {
        let rows = self.rows();
        let width = self.x.ncols();
        let mut bytes = Vec::with_capacity(rows * width * 16);
        for i in 0..rows {
            for v in self.x.row(i) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for v in self.x_noisy.row(i) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let payload = self.payload();
        let mut header = self.header.clone();
        header.payload_sha256 = sha256_hex(&payload);
        let mut bytes = serde_json::to_vec(&header)?;
        bytes.push(b'\n');
        bytes.extend_from_slice(&payload);
        Ok(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Malformed("dataset file has no header line".into()))?;
        let header: DatasetHeader = serde_json::from_slice(&bytes[..newline])?;
        if header.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::FormatVersion(header.format_version));
        }
        let payload = &bytes[newline + 1..];
        if sha256_hex(payload) != header.payload_sha256 {
            return Err(Error::Checksum("dataset payload".into()));
        }
        let rows = header.count * header.m;
        let width = 2 * header.n;
        if payload.len() != rows * width * 16 {
            return Err(Error::Malformed(format!(
                "payload holds {} bytes, header implies {}",
                payload.len(),
                rows * width * 16
            )));
        }
        let mut x = Array2::zeros((rows, width));
        let mut x_noisy = Array2::zeros((rows, width));
        let mut off = 0;
        let mut take = || {
            let v = f64::from_le_bytes(payload[off..off + 8].try_into().unwrap());
            off += 8;
            v
        };
        for i in 0..rows {
            for j in 0..width {
                x[[i, j]] = take();
            }
            for j in 0..width {
                x_noisy[[i, j]] = take();
            }
        }
        Ok(Dataset { header, x, x_noisy })
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        Dataset::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::{segment, RegistryConfig};

    fn region_10_15() -> Region {
        segment(&RegistryConfig::new(5.0, 1.0).unwrap()).unwrap()[2].clone()
    }

    fn template(n: usize, m: usize) -> SimParams {
        SimParams::new(n, m, 3, 5.0, 0.0)
    }

    #[test]
    fn channel_count_and_shape() {
        let ds = gen_dataset(&region_10_15(), &template(16, 4), 25, 20.0, 1).unwrap();
        assert_eq!(ds.rows(), 100);
        assert_eq!(ds.x.ncols(), 32);
        assert_eq!(ds.header.count, 25);
        assert_eq!(ds.header.m, 4);
        assert_eq!(ds.header.rng_algorithm, "chacha8");
        assert!(gen_dataset(&region_10_15(), &template(16, 4), 0, 20.0, 1).is_err());
    }

    #[test]
    fn noiseless_mode_copies_clean_samples() {
        let ds = gen_dataset(&region_10_15(), &template(16, 2), 10, f64::INFINITY, 2).unwrap();
        assert_eq!(ds.x, ds.x_noisy);
    }

    #[test]
    fn noise_power_matches_configuration() {
        let n = 16;
        let snr_db = 10.0;
        let ds = gen_dataset(&region_10_15(), &template(n, 2), 3000, snr_db, 3).unwrap();
        let mut total = 0.0;
        for i in 0..ds.rows() {
            let mut sq = 0.0;
            for j in 0..2 * n {
                let d = ds.x_noisy[[i, j]] - ds.x[[i, j]];
                sq += d * d;
            }
            total += sq / n as f64;
        }
        let measured = total / ds.rows() as f64;
        let sigma2 = sigma2_from_snr_db(snr_db);
        assert!(
            (measured - sigma2).abs() < 0.02 * sigma2,
            "measured {measured}, configured {sigma2}"
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_dataset(&region_10_15(), &template(8, 2), 40, 20.0, 9).unwrap();
        let b = gen_dataset(&region_10_15(), &template(8, 2), 40, 20.0, 9).unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        let c = gen_dataset(&region_10_15(), &template(8, 2), 40, 20.0, 10).unwrap();
        assert_ne!(a.to_bytes().unwrap(), c.to_bytes().unwrap());
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.dataset");
        let ds = gen_dataset(&region_10_15(), &template(8, 3), 17, 15.0, 5).unwrap();
        ds.save(&path).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        assert_eq!(ds.x, loaded.x);
        assert_eq!(ds.x_noisy, loaded.x_noisy);
        assert_eq!(loaded.header.payload_sha256.len(), 64);
        assert_eq!(loaded.header.n, 8);
    }

    #[test]
    fn loader_rejects_corruption() {
        let ds = gen_dataset(&region_10_15(), &template(8, 2), 5, 15.0, 5).unwrap();
        let mut bytes = ds.to_bytes().unwrap();

        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        assert!(matches!(Dataset::from_bytes(&bytes), Err(Error::Checksum(_))));

        let good = ds.to_bytes().unwrap();
        let truncated = &good[..good.len() - 16];
        assert!(Dataset::from_bytes(truncated).is_err());

        let text = String::from_utf8_lossy(&good[..good.iter().position(|&b| b == b'\n').unwrap()])
            .replace("\"format_version\":1", "\"format_version\":7");
        let mut bumped = text.into_bytes();
        bumped.push(b'\n');
        bumped.extend_from_slice(&good[good.iter().position(|&b| b == b'\n').unwrap() + 1..]);
        assert!(matches!(Dataset::from_bytes(&bumped), Err(Error::FormatVersion(7))));
    }

    #[test]
    fn noiseless_header_round_trips_infinite_snr() {
        let ds = gen_dataset(&region_10_15(), &template(8, 1), 3, f64::INFINITY, 1).unwrap();
        let bytes = ds.to_bytes().unwrap();
        let loaded = Dataset::from_bytes(&bytes).unwrap();
        assert!(loaded.header.snr_db.is_infinite());
    }
}
