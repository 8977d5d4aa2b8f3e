//! Model persistence: one self-describing JSON document per model.
//!
//! Layout (field order is the document order): scalar metadata first, then
//! the parameter groups `b_weights`, `wrf_phases`, `wbb_weights`,
//! `bn1..bn3`, `fc1..fc3`. Real arrays carry row-major doubles; complex
//! arrays carry (real, imag) pairs per element, also row-major. Doubles
//! are written in shortest round-trip decimal form, so save/load is
//! bit-exact. Readers reject unknown `format_version`.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{AutoencoderModel, BatchNorm, Dense, ModelMeta};
use crate::channel::AngularBasis;
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RealArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ComplexArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BnGroup {
    scale: Vec<f64>,
    shift: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FcGroup {
    weights: RealArray,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    n: usize,
    r: usize,
    region_start_deg: f64,
    region_end_deg: f64,
    delta_theta_deg: f64,
    snr_train_db: f64,
    seed: u64,
    rng_algorithm: String,
    bn_epsilon: f64,
    b_weights: ComplexArray,
    wrf_phases: RealArray,
    wbb_weights: ComplexArray,
    bn1: BnGroup,
    bn2: BnGroup,
    bn3: BnGroup,
    fc1: FcGroup,
    fc2: FcGroup,
    fc3: FcGroup,
}

fn real_array(a: &Array2<f64>) -> RealArray {
    RealArray {
        shape: vec![a.nrows(), a.ncols()],
        data: a.iter().copied().collect(),
    }
}

fn complex_array(re: &Array2<f64>, im: &Array2<f64>) -> ComplexArray {
    let mut data = Vec::with_capacity(2 * re.len());
    for (a, b) in re.iter().zip(im.iter()) {
        data.push(*a);
        data.push(*b);
    }
    ComplexArray {
        shape: vec![re.nrows(), re.ncols()],
        data,
    }
}

fn bn_group(bn: &BatchNorm) -> BnGroup {
    BnGroup {
        scale: bn.scale.to_vec(),
        shift: bn.shift.to_vec(),
        running_mean: bn.running_mean.to_vec(),
        running_var: bn.running_var.to_vec(),
    }
}

fn fc_group(fc: &Dense) -> FcGroup {
    FcGroup {
        weights: real_array(&fc.weights),
        bias: fc.bias.to_vec(),
    }
}

fn parse_real(a: RealArray, want: (usize, usize), what: &str) -> Result<Array2<f64>> {
    if a.shape != vec![want.0, want.1] || a.data.len() != want.0 * want.1 {
        return Err(Error::Malformed(format!(
            "{what}: shape {:?} with {} values, expected {want:?}",
            a.shape,
            a.data.len()
        )));
    }
    Array2::from_shape_vec(want, a.data).map_err(|e| Error::Malformed(format!("{what}: {e}")))
}

fn parse_complex(a: ComplexArray, want: (usize, usize), what: &str) -> Result<(Array2<f64>, Array2<f64>)> {
    if a.shape != vec![want.0, want.1] || a.data.len() != 2 * want.0 * want.1 {
        return Err(Error::Malformed(format!(
            "{what}: shape {:?} with {} values, expected complex {want:?}",
            a.shape,
            a.data.len()
        )));
    }
    let mut re = Array2::zeros(want);
    let mut im = Array2::zeros(want);
    for (k, pair) in a.data.chunks_exact(2).enumerate() {
        let (i, j) = (k / want.1, k % want.1);
        re[[i, j]] = pair[0];
        im[[i, j]] = pair[1];
    }
    Ok((re, im))
}

fn parse_bn(g: BnGroup, features: usize, epsilon: f64, what: &str) -> Result<BatchNorm> {
    for (name, v) in [
        ("scale", &g.scale),
        ("shift", &g.shift),
        ("running_mean", &g.running_mean),
        ("running_var", &g.running_var),
    ] {
        if v.len() != features {
            return Err(Error::Malformed(format!(
                "{what}.{name}: {} values, expected {features}",
                v.len()
            )));
        }
    }
    Ok(BatchNorm {
        scale: Array1::from_vec(g.scale),
        shift: Array1::from_vec(g.shift),
        running_mean: Array1::from_vec(g.running_mean),
        running_var: Array1::from_vec(g.running_var),
        epsilon,
    })
}

fn parse_fc(g: FcGroup, want: (usize, usize), what: &str) -> Result<Dense> {
    let weights = parse_real(g.weights, want, what)?;
    if g.bias.len() != want.0 {
        return Err(Error::Malformed(format!(
            "{what}.bias: {} values, expected {}",
            g.bias.len(),
            want.0
        )));
    }
    Ok(Dense { weights, bias: Array1::from_vec(g.bias) })
}

/// Encode a model as the document bytes [`save_model`] would write.
pub(crate) fn model_to_vec(model: &AutoencoderModel) -> Result<Vec<u8>> {
    let (n, r) = (model.n(), model.r());
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        n,
        r,
        region_start_deg: model.meta.region_start_deg,
        region_end_deg: model.meta.region_end_deg,
        delta_theta_deg: model.meta.delta_theta_deg,
        snr_train_db: model.meta.snr_train_db,
        seed: model.meta.seed,
        rng_algorithm: model.meta.rng_algorithm.clone(),
        bn_epsilon: model.bn[0].epsilon,
        b_weights: complex_array(&model.b_re, &model.b_im),
        wrf_phases: real_array(&model.wrf_phases),
        wbb_weights: complex_array(&model.wbb_re, &model.wbb_im),
        bn1: bn_group(&model.bn[0]),
        bn2: bn_group(&model.bn[1]),
        bn3: bn_group(&model.bn[2]),
        fc1: fc_group(&model.fc[0]),
        fc2: fc_group(&model.fc[1]),
        fc3: fc_group(&model.fc[2]),
    };
    let mut bytes = serde_json::to_vec(&file)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Write a model to `path` in the documented format.
pub fn save_model(model: &AutoencoderModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_vec(model)?)?;
    Ok(())
}

/// Decode model document bytes, validating dimensions, the format version,
/// and that the frozen basis really is `angular_basis(N)`.
pub(crate) fn model_from_slice(bytes: &[u8]) -> Result<AutoencoderModel> {
    let file: ModelFile = serde_json::from_slice(bytes)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::FormatVersion(file.format_version));
    }
    let (n, r) = (file.n, file.r);
    if n == 0 || r == 0 || r > n {
        return Err(Error::Malformed(format!("model claims N={n}, R={r}")));
    }

    let (b_re, b_im) = parse_complex(file.b_weights, (n, n), "b_weights")?;
    let basis = AngularBasis::new(n)?;
    let defect = basis
        .matrix()
        .iter()
        .zip(b_re.iter().zip(b_im.iter()))
        .map(|(z, (re, im))| ((z.re - re).abs()).max((z.im - im).abs()))
        .fold(0.0_f64, f64::max);
    if defect > 1e-12 {
        return Err(Error::Malformed(format!(
            "b_weights deviate from the angular basis by {defect:e}"
        )));
    }

    let wrf_phases = parse_real(file.wrf_phases, (r, n), "wrf_phases")?;
    let (wbb_re, wbb_im) = parse_complex(file.wbb_weights, (r, r), "wbb_weights")?;
    let bn = [
        parse_bn(file.bn1, 2 * r, file.bn_epsilon, "bn1")?,
        parse_bn(file.bn2, 8 * n, file.bn_epsilon, "bn2")?,
        parse_bn(file.bn3, 4 * n, file.bn_epsilon, "bn3")?,
    ];
    let fc = [
        parse_fc(file.fc1, (8 * n, 2 * r), "fc1")?,
        parse_fc(file.fc2, (4 * n, 8 * n), "fc2")?,
        parse_fc(file.fc3, (2 * n, 4 * n), "fc3")?,
    ];

    Ok(AutoencoderModel {
        n,
        r,
        b_re,
        b_im,
        wrf_phases,
        wbb_re,
        wbb_im,
        bn,
        fc,
        meta: ModelMeta {
            region_start_deg: file.region_start_deg,
            region_end_deg: file.region_end_deg,
            delta_theta_deg: file.delta_theta_deg,
            snr_train_db: file.snr_train_db,
            seed: file.seed,
            rng_algorithm: file.rng_algorithm,
        },
    })
}

/// Read a model saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<AutoencoderModel> {
    model_from_slice(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::MeasurementConfig;
    use crate::neural::init_model;

    fn sample_model() -> AutoencoderModel {
        let enc = MeasurementConfig::conventional(8, 4, 0.01).unwrap();
        let mut model = init_model(11, &enc, ModelMeta::new(10.0, 15.0, 5.0, 20.0, 11)).unwrap();
        // Perturb state so the round trip exercises non-default values.
        model.wrf_phases[[0, 0]] = 0.123456789012345678;
        model.bn[1].running_mean[3] = -2.5e-17;
        model.fc[2].bias[5] = 1.0 / 3.0;
        model
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        let model = sample_model();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model.wrf_phases, loaded.wrf_phases);
        assert_eq!(model.wbb_re, loaded.wbb_re);
        assert_eq!(model.wbb_im, loaded.wbb_im);
        assert_eq!(model.b_re, loaded.b_re);
        assert_eq!(model.b_im, loaded.b_im);
        for li in 0..3 {
            assert_eq!(model.bn[li], loaded.bn[li]);
            assert_eq!(model.fc[li], loaded.fc[li]);
        }
        assert_eq!(model.meta, loaded.meta);
    }

    #[test]
    fn loader_rejects_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        save_model(&sample_model(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let bumped = text.replace("\"format_version\":1", "\"format_version\":999");
        assert_ne!(text, bumped);
        std::fs::write(&path, bumped).unwrap();
        match load_model(&path) {
            Err(Error::FormatVersion(999)) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn loader_rejects_tampered_basis() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        let mut model = sample_model();
        model.b_im[[2, 3]] += 1e-6;
        save_model(&model, &path).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Malformed(_))));
    }

    #[test]
    fn loader_rejects_wrong_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        save_model(&sample_model(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // Claim R = 3 while the arrays are for R = 4.
        let broken = text.replace("\"n\":8,\"r\":4", "\"n\":8,\"r\":3");
        assert_ne!(text, broken);
        std::fs::write(&path, broken).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn inference_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        let model = sample_model();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let mut rng = crate::rng::sample_stream(5, 0);
        let y = ndarray::Array1::from_shape_fn(4, |_| crate::rng::draw_cn01(&mut rng));
        let (x1, h1) = model.estimate(&y, false).unwrap();
        let (x2, h2) = loaded.estimate(&y, false).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(h1, h2);
    }
}
