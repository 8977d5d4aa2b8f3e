//! Training: Adam, plateau learning-rate decay, early stopping with
//! best-snapshot restore.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::{init_model, mse_loss, AutoencoderModel, GradientSet, ModelMeta};
use crate::measurement::MeasurementConfig;
use crate::rng::{derive_seed, sample_stream};
use crate::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Hyperparameters; the defaults are the ones used throughout.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr0: f64,
    pub batch: usize,
    pub decay_factor: f64,
    /// Epochs without validation improvement before the lr decays.
    pub plateau_patience: usize,
    /// Epochs without validation improvement before training stops.
    pub stop_patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Keep the analog phases and digital combiner at their initial values;
    /// only the decoder learns (the conventional-measurement baseline).
    pub freeze_encoder: bool,
    /// Redraw the additive noise each batch instead of using the noise
    /// baked into the dataset. Off by default: the reference pipeline adds
    /// noise once at generation time.
    pub fresh_noise_sigma2: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.001,
            batch: 128,
            decay_factor: 0.1,
            plateau_patience: 5,
            stop_patience: 12,
            max_epochs: 200,
            seed: 0,
            freeze_encoder: false,
            fresh_noise_sigma2: None,
        }
    }
}

/// What happened during a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Validation loss of the untouched initial model.
    pub initial_val_loss: f64,
    /// Mean training loss per epoch.
    pub train_losses: Vec<f64>,
    /// Validation loss after each epoch.
    pub val_losses: Vec<f64>,
    /// Learning rate in effect during each epoch.
    pub lr_trace: Vec<f64>,
    /// Index of the last epoch run.
    pub stopped_epoch: usize,
    /// Index of the epoch whose snapshot was kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// First and second moment buffers for one parameter group.
#[derive(Debug, Clone)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamMoments {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// One Adam update on a flat parameter group. `t` counts optimizer steps
/// from 1 and is shared by all groups of a model.
pub fn adam_step(params: &mut [f64], grads: &[f64], moments: &mut AdamMoments, t: u64, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), moments.m.len());
    let bc1 = 1.0 - BETA1.powi(t as i32);
    let bc2 = 1.0 - BETA2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        moments.m[i] = BETA1 * moments.m[i] + (1.0 - BETA1) * g;
        moments.v[i] = BETA2 * moments.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = moments.m[i] / bc1;
        let v_hat = moments.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

// Group order is fixed so optimizer state stays aligned across steps.
const N_GROUPS: usize = 15;

struct Optimizer {
    t: u64,
    groups: Vec<AdamMoments>,
}

impl Optimizer {
    fn new(model: &AutoencoderModel) -> Self {
        let mut groups = Vec::with_capacity(N_GROUPS);
        let mut sizes = vec![
            model.wrf_phases.len(),
            model.wbb_re.len(),
            model.wbb_im.len(),
        ];
        for li in 0..3 {
            sizes.push(model.bn[li].scale.len());
            sizes.push(model.bn[li].shift.len());
            sizes.push(model.fc[li].weights.len());
            sizes.push(model.fc[li].bias.len());
        }
        for s in sizes {
            groups.push(AdamMoments::new(s));
        }
        Self { t: 0, groups }
    }

    fn step(&mut self, model: &mut AutoencoderModel, grads: &GradientSet, lr: f64, freeze_encoder: bool) {
        self.t += 1;
        let t = self.t;
        let groups = &mut self.groups;
        let apply = |p: &mut [f64], g: &[f64], mom: &mut AdamMoments| {
            adam_step(p, g, mom, t, lr);
        };
        if !freeze_encoder {
            apply(model.wrf_phases.as_slice_mut().unwrap(), grads.wrf_phases.as_slice().unwrap(), &mut groups[0]);
            apply(model.wbb_re.as_slice_mut().unwrap(), grads.wbb_re.as_slice().unwrap(), &mut groups[1]);
            apply(model.wbb_im.as_slice_mut().unwrap(), grads.wbb_im.as_slice().unwrap(), &mut groups[2]);
        }
        let mut gi = 3usize;
        for li in 0..3 {
            apply(model.bn[li].scale.as_slice_mut().unwrap(), grads.bn_scale[li].as_slice().unwrap(), &mut groups[gi]);
            apply(model.bn[li].shift.as_slice_mut().unwrap(), grads.bn_shift[li].as_slice().unwrap(), &mut groups[gi + 1]);
            apply(model.fc[li].weights.as_slice_mut().unwrap(), grads.fc_weights[li].as_slice().unwrap(), &mut groups[gi + 2]);
            apply(model.fc[li].bias.as_slice_mut().unwrap(), grads.fc_bias[li].as_slice().unwrap(), &mut groups[gi + 3]);
            gi += 4;
        }
        debug_assert_eq!(gi, N_GROUPS);
    }
}

fn gather_rows(src: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), src.ncols()));
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&src.row(i));
    }
    out
}

/// Validation loss evaluated in chunks so large splits stay memory-light.
fn val_loss(model: &AutoencoderModel, inputs: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
    let rows = inputs.nrows();
    let chunk = 8192;
    let mut sum = 0.0;
    let mut start = 0;
    while start < rows {
        let end = (start + chunk).min(rows);
        let xi = inputs.slice(ndarray::s![start..end, ..]).to_owned();
        let ti = targets.slice(ndarray::s![start..end, ..]);
        let out = model.forward_infer(&xi)?;
        sum += out
            .iter()
            .zip(ti.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        start = end;
    }
    Ok(sum / rows as f64)
}

/// Train a fresh model on real-stacked pairs (`inputs` = noisy angular
/// samples, `targets` = clean ones), one row per sample.
///
/// The first 4/5 of the rows train, the rest validate. The learning rate
/// decays by `decay_factor` after `plateau_patience` stagnant epochs;
/// training stops after `stop_patience` stagnant epochs; the returned
/// model is the best-validation snapshot.
pub fn train(
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    encoder_init: &MeasurementConfig,
    cfg: &TrainConfig,
    meta: ModelMeta,
) -> Result<(AutoencoderModel, TrainReport)> {
    if inputs.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if inputs.dim() != targets.dim() {
        return Err(Error::DimMismatch(format!(
            "inputs {:?} vs targets {:?}",
            inputs.dim(),
            targets.dim()
        )));
    }
    if cfg.batch == 0 || cfg.max_epochs == 0 || !(cfg.lr0 > 0.0) {
        return Err(Error::InvalidParam("batch, max_epochs and lr0 must be positive".into()));
    }
    let rows = inputs.nrows();
    let n_train = (rows * 4) / 5;
    if n_train == 0 || n_train == rows {
        return Err(Error::InvalidParam(format!(
            "{rows} samples cannot be split 4:1 into non-empty train/validation sets"
        )));
    }

    let mut model = init_model(cfg.seed, encoder_init, meta)?;
    if inputs.ncols() != 2 * model.n() {
        return Err(Error::DimMismatch(format!(
            "samples have {} features, model expects {}",
            inputs.ncols(),
            2 * model.n()
        )));
    }

    let train_in = inputs.slice(ndarray::s![..n_train, ..]).to_owned();
    let train_tg = targets.slice(ndarray::s![..n_train, ..]).to_owned();
    let val_in = inputs.slice(ndarray::s![n_train.., ..]).to_owned();
    let val_tg = targets.slice(ndarray::s![n_train.., ..]).to_owned();

    let mut rng = sample_stream(derive_seed(cfg.seed, "train-loop"), 0);
    let mut opt = Optimizer::new(&model);
    let mut lr = cfg.lr0;

    let initial_val_loss = val_loss(&model, &val_in, &val_tg)?;
    let mut report = TrainReport {
        initial_val_loss,
        train_losses: Vec::new(),
        val_losses: Vec::new(),
        lr_trace: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
    };

    let mut best_snapshot = model.clone();
    let mut stall = 0usize;
    let mut plateau = 0usize;
    let mut order: Vec<usize> = (0..n_train).collect();

    for epoch in 0..cfg.max_epochs {
        report.lr_trace.push(lr);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let mut xb = gather_rows(&train_in, chunk);
            let tb = gather_rows(&train_tg, chunk);
            if let Some(sigma2) = cfg.fresh_noise_sigma2 {
                // Per real component: variance sigma2 / 2.
                let s = (sigma2 / 2.0).sqrt();
                xb = &tb + &Array2::from_shape_fn(tb.dim(), |_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * s
                });
            }
            let (out, cache) = model.forward_train(&xb)?;
            epoch_loss += mse_loss(&out, &tb);
            batches += 1;
            let grads = model.backward(&out, &tb, &cache)?;
            opt.step(&mut model, &grads, lr, cfg.freeze_encoder);
        }
        report.train_losses.push(epoch_loss / batches.max(1) as f64);

        let vl = val_loss(&model, &val_in, &val_tg)?;
        report.val_losses.push(vl);
        report.stopped_epoch = epoch;

        if vl < report.best_val_loss {
            report.best_val_loss = vl;
            report.best_epoch = epoch;
            best_snapshot = model.clone();
            stall = 0;
            plateau = 0;
        } else {
            stall += 1;
            plateau += 1;
        }
        if plateau >= cfg.plateau_patience {
            lr *= cfg.decay_factor;
            plateau = 0;
        }
        if stall >= cfg.stop_patience {
            break;
        }
    }

    Ok((best_snapshot, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::sigma2_from_snr_db;
    use ndarray::Array2;
    use rand::Rng;

    fn toy_data(rows: usize, n: usize, seed: u64, noise: f64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = sample_stream(seed, 0);
        let targets = Array2::from_shape_fn((rows, 2 * n), |_| rng.random_range(-1.0..1.0));
        let inputs = if noise > 0.0 {
            &targets
                + &Array2::from_shape_fn((rows, 2 * n), |_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * noise
                })
        } else {
            targets.clone()
        };
        (inputs, targets)
    }

    fn toy_meta() -> ModelMeta {
        ModelMeta::new(0.0, 90.0, 5.0, 20.0, 0)
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut p = vec![1.0];
        let mut mom = AdamMoments::new(1);
        adam_step(&mut p, &[0.3], &mut mom, 1, 0.01);
        // Bias-corrected first step moves by almost exactly lr against the
        // gradient sign.
        assert!((p[0] - (1.0 - 0.01)).abs() < 1e-6, "p = {}", p[0]);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        // From rest, a zero gradient moves nothing.
        let mut p = vec![0.5, -0.5];
        let mut mom = AdamMoments::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut mom, 1, 0.01);
        assert_eq!(p, vec![0.5, -0.5]);

        // With history, the moments decay geometrically.
        let mut mom = AdamMoments { m: vec![0.2], v: vec![0.3] };
        adam_step(&mut p[..1], &[0.0], &mut mom, 3, 0.0);
        assert!((mom.m[0] - 0.18).abs() < 1e-12);
        assert!((mom.v[0] - 0.2997).abs() < 1e-12);
    }

    #[test]
    fn adam_matches_hand_computed_trace() {
        // Scalar, g = 1 then g = -2, lr = 0.1.
        let mut p = vec![0.0];
        let mut mom = AdamMoments::new(1);

        adam_step(&mut p, &[1.0], &mut mom, 1, 0.1);
        // m1 = 0.1, v1 = 0.001; mhat = 1, vhat = 1 -> p = -0.1/(1 + 1e-8)
        let p1 = -0.1 / (1.0 + 1e-8);
        assert!((p[0] - p1).abs() < 1e-15, "{} vs {p1}", p[0]);

        adam_step(&mut p, &[-2.0], &mut mom, 2, 0.1);
        // m2 = 0.9*0.1 - 0.1*2 = -0.11; v2 = 0.999*0.001 + 0.001*4
        let m2: f64 = -0.11;
        let v2: f64 = 0.004999;
        let mhat = m2 / (1.0 - 0.9f64.powi(2));
        let vhat = v2 / (1.0 - 0.999f64.powi(2));
        let p2 = p1 - 0.1 * mhat / (vhat.sqrt() + 1e-8);
        assert!((p[0] - p2).abs() < 1e-12, "{} vs {p2}", p[0]);
    }

    #[test]
    fn train_learns_identity_on_clean_data() {
        // Clean samples confined to two angular bins: the R = 4 code keeps
        // all their information, so reconstruction should become almost
        // exact.
        let n = 8;
        let r = 4;
        let rows = 6000;
        let mut rng = sample_stream(1, 0);
        let mut targets = Array2::<f64>::zeros((rows, 2 * n));
        for i in 0..rows {
            for &bin in &[2usize, 5] {
                let z = crate::rng::draw_cn01(&mut rng);
                targets[[i, bin]] = z.re;
                targets[[i, n + bin]] = z.im;
            }
        }
        let inputs = targets.clone();
        let enc = MeasurementConfig::conventional(n, r, 0.0).unwrap();
        let cfg = TrainConfig { max_epochs: 120, seed: 3, ..Default::default() };
        let (_, report) = train(&inputs, &targets, &enc, &cfg, toy_meta()).unwrap();
        assert!(
            report.val_losses[4] < report.initial_val_loss,
            "no progress after five epochs: {} vs {}",
            report.val_losses[4],
            report.initial_val_loss
        );
        // The decoder floors near MSE 7e-3 on this task; 100x below the
        // initial loss is comfortably past anything but real learning.
        assert!(
            report.best_val_loss < 1e-2 * report.initial_val_loss,
            "initial {} best {}",
            report.initial_val_loss,
            report.best_val_loss
        );
    }

    #[test]
    fn lr_trace_steps_only_by_decay_factor() {
        let n = 8;
        let (inputs, targets) = toy_data(300, n, 5, 0.3);
        let enc = MeasurementConfig::conventional(n, 4, sigma2_from_snr_db(10.0)).unwrap();
        let cfg = TrainConfig { max_epochs: 50, seed: 7, ..Default::default() };
        let (_, report) = train(&inputs, &targets, &enc, &cfg, toy_meta()).unwrap();
        for pair in report.lr_trace.windows(2) {
            let ratio = pair[1] / pair[0];
            assert!(
                (ratio - 1.0).abs() < 1e-12 || (ratio - 0.1).abs() < 1e-12,
                "lr moved by {ratio}"
            );
        }
        // Early-stopping contract.
        assert!(report.stopped_epoch <= report.best_epoch + cfg.stop_patience);
        // Best is the minimum of the trace.
        let min = report.val_losses.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_val_loss, min);
    }

    #[test]
    fn training_is_deterministic() {
        let n = 8;
        let (inputs, targets) = toy_data(300, n, 11, 0.2);
        let enc = MeasurementConfig::conventional(n, 4, 0.01).unwrap();
        let cfg = TrainConfig { max_epochs: 6, seed: 13, ..Default::default() };
        let (m1, r1) = train(&inputs, &targets, &enc, &cfg, toy_meta()).unwrap();
        let (m2, r2) = train(&inputs, &targets, &enc, &cfg, toy_meta()).unwrap();
        assert_eq!(r1.val_losses, r2.val_losses);
        assert_eq!(m1.wrf_phases, m2.wrf_phases);
        assert_eq!(m1.fc[2].weights, m2.fc[2].weights);
    }

    #[test]
    fn freezing_keeps_encoder_fixed() {
        let n = 8;
        let (inputs, targets) = toy_data(300, n, 17, 0.2);
        let enc = MeasurementConfig::conventional(n, 4, 0.01).unwrap();
        let cfg = TrainConfig { max_epochs: 4, seed: 19, freeze_encoder: true, ..Default::default() };
        let (model, _) = train(&inputs, &targets, &enc, &cfg, toy_meta()).unwrap();
        let drift: f64 = (&model.wrf_phases - enc.w_rf.phases())
            .iter()
            .map(|v| v.abs())
            .sum();
        assert_eq!(drift, 0.0);
        let wbb_drift: f64 = model
            .export_measurement()
            .w_bb
            .iter()
            .zip(enc.w_bb.iter())
            .map(|(a, b)| (a - b).norm())
            .sum();
        assert_eq!(wbb_drift, 0.0);
        assert!(model.frozen_basis_intact());
    }

    #[test]
    fn unfrozen_training_moves_encoder_but_never_the_basis() {
        let n = 8;
        let (inputs, targets) = toy_data(300, n, 23, 0.2);
        let enc = MeasurementConfig::conventional(n, 4, 0.01).unwrap();
        let cfg = TrainConfig { max_epochs: 4, seed: 29, ..Default::default() };
        let (model, _) = train(&inputs, &targets, &enc, &cfg, toy_meta()).unwrap();
        let drift: f64 = (&model.wrf_phases - enc.w_rf.phases())
            .iter()
            .map(|v| v.abs())
            .sum();
        assert!(drift > 0.0, "phases never moved");
        assert!(model.frozen_basis_intact());
        // Unimodulus: exported entries still have modulus 1/sqrt(N).
        let want = 1.0 / (n as f64).sqrt();
        for z in model.export_measurement().w_rf.entries().iter() {
            assert!((z.norm() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let enc = MeasurementConfig::conventional(8, 4, 0.01).unwrap();
        let empty = Array2::<f64>::zeros((0, 16));
        assert!(train(&empty, &empty, &enc, &TrainConfig::default(), toy_meta()).is_err());
        let (inputs, targets) = toy_data(50, 4, 1, 0.0);
        // 8 features but the model wants 16.
        assert!(train(&inputs, &targets, &enc, &TrainConfig::default(), toy_meta()).is_err());
    }
}
