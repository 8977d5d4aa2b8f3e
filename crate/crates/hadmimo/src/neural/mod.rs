//! The measurement-learning autoencoder.
//!
//! Encoder: three complex-valued linear layers computed on real/imaginary
//! parts separately. The first applies the frozen angular basis `B` (so the
//! network consumes angular-domain samples), the second the phase-shifter
//! matrix `W_RF` parametrized by its phases (entries `e^{j phi} / sqrt(N)`,
//! keeping the constant-modulus hardware constraint satisfied after every
//! gradient step), the third the unconstrained digital combiner `W_BB`.
//! Together they realize the measurement `y = W_BB W_RF B (x + noise)`.
//!
//! Decoder: BN -> FC(8N) + ReLU -> BN -> FC(4N) + ReLU -> BN -> FC(2N) on
//! real-stacked features, estimating the clean angular channel from `y`.
//!
//! Gradients are hand-derived reverse mode; see [`AutoencoderModel::backward`].
//! Training lives in [`train`], file I/O in [`io`].

mod io;
mod train;

pub use io::{load_model, save_model};
pub(crate) use io::{model_from_slice, model_to_vec};
pub use train::{adam_step, train, AdamMoments, TrainConfig, TrainReport};

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::AngularBasis;
use crate::measurement::{AnalogMatrix, MeasurementConfig};
use crate::rng::{derive_seed, sample_stream, RNG_ALGORITHM};
use crate::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Batch-normalization layer state.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub epsilon: f64,
}

impl BatchNorm {
    fn new(features: usize) -> Self {
        Self {
            scale: Array1::ones(features),
            shift: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            epsilon: BN_EPSILON,
        }
    }

    pub fn features(&self) -> usize {
        self.scale.len()
    }
}

/// Fully connected layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Provenance recorded next to the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    /// Nominal angular region the model serves, degrees.
    pub region_start_deg: f64,
    pub region_end_deg: f64,
    /// Angular spread of the training channels, degrees.
    pub delta_theta_deg: f64,
    pub snr_train_db: f64,
    pub seed: u64,
    pub rng_algorithm: String,
}

impl ModelMeta {
    pub fn new(region_start_deg: f64, region_end_deg: f64, delta_theta_deg: f64, snr_train_db: f64, seed: u64) -> Self {
        Self {
            region_start_deg,
            region_end_deg,
            delta_theta_deg,
            snr_train_db,
            seed,
            rng_algorithm: RNG_ALGORITHM.to_string(),
        }
    }
}

/// Joint measurement matrix + estimator model.
#[derive(Debug, Clone)]
pub struct AutoencoderModel {
    n: usize,
    r: usize,
    /// Frozen basis, split into real and imaginary parts (N x N).
    pub b_re: Array2<f64>,
    pub b_im: Array2<f64>,
    /// Phase-shifter phases (R x N); the entries are `e^{j phi} / sqrt(N)`.
    pub wrf_phases: Array2<f64>,
    /// Digital combiner (R x R), unconstrained complex.
    pub wbb_re: Array2<f64>,
    pub wbb_im: Array2<f64>,
    pub bn: [BatchNorm; 3],
    pub fc: [Dense; 3],
    pub meta: ModelMeta,
}

/// Intermediate encoder products kept for the backward pass.
#[derive(Debug)]
pub struct EncoderCache {
    ur: Array2<f64>,
    ui: Array2<f64>,
    vr: Array2<f64>,
    vi: Array2<f64>,
}

#[derive(Debug)]
pub struct BnFcCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    post_bn: Array2<f64>,
    pre_act: Array2<f64>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug)]
pub struct ForwardCache {
    encoder: EncoderCache,
    decoder: Vec<BnFcCache>,
}

/// Gradients for every trainable group; the frozen basis has none.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub wrf_phases: Array2<f64>,
    pub wbb_re: Array2<f64>,
    pub wbb_im: Array2<f64>,
    pub bn_scale: [Array1<f64>; 3],
    pub bn_shift: [Array1<f64>; 3],
    pub fc_weights: [Array2<f64>; 3],
    pub fc_bias: [Array1<f64>; 3],
}

impl GradientSet {
    pub fn is_finite(&self) -> bool {
        let arrays1 = self.bn_scale.iter().chain(&self.bn_shift).chain(&self.fc_bias);
        let arrays2 = [&self.wrf_phases, &self.wbb_re, &self.wbb_im]
            .into_iter()
            .chain(&self.fc_weights);
        arrays1.flat_map(|a| a.iter()).all(|v| v.is_finite())
            && arrays2.flat_map(|a| a.iter()).all(|v| v.is_finite())
    }
}

/// Mean squared error per sample: `(1/n) sum_i ||a_i - b_i||^2` with the
/// norm over all real features of a row.
pub fn mse_loss(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "mse_loss on mismatched shapes");
    let n = a.nrows().max(1) as f64;
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// Fresh model: encoder taken from `encoder_init` (conventional matrices
/// unless a learned set is supplied), decoder Xavier-uniform, BN at identity.
pub fn init_model(seed: u64, encoder_init: &MeasurementConfig, meta: ModelMeta) -> Result<AutoencoderModel> {
    encoder_init.validate()?;
    let n = encoder_init.n();
    let r = encoder_init.r();
    let basis = AngularBasis::new(n)?;
    let b_re = basis.matrix().mapv(|z| z.re);
    let b_im = basis.matrix().mapv(|z| z.im);

    let mut rng = sample_stream(derive_seed(seed, "xavier-init"), 0);
    let dims = [(2 * r, 8 * n), (8 * n, 4 * n), (4 * n, 2 * n)];
    let fc = dims.map(|(fan_in, fan_out)| {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound));
        Dense { weights, bias: Array1::zeros(fan_out) }
    });
    let bn = [BatchNorm::new(2 * r), BatchNorm::new(8 * n), BatchNorm::new(4 * n)];

    Ok(AutoencoderModel {
        n,
        r,
        b_re,
        b_im,
        wrf_phases: encoder_init.w_rf.phases().clone(),
        wbb_re: encoder_init.w_bb.mapv(|z| z.re),
        wbb_im: encoder_init.w_bb.mapv(|z| z.im),
        bn,
        fc,
        meta,
    })
}

impl AutoencoderModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Analog matrix entries from the current phases: modulus exactly
    /// `1/sqrt(N)` whatever the phases are.
    fn wrf_re_im(&self) -> (Array2<f64>, Array2<f64>) {
        let s = 1.0 / (self.n as f64).sqrt();
        (self.wrf_phases.mapv(|p| p.cos() * s), self.wrf_phases.mapv(|p| p.sin() * s))
    }

    /// `y = W_BB W_RF B x` on a real-stacked batch (rows are samples,
    /// columns `[Re x | Im x]`). Returns the real-stacked code and the
    /// intermediates for backprop.
    pub fn encoder_forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, EncoderCache)> {
        if x.ncols() != 2 * self.n {
            return Err(Error::DimMismatch(format!(
                "encoder input has {} features, expected {}",
                x.ncols(),
                2 * self.n
            )));
        }
        let (xr, xi) = (x.slice(ndarray::s![.., ..self.n]), x.slice(ndarray::s![.., self.n..]));
        // Row-vector convention: u = x B^T for column convention u = B x.
        let ur = xr.dot(&self.b_re.t()) - xi.dot(&self.b_im.t());
        let ui = xr.dot(&self.b_im.t()) + xi.dot(&self.b_re.t());
        let (wr, wi) = self.wrf_re_im();
        let vr = ur.dot(&wr.t()) - ui.dot(&wi.t());
        let vi = ur.dot(&wi.t()) + ui.dot(&wr.t());
        let yr = vr.dot(&self.wbb_re.t()) - vi.dot(&self.wbb_im.t());
        let yi = vr.dot(&self.wbb_im.t()) + vi.dot(&self.wbb_re.t());
        let mut y = Array2::zeros((x.nrows(), 2 * self.r));
        y.slice_mut(ndarray::s![.., ..self.r]).assign(&yr);
        y.slice_mut(ndarray::s![.., self.r..]).assign(&yi);
        Ok((y, EncoderCache { ur, ui, vr, vi }))
    }

    fn check_code_width(&self, y: &Array2<f64>) -> Result<()> {
        if y.ncols() != 2 * self.r {
            return Err(Error::DimMismatch(format!(
                "decoder input has {} features, expected {}",
                y.ncols(),
                2 * self.r
            )));
        }
        Ok(())
    }

    /// Decoder in training mode: batch statistics drive BN and update the
    /// running estimates.
    pub fn decoder_train(&mut self, y: &Array2<f64>) -> Result<(Array2<f64>, Vec<BnFcCache>)> {
        self.check_code_width(y)?;
        let batch = y.nrows();
        if batch == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut h = y.clone();
        let mut caches = Vec::with_capacity(3);
        for li in 0..3 {
            let bn = &mut self.bn[li];
            let mu = h.mean_axis(Axis(0)).unwrap();
            let mut var = Array1::<f64>::zeros(h.ncols());
            for row in h.rows() {
                for (j, v) in row.iter().enumerate() {
                    let d = v - mu[j];
                    var[j] += d * d;
                }
            }
            var.mapv_inplace(|v| v / batch as f64);
            bn.running_mean = BN_MOMENTUM * &bn.running_mean + (1.0 - BN_MOMENTUM) * &mu;
            bn.running_var = BN_MOMENTUM * &bn.running_var + (1.0 - BN_MOMENTUM) * &var;
            let inv_std = var.mapv(|v| 1.0 / (v + bn.epsilon).sqrt());
            let xhat = (&h - &mu) * &inv_std;
            let post_bn = &xhat * &bn.scale + &bn.shift;
            let pre_act = post_bn.dot(&self.fc[li].weights.t()) + &self.fc[li].bias;
            h = if li < 2 { pre_act.mapv(|z| z.max(0.0)) } else { pre_act.clone() };
            caches.push(BnFcCache { xhat, inv_std, post_bn, pre_act });
        }
        Ok((h, caches))
    }

    /// Decoder in inference mode: running statistics, no state change.
    pub fn decoder_infer(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_code_width(y)?;
        let mut h = y.clone();
        for li in 0..3 {
            let bn = &self.bn[li];
            let inv_std = bn.running_var.mapv(|v| 1.0 / (v + bn.epsilon).sqrt());
            let xhat = (&h - &bn.running_mean) * &inv_std;
            let post_bn = &xhat * &bn.scale + &bn.shift;
            let z = post_bn.dot(&self.fc[li].weights.t()) + &self.fc[li].bias;
            h = if li < 2 { z.mapv(|v| v.max(0.0)) } else { z };
        }
        Ok(h)
    }

    /// Full training-mode pass: measurement then estimate.
    pub fn forward_train(&mut self, x_noisy: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        let (y, encoder) = self.encoder_forward(x_noisy)?;
        let (out, decoder) = self.decoder_train(&y)?;
        Ok((out, ForwardCache { encoder, decoder }))
    }

    /// Full inference pass.
    pub fn forward_infer(&self, x_noisy: &Array2<f64>) -> Result<Array2<f64>> {
        let (y, _) = self.encoder_forward(x_noisy)?;
        self.decoder_infer(&y)
    }

    /// Reverse-mode gradients of [`mse_loss`] for one cached forward pass.
    ///
    /// The decoder part is the textbook FC/ReLU/BN chain. The encoder part
    /// backpropagates through the three complex layers on split real and
    /// imaginary parts; the phase gradient follows from
    /// `d(cos)/d(phi) = -sin`, `d(sin)/d(phi) = cos`, i.e. exactly the
    /// parametrization that keeps `|W_RF|` constant.
    pub fn backward(&self, out: &Array2<f64>, target: &Array2<f64>, cache: &ForwardCache) -> Result<GradientSet> {
        if out.dim() != target.dim() {
            return Err(Error::DimMismatch(format!(
                "output {:?} vs target {:?}",
                out.dim(),
                target.dim()
            )));
        }
        let batch = out.nrows() as f64;
        let mut d = (out - target).mapv(|v| 2.0 * v / batch);

        let mut fc_weights: [Option<Array2<f64>>; 3] = [None, None, None];
        let mut fc_bias: [Option<Array1<f64>>; 3] = [None, None, None];
        let mut bn_scale: [Option<Array1<f64>>; 3] = [None, None, None];
        let mut bn_shift: [Option<Array1<f64>>; 3] = [None, None, None];

        for li in (0..3).rev() {
            let c = &cache.decoder[li];
            if li < 2 {
                // Upstream derivative passes only where ReLU was active.
                d.zip_mut_with(&c.pre_act, |g, z| {
                    if *z <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            fc_weights[li] = Some(d.t().dot(&c.post_bn));
            fc_bias[li] = Some(d.sum_axis(Axis(0)));
            d = d.dot(&self.fc[li].weights);
            bn_scale[li] = Some((&d * &c.xhat).sum_axis(Axis(0)));
            bn_shift[li] = Some(d.sum_axis(Axis(0)));
            let dxhat = &d * &self.bn[li].scale;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &c.xhat).sum_axis(Axis(0));
            let b = d.nrows() as f64;
            d = (&(dxhat.mapv(|v| v * b) - &sum_dxhat) - &(&c.xhat * &sum_dxhat_xhat))
                * &c.inv_std.mapv(|v| v / b);
        }

        // Encoder: d is now the real-stacked gradient at the code y.
        let r = self.r;
        let gr = d.slice(ndarray::s![.., ..r]).to_owned();
        let gi = d.slice(ndarray::s![.., r..]).to_owned();
        let ec = &cache.encoder;
        let d_wbb_re = gr.t().dot(&ec.vr) + gi.t().dot(&ec.vi);
        let d_wbb_im = gi.t().dot(&ec.vr) - gr.t().dot(&ec.vi);
        let dvr = gr.dot(&self.wbb_re) + gi.dot(&self.wbb_im);
        let dvi = gi.dot(&self.wbb_re) - gr.dot(&self.wbb_im);
        let (wr, wi) = self.wrf_re_im();
        let d_wr = dvr.t().dot(&ec.ur) + dvi.t().dot(&ec.ui);
        let d_wi = dvi.t().dot(&ec.ur) - dvr.t().dot(&ec.ui);
        let d_phases = &d_wi * &wr - &d_wr * &wi;

        Ok(GradientSet {
            wrf_phases: d_phases,
            wbb_re: d_wbb_re,
            wbb_im: d_wbb_im,
            bn_scale: bn_scale.map(Option::unwrap),
            bn_shift: bn_shift.map(Option::unwrap),
            fc_weights: fc_weights.map(Option::unwrap),
            fc_bias: fc_bias.map(Option::unwrap),
        })
    }

    /// Current encoder as measurement matrices; the exported analog entries
    /// satisfy the unimodulus constraint exactly.
    pub fn export_measurement(&self) -> MeasurementConfig {
        let w_bb = Array2::from_shape_fn((self.r, self.r), |(i, j)| {
            Complex64::new(self.wbb_re[[i, j]], self.wbb_im[[i, j]])
        });
        MeasurementConfig {
            w_rf: AnalogMatrix::from_phases(self.wrf_phases.clone()),
            w_bb,
            sigma2: crate::measurement::sigma2_from_snr_db(self.meta.snr_train_db),
        }
    }

    fn b_mul(&self, x: &Array1<Complex64>) -> Array1<Complex64> {
        Array1::from_shape_fn(self.n, |i| {
            (0..self.n)
                .map(|k| Complex64::new(self.b_re[[i, k]], self.b_im[[i, k]]) * x[k])
                .sum()
        })
    }

    fn b_dagger_mul(&self, h: &Array1<Complex64>) -> Array1<Complex64> {
        Array1::from_shape_fn(self.n, |i| {
            (0..self.n)
                .map(|k| Complex64::new(self.b_re[[k, i]], -self.b_im[[k, i]]) * h[k])
                .sum()
        })
    }

    /// Estimate one antenna's channel from its measurement `y`.
    ///
    /// With `conjugate` set, `y` was measured through the conjugated
    /// matrices of a mirrored user: the decoder runs on `conj(y)` and the
    /// output is mapped back with `x2 = B^H (B x1)^*`. Returns the angular
    /// estimate and its spatial image `h = B x`.
    pub fn estimate(&self, y: &Array1<Complex64>, conjugate: bool) -> Result<(Array1<Complex64>, Array1<Complex64>)> {
        if y.len() != self.r {
            return Err(Error::DimMismatch(format!(
                "measurement has length {}, model has {} chains",
                y.len(),
                self.r
            )));
        }
        let y_eff: Array1<Complex64> = if conjugate { y.mapv(|z| z.conj()) } else { y.clone() };
        let mut stacked = Array2::zeros((1, 2 * self.r));
        for k in 0..self.r {
            stacked[[0, k]] = y_eff[k].re;
            stacked[[0, self.r + k]] = y_eff[k].im;
        }
        let out = self.decoder_infer(&stacked)?;
        let mut x_hat = Array1::from_shape_fn(self.n, |k| Complex64::new(out[[0, k]], out[[0, self.n + k]]));
        if conjugate {
            let spatial_conj = self.b_mul(&x_hat).mapv(|z| z.conj());
            x_hat = self.b_dagger_mul(&spatial_conj);
        }
        let h_hat = self.b_mul(&x_hat);
        Ok((x_hat, h_hat))
    }

    /// Multiply-accumulate count of one decoder pass for a single antenna:
    /// the three FC layers dominate and give `16 R N + 40 N^2`.
    pub fn decoder_mac_count(&self) -> usize {
        let (n, r) = (self.n, self.r);
        (2 * r) * (8 * n) + (8 * n) * (4 * n) + (4 * n) * (2 * n)
    }

    /// True while the frozen basis still equals `angular_basis(N)`.
    pub fn frozen_basis_intact(&self) -> bool {
        let basis = match AngularBasis::new(self.n) {
            Ok(b) => b,
            Err(_) => return false,
        };
        basis
            .matrix()
            .iter()
            .zip(self.b_re.iter().zip(self.b_im.iter()))
            .all(|(z, (re, im))| z.re == *re && z.im == *im)
    }
}
