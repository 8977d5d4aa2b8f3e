//! Multipath channel synthesis and the angular-domain representation.
//!
//! The base station is a uniform linear array with half-wavelength spacing,
//! so the steering vector for a ray arriving at angle `theta` is
//! `a(theta) = [1, e^{j pi sin(theta)}, ..., e^{j pi sin(theta) (N-1)}]^T`.
//! A channel is a sum of `N_p` such rays with CN(0,1) gains. Because the
//! rays of one user cluster inside a narrow azimuth window, the channel is
//! approximately sparse after projecting onto a shifted-DFT basis whose
//! columns sample `sin(theta)` on the grid `eta_n = (2n - 1) / N`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::rng::draw_cn01;
use crate::{Error, Result};

/// Channel simulation parameters. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Base-station antennas N.
    pub n_bs: usize,
    /// User antennas M.
    pub n_ue: usize,
    /// Multipath components N_p.
    pub n_paths: usize,
    /// Half-width of the arrival window around the azimuth, degrees.
    pub spread_deg: f64,
    /// Nominal user azimuth, degrees.
    pub azimuth_deg: f64,
}

impl SimParams {
    pub fn new(n_bs: usize, n_ue: usize, n_paths: usize, spread_deg: f64, azimuth_deg: f64) -> Self {
        Self { n_bs, n_ue, n_paths, spread_deg, azimuth_deg }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bs == 0 || self.n_ue == 0 || self.n_paths == 0 {
            return Err(Error::InvalidParam(format!(
                "array sizes and path count must be positive, got N={} M={} N_p={}",
                self.n_bs, self.n_ue, self.n_paths
            )));
        }
        if !(self.spread_deg >= 0.0) || !self.spread_deg.is_finite() {
            return Err(Error::InvalidParam(format!(
                "angular spread must be finite and non-negative, got {}",
                self.spread_deg
            )));
        }
        if !self.azimuth_deg.is_finite() {
            return Err(Error::InvalidParam("azimuth must be finite".into()));
        }
        Ok(())
    }
}

/// The random draw behind one channel realization: per-path complex gains,
/// arrival angles at the base station, and departure angles at the user.
/// Angles are in radians here because they only feed steering vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub gains: Vec<Complex64>,
    pub aoa_rad: Vec<f64>,
    pub aod_rad: Vec<f64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// ULA steering vector for arrival angle `angle_rad`, length `n`.
pub fn steering_vector(angle_rad: f64, n: usize) -> Array1<Complex64> {
    let omega = std::f64::consts::PI * angle_rad.sin();
    Array1::from_shape_fn(n, |k| Complex64::from_polar(1.0, omega * k as f64))
}

/// Draw one set of multipath components: gains CN(0,1), arrival angles
/// uniform in the spread window around the azimuth, departure angles
/// uniform over the full circle.
pub fn sample_paths<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Result<PathSet> {
    params.validate()?;
    let lo = (params.azimuth_deg - params.spread_deg).to_radians();
    let hi = (params.azimuth_deg + params.spread_deg).to_radians();
    let np = params.n_paths;
    let mut gains = Vec::with_capacity(np);
    let mut aoa = Vec::with_capacity(np);
    let mut aod = Vec::with_capacity(np);
    for _ in 0..np {
        gains.push(draw_cn01(rng));
        aoa.push(if lo == hi { lo } else { rng.random_range(lo..hi) });
        aod.push(rng.random_range(0.0..std::f64::consts::TAU));
    }
    Ok(PathSet { gains, aoa_rad: aoa, aod_rad: aod })
}

/// Assemble the N x M channel from its paths:
/// `H = (1/sqrt(N_p)) sum_i alpha_i a_B(theta_i) a_U(phi_i)^T`.
pub fn synth_channel(paths: &PathSet, n_bs: usize, n_ue: usize) -> Result<Array2<Complex64>> {
    if paths.is_empty() {
        return Err(Error::InvalidParam("path set is empty".into()));
    }
    if paths.aoa_rad.len() != paths.len() || paths.aod_rad.len() != paths.len() {
        return Err(Error::DimMismatch(format!(
            "path set has {} gains, {} arrival angles, {} departure angles",
            paths.gains.len(),
            paths.aoa_rad.len(),
            paths.aod_rad.len()
        )));
    }
    let mut h = Array2::<Complex64>::zeros((n_bs, n_ue));
    for ((&alpha, &theta), &phi) in paths.gains.iter().zip(&paths.aoa_rad).zip(&paths.aod_rad) {
        let a_bs = steering_vector(theta, n_bs);
        let a_ue = steering_vector(phi, n_ue);
        for i in 0..n_bs {
            for j in 0..n_ue {
                h[[i, j]] += alpha * a_bs[i] * a_ue[j];
            }
        }
    }
    let scale = Complex64::new(1.0 / (paths.len() as f64).sqrt(), 0.0);
    Ok(h.mapv(|z| z * scale))
}

/// Reflect a path set across broadside: negate both angle sets and
/// conjugate the gains, so the synthesized channel is exactly the complex
/// conjugate of the original.
pub fn mirror_paths(paths: &PathSet) -> PathSet {
    PathSet {
        gains: paths.gains.iter().map(|g| g.conj()).collect(),
        aoa_rad: paths.aoa_rad.iter().map(|t| -t).collect(),
        aod_rad: paths.aod_rad.iter().map(|p| -p).collect(),
    }
}

/// Shifted-DFT angular basis. Column `n` is
/// `(1/sqrt(N)) [1, e^{j pi eta_n}, ..., e^{j pi eta_n (N-1)}]^T` with
/// `eta_n = (2n - 1) / N`, which makes the matrix unitary: the columns
/// sample the sine-of-arrival axis on a uniform grid offset by half a bin.
#[derive(Debug, Clone)]
pub struct AngularBasis {
    b: Array2<Complex64>,
    eta: Vec<f64>,
}

impl AngularBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("basis size must be positive".into()));
        }
        let eta: Vec<f64> = (0..n).map(|i| (2.0 * i as f64 - 1.0) / n as f64).collect();
        let scale = 1.0 / (n as f64).sqrt();
        let b = Array2::from_shape_fn((n, n), |(k, col)| {
            Complex64::from_polar(scale, std::f64::consts::PI * eta[col] * k as f64)
        });
        Ok(Self { b, eta })
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.b
    }

    /// Grid of `sin(theta)` values, one per column.
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Spatial to angular: `X = B^H H`.
    pub fn to_angular(&self, h: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        if h.nrows() != self.n() {
            return Err(Error::DimMismatch(format!(
                "to_angular: channel has {} rows, basis size is {}",
                h.nrows(),
                self.n()
            )));
        }
        Ok(crate::linalg::dagger(&self.b).dot(h))
    }

    /// Angular back to spatial: `H = B X`.
    pub fn from_angular(&self, x: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        if x.nrows() != self.n() {
            return Err(Error::DimMismatch(format!(
                "from_angular: coefficients have {} rows, basis size is {}",
                x.nrows(),
                self.n()
            )));
        }
        Ok(self.b.dot(x))
    }
}
