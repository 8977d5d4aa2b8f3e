//! Pilot design, the hybrid combiner, and the observation chain.
//!
//! During training the user sends one pilot matrix `P` (unitary DFT, one
//! column per symbol) and the base station sees
//! `Y = W_BB W_RF (H P + E)` with `E` i.i.d. CN(0, sigma^2). Correlating
//! against pilot row `m` isolates the m-th user antenna:
//! `y_m = Y p_m^H = W_BB W_RF (h_m + n_m)`. In the angular basis this is the
//! compressed-sensing model `y_m = Phi (x_m + v_m)` with
//! `Phi = W_BB W_RF B`, and `v_m` again i.i.d. CN(0, sigma^2) because `B`
//! is unitary.
//!
//! The conventional (untrained) combiner uses cyclic shifts of a Zadoff-Chu
//! sequence on the phase shifters: constant modulus by construction and
//! with exactly orthogonal rows.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::AngularBasis;
use crate::linalg::dagger;
use crate::rng::draw_cn01;
use crate::{Error, Result};

/// Noise variance for a given SNR in dB, with channel entries at unit power.
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    if snr_db.is_infinite() && snr_db > 0.0 {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

pub fn snr_db_from_sigma2(sigma2: f64) -> f64 {
    -10.0 * sigma2.log10()
}

/// Unitary pilot matrix; rows are orthonormal so pilot correlation
/// separates user antennas without coloring the noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Pilot {
    p: Array2<Complex64>,
}

impl Pilot {
    /// Scaled M x M DFT: entry (k, l) is `e^{-j 2 pi k l / M} / sqrt(M)`.
    pub fn dft(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParam("pilot size must be positive".into()));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let p = Array2::from_shape_fn((m, m), |(k, l)| {
            Complex64::from_polar(scale, -std::f64::consts::TAU * (k * l) as f64 / m as f64)
        });
        Ok(Self { p })
    }

    pub fn m(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.p
    }

    pub fn row(&self, m: usize) -> Array1<Complex64> {
        self.p.row(m).to_owned()
    }
}

/// Smallest Zadoff-Chu root: the first integer above 1 coprime with `n`.
pub fn zadoff_chu_root(n: usize) -> usize {
    (2..).find(|q| gcd(*q, n) == 1).unwrap()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Phase-shifter network: every entry has modulus `1/sqrt(N)`, so the
/// matrix is fully described by its phases.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogMatrix {
    phases: Array2<f64>,
}

impl AnalogMatrix {
    /// Cyclic shifts of a Zadoff-Chu sequence, one per RF chain, spaced by
    /// `floor(N / R)` to spread the rows over the sequence period.
    pub fn zadoff_chu(n: usize, r: usize) -> Result<Self> {
        if r == 0 || n == 0 || r > n {
            return Err(Error::InvalidParam(format!(
                "analog matrix needs 1 <= R <= N, got R={r} N={n}"
            )));
        }
        let q = zadoff_chu_root(n) as f64;
        let nf = n as f64;
        let seq_phase = |k: usize| -> f64 {
            let kf = k as f64;
            if n % 2 == 0 {
                -std::f64::consts::PI * q * kf * kf / nf
            } else {
                -std::f64::consts::PI * q * kf * (kf + 1.0) / nf
            }
        };
        let step = n / r;
        let phases = Array2::from_shape_fn((r, n), |(i, k)| seq_phase((k + i * step) % n));
        Ok(Self { phases })
    }

    pub fn from_phases(phases: Array2<f64>) -> Self {
        Self { phases }
    }

    pub fn n_chains(&self) -> usize {
        self.phases.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.phases.ncols()
    }

    pub fn phases(&self) -> &Array2<f64> {
        &self.phases
    }

    /// Complex entries `e^{j phase} / sqrt(N)`.
    pub fn entries(&self) -> Array2<Complex64> {
        let scale = 1.0 / (self.n_antennas() as f64).sqrt();
        self.phases.mapv(|p| Complex64::from_polar(scale, p))
    }

    /// Entry-wise conjugate (negated phases), used for mirrored regions.
    pub fn conjugated(&self) -> Self {
        Self { phases: self.phases.mapv(|p| -p) }
    }
}

/// One complete receive configuration: analog phases, digital combiner,
/// and the noise level it is meant to operate at.
#[derive(Debug, Clone)]
pub struct MeasurementConfig {
    pub w_rf: AnalogMatrix,
    pub w_bb: Array2<Complex64>,
    pub sigma2: f64,
}

impl MeasurementConfig {
    /// Untrained baseline: Zadoff-Chu analog stage, identity digital stage.
    pub fn conventional(n: usize, r: usize, sigma2: f64) -> Result<Self> {
        let w_rf = AnalogMatrix::zadoff_chu(n, r)?;
        let w_bb = Array2::from_diag(&Array1::from_elem(r, Complex64::new(1.0, 0.0)));
        Ok(Self { w_rf, w_bb, sigma2 })
    }

    pub fn n(&self) -> usize {
        self.w_rf.n_antennas()
    }

    pub fn r(&self) -> usize {
        self.w_rf.n_chains()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.r();
        if self.w_bb.nrows() != r || self.w_bb.ncols() != r {
            return Err(Error::DimMismatch(format!(
                "digital combiner is {}x{}, expected {r}x{r}",
                self.w_bb.nrows(),
                self.w_bb.ncols()
            )));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::InvalidParam(format!("sigma2 must be finite and >= 0, got {}", self.sigma2)));
        }
        Ok(())
    }

    /// Combined sensing matrix in the angular domain: `Phi = W_BB W_RF B`.
    pub fn effective_matrix(&self, basis: &AngularBasis) -> Result<Array2<Complex64>> {
        self.validate()?;
        if basis.n() != self.n() {
            return Err(Error::DimMismatch(format!(
                "basis size {} does not match antenna count {}",
                basis.n(),
                self.n()
            )));
        }
        Ok(self.w_bb.dot(&self.w_rf.entries()).dot(basis.matrix()))
    }
}

/// Run one pilot block through the receive chain. Returns the R x M block
/// observation `Y` and the per-antenna correlated measurements `y_m`.
pub fn observe_block<R: Rng + ?Sized>(
    h: &Array2<Complex64>,
    cfg: &MeasurementConfig,
    pilot: &Pilot,
    rng: &mut R,
) -> Result<(Array2<Complex64>, Vec<Array1<Complex64>>)> {
    cfg.validate()?;
    let (n, m) = (h.nrows(), h.ncols());
    if n != cfg.n() {
        return Err(Error::DimMismatch(format!(
            "channel has {n} rows, combiner expects {}",
            cfg.n()
        )));
    }
    if m != pilot.m() {
        return Err(Error::DimMismatch(format!(
            "channel has {m} columns, pilot is for {} antennas",
            pilot.m()
        )));
    }
    let sigma = cfg.sigma2.sqrt();
    let mut received = h.dot(pilot.matrix());
    if sigma > 0.0 {
        for z in received.iter_mut() {
            *z += draw_cn01(rng) * sigma;
        }
    }
    let y = cfg.w_bb.dot(&cfg.w_rf.entries()).dot(&received);
    let p_h = dagger(pilot.matrix());
    let per_antenna = (0..m).map(|i| y.dot(&p_h.column(i).to_owned())).collect();
    Ok((y, per_antenna))
}

/// Statistically equivalent shortcut to the full chain: because the basis
/// is unitary, receive noise maps to i.i.d. CN(0, sigma^2) directly on the
/// angular coefficients, so `y = Phi (x + v)`.
pub fn angular_noise_equivalent<R: Rng + ?Sized>(
    x: &Array2<Complex64>,
    sigma2: f64,
    rng: &mut R,
) -> Array2<Complex64> {
    if sigma2 == 0.0 {
        return x.clone();
    }
    let sigma = sigma2.sqrt();
    let mut out = x.clone();
    for z in out.iter_mut() {
        *z += draw_cn01(rng) * sigma;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_paths, synth_channel, SimParams};
    use crate::rng::sample_stream;

    #[test]
    fn snr_conversions() {
        assert!((sigma2_from_snr_db(10.0) - 0.1).abs() < 1e-15);
        assert!((sigma2_from_snr_db(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(sigma2_from_snr_db(f64::INFINITY), 0.0);
        assert!((snr_db_from_sigma2(0.01) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn pilot_rows_orthonormal() {
        let pilot = Pilot::dft(4).unwrap();
        let gram = pilot.matrix().dot(&dagger(pilot.matrix()));
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zadoff_chu_roots() {
        assert_eq!(zadoff_chu_root(64), 3);
        assert_eq!(zadoff_chu_root(63), 2);
        assert_eq!(zadoff_chu_root(6), 5);
    }

    #[test]
    fn zadoff_chu_rows_constant_modulus_and_orthogonal() {
        for (n, r) in [(64usize, 16usize), (32, 8), (63, 9)] {
            let w = AnalogMatrix::zadoff_chu(n, r).unwrap();
            let e = w.entries();
            let want = 1.0 / (n as f64).sqrt();
            for z in e.iter() {
                assert!((z.norm() - want).abs() < 1e-15);
            }
            // Distinct cyclic shifts of a Zadoff-Chu sequence are exactly
            // orthogonal, so cross-correlations vanish.
            let gram = e.dot(&dagger(&e));
            for i in 0..r {
                for j in 0..r {
                    if i == j {
                        assert!((gram[[i, j]].re - 1.0).abs() < 1e-12);
                    } else {
                        assert!(gram[[i, j]].norm() < 1e-12, "n={n} r={r} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn effective_matrix_rows_unit_norm() {
        let cfg = MeasurementConfig::conventional(32, 8, 0.1).unwrap();
        let basis = AngularBasis::new(32).unwrap();
        let phi = cfg.effective_matrix(&basis).unwrap();
        assert_eq!(phi.dim(), (8, 32));
        for row in phi.rows() {
            let norm: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_observation_matches_phi_x() {
        let params = SimParams::new(32, 4, 20, 5.0, 30.0);
        let mut rng = sample_stream(3, 0);
        let paths = sample_paths(&params, &mut rng).unwrap();
        let h = synth_channel(&paths, 32, 4).unwrap();
        let cfg = MeasurementConfig::conventional(32, 8, 0.0).unwrap();
        let pilot = Pilot::dft(4).unwrap();
        let basis = AngularBasis::new(32).unwrap();
        let phi = cfg.effective_matrix(&basis).unwrap();
        let x = basis.to_angular(&h).unwrap();
        let (_, ys) = observe_block(&h, &cfg, &pilot, &mut rng).unwrap();
        for (m, y) in ys.iter().enumerate() {
            let want = phi.dot(&x.column(m).to_owned());
            let defect: f64 = (y - &want).iter().map(|z| z.norm()).sum();
            assert!(defect < 1e-12, "antenna {m}: defect {defect:e}");
        }
    }

    #[test]
    fn angular_noise_shortcut_is_exact_for_shared_draw() {
        // With the same additive noise E, the full chain and the angular
        // shortcut produce identical measurements once E is rotated into
        // the angular domain.
        let params = SimParams::new(16, 2, 10, 5.0, 40.0);
        let mut rng = sample_stream(9, 0);
        let paths = sample_paths(&params, &mut rng).unwrap();
        let h = synth_channel(&paths, 16, 2).unwrap();
        let cfg = MeasurementConfig::conventional(16, 4, 0.0).unwrap();
        let pilot = Pilot::dft(2).unwrap();
        let basis = AngularBasis::new(16).unwrap();
        let phi = cfg.effective_matrix(&basis).unwrap();

        let sigma2 = 0.1_f64;
        let e = Array2::from_shape_fn((16, 2), |_| draw_cn01(&mut rng) * sigma2.sqrt());

        // Full chain with explicit noise.
        let w = cfg.w_bb.dot(&cfg.w_rf.entries());
        let y_full = w.dot(&(&h.dot(pilot.matrix()) + &e));
        let p_h = dagger(pilot.matrix());
        let y0 = y_full.dot(&p_h.column(0).to_owned());

        // Shortcut with the rotated draw.
        let x = basis.to_angular(&h).unwrap();
        let v = basis.to_angular(&e.dot(&p_h)).unwrap();
        let y0_short = phi.dot(&(&x.column(0) + &v.column(0)).to_owned());

        let defect: f64 = (&y0 - &y0_short).iter().map(|z| z.norm()).sum();
        assert!(defect < 1e-12, "defect {defect:e}");
    }

    #[test]
    fn angular_noise_power_matches_sigma2() {
        let mut rng = sample_stream(17, 0);
        let x = Array2::<Complex64>::zeros((16, 1));
        let sigma2 = 0.25;
        let trials = 4000;
        let mut power = 0.0;
        for _ in 0..trials {
            let noisy = angular_noise_equivalent(&x, sigma2, &mut rng);
            power += noisy.iter().map(|z| z.norm_sqr()).sum::<f64>() / 16.0;
        }
        power /= trials as f64;
        assert!((power - sigma2).abs() < 0.01, "power {power}");
    }

    #[test]
    fn dimension_errors() {
        let cfg = MeasurementConfig::conventional(16, 4, 0.1).unwrap();
        let basis_wrong = AngularBasis::new(8).unwrap();
        assert!(cfg.effective_matrix(&basis_wrong).is_err());
        let h = Array2::<Complex64>::zeros((8, 2));
        let pilot = Pilot::dft(2).unwrap();
        let mut rng = sample_stream(0, 0);
        assert!(observe_block(&h, &cfg, &pilot, &mut rng).is_err());
        assert!(AnalogMatrix::zadoff_chu(8, 16).is_err());
    }
}
