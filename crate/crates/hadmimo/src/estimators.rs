//! Classical baselines: full-overhead least squares, orthogonal matching
//! pursuit, and sparse Bayesian learning.
//!
//! OMP and SBL solve the compressed model `y = Phi x + n` with `y` of
//! length R and `x` of length N. LS instead spends `N / R` pilot slots with
//! rotating analog matrices so the stacked system becomes square; it needs
//! no sparsity assumption and serves as the high-overhead reference.

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;

use crate::channel::AngularBasis;
use crate::linalg::{cholesky, chol_logdet, chol_solve, chol_solve_mat, dagger, lu_solve};
use crate::measurement::AnalogMatrix;
use crate::{Error, Result};

/// Knobs shared by the iterative solvers.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Iteration cap: selected atoms for OMP, EM steps for SBL.
    pub max_iters: usize,
    /// OMP stops once the residual 2-norm falls below this.
    pub residual_tol: f64,
    /// OMP: stop after exactly this many atoms (residual permitting).
    pub sparsity_k: Option<usize>,
    /// SBL declares convergence when no precision moves by more than this
    /// relative amount in one step.
    pub conv_tol: f64,
    /// SBL precisions are clamped here; a clamped component is pruned.
    pub gamma_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            residual_tol: 1e-10,
            sparsity_k: None,
            conv_tol: 1e-4,
            gamma_max: 1e8,
        }
    }
}

/// Output of a sparse solver.
#[derive(Debug, Clone)]
pub struct SparseEstimate {
    /// Angular-domain coefficient estimate, length N.
    pub x_hat: Array1<Complex64>,
    /// Indices the solver considers active, ascending.
    pub support: Vec<usize>,
    /// SBL only: final per-component precisions.
    pub precisions: Option<Vec<f64>>,
    /// Iterations actually run.
    pub iterations: usize,
    /// Final residual 2-norm `||y - Phi x_hat||`.
    pub residual_norm: f64,
}

fn check_system(y: &Array1<Complex64>, phi: &Array2<Complex64>) -> Result<()> {
    if phi.nrows() != y.len() {
        return Err(Error::DimMismatch(format!(
            "measurement has length {}, matrix is {}x{}",
            y.len(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    Ok(())
}

/// Orthogonal matching pursuit with least-squares refitting.
///
/// Each iteration adds the column with the largest residual correlation
/// `|phi_k^H r|` and re-solves the LS problem on the grown support. The
/// correlation is deliberately not normalized per column: on dictionaries
/// with very uneven column energies (a learned measurement), picking a
/// near-dead column by angle alone produces a huge refit coefficient, so
/// magnitude-weighted selection is the stable classical form. Runs until
/// `sparsity_k` atoms are chosen, the residual drops under `residual_tol`,
/// or R atoms are reached.
pub fn omp(y: &Array1<Complex64>, phi: &Array2<Complex64>, cfg: &SolverConfig) -> Result<SparseEstimate> {
    check_system(y, phi)?;
    let (r, n) = phi.dim();
    let col_norms: Vec<f64> = phi
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let limit = cfg.sparsity_k.unwrap_or(r).min(r).min(cfg.max_iters);

    let mut support: Vec<usize> = Vec::new();
    let mut x_hat = Array1::<Complex64>::zeros(n);
    let mut residual = y.clone();
    let mut res_norm = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut iterations = 0;

    while iterations < limit && res_norm > cfg.residual_tol {
        let mut best = None;
        let mut best_score = 0.0_f64;
        for k in 0..n {
            if support.contains(&k) || col_norms[k] == 0.0 {
                continue;
            }
            let corr: Complex64 = phi
                .column(k)
                .iter()
                .zip(residual.iter())
                .map(|(p, r)| p.conj() * r)
                .sum();
            let score = corr.norm();
            if score > best_score {
                best_score = score;
                best = Some(k);
            }
        }
        let Some(k) = best else { break };
        support.push(k);
        iterations += 1;

        // LS refit on the current support via the normal equations.
        let s = support.len();
        let mut phi_s = Array2::<Complex64>::zeros((r, s));
        for (j, &idx) in support.iter().enumerate() {
            phi_s.column_mut(j).assign(&phi.column(idx));
        }
        let gram = dagger(&phi_s).dot(&phi_s);
        let rhs = dagger(&phi_s).dot(y);
        let coeffs = match cholesky(&gram) {
            Ok(l) => chol_solve(&l, &rhs),
            // A rank-deficient selection cannot improve the fit further.
            Err(_) => {
                support.pop();
                break;
            }
        };
        x_hat.fill(Complex64::new(0.0, 0.0));
        for (j, &idx) in support.iter().enumerate() {
            x_hat[idx] = coeffs[j];
        }
        residual = y - &phi_s.dot(&coeffs);
        res_norm = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }

    let mut support_sorted = support;
    support_sorted.sort_unstable();
    Ok(SparseEstimate {
        x_hat,
        support: support_sorted,
        precisions: None,
        iterations,
        residual_norm: res_norm,
    })
}

/// Log evidence `ln p(y | gamma)` of the SBL model, up to nothing: the
/// exact complex Gaussian log density at `y` with covariance
/// `C = sigma^2 I + Phi diag(1/gamma) Phi^H`.
pub fn sbl_log_evidence(
    y: &Array1<Complex64>,
    phi: &Array2<Complex64>,
    sigma2: f64,
    precisions: &[f64],
) -> Result<f64> {
    check_system(y, phi)?;
    let c = sbl_marginal_cov(phi, sigma2, precisions)?;
    let l = cholesky(&c)?;
    let cinv_y = chol_solve(&l, y);
    let quad: f64 = y.iter().zip(cinv_y.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    let r = y.len() as f64;
    Ok(-r * std::f64::consts::PI.ln() - chol_logdet(&l) - quad)
}

fn sbl_marginal_cov(phi: &Array2<Complex64>, sigma2: f64, precisions: &[f64]) -> Result<Array2<Complex64>> {
    let (r, n) = phi.dim();
    if precisions.len() != n {
        return Err(Error::DimMismatch(format!(
            "{} precisions for {} columns",
            precisions.len(),
            n
        )));
    }
    let mut c = Array2::<Complex64>::zeros((r, r));
    for i in 0..r {
        c[[i, i]] = Complex64::new(sigma2, 0.0);
    }
    for (k, &g) in precisions.iter().enumerate() {
        let var = 1.0 / g;
        if var == 0.0 {
            continue;
        }
        let col = phi.column(k);
        for i in 0..r {
            for j in 0..r {
                c[[i, j]] += col[i] * col[j].conj() * var;
            }
        }
    }
    Ok(c)
}

/// Sparse Bayesian learning by EM on per-component precisions.
///
/// The posterior moments are computed through the R x R marginal
/// covariance (Woodbury form), so cost scales with the number of RF chains
/// rather than the basis size. The EM update never decreases the evidence;
/// components whose precision hits `gamma_max` are treated as pruned.
pub fn sbl(
    y: &Array1<Complex64>,
    phi: &Array2<Complex64>,
    sigma2: f64,
    cfg: &SolverConfig,
) -> Result<SparseEstimate> {
    check_system(y, phi)?;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParam(format!(
            "sbl needs a positive noise variance, got {sigma2}"
        )));
    }
    let (_, n) = phi.dim();
    let phi_h = dagger(phi);
    let mut gamma = vec![1.0_f64; n];
    let mut mu = Array1::<Complex64>::zeros(n);
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let c = sbl_marginal_cov(phi, sigma2, &gamma)?;
        let l = cholesky(&c)?;
        let cinv_y = chol_solve(&l, y);
        let cinv_phi = chol_solve_mat(&l, phi);

        let mut max_rel = 0.0_f64;
        let mut next = vec![0.0_f64; n];
        for k in 0..n {
            let var = 1.0 / gamma[k];
            let mu_k: Complex64 = phi_h.row(k).iter().zip(cinv_y.iter()).map(|(a, b)| a * b).sum::<Complex64>() * var;
            mu[k] = mu_k;
            let quad: f64 = phi
                .column(k)
                .iter()
                .zip(cinv_phi.column(k).iter())
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            let sigma_kk = (var - var * var * quad).max(0.0);
            let g_new = (1.0 / (mu_k.norm_sqr() + sigma_kk).max(1.0 / cfg.gamma_max)).min(cfg.gamma_max);
            max_rel = max_rel.max((g_new - gamma[k]).abs() / gamma[k]);
            next[k] = g_new;
        }
        gamma = next;
        if max_rel < cfg.conv_tol {
            break;
        }
    }

    // Posterior mean under the final precisions.
    let c = sbl_marginal_cov(phi, sigma2, &gamma)?;
    let l = cholesky(&c)?;
    let cinv_y = chol_solve(&l, y);
    for k in 0..n {
        let var = 1.0 / gamma[k];
        mu[k] = phi_h.row(k).iter().zip(cinv_y.iter()).map(|(a, b)| a * b).sum::<Complex64>() * var;
    }

    let residual = y - &phi.dot(&mu);
    let support: Vec<usize> = (0..n).filter(|&k| gamma[k] < cfg.gamma_max).collect();
    Ok(SparseEstimate {
        x_hat: mu,
        support,
        precisions: Some(gamma),
        iterations,
        residual_norm: residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
    })
}

/// Analog matrices for the full-overhead LS scheme: `N / R` slots whose
/// rows walk through a scaled DFT, so the stacked system is unitary.
pub fn ls_slot_matrices(n: usize, r: usize) -> Result<Vec<AnalogMatrix>> {
    if r == 0 || n == 0 || n % r != 0 {
        return Err(Error::InvalidParam(format!(
            "full-overhead LS needs R dividing N, got N={n} R={r}"
        )));
    }
    let slots = n / r;
    let mut out = Vec::with_capacity(slots);
    for t in 0..slots {
        let phases = Array2::from_shape_fn((r, n), |(i, k)| {
            -std::f64::consts::TAU * ((t * r + i) * k) as f64 / n as f64
        });
        out.push(AnalogMatrix::from_phases(phases));
    }
    Ok(out)
}

/// Least-squares channel estimate from one observation per LS slot:
/// stacks `y_t = W_t h` into a square system and solves it.
pub fn ls_full_overhead(
    observations: &[Array1<Complex64>],
    slots: &[AnalogMatrix],
) -> Result<Array1<Complex64>> {
    if observations.is_empty() || observations.len() != slots.len() {
        return Err(Error::DimMismatch(format!(
            "{} observations for {} slots",
            observations.len(),
            slots.len()
        )));
    }
    let n = slots[0].n_antennas();
    let r = slots[0].n_chains();
    if r * slots.len() != n {
        return Err(Error::DimMismatch(format!(
            "slots stack to {} rows, expected {n}",
            r * slots.len()
        )));
    }
    let mut a = Array2::<Complex64>::zeros((n, n));
    let mut y = Array1::<Complex64>::zeros(n);
    for (t, (obs, w)) in observations.iter().zip(slots).enumerate() {
        if obs.len() != r || w.n_antennas() != n || w.n_chains() != r {
            return Err(Error::DimMismatch(format!("slot {t} has inconsistent shape")));
        }
        a.slice_mut(ndarray::s![t * r..(t + 1) * r, ..]).assign(&w.entries());
        y.slice_mut(ndarray::s![t * r..(t + 1) * r]).assign(obs);
    }
    lu_solve(a, &y)
}

/// Map an angular estimate back to the antenna domain.
pub fn recover_spatial(x_hat: &Array1<Complex64>, basis: &AngularBasis) -> Result<Array1<Complex64>> {
    let x = x_hat.clone().insert_axis(Axis(1));
    let h = basis.from_angular(&x)?;
    Ok(h.column(0).to_owned())
}
