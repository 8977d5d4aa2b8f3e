//! Walk the uplink receive chain once: pilots from the user, analog
//! combining with R chains, digital combining, and pilot correlation back
//! to per-antenna measurements. Checks that the noiseless chain matches
//! the compact form y = Phi x used everywhere else.

use hadmimo::channel::{sample_paths, synth_channel, AngularBasis, SimParams};
use hadmimo::measurement::{observe_block, sigma2_from_snr_db, MeasurementConfig, Pilot};
use hadmimo::rng::sample_stream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = SimParams::new(64, 4, 20, 5.0, 12.0);
    let (n, m, r) = (params.n_bs, params.n_ue, 16);
    let mut rng = sample_stream(9, 0);
    let paths = sample_paths(&params, &mut rng)?;
    let h = synth_channel(&paths, n, m)?;
    let basis = AngularBasis::new(n)?;
    let x = basis.to_angular(&h)?;
    let pilot = Pilot::dft(m)?;

    println!("H is {n} x {m}, pilot block is {m} x {m}, combiner output keeps {r} chains");

    let clean = MeasurementConfig::conventional(n, r, 0.0)?;
    let (block, per_antenna) = observe_block(&h, &clean, &pilot, &mut rng)?;
    println!("block observation Y: {} x {}", block.nrows(), block.ncols());

    let phi = clean.effective_matrix(&basis)?;
    println!("effective Phi = W_bb W_rf B: {} x {}", phi.nrows(), phi.ncols());
    let mut worst: f64 = 0.0;
    for (j, y_m) in per_antenna.iter().enumerate() {
        let direct = phi.dot(&x.column(j).to_owned());
        let err = y_m
            .iter()
            .zip(direct.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    println!("noiseless: max |y_m - Phi x_m| over antennas = {worst:.2e}");

    let sigma2 = sigma2_from_snr_db(20.0);
    let noisy = MeasurementConfig::conventional(n, r, sigma2)?;
    let trials = 2000;
    let mut err_power = 0.0;
    let mut sig_power = 0.0;
    for t in 0..trials {
        let mut rng = sample_stream(9, 1 + t);
        let (_, ys) = observe_block(&h, &noisy, &pilot, &mut rng)?;
        for (j, y_m) in ys.iter().enumerate() {
            let direct = phi.dot(&x.column(j).to_owned());
            err_power += y_m
                .iter()
                .zip(direct.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>();
            sig_power += direct.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    // The unitary pilot leaves i.i.d. CN(0, sigma^2) noise on each angular
    // coefficient, so each y_m carries sigma^2 ||Phi||_F^2 of noise power.
    let phi_f2: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    let expected = sigma2 * phi_f2;
    let measured = err_power / (trials as f64 * m as f64);
    println!(
        "at 20 dB: measured noise power per measurement {measured:.5}, predicted sigma^2 ||Phi||_F^2 = {expected:.5}"
    );
    println!(
        "mean received SNR through the combiner: {:.1} dB",
        10.0 * (sig_power / err_power).log10()
    );
    Ok(())
}
