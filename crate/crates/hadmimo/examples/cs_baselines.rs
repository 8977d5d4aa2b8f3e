//! Score the classical estimators on one region: OMP at several sparsity
//! levels, SBL, and the dense LS reference that needs N/R pilot slots
//! instead of one.

use std::time::Instant;

use hadmimo::bench::{eval_cs, eval_ls, gen_test_set, CsSolver, Profile};
use hadmimo::measurement::{sigma2_from_snr_db, MeasurementConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = Profile::quick();
    let (n, r) = (profile.n, profile.r);
    let region = profile.table_region()?;
    let test = gen_test_set(
        region.theta_start,
        region.theta_end,
        &profile.geometry(),
        300,
        profile.snr_db,
        11,
    )?;
    println!(
        "N={n} R={r}, {} channels from [{}, {}] deg at {} dB\n",
        300, region.theta_start, region.theta_end, profile.snr_db
    );

    let meas = MeasurementConfig::conventional(n, r, sigma2_from_snr_db(profile.snr_db))?;
    println!("solver          NMSE      time");
    for k in [2, 4, 8] {
        let t = Instant::now();
        let nmse = eval_cs(&meas, &test, CsSolver::Omp { sparsity: k })?;
        println!("omp (K={k})      {nmse:.5}   {:>5.1}s", t.elapsed().as_secs_f64());
    }
    let t = Instant::now();
    let nmse = eval_cs(&meas, &test, CsSolver::Sbl)?;
    println!("sbl            {nmse:.5}   {:>5.1}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let nmse = eval_ls(&test, n, r)?;
    println!("ls ({} slots)   {nmse:.5}   {:>5.1}s", n / r, t.elapsed().as_secs_f64());
    println!("\nls pays {}x the pilot overhead for its accuracy", n / r);
    Ok(())
}
