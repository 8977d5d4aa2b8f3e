//! Run the main comparison table at toy scale: learned and frozen-encoder
//! networks against OMP, SBL, and LS for two chain counts. Prints the
//! result rows as CSV. Paper-scale runs go through the hadmimo binary.

use std::time::Instant;

use hadmimo::bench::{results_to_csv, run_table2, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut profile = Profile::quick();
    profile.n = 16;
    profile.r = 4;
    profile.train_channels = 2000;
    profile.test_channels = 200;
    profile.max_epochs = 10;

    println!(
        "N={}, R in {{{}, {}}}, {} training channels, {} test channels",
        profile.n,
        profile.n / 4,
        profile.n / 8,
        profile.train_channels,
        profile.test_channels
    );
    let t = Instant::now();
    let rows = run_table2(&profile, 1)?;
    println!("{} rows in {:.0}s\n", rows.len(), t.elapsed().as_secs_f64());
    print!("{}", results_to_csv(&rows));
    Ok(())
}
