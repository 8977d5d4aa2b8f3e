//! Train one region network end to end: generate a dataset for the
//! [10, 15] degree tile, learn the measurement and decoder jointly, save
//! the model, reload it, and score it on fresh channels.
//!
//!     cargo run --example train_region [channels] [epochs]

use std::time::Instant;

use hadmimo::bench::{eval_dl, gen_test_set, train_region_model, Profile, TrainSpec};
use hadmimo::neural::{load_model, save_model};
use hadmimo::rng::derive_seed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let mut profile = Profile::quick();
    if let Some(c) = args.get(1) {
        profile.train_channels = c.parse()?;
    }
    if let Some(e) = args.get(2) {
        profile.max_epochs = e.parse()?;
    }
    let seed = 7;
    let region = profile.table_region()?;
    println!(
        "training N={} R={} on [{}, {}] deg (expanded [{}, {}]), {} channels, <= {} epochs",
        profile.n,
        profile.r,
        region.theta_start,
        region.theta_end,
        region.expanded_start,
        region.expanded_end,
        profile.train_channels,
        profile.max_epochs
    );

    let spec = TrainSpec {
        geometry: profile.geometry(),
        r: profile.r,
        region: region.clone(),
        snr_db: profile.snr_db,
        channels: profile.train_channels,
        max_epochs: profile.max_epochs,
        freeze_encoder: false,
        seed,
        data_label: "train-data:example".into(),
        loop_label: "train-loop:example".into(),
    };
    let t0 = Instant::now();
    let (model, report) = train_region_model(&spec)?;
    println!(
        "trained in {:.1}s: initial val {:.5}, best val {:.5} at epoch {} (stopped {})",
        t0.elapsed().as_secs_f64(),
        report.initial_val_loss,
        report.best_val_loss,
        report.best_epoch,
        report.stopped_epoch
    );
    for (i, (tr, va)) in report
        .train_losses
        .iter()
        .zip(&report.val_losses)
        .enumerate()
        .step_by(5)
    {
        println!("  epoch {i:>3}: train {tr:.5}  val {va:.5}  lr {:.0e}", report.lr_trace[i]);
    }

    let dir = std::env::temp_dir().join("hadmimo_train_region");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("region_2.model");
    save_model(&model, &path)?;
    let reloaded = load_model(&path)?;
    println!("saved {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let test = gen_test_set(
        region.theta_start,
        region.theta_end,
        &profile.geometry(),
        500,
        profile.snr_db,
        derive_seed(seed, "test-data:example"),
    )?;
    let score = eval_dl(&reloaded, &test)?;
    println!("NMSE on 500 fresh channels at {} dB: {score:.5}", profile.snr_db);
    Ok(())
}
