//! Build a model registry over the quarter space, save it to disk, reload
//! it, and route a few users by azimuth. Models here are freshly
//! initialized (training is the train_region example's job); selection
//! only depends on the tiling.

use hadmimo::measurement::{sigma2_from_snr_db, MeasurementConfig};
use hadmimo::neural::{init_model, ModelMeta};
use hadmimo::regions::{azimuth_from_coords, fold_azimuth, segment, Registry, RegistryConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RegistryConfig::new(15.0, 1.0)?;
    let regions = segment(&cfg)?;
    println!("beta = {} deg -> {} region networks:", cfg.beta_deg, regions.len());
    for reg in &regions {
        println!(
            "  region {}: [{:>4}, {:>4}) trained on [{:>4}, {:>4})",
            reg.index, reg.theta_start, reg.theta_end, reg.expanded_start, reg.expanded_end
        );
    }

    let (n, r, snr_db) = (16, 4, 20.0);
    let enc = MeasurementConfig::conventional(n, r, sigma2_from_snr_db(snr_db))?;
    let mut registry = Registry::empty(cfg)?;
    for reg in &regions {
        let meta = ModelMeta::new(reg.theta_start, reg.theta_end, 5.0, snr_db, 100 + reg.index as u64);
        registry.insert_model(reg.index, init_model(100 + reg.index as u64, &enc, meta)?)?;
    }

    let dir = std::env::temp_dir().join("hadmimo_registry");
    registry.save(&dir)?;
    let mut names: Vec<_> = std::fs::read_dir(&dir)?
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    println!("\nsaved to {}: {}", dir.display(), names.join(", "));

    let registry = Registry::load(&dir)?;
    println!("\nrouting (checksums verified on load):");
    for az in [7.0, 52.0, -52.0, 118.0, -160.0, 90.0] {
        let sel = registry.select(az)?;
        let (folded, conj) = fold_azimuth(az);
        assert_eq!(conj, sel.conjugate_flag);
        println!(
            "  azimuth {az:>6.1} -> folds to {folded:>5.1}, region {} {}",
            sel.region_index,
            if sel.conjugate_flag { "(serve via conjugate trick)" } else { "" }
        );
    }

    let az = azimuth_from_coords((0.0, 0.0), (40.0, 95.0), 90.0)?;
    let sel = registry.select(az)?;
    println!(
        "\nuser at (40, 95) with boresight north: azimuth {az:.2} deg -> region {}",
        sel.region_index
    );
    Ok(())
}
