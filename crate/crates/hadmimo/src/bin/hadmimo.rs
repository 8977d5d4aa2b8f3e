use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hadmimo::bench::{
    energy_to_csv, eval_registry, gen_dataset, gen_test_set, results_to_csv, run_energy_profile,
    run_sweeps, run_table2, run_table3, train_region_model, Profile, TrainSpec,
};
use hadmimo::channel::SimParams;
use hadmimo::neural::{load_model, save_model};
use hadmimo::regions::{segment, Region, Registry, RegistryConfig};

#[derive(Parser)]
#[command(name = "hadmimo", version, about = "Channel estimation for hybrid analog-digital massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Geometry {
    /// Base station antennas.
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// User antennas.
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    n_paths: usize,
    /// Angular spread of arrivals around the azimuth, degrees.
    #[arg(long, default_value_t = 5.0)]
    spread_deg: f64,
}

impl Geometry {
    fn params(&self) -> SimParams {
        SimParams::new(self.n, self.m, self.n_paths, self.spread_deg, 0.0)
    }
}

#[derive(Args)]
struct RegionArgs {
    /// Region start, degrees in [0, 90).
    #[arg(long, default_value_t = 10.0)]
    region_start: f64,
    #[arg(long, default_value_t = 15.0)]
    region_end: f64,
    /// GPS uncertainty; training azimuths span the region widened by this.
    #[arg(long, default_value_t = 1.0)]
    gps_err_deg: f64,
}

impl RegionArgs {
    fn region(&self) -> Region {
        Region {
            index: 0,
            theta_start: self.region_start,
            theta_end: self.region_end,
            expanded_start: self.region_start - self.gps_err_deg,
            expanded_end: self.region_end + self.gps_err_deg,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Experiment {
    Table2,
    Table3,
    Sweeps,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a training dataset for one angular region.
    GenDataset {
        #[command(flatten)]
        geometry: Geometry,
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one region network and save the model file.
    Train {
        #[command(flatten)]
        geometry: Geometry,
        #[command(flatten)]
        region: RegionArgs,
        /// RF chains.
        #[arg(long, default_value_t = 8)]
        r: usize,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 10_000)]
        channels: usize,
        #[arg(long, default_value_t = 40)]
        max_epochs: usize,
        /// Keep the conventional measurement and train the decoder only.
        #[arg(long)]
        freeze_encoder: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every region of a segmentation and save a registry directory.
    TrainAll {
        #[command(flatten)]
        geometry: Geometry,
        /// Region width, degrees.
        #[arg(long, default_value_t = 5.0)]
        beta_deg: f64,
        #[arg(long, default_value_t = 1.0)]
        gps_err_deg: f64,
        #[arg(long, default_value_t = 8)]
        r: usize,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 10_000)]
        channels: usize,
        #[arg(long, default_value_t = 40)]
        max_epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Registry directory to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the region network serving an azimuth.
    Select {
        #[arg(long, allow_negative_numbers = true)]
        az_deg: f64,
        /// Registry directory.
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the selection text here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate fresh channels at an azimuth through a registry.
    Estimate {
        #[command(flatten)]
        geometry: Geometry,
        #[arg(long, allow_negative_numbers = true)]
        az_deg: f64,
        /// Half-width of the azimuth window the users are drawn from.
        #[arg(long, default_value_t = 0.5)]
        az_window_deg: f64,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the NMSE line here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named experiment and write its rows as CSV.
    Bench {
        #[arg(value_enum)]
        experiment: Experiment,
        /// Reduced configuration: N=32, R=8, 10 000 channels.
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        /// Full configuration: N=64, R=16, 50 000 channels.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Column-energy comparison of a trained model's measurement.
    EnergyProfile {
        #[command(flatten)]
        geometry: Geometry,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Box<dyn std::error::Error>> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::GenDataset { geometry, region, count, snr_db, seed, out } => {
            let ds = gen_dataset(&region.region(), &geometry.params(), count, snr_db, seed)?;
            ds.save(&out)?;
            println!("wrote {} ({} channels, {} sample pairs)", out.display(), count, ds.rows());
        }
        Command::Train {
            geometry,
            region,
            r,
            snr_db,
            channels,
            max_epochs,
            freeze_encoder,
            seed,
            out,
        } => {
            let spec = TrainSpec {
                geometry: geometry.params(),
                r,
                region: region.region(),
                snr_db,
                channels,
                max_epochs,
                freeze_encoder,
                seed,
                data_label: "train-data:cli".into(),
                loop_label: "train-loop:cli".into(),
            };
            let (model, report) = train_region_model(&spec)?;
            save_model(&model, &out)?;
            println!(
                "wrote {} (best val {:.5} at epoch {}, stopped at {})",
                out.display(),
                report.best_val_loss,
                report.best_epoch,
                report.stopped_epoch
            );
        }
        Command::TrainAll {
            geometry,
            beta_deg,
            gps_err_deg,
            r,
            snr_db,
            channels,
            max_epochs,
            seed,
            out,
        } => {
            let cfg = RegistryConfig::new(beta_deg, gps_err_deg)?;
            let mut registry = Registry::empty(cfg)?;
            for region in segment(&cfg)? {
                let spec = TrainSpec {
                    geometry: geometry.params(),
                    r,
                    region: region.clone(),
                    snr_db,
                    channels,
                    max_epochs,
                    freeze_encoder: false,
                    seed,
                    data_label: format!("train-data:region{}", region.index),
                    loop_label: format!("train-loop:region{}", region.index),
                };
                let (model, report) = train_region_model(&spec)?;
                println!(
                    "region {} [{}, {}): best val {:.5} at epoch {}",
                    region.index, region.theta_start, region.theta_end, report.best_val_loss, report.best_epoch
                );
                registry.insert_model(region.index, model)?;
            }
            registry.save(&out)?;
            println!("wrote registry {} ({} models)", out.display(), registry.regions().len());
        }
        Command::Select { az_deg, registry, seed: _, out } => {
            let reg = Registry::load(&registry)?;
            let sel = reg.select(az_deg)?;
            let text = format!(
                "region_index: {}\nconjugate: {}\nmodel_path: {}\neffective_azimuth_deg: {}\n",
                sel.region_index,
                sel.conjugate_flag,
                registry.join(format!("region_{}.model", sel.region_index)).display(),
                sel.effective_azimuth_deg
            );
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(path, text)?;
            }
        }
        Command::Estimate { geometry, az_deg, az_window_deg, registry, count, snr_db, seed, out } => {
            let reg = Registry::load(&registry)?;
            let test = gen_test_set(
                az_deg - az_window_deg,
                az_deg + az_window_deg,
                &geometry.params(),
                count,
                snr_db,
                seed,
            )?;
            let nmse = eval_registry(&reg, &test)?;
            let sel = reg.select(az_deg)?;
            let text = format!(
                "azimuth_deg: {az_deg}\nregion_index: {}\nconjugate: {}\nchannels: {count}\nsnr_db: {snr_db}\nnmse: {nmse:.6e}\n",
                sel.region_index, sel.conjugate_flag
            );
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(path, text)?;
            }
        }
        Command::Bench { experiment, quick: _, full, seed, out } => {
            let profile = if full { Profile::full() } else { Profile::quick() };
            let rows = match experiment {
                Experiment::Table2 => run_table2(&profile, seed)?,
                Experiment::Table3 => run_table3(&profile, seed)?,
                Experiment::Sweeps => run_sweeps(&profile, seed)?,
            };
            emit(&results_to_csv(&rows), out.as_ref())?;
            if let Some(path) = out {
                println!("wrote {} ({} rows)", path.display(), rows.len());
            }
        }
        Command::EnergyProfile { geometry, model, n_mc, seed, out } => {
            let model = load_model(&model)?;
            let mut params = geometry.params();
            params.n_bs = model.n();
            let profile = run_energy_profile(&model, &params, n_mc, seed)?;
            emit(&energy_to_csv(&profile), out.as_ref())?;
            eprintln!(
                "fraction_in_region: {:.4}  conventional_max_min_ratio: {:.4}  peak_in_region: {}",
                profile.learned_fraction_in_region,
                profile.conventional_max_min_ratio,
                profile.peak_bin_in_region
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
