//! One network serves both halves of the space. A user at -theta has the
//! conjugate channel of its mirror at +theta, so conjugating the
//! measurement matrices and post-mapping the estimate reuses the +theta
//! network exactly. The identity is algebraic: it holds for any decoder
//! weights, shown here with a freshly initialized model.

use hadmimo::channel::{mirror_paths, sample_paths, synth_channel, AngularBasis, SimParams};
use hadmimo::measurement::{sigma2_from_snr_db, MeasurementConfig};
use hadmimo::neural::{init_model, ModelMeta};
use hadmimo::regions::{conjugate_recover, fold_azimuth, mirror_measurement};
use hadmimo::rng::{draw_cn01, sample_stream};
use ndarray::Array1;
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, r, az) = (32, 8, 37.0);
    let params = SimParams::new(n, 2, 20, 5.0, az);
    let basis = AngularBasis::new(n)?;
    let mut rng = sample_stream(3, 0);

    let paths = sample_paths(&params, &mut rng)?;
    let h1 = synth_channel(&paths, n, 2)?;
    let h2 = synth_channel(&mirror_paths(&paths), n, 2)?;
    let conj_err = h1
        .iter()
        .zip(h2.iter())
        .map(|(a, b)| (a.conj() - b).norm())
        .fold(0.0, f64::max);
    println!("user 1 at +{az} deg, user 2 mirrored at -{az} deg");
    println!("max |conj(H1) - H2| = {conj_err:.2e}");

    let (folded, flag) = fold_azimuth(-az);
    println!("fold_azimuth(-{az}) = ({folded}, conjugate={flag})");

    let sigma2 = sigma2_from_snr_db(20.0);
    let enc = MeasurementConfig::conventional(n, r, sigma2)?;
    let meta = ModelMeta::new(35.0, 40.0, 5.0, 20.0, 3);
    let model = init_model(3, &enc, meta)?;
    let meas1 = model.export_measurement();
    let meas2 = mirror_measurement(&meas1);

    let phi1 = meas1.effective_matrix(&basis)?;
    let phi2 = meas2.effective_matrix(&basis)?;
    let x1 = basis.to_angular(&h1)?;
    let x2 = basis.to_angular(&h2)?;

    let mut worst_est = 0.0f64;
    let mut worst_nmse = 0.0f64;
    for j in 0..2 {
        let v1 = Array1::from_shape_fn(n, |_| draw_cn01(&mut rng) * sigma2.sqrt());
        // The mirrored slot sees the mirror image of the same noise; with
        // that pairing y2 = conj(y1) holds sample by sample.
        let v2 = conjugate_recover(&v1, &basis)?;
        let y1 = phi1.dot(&(&x1.column(j) + &v1));
        let y2 = phi2.dot(&(&x2.column(j) + &v2));

        let (xhat1, _) = model.estimate(&y1, false)?;
        let (xhat2, _) = model.estimate(&y2, true)?;
        let mapped = conjugate_recover(&xhat1, &basis)?;
        let est_err = xhat2
            .iter()
            .zip(mapped.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst_est = worst_est.max(est_err);

        let nmse = |xh: &Array1<Complex64>, x: ndarray::ArrayView1<Complex64>| {
            let num: f64 = xh.iter().zip(x.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
            let den: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            num / den
        };
        let (n1, n2) = (nmse(&xhat1, x1.column(j)), nmse(&xhat2, x2.column(j)));
        worst_nmse = worst_nmse.max((n1 - n2).abs());
        println!("antenna {j}: NMSE via own estimate {n1:.6}, via mirror {n2:.6}");
    }
    println!("max |x_hat2 - B^H conj(B x_hat1)| = {worst_est:.2e}");
    println!("max NMSE difference = {worst_nmse:.2e}");
    Ok(())
}
