//! The scalable variants: landmark-based HLSC-K/ELSC-K and pre-clustered FHSC/FESC.

use hyperbolic_spectral::affinity::KernelKind;
use hyperbolic_spectral::dataio::generate_blobs;
use hyperbolic_spectral::metrics::ari;
use hyperbolic_spectral::pipelines::{run, Algorithm, PipelineConfig};

fn main() -> hyperbolic_spectral::Result<()> {
    let centers = [vec![2.0, 1.0], vec![3.0, -2.0], vec![-1.0, 3.0]];
    let data = generate_blobs(200, &centers, 0.3, 11)?;
    let truth = data.labels.clone().expect("labels");

    for alg in [Algorithm::Hlsck, Algorithm::Elsck, Algorithm::Fhsc, Algorithm::Fesc] {
        let sigma = if alg.is_hyperbolic() { 5.0 } else { 1.0 };
        for m in [3, 30, 100] {
            let cfg = PipelineConfig::new(alg, KernelKind::PoissonHyperbolic, sigma, 3)?.with_m(m);
            let res = run(&data, &cfg)?;
            let total: f64 = res.timings.iter().map(|t| t.millis).sum();
            println!(
                "{:<7} m={m:<4} ARI={:.3}  {:>7.1} ms  flags={:?}",
                alg.display_name(),
                ari(res.labels(), &truth)?,
                total,
                res.flags
            );
        }
    }

    let mut cfg = PipelineConfig::new(Algorithm::Hlsck, KernelKind::GaussianHyperbolic, 5.0, 3)?.with_m(30);
    cfg.fast_landmarks = true;
    let res = run(&data, &cfg)?;
    println!("HLSC-K fast SVD mode: ARI={:.3}", ari(res.labels(), &truth)?);
    Ok(())
}
