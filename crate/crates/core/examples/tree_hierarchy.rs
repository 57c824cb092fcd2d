//! Hierarchical tree blobs with a bandwidth sweep for HSCA and ESCA.

use hyperbolic_spectral::affinity::KernelKind;
use hyperbolic_spectral::cli::{grid_search, ABLATION_GRID};
use hyperbolic_spectral::dataio::generate_tree_blobs;
use hyperbolic_spectral::pipelines::{Algorithm, PipelineConfig};

fn main() -> hyperbolic_spectral::Result<()> {
    let data = generate_tree_blobs(3, 2, 0.3, 30, 1)?;
    println!("{} points, {} leaves, ancestry of leaf 0: {:?}", data.len(), data.k_true().unwrap_or(0), data.hierarchy.as_ref().map(|h| &h[0]));
    for alg in [Algorithm::Hsca, Algorithm::Esca] {
        let cfg = PipelineConfig::new(alg, KernelKind::GaussianHyperbolic, 0.1, 8)?;
        let (curve, best) = grid_search(&data, &cfg, &ABLATION_GRID, false)?;
        println!("{}", alg.display_name());
        for p in &curve {
            println!("  h={:<7} sigma={:<8.4} ARI={}", p.h, p.sigma, p.ari.map(|a| format!("{a:.3}")).unwrap_or_else(|| "error".into()));
        }
        if let Some(b) = best {
            println!("  best: sigma={:.4} ARI={:.3}", b.sigma, b.metrics.and_then(|m| m.ari).unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
