//! Cluster a 3-D dataset and write an SVG scatter plot (PCA-projected).

use hyperbolic_spectral::affinity::KernelKind;
use hyperbolic_spectral::dataio::generate_tree_blobs_in;
use hyperbolic_spectral::pipelines::{run, Algorithm, PipelineConfig};
use hyperbolic_spectral::plot::scatter_svg;

fn main() -> hyperbolic_spectral::Result<()> {
    let data = generate_tree_blobs_in(3, 2, 3, 0.4, 40, 5)?;
    let cfg = PipelineConfig::new(Algorithm::Hsca, KernelKind::GaussianHyperbolic, 3.0, 9)?;
    let res = run(&data, &cfg)?;
    let svg = scatter_svg(&data.points, res.labels(), "HSCA on 3-D tree blobs")?;
    let path = std::env::temp_dir().join("hsca_tree_blobs.svg");
    std::fs::write(&path, svg)?;
    println!("wrote {}", path.display());
    Ok(())
}
