//! Extrinsic and intrinsic scores, in Euclidean and Poincaré geometry.

use hyperbolic_spectral::clustering::Metric;
use hyperbolic_spectral::dataio::generate_blobs;
use hyperbolic_spectral::geometry::embed_to_disc;
use hyperbolic_spectral::metrics::{ari, evaluate, nmi};

fn main() -> hyperbolic_spectral::Result<()> {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2];
    let guess = [1, 1, 0, 0, 0, 0, 2, 2];
    println!("ARI = {:.4}, NMI = {:.4}", ari(&guess, &truth)?, nmi(&guess, &truth)?);
    println!("relabeled copy: ARI = {:.1}", ari(&[5, 5, 5, 9, 9, 9, 7, 7], &truth)?);

    let data = generate_blobs(40, &[vec![2.0, 1.0], vec![-1.0, 3.0]], 0.4, 3)?;
    let labels = data.labels.clone().expect("labels");
    let euc = evaluate(&data.points, &labels, Some(&labels), Metric::Euclidean)?;
    println!("Euclidean: {}", serde_json::to_string(&euc).expect("serializable"));

    let disc: Vec<Vec<f64>> = data.points.iter().map(|p| embed_to_disc(p, 0.01).map(|h| h.into_coords())).collect::<Result<_, _>>()?;
    let hyp = evaluate(&disc, &labels, None, Metric::PoincareDisc)?;
    println!("Poincaré:  {}", serde_json::to_string(&hyp).expect("serializable"));
    Ok(())
}
