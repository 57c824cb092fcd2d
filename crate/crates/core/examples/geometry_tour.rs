//! Distances in the four models, gyrovector algebra and the Fréchet mean.

use hyperbolic_spectral::geometry::{
    dist_disc, dist_disc_acosh, dist_half_space, dist_hyperboloid, dist_klein, embed_to_disc, exp_map, frechet_mean,
    log_map, mobius_add, mobius_scalar, GeometryConfig, HPoint, HalfSpacePoint, HyperboloidPoint, KleinPoint,
};

fn main() -> hyperbolic_spectral::Result<()> {
    let x = HPoint::new(vec![0.5, 0.0])?;
    let y = HPoint::new(vec![0.0, -0.3])?;
    println!("disc distance      d(x, y) = {:.6}", dist_disc(&x, &y));
    println!("  arccosh form             = {:.6}", dist_disc_acosh(&x, &y));
    println!(
        "hyperboloid lift           = {:.6}",
        dist_hyperboloid(&HyperboloidPoint::from_disc(&x), &HyperboloidPoint::from_disc(&y))?
    );

    let p = HalfSpacePoint::new(vec![0.0, 1.0])?;
    let q = HalfSpacePoint::new(vec![0.0, 3.0])?;
    println!("half-space (0,1)-(0,3)     = {:.6}  (ln 3 = {:.6})", dist_half_space(&p, &q)?, 3f64.ln());
    let u = KleinPoint::new(vec![0.0, 0.0])?;
    let v = KleinPoint::new(vec![0.6, 0.0])?;
    println!("klein 0-(0.6,0)            = {:.6}", dist_klein(&u, &v)?);

    let s = mobius_add(&x, &y)?;
    println!("x ⊕ y = {:?}", s.coords());
    println!("2 ⊗ x = {:?}", mobius_scalar(2.0, &x).coords());
    let t = log_map(&x, &y)?;
    println!("exp_x(log_x y) = {:?}", exp_map(&x, &t)?.coords());

    // the embedding pushes everything far from the origin toward the boundary
    for r in [0.001, 0.01, 0.1, 1.0, 10.0] {
        let e = embed_to_disc(&[r, 0.0], GeometryConfig::EMBED_DELTA)?;
        println!("embed |x| = {r:<6} -> |e| = {:.4}", e.norm());
    }

    let pts = vec![HPoint::new(vec![0.2, 0.0])?, HPoint::new(vec![0.4, 0.0])?, HPoint::new(vec![0.3, 0.2])?];
    let c = frechet_mean(&pts, &[1.0; 3], &GeometryConfig::default())?;
    println!("Fréchet mean of three points = {:?}", c.coords());
    Ok(())
}
