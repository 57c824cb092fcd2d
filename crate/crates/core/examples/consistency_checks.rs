//! Desk-scale runs of the numerical consistency checks.

use hyperbolic_spectral::affinity::KernelKind;
use hyperbolic_spectral::consistency::{
    check_convergence_rate, check_ft_decay, check_kernel_domination, check_kernel_domination_swapped, check_l1_bound,
    check_radial_ft, ConsistencyReport, SamplingDistribution,
};

fn show(r: &ConsistencyReport) {
    println!("{:<28} passed={:<5} samples={:<8} violations={:<6} {:?}", r.check_name, r.passed, r.samples, r.violations, r.statistics);
}

fn main() -> hyperbolic_spectral::Result<()> {
    show(&check_kernel_domination(5, 100_000, 1.0, KernelKind::GaussianHyperbolic, 1)?);
    // negative control: the reversed inequality must fail
    show(&check_kernel_domination_swapped(5, 100_000, 1.0, KernelKind::GaussianHyperbolic, 1)?);
    show(&check_l1_bound(2, 100_000, 1.0, 2)?);
    show(&check_radial_ft(64, 1.2, 1.0, 8, 3)?);
    show(&check_ft_decay(128, 1.2, 1.0, 4)?);
    show(&check_convergence_rate(&[50, 100, 200, 400], 5, SamplingDistribution::BlobMixture, 5)?);
    Ok(())
}
