//! Conditional moments of N = |C(0) ∩ Λ_R| given the origin reaches ∂Λ_R,
//! and the dyadic three-point sums.

use isingfield::estimators::{
    dyadic_sum_ratios, spread, Accumulator, ConditionalN, OneArm, RhoDiag,
};
use isingfield::fit::fit_power_law;
use isingfield::mc::{stream_rng, Algorithm, ChainState, RunPlan};
use isingfield::{LatticeSpec, ModelParams};

#[test]
fn second_moment_and_dyadic_sums() {
    let spec = LatticeSpec::torus(32).unwrap();
    let radii = [4usize, 8, 16];
    let mut cond: Vec<ConditionalN> = radii
        .iter()
        .map(|&r| ConditionalN::arm_only(&spec, r).unwrap())
        .collect();
    let mut arm = OneArm::new(&spec, &radii, 1).unwrap();
    let mut rho = RhoDiag::new(&spec, &(1..=16).collect::<Vec<_>>()).unwrap();
    let mut state = ChainState::new(spec, ModelParams::critical(0.0).unwrap(), stream_rng(90, 0));
    state
        .drive(
            &RunPlan::new(Algorithm::SwendsenWang, 300, 3000),
            true,
            |s| {
                cond.iter_mut().for_each(|c| c.observe(s));
                arm.observe(s);
                rho.observe(s);
            },
        )
        .unwrap();
    let rho = rho.finish().unwrap();
    let arm = arm.finish().unwrap();

    for (c, &r) in cond.iter().zip(&radii) {
        let m = c.finish().unwrap();
        assert!(!m.low_statistics, "R = {r}: {} hits", m.hits);
        let ratio = m.second.value / m.first.value.powi(2);
        assert!(
            (1.0..2.0).contains(&ratio),
            "R = {r}: E[N^2]/E[N]^2 = {ratio}"
        );
        let scale = (r * r) as f64 * rho.interpolate(r as f64).unwrap().sqrt();
        let k = m.first.value / scale;
        assert!(
            (1.0..10.0).contains(&k),
            "R = {r}: E[N]/(R^2 sqrt(rho)) = {k}"
        );
    }

    let sums: Vec<_> = cond
        .iter()
        .zip(&radii)
        .map(|(c, &r)| (r, c.three_point_sum().unwrap()))
        .collect();
    let (ratios, s) = dyadic_sum_ratios(&sums, &arm).unwrap();
    assert_eq!(ratios.len(), 3);
    assert!(s <= 4.0, "one-arm normalisation spread {s}: {ratios:?}");

    // the same sums over R^4 rho_fit(R)^3
    let pts: Vec<_> = rho.entries.iter().map(|e| (e.0 as f64, e.1)).collect();
    let fit = fit_power_law(&pts).unwrap();
    let alt = spread(
        sums.iter()
            .map(|(r, e)| e.value / ((*r as f64).powi(4) * fit.eval(*r as f64).powi(3))),
    );
    assert!(alt <= 4.0, "two-point normalisation spread {alt}");
}

#[test]
fn circuit_conditioning_flags_low_statistics() {
    let spec = LatticeSpec::torus(16).unwrap();
    let mut c = ConditionalN::new(&spec, 8).unwrap();
    let mut state = ChainState::new(spec, ModelParams::critical(0.0).unwrap(), stream_rng(91, 0));
    state
        .drive(
            &RunPlan::new(Algorithm::SwendsenWang, 100, 2000),
            true,
            |s| c.observe(s),
        )
        .unwrap();
    match c.finish() {
        Ok(m) => assert!(m.low_statistics, "{} hits", m.hits),
        Err(e) => assert!(matches!(e, isingfield::Error::NoConditioningHits)),
    }
}
