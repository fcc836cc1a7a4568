use kreinlab::mixing::{
    cross_block_norm, effective_kernel, haar_special_unitary, local_cross_norm, make_partition, mix_states,
    random_family, PartitionPattern, SpacetimeGrid,
};
use kreinlab::rng::stream;
use kreinlab::{FermionicProjector, SpinSignature};

fn dephased_pair(
    strips: usize,
    spin: SpinSignature,
    f: usize,
    seed: u64,
) -> (kreinlab::mixing::Partition, FermionicProjector, FermionicProjector) {
    let grid = SpacetimeGrid::new(strips * 2, 1, spin).unwrap();
    let part = make_partition(grid, 2, PartitionPattern::TimeInterleave).unwrap();
    let mut rng = stream(seed, 0);
    let fam = random_family(&grid, 2, f, &mut rng).unwrap();
    let coherent = mix_states(&[fam.clone(), fam], &part).unwrap();
    let u = haar_special_unitary(f, &mut rng);
    let dephased = kreinlab::mixing::apply_subsystem_unitary(&coherent, &u, 1, &part).unwrap();
    let space = grid.space();
    (
        part,
        FermionicProjector::from_states(space, coherent.into_states()),
        FermionicProjector::from_states(space, dephased.into_states()),
    )
}

#[test]
fn strip_cross_norm_follows_the_particle_number_law() {
    // per strip each subsystem sees r = n * sites components; for a Haar
    // rotation the cross block keeps a fraction r / (f + r) of its weight
    let f = 256;
    let (part, coh, deph) = dephased_pair(128, SpinSignature::dirac(), f, 3);
    let ratio = local_cross_norm(&deph, &part, 0, 1, 2).unwrap() / local_cross_norm(&coh, &part, 0, 1, 2).unwrap();
    let r = 4.0;
    let expect = (r / (f as f64 + r)).sqrt();
    assert!((ratio / expect - 1.0).abs() < 0.1, "ratio {ratio}, expected {expect}");
}

#[test]
fn global_cross_norm_is_blind_to_dephasing() {
    let (part, coh, deph) = dephased_pair(32, SpinSignature::dirac(), 16, 4);
    let a = cross_block_norm(&coh, &part, 0, 1).unwrap();
    let b = cross_block_norm(&deph, &part, 0, 1).unwrap();
    assert!((a - b).abs() < 1e-10 * a);
}

#[test]
fn dephased_local_coarse_kernel_is_the_sum_of_subsystem_kernels() {
    // cross / coarse on a cell ≈ sqrt(r / (2 (f + r))) with r = n
    for (spin, strips) in [(SpinSignature::dirac(), 128), (SpinSignature::two_component(), 256)] {
        let (part, _, deph) = dephased_pair(strips, spin, 256, 5);
        let eff = effective_kernel(&deph, &part, 2).unwrap();
        let rel = eff.local_relative_cross();
        let r = spin.dim() as f64;
        let expect = (r / (2.0 * (256.0 + r))).sqrt();
        assert!(rel < 0.1, "n = {}: {rel}", spin.dim());
        assert!((rel / expect - 1.0).abs() < 0.15, "n = {}: {rel} vs {expect}", spin.dim());
    }
}

#[test]
fn coherent_local_coarse_kernel_has_full_cross_part() {
    let (part, coh, _) = dephased_pair(32, SpinSignature::dirac(), 16, 8);
    let eff = effective_kernel(&coh, &part, 2).unwrap();
    // identical blocks on both slices: cross = 2 C C^†, coarse = 4 C C^†
    assert!((eff.local_relative_cross() - 0.5).abs() < 1e-12);
}

#[test]
fn single_subsystem_effective_kernel_is_plain_coarse_graining() {
    let grid = SpacetimeGrid::new(4, 2, SpinSignature::dirac()).unwrap();
    let part = make_partition(grid, 1, PartitionPattern::TimeInterleave).unwrap();
    let mut rng = stream(6, 0);
    let fam = random_family(&grid, 2, 3, &mut rng).unwrap();
    let p = FermionicProjector::from_states(grid.space(), fam);
    let eff = effective_kernel(&p, &part, 2).unwrap();
    assert_eq!(eff.cross.norm(), 0.0);
    // every micro point of a strip carries the same spinor, so the average
    // equals the micro kernel between any representatives
    let block = eff.coarse.view((4, 0), (4, 4)).into_owned();
    let micro = p.kernel(grid.point(0, 1), grid.point(1, 0)).unwrap();
    assert!((block - micro).norm() < 1e-12);
}

#[test]
fn delocalized_parts_are_suppressed_after_dephasing() {
    // even slices play psi_up, odd slices psi_down
    let f = 64;
    let (part, coh, deph) = dephased_pair(64, SpinSignature::dirac(), f, 7);
    let grid = *part.grid();
    let totals = |p: &FermionicProjector| {
        let mut localized = 0.0;
        let mut cross = 0.0;
        for strip in 0..grid.times / 2 {
            let (t0, t1) = (grid.point(2 * strip, 0), grid.point(2 * strip + 1, 0));
            let (b0, b1) = (p.state_block(t0), p.state_block(t1));
            localized += (b0.adjoint() * b0).norm() + (b1.adjoint() * b1).norm();
            cross += (b0 * b1.adjoint()).norm();
        }
        (localized, cross)
    };
    let (lc, cc) = totals(&coh);
    let (ld, cd) = totals(&deph);
    assert!((lc - ld).abs() < 1e-9 * lc);
    assert!(cd / cc < 0.5, "{}", cd / cc);
}
