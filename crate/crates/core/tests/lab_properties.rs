use coordwise::lab::verify::{flux_symmetry_residual, random_mwg_rules, random_two_block};
use coordwise::lab::*;
use coordwise::rng::stream;
use proptest::prelude::*;

const GRID: [f64; 6] = [0.0, 0.05, 0.1, 0.2, 0.3, 0.45];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flux_is_symmetric_for_reversible_kernels(seed in any::<u64>()) {
        let mut rng = stream(seed, &[]);
        let t = random_two_block(&mut rng, 3).unwrap();
        let rules = random_mwg_rules(&t, &mut rng);
        let p = random_scan(&t, &rules, None).unwrap();
        prop_assert!(p.kernel.reversible);
        prop_assert!(flux_symmetry_residual(&p.kernel).unwrap() < 1e-12);
    }

    #[test]
    fn s_conductance_is_monotone_and_dominated(seed in any::<u64>()) {
        let mut rng = stream(seed, &[]);
        let t = random_two_block(&mut rng, 3).unwrap();
        let rules = random_mwg_rules(&t, &mut rng);
        let p = random_scan(&t, &rules, None).unwrap();
        let prof = conductance_profile(&p.kernel, &GRID).unwrap();
        for w in prof.windows(2) {
            prop_assert!(w[1].phi >= w[0].phi - 1e-12);
        }
        for c in &prof {
            prop_assert!(c.phi <= c.phi_tilde + 1e-12);
        }
        prop_assert!((prof[0].phi - prof[0].phi_tilde).abs() < 1e-12);
    }

    #[test]
    fn random_scan_gibbs_is_reversible_and_psd(seed in any::<u64>(), a in 2usize..5, b in 2usize..5) {
        let mut rng = stream(seed, &[]);
        let t = DiscreteTarget::random_dirichlet(vec![a, b], 1.0, &mut rng).unwrap();
        let g = gibbs(&t, None).unwrap();
        prop_assert!(g.kernel.reversible && g.kernel.psd);
    }

    #[test]
    fn mwg_never_beats_gibbs(seed in any::<u64>()) {
        let mut rng = stream(seed, &[]);
        let t = random_two_block(&mut rng, 3).unwrap();
        let rules = random_mwg_rules(&t, &mut rng);
        let p = random_scan(&t, &rules, None).unwrap();
        let g = gibbs(&t, None).unwrap();
        let pp = conductance_profile(&p.kernel, &GRID).unwrap();
        let gp = conductance_profile(&g.kernel, &GRID).unwrap();
        for (x, y) in pp.iter().zip(&gp) {
            if y.phi.is_finite() {
                prop_assert!(y.phi >= x.phi - 1e-10);
            }
        }
    }
}
