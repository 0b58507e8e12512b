//! End-to-end paths through several modules.

use besq_core::bridge::{
    resample_gibbs, sample_nonintersecting, uniform_grid, Barrier, BridgeBoundary, GibbsMode, DEFAULT_MAX_ATTEMPTS,
};
use besq_core::glauber::{embed_to_curve, DiscreteBoundary, DiscreteConfig, EventStream, GlauberChain, GlauberModel};
use besq_core::harness::{run_experiment, ExperimentConfig, EXPERIMENTS};
use besq_core::matrixsim::{hard_edge_scale, lue_times_for, sample_lue_path};
use besq_core::specfun::AlphaIndex;

#[test]
fn lue_path_scales_to_an_ordered_ensemble_that_gibbs_resampling_keeps_ordered() {
    let t_grid = uniform_grid(-1.0, 1.0, 8);
    let n = 12;
    let path = sample_lue_path(n, 0, &lue_times_for(n, &t_grid), 9).unwrap();
    let ens = hard_edge_scale(&path, &t_grid).unwrap();
    assert_eq!(ens.k(), n);
    assert!(ens.is_non_intersecting());
    assert!(ens.curve(0).iter().all(|v| *v >= 0.0));

    let ix = AlphaIndex::new(0.0).unwrap();
    let out = resample_gibbs(&ix, &ens, 0..=1, (-0.5, 0.5), 3, DEFAULT_MAX_ATTEMPTS, GibbsMode::Faithful).unwrap();
    assert!(out.ensemble.is_non_intersecting());
    let outside: Vec<usize> = (0..=8).filter(|&i| t_grid[i] <= -0.5 || t_grid[i] >= 0.5).collect();
    for c in 0..n {
        for &i in &outside {
            assert_eq!(out.ensemble.curve(c)[i], ens.curve(c)[i]);
        }
    }
}

#[test]
fn sampled_bridges_respect_barriers() {
    let ix = AlphaIndex::new(1.0).unwrap();
    let upper = Barrier::piecewise_linear(vec![(0.0, 6.0), (1.0, 8.0)]).unwrap();
    let boundary =
        BridgeBoundary::new(0.0, 1.0, vec![0.5, 1.5], vec![0.7, 2.0], Barrier::Constant(0.1), upper.clone()).unwrap();
    let grid = uniform_grid(0.0, 1.0, 10);
    for seed in 0..5 {
        let s = sample_nonintersecting(&ix, &boundary, &grid, seed, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert!(s.attempts >= 1);
        for (i, &t) in grid.iter().enumerate() {
            let z = [s.ensemble.curve(0)[i], s.ensemble.curve(1)[i]];
            assert!(boundary.admits(t, &z) || i == 0 || i == grid.len() - 1);
        }
    }
}

#[test]
fn glauber_chain_state_embeds_as_a_line_ensemble() {
    let ix = AlphaIndex::new(0.5).unwrap();
    let b = DiscreteBoundary::free(2, vec![0.6, 1.1], vec![0.8, 1.3]).unwrap();
    let model = GlauberModel::new(&ix, &b, 6).unwrap();
    let init = DiscreteConfig::lowest_admissible(&b, 6).unwrap();
    let mut chain = GlauberChain::new(&model, init).unwrap();
    for ev in EventStream::new(4, 2, b.slots()).take(5000) {
        chain.step(&ev);
    }
    let ens = embed_to_curve(&chain.config, &b, 4).unwrap();
    assert_eq!(ens.k(), 2);
    assert!(ens.is_non_intersecting());
    let first = ens.curve(0)[0];
    assert!((first - 0.36).abs() < 1e-12);
}

#[test]
fn every_listed_experiment_rejects_an_invalid_config() {
    for name in EXPERIMENTS {
        let cfg = ExperimentConfig::named(name).with("alpha", -1);
        assert!(run_experiment(name, &cfg).is_err(), "{name} accepted a negative alpha");
    }
    assert!(run_experiment("no-such-experiment", &ExperimentConfig::default()).is_err());
}
