//! Experiment orchestration: configuration, statistics, reports and the
//! experiments behind each CLI subcommand.

pub mod chains;
pub mod checks;
pub mod config;
pub mod report;
pub mod sampling;
pub mod stats;

pub use chains::{coupling_instance, run_glauber_couple, run_glauber_run, CouplingInstance, COUPLING_INSTANCES};
pub use checks::{run_density_check, run_gap_prob, run_kernel_convergence, run_kernel_eval, run_specfun_check};
pub use config::ExperimentConfig;
pub use report::{Check, Report};
pub use sampling::{
    par_replicas, run_bound_experiments, run_gibbs_invariance, run_lue_sample, run_onepoint_convergence,
    run_sample_bridge, run_tightness_experiment,
};
pub use stats::{chi_square_test, ks_permutation_test, ks_statistic, mean_and_se, modulus_of_continuity};

use crate::error::{Error, Result};

/// Experiment names accepted by [`run_experiment`].
pub const EXPERIMENTS: [&str; 13] = [
    "specfun-check",
    "density-check",
    "sample-bridge",
    "glauber-run",
    "glauber-couple",
    "lue-sample",
    "kernel-eval",
    "kernel-converge",
    "gap-prob",
    "gibbs-test",
    "tightness",
    "bounds",
    "onepoint",
];

pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match name {
        "specfun-check" => run_specfun_check(cfg),
        "density-check" => run_density_check(cfg),
        "sample-bridge" => run_sample_bridge(cfg),
        "glauber-run" => run_glauber_run(cfg),
        "glauber-couple" => run_glauber_couple(cfg),
        "lue-sample" => run_lue_sample(cfg),
        "kernel-eval" => run_kernel_eval(cfg),
        "kernel-converge" => run_kernel_convergence(cfg),
        "gap-prob" => run_gap_prob(cfg),
        "gibbs-test" => run_gibbs_invariance(cfg),
        "tightness" => run_tightness_experiment(cfg),
        "bounds" => run_bound_experiments(cfg),
        "onepoint" => run_onepoint_convergence(cfg),
        other => Err(Error::Config(format!("unknown experiment {other:?}"))),
    }
}
