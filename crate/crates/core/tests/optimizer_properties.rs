//! End-to-end invariants of the optimizer and the baselines.

mod common;

use rsma_ris::baselines::{run_scheme, SchemeKind};
use rsma_ris::bcd::{run, run_from, InfeasibleQosPolicy};
use rsma_ris::rates::FEASIBILITY_TOL;
use rsma_ris::{average_rates, check_feasibility, BcdConfig, Error, SystemConfig};

fn small() -> SystemConfig {
    let mut cfg = SystemConfig::desk().with_users(3);
    cfg.num_subarrays = 3;
    cfg.num_samples = 20;
    cfg
}

fn quick() -> BcdConfig {
    BcdConfig {
        max_iterations: 25,
        ..BcdConfig::default()
    }
}

#[test]
fn rsma_output_is_feasible_and_matches_reported_wasr() {
    let cfg = small();
    for seed in 0..3 {
        let samples = common::desk_samples(&cfg, seed);
        let out = run(&cfg, &samples, &quick(), seed).unwrap();
        let d = &out.design;
        assert!(d.total_power() <= cfg.max_power * (1.0 + 1e-9));
        assert!(d.power.iter().all(|p| *p >= 0.0));
        assert!(d.max_amplitude() <= 1.0 + 1e-9);
        assert!(d.common_rates.iter().all(|c| *c >= 0.0));
        let rep = average_rates(&samples, d, &cfg).unwrap();
        assert!((rep.wasr - out.wasr).abs() < 1e-9);
        if !out.trace.qos_relaxed {
            let f = check_feasibility(&rep, d, &cfg, FEASIBILITY_TOL);
            assert!(f.feasible, "{f:?}");
        }
        let h = out.trace.wasr_history();
        let best = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(out.wasr >= best - 1e-9);
    }
}

#[test]
fn all_schemes_are_deterministic() {
    let cfg = small();
    let samples = common::desk_samples(&cfg, 11);
    for kind in SchemeKind::ALL {
        let a = run_scheme(kind, &cfg, &samples, &quick(), 11).unwrap();
        let b = run_scheme(kind, &cfg, &samples, &quick(), 11).unwrap();
        assert_eq!(a.design, b.design, "{kind}");
        assert_eq!(a.trace.wasr_history(), b.trace.wasr_history());
    }
}

#[test]
fn warm_start_never_loses() {
    let cfg = small();
    for seed in 0..2 {
        let samples = common::desk_samples(&cfg, seed);
        let sdma = run_scheme(SchemeKind::Sdma, &cfg, &samples, &quick(), seed).unwrap();
        assert_eq!(sdma.design.power[0], 0.0);
        let warm = run_from(&cfg, &samples, &quick(), sdma.design.clone(), seed).unwrap();
        assert!(warm.wasr >= sdma.wasr - 1e-6, "{} < {}", warm.wasr, sdma.wasr);
    }
}

#[test]
fn unreachable_qos_is_relaxed_or_aborted() {
    let mut cfg = small();
    cfg.qos_threshold = 50.0;
    let samples = common::desk_samples(&cfg, 2);
    let out = run(&cfg, &samples, &quick(), 2).unwrap();
    assert!(out.trace.qos_relaxed);
    let abort = BcdConfig {
        infeasible_qos_policy: InfeasibleQosPolicy::Abort,
        ..quick()
    };
    match run(&cfg, &samples, &abort, 2) {
        Err(Error::Aborted { block, trace, .. }) => {
            assert!(!block.is_empty());
            assert!(trace.iterations.len() <= 1);
        }
        other => panic!("expected abort, got {other:?}"),
    }
}

#[test]
fn more_power_does_not_hurt_single_user() {
    let mut cfg = small().with_users(1);
    cfg.num_subarrays = 2;
    let mut last = 0.0;
    for db in [0.0, 10.0, 20.0] {
        cfg.max_power = rsma_ris::scenario::db_to_linear(db);
        let samples = common::desk_samples(&cfg, 1);
        let out = run(&cfg, &samples, &BcdConfig::default(), 1).unwrap();
        assert!(out.wasr >= last - 1e-6, "{db} dB: {} < {last}", out.wasr);
        last = out.wasr;
    }
}
