mod common;

use nalgebra::DMatrix;
use num_complex::Complex64;

use cellfree::channel::ChannelSampler;
use cellfree::closed_form::{epa_point, AssociationPower, DecisionVars};
use cellfree::monte_carlo::{
    build_precoders, estimate_uatf_terms, moment_identity_suite, validation_rows, write_validation_csv,
    VALIDATION_HEADER,
};
use cellfree::network::LargeScaleFading;
use cellfree::Precoder;
use common::*;

#[test]
fn precoder_structure() {
    let cfg = desk(3);
    let inst = instance(&cfg, 2);
    let d = cfg.dims();
    let sampler = ChannelSampler::new(&cfg, &inst.fading);
    let mut r = probe_rng(3);
    for _ in 0..50 {
        let real = sampler.sample(&mut r);
        for ap in &real.aps {
            let est = ap.entity_matrix(d.n_unicast);
            assert_eq!(build_precoders(ap, Precoder::Mr, d).unwrap(), est);
            let b = build_precoders(ap, Precoder::Zf, d).unwrap();
            let gram = est.adjoint() * &b;
            let eye = DMatrix::<Complex64>::identity(d.n_entities(), d.n_entities());
            assert!((gram - eye).iter().all(|x| x.norm() < 1e-10));
        }
    }
}

#[test]
fn zf_norm_identity() {
    let cfg = desk(1);
    let inst = instance(&cfg, 5);
    let d = cfg.dims();
    let sampler = ChannelSampler::new(&cfg, &inst.fading);
    let mut r = probe_rng(8);
    let trials = 10_000;
    let mut sum = 0.0;
    for _ in 0..trials {
        let real = sampler.sample(&mut r);
        sum += build_precoders(&real.aps[0], Precoder::Zf, d)
            .unwrap()
            .column(0)
            .norm_squared();
    }
    let expected = 1.0 / ((d.antennas - d.n_entities()) as f64 * inst.stats.gamma(0, 0));
    assert!(rel(sum / trials as f64, expected) < 0.02);
}

#[test]
fn zero_power_gives_zero_terms() {
    let cfg = desk(3);
    let inst = instance(&cfg, 1);
    let (n, e) = (3, cfg.dims().n_entities());
    let ap = AssociationPower {
        a: DMatrix::from_element(n, e, true),
        eta: DMatrix::zeros(n, e),
    };
    for p in [Precoder::Mr, Precoder::Zf] {
        let est = estimate_uatf_terms(&cfg, &inst.fading, &ap, p, 1000, 1).unwrap();
        assert!(est.se_mc.iter().all(|&s| s == 0.0));
        assert!(est.ds.iter().chain(&est.bu).all(|&x| x == 0.0));
    }
}

#[test]
fn moment_suite_and_error_scaling() {
    let cfg = desk(2);
    let inst = instance(&cfg, 4);
    let small = moment_identity_suite(&cfg, &inst.fading, 10_000, 1);
    assert!(small.all_pass(), "{:?}", small.checks);
    assert_eq!(small.checks.len(), 6);
    let large = moment_identity_suite(&cfg, &inst.fading, 40_000, 2);
    for (a, b) in small.checks.iter().zip(&large.checks) {
        let ratio = b.std_err / a.std_err;
        assert!((ratio - 0.5).abs() < 0.05, "{}: ratio {ratio}", a.name);
    }
    let dark = LargeScaleFading::from_gains(cfg.dims().clone(), DMatrix::zeros(2, 7));
    let zero = moment_identity_suite(&cfg, &dark, 10_000, 3);
    assert!(zero.checks.iter().all(|c| c.mean == 0.0 && c.expected == 0.0 && c.pass));
}

#[test]
fn monte_carlo_is_reproducible_and_written() {
    let cfg = desk(4);
    let inst = instance(&cfg, 6);
    let c = inst.coeffs(Precoder::Zf).unwrap();
    let vars = epa_point(&c);
    let ap = vars.to_power(&inst.stats);
    let a = estimate_uatf_terms(&cfg, &inst.fading, &ap, Precoder::Zf, 2500, 9).unwrap();
    let b = estimate_uatf_terms(&cfg, &inst.fading, &ap, Precoder::Zf, 2500, 9).unwrap();
    assert_eq!(a.se_mc, b.se_mc);
    assert_eq!(a.n_trials, 2500);
    let back = DecisionVars::from_power(&ap, &inst.stats, Precoder::Zf);
    let closed = cellfree::closed_form::se_and_sse(&back, &c, &cfg).se;
    let rows = validation_rows(cfg.dims(), Precoder::Zf, &closed, &a);
    let mut out = Vec::new();
    write_validation_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), VALIDATION_HEADER.join(","));
    assert_eq!(text.lines().count(), 1 + cfg.dims().n_users());
    assert!(text.lines().nth(4).unwrap().starts_with("1_1,multicast,zf,"));
}
