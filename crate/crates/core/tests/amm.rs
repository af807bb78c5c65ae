use std::f64::consts::PI;

use hybridbeam::amm::{
    beam_sweep, build_codebook, mm_closed_form_update, run_amm, sample_angle_range, AmmConfig, AngleRange,
    NullingProblem,
};
use hybridbeam::array_channel::{
    generate_user_channels, steering_vector, ChannelParams, ChannelRealization, PathComponent, SystemConfig,
};
use hybridbeam::metrics::approx_sinr;
use hybridbeam::C64;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cm_from_phases(phases: &[f64]) -> DVector<C64> {
    let amp = 1.0 / (phases.len() as f64).sqrt();
    DVector::from_iterator(phases.len(), phases.iter().map(|&p| C64::from_polar(amp, p)))
}

fn ranges_from(lo: &[f64], width: f64) -> Vec<AngleRange> {
    lo.iter().map(|&x| AngleRange::new(x, x + width).unwrap()).collect()
}

#[test]
fn noiseless_sweep_picks_nearest_center_off_grid() {
    let cfg = SystemConfig::with_snr_db(64, 4, 10.0).unwrap();
    let codebook = build_codebook(&cfg, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let sines: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 1.8 - 0.9).collect();
        let channels: Vec<ChannelRealization> = sines
            .iter()
            .map(|&s| {
                ChannelRealization::from_paths(vec![PathComponent::new(C64::new(1.0, 0.0), s).unwrap()], 64).unwrap()
            })
            .collect();
        let sweep = beam_sweep(&channels, &codebook, &cfg, f64::INFINITY, trial).unwrap();
        for (k, &s) in sines.iter().enumerate() {
            let h = channels[k].vector().rows(cfg.subarray(k).start, cfg.n_s()).into_owned();
            let power = |i: usize| h.dotc(codebook.codeword(i)).norm_sqr();
            let best = (0..codebook.len())
                .max_by(|&a, &b| power(a).total_cmp(&power(b)))
                .unwrap();
            let nearest = (0..codebook.len())
                .min_by(|&a, &b| {
                    (codebook.centers()[a] - s)
                        .abs()
                        .total_cmp(&(codebook.centers()[b] - s).abs())
                })
                .unwrap();
            assert_eq!(sweep.indices[k], best);
            assert_eq!(best, nearest);
            assert!(sweep.ranges[k].contains(s));
        }
    }
}

#[test]
fn sweep_accuracy_degrades_with_noise() {
    let cfg = SystemConfig::with_snr_db(64, 4, 10.0).unwrap();
    let codebook = build_codebook(&cfg, 64).unwrap();
    let params = ChannelParams::default();
    let trials = 10_000u64;
    let snrs_db = [20.0, 10.0, 0.0, -10.0, -20.0];
    let mut hits = vec![0usize; snrs_db.len()];
    for t in 0..trials {
        let channels = generate_user_channels(t, &cfg, &params).unwrap();
        let truth = beam_sweep(&channels, &codebook, &cfg, f64::INFINITY, t).unwrap();
        for (i, &db) in snrs_db.iter().enumerate() {
            let noisy = beam_sweep(&channels, &codebook, &cfg, 10f64.powf(db / 10.0), t).unwrap();
            hits[i] += noisy.indices.iter().zip(&truth.indices).filter(|(a, b)| a == b).count();
        }
    }
    let prob: Vec<f64> = hits.iter().map(|&h| h as f64 / (4 * trials) as f64).collect();
    for w in prob.windows(2) {
        assert!(w[1] < w[0], "{prob:?}");
    }
}

#[test]
fn closed_form_beats_two_dimensional_phase_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 2000;
    for _ in 0..20 {
        let s1 = DVector::from_fn(2, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let s2 = DVector::from_fn(2, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 1e-3
        });
        let f = mm_closed_form_update(&s1, &s2, 1000.0, &cm_from_phases(&[0.0, 0.0]));
        let target = &s1 - &s2 * C64::new(1000.0, 0.0);
        let value = |f: &DVector<C64>| f.dotc(&target).re;
        let closed = value(&f);
        for i in 0..n {
            for j in 0..n {
                let g = cm_from_phases(&[2.0 * PI * i as f64 / n as f64, 2.0 * PI * j as f64 / n as f64]);
                assert!(value(&g) <= closed + 1e-12);
            }
        }
    }
}

#[test]
fn single_user_descent_and_alignment() {
    let cfg = SystemConfig::with_snr_db(16, 1, 10.0).unwrap();
    let amm = AmmConfig {
        max_iters: 500,
        rel_tol: 1e-14,
        ..AmmConfig::default()
    };
    let ranges = ranges_from(&[0.1], 0.2);
    let codebook = build_codebook(&cfg, 16).unwrap();
    let out = run_amm(&[codebook.codeword(3).clone()], &ranges, &cfg, &amm).unwrap();
    let trace = &out.traces[0];
    let mut prev = trace.initial_objective;
    for &o in &trace.objective_trace {
        assert!(o <= prev + 1e-9);
        prev = o;
    }
    // Fixed point: f is phase-aligned with Σ₁(f).
    let problem = NullingProblem::new(0, &ranges, &cfg, &amm).unwrap();
    let f = out.analog.vector(0);
    let (s1, s2) = problem.surrogate_coeffs(f.as_slice());
    assert!(s2.iter().all(|z| z.norm() == 0.0));
    let aligned = mm_closed_form_update(&s1, &s2, amm.lambda, f);
    assert!((aligned - f).norm() < 1e-6);
}

#[test]
fn approx_sinr_matches_direct_evaluation() {
    let cfg = SystemConfig::with_snr_db(32, 4, 5.0).unwrap();
    let amm = AmmConfig::default();
    let ranges = ranges_from(&[-0.5, -0.1, 0.2, 0.6], 0.06);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vectors: Vec<DVector<C64>> = (0..4)
        .map(|_| cm_from_phases(&(0..8).map(|_| rng.random::<f64>() * 2.0 * PI).collect::<Vec<_>>()))
        .collect();
    let analog = hybridbeam::pwmmse::AnalogBeamformer::new(vectors.clone()).unwrap();
    for q in 0..4 {
        let samples = sample_angle_range(&ranges[q], amm.samples_per_range);
        let mut desired = 0.0;
        let mut interference = 0.0;
        for &phi in &samples {
            let a = steering_vector(phi, 32).unwrap();
            for (j, f) in vectors.iter().enumerate() {
                let g = a.rows(8 * j, 8).dotc(f).norm_sqr();
                if j == q {
                    desired += g;
                } else {
                    interference += g;
                }
            }
        }
        let m = samples.len() as f64;
        let p = cfg.stream_power();
        let expected = p * desired / m / (p * interference / m + cfg.noise_var());
        let got = approx_sinr(q, &analog, &ranges, &cfg, &amm).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surrogate_majorizes_objective(
        seed in any::<u64>(),
        lambda in prop_oneof![Just(1.0), Just(1000.0), 0.01f64..100.0],
        lo in proptest::collection::vec(-0.95f64..0.9, 4),
    ) {
        let cfg = SystemConfig::with_snr_db(64, 4, 10.0).unwrap();
        let amm = AmmConfig { lambda, ..AmmConfig::default() };
        let ranges = ranges_from(&lo, 0.04);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phases = |n: usize| (0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect::<Vec<_>>();
        for q in 0..4 {
            let problem = NullingProblem::new(q, &ranges, &cfg, &amm).unwrap();
            let x = cm_from_phases(&phases(16));
            let at = problem.majorizer_value(x.as_slice(), x.as_slice());
            prop_assert!((at - problem.objective(x.as_slice())).abs() <= 1e-9 * at.abs().max(1.0));
            for _ in 0..20 {
                let f = cm_from_phases(&phases(16));
                prop_assert!(problem.majorizer_value(f.as_slice(), x.as_slice()) >= problem.objective(f.as_slice()) - 1e-9);
            }
        }
    }

    #[test]
    fn descent_holds_for_any_lambda(seed in 0u64..10_000, lambda in 0.01f64..1e4) {
        let cfg = SystemConfig::with_snr_db(64, 4, 10.0).unwrap();
        let channels = generate_user_channels(seed, &cfg, &ChannelParams::default()).unwrap();
        let codebook = build_codebook(&cfg, 64).unwrap();
        let sweep = beam_sweep(&channels, &codebook, &cfg, 10.0, seed).unwrap();
        let amm = AmmConfig { lambda, max_iters: 60, rel_tol: 1e-15, ..AmmConfig::default() };
        let out = run_amm(&sweep.codewords, &sweep.ranges, &cfg, &amm).unwrap();
        prop_assert!(out.analog.modulus_error() <= 1e-10);
        for t in &out.traces {
            prop_assert!(t.iterations() <= 60);
            let mut prev = t.initial_objective;
            for &o in &t.objective_trace {
                prop_assert!(o <= prev + 1e-9 * prev.abs().max(1.0));
                prev = o;
            }
        }
    }
}
