//! Randomized invariant suites shared by the property tests and the
//! acceptance runner. Each function runs `cases` random cases and returns the
//! first failure.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};

use qmimo::harness::{ber_sweep, DetectorSpec, SweepConfig};
use qmimo::mimo::{augment, random_transmit, sample_channel, stack, transmit};
use qmimo::quantizer::{bin_bounds, QuantizerConfig};
use qmimo::rng::seeded;
use qmimo::unfolded::{detect, forward, obmnet_normalize, train, NetInput, NetKind, NetParams, TrainConfig};
use qmimo::{ComplexChannel, Constellation, ConstellationKind, Observation, SystemConfig, C64};

pub type Outcome = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn finish<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Outcome {
    r.map_err(|e| e.to_string())
}

fn quantizer() -> impl Strategy<Value = QuantizerConfig> {
    (1u32..=8, 0.01f64..10.0).prop_map(|(b, d)| QuantizerConfig::new(b, d).unwrap())
}

fn complex_matrix(max_dim: usize) -> impl Strategy<Value = (DMatrix<C64>, DVector<C64>)> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), n * k),
            prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), k),
        )
            .prop_map(move |(h, x)| {
                (
                    DMatrix::from_iterator(n, k, h.into_iter().map(|(a, b)| C64::new(a, b))),
                    DVector::from_iterator(k, x.into_iter().map(|(a, b)| C64::new(a, b))),
                )
            })
    })
}

/// `r1 <= r2` implies `Q(r1) <= Q(r2)`.
pub fn quantizer_monotone(cases: u32) -> Outcome {
    finish(runner(cases).run(&(quantizer(), -50.0f64..50.0, -50.0f64..50.0), |(q, a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(q.quantize(lo).unwrap() <= q.quantize(hi).unwrap());
        Ok(())
    }))
}

/// The sample lies in the bin reported for its output: `q_low < r <= q_up`.
pub fn quantizer_containment(cases: u32) -> Outcome {
    finish(runner(cases).run(&(quantizer(), prop::collection::vec(-50.0f64..50.0, 1..16)), |(q, r)| {
        let r = DVector::from_vec(r);
        let y = q.quantize_vec(&r).unwrap();
        let bb = bin_bounds(&y).unwrap();
        for i in 0..r.len() {
            prop_assert!(bb.q_low[i] < r[i] && r[i] <= bb.q_up[i], "r={} bin=({}, {}]", r[i], bb.q_low[i], bb.q_up[i]);
        }
        Ok(())
    }))
}

/// Every output is one of the `2^b` levels.
pub fn quantizer_closure(cases: u32) -> Outcome {
    finish(runner(cases).run(&(quantizer(), -1e6f64..1e6), |(q, r)| {
        let y = q.quantize(r).unwrap();
        prop_assert!(q.levels().contains(&y), "{y} not a level");
        Ok(())
    }))
}

/// `stack(H̄x̄) = augment(H̄)·stack(x̄)`.
pub fn augmentation_homomorphism(cases: u32) -> Outcome {
    finish(runner(cases).run(&complex_matrix(8), |(h, x)| {
        let lhs = stack(&(&h * &x));
        let rhs = &augment(&ComplexChannel::new(h).unwrap()).real * stack(&x);
        let err = (lhs - rhs).amax();
        prop_assert!(err < 1e-12, "max abs diff {err}");
        Ok(())
    }))
}

/// Multiplying the receive vector by `λ > 0` leaves OBMNet decisions alone.
pub fn obmnet_scale_invariance(cases: u32) -> Outcome {
    let strategy = (any::<u64>(), 1usize..=3, 1e-3f64..1e3, prop::collection::vec(0.0f64..0.3, 1..6), 0.1f64..5.0);
    finish(runner(cases).run(&strategy, |(seed, k, lambda, alphas, beta)| {
        let mut rng = seeded(seed);
        let n = 2 * k + 2;
        let c = Constellation::qpsk();
        let ch = sample_channel(k, n, &mut rng);
        let x = random_transmit(&c, k, &mut rng);
        let r = transmit(&ch, &x, 3.0, &mut rng).unwrap();
        let q = QuantizerConfig::new(1, 1.0).unwrap();
        let p = NetParams::new(alphas, beta).unwrap();
        let a = Observation::quantize(ch.clone(), &r, 3.0, q).unwrap();
        let b = Observation::quantize(ch, &r.map(|v| v * lambda), 3.0, q).unwrap();
        let da = detect(NetKind::Obmnet, &p, &a, &c).unwrap();
        let db = detect(NetKind::Obmnet, &p, &b, &c).unwrap();
        prop_assert_eq!(da.bits, db.bits);
        Ok(())
    }))
}

/// All step sizes zero: both networks return `x0` unchanged.
pub fn residual_identity(cases: u32) -> Outcome {
    let strategy = (any::<u64>(), 1usize..=4, 1usize..=6, 0.1f64..5.0, 1u32..=4);
    finish(runner(cases).run(&strategy, |(seed, k, layers, beta, b)| {
        let mut rng = seeded(seed);
        let n = k + 3;
        let c = Constellation::qpsk();
        let ch = sample_channel(k, n, &mut rng);
        let x = random_transmit(&c, k, &mut rng);
        let r = transmit(&ch, &x, 2.0, &mut rng).unwrap();
        let x0 = DVector::from_fn(2 * k, |i, _| (i as f64 * 0.37 + seed as f64 * 1e-20).sin());
        let p = NetParams::constant(layers, 0.0, beta).unwrap();
        let obs = Observation::quantize(ch, &r, 2.0, QuantizerConfig::new(b, 0.7).unwrap()).unwrap();
        let (out, _) = forward(
            NetInput::FewBit {
                h: &obs.augmented,
                bounds: &obs.bounds,
            },
            &p,
            &x0,
        )
        .unwrap();
        prop_assert_eq!(&out, &x0);
        if obs.is_one_bit() {
            let g = obs.effective_channel().unwrap();
            let (out, _) = forward(NetInput::OneBit(&g), &p, &x0).unwrap();
            prop_assert_eq!(&out, &x0);
        }
        Ok(())
    }))
}

/// `‖normalize(v)‖² = K` for every nonzero `v`.
pub fn normalization(cases: u32) -> Outcome {
    let strategy = (1usize..=16).prop_flat_map(|k| (Just(k), prop::collection::vec(-1e6f64..1e6, 2 * k)));
    finish(runner(cases).run(&strategy, |(k, v)| {
        let v = DVector::from_vec(v);
        if v.norm() == 0.0 {
            return Err(TestCaseError::reject("zero vector"));
        }
        let out = obmnet_normalize(&v, k).unwrap();
        let err = (out.norm_squared() - k as f64).abs();
        prop_assert!(err <= 1e-12 * k as f64, "‖x̃‖² - K = {err}");
        Ok(())
    }))
}

/// Same seed, same trained parameters and loss history.
pub fn train_determinism(cases: u32) -> Outcome {
    let strategy = (any::<u64>(), 1usize..=2, prop::bool::ANY);
    finish(runner(cases).run(&strategy, |(seed, k, fewbit)| {
        let (kind, b) = if fewbit { (NetKind::Fbmnet, 2) } else { (NetKind::Obmnet, 1) };
        let sys = SystemConfig::new(k, 2 * k, b, 1.0, ConstellationKind::Qpsk).unwrap();
        let tc = TrainConfig {
            batch_size: 4,
            iterations: 2,
            layers: 2,
            seed,
            ..TrainConfig::default()
        };
        prop_assert_eq!(train(kind, &sys, &tc).unwrap(), train(kind, &sys, &tc).unwrap());
        Ok(())
    }))
}

/// Same seed, same sweep counters.
pub fn sweep_determinism(cases: u32) -> Outcome {
    let strategy = (any::<u64>(), 1usize..=2, 1u32..=3, -5.0f64..15.0);
    finish(runner(cases).run(&strategy, |(seed, k, b, snr)| {
        let cfg = SweepConfig {
            system: SystemConfig::new(k, 4, b, 1.0, ConstellationKind::Qpsk).unwrap(),
            snr_db_list: vec![snr],
            trials_per_point: 6,
            detectors: vec![DetectorSpec::Zf { id: None, bits: None }, DetectorSpec::Random { id: None }],
            seed,
            min_errors: Some(3),
        };
        let counts = |c: &SweepConfig| {
            ber_sweep(c)
                .unwrap()
                .into_iter()
                .map(|r| (r.detector, r.trials, r.bit_errors, r.symbol_errors))
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(counts(&cfg), counts(&cfg));
        Ok(())
    }))
}

/// Every suite of the invariant group, by name.
pub type Suite = (&'static str, fn(u32) -> Outcome);

pub fn all_suites() -> Vec<Suite> {
    vec![
        ("quantizer monotonicity", quantizer_monotone as fn(u32) -> Outcome),
        ("quantizer containment", quantizer_containment),
        ("quantizer closure", quantizer_closure),
        ("augmentation homomorphism", augmentation_homomorphism),
        ("OBMNet scale invariance", obmnet_scale_invariance),
        ("residual identity", residual_identity),
        ("normalization", normalization),
        ("train determinism", train_determinism),
        ("sweep determinism", sweep_determinism),
    ]
}
