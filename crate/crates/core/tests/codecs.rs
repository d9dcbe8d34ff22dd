use proptest::prelude::*;
use resonet_core::codec::{
    adaptive_step, decode_time, if_step, rate_lif_step, time_lif_step, AdaptiveThresholdState, LifParams, LifState,
};
use resonet_core::pipeline::{run_frame, Mode, ModelKind, ModelSpec, Sequential};
use resonet_core::signal::ChirpFrame;

/// Steps until the first spike under constant drive, counting the spiking step.
fn steps_to_first_spike(p: &LifParams, g: f64, limit: usize, step: fn(&mut LifState, f64, &LifParams, u32) -> bool) -> Option<usize> {
    let mut st = LifState::default();
    (0..limit).find(|&n| step(&mut st, g, p, n as u32)).map(|n| n + 1)
}

/// Drive at which a leaky membrane starting at zero reaches `u_th` after
/// exactly `n` Euler steps.
fn drive_for_steps(p: &LifParams, n: usize) -> f64 {
    let decay = (1.0 - 1.0 / p.tau).powi(n as i32);
    p.u_th / (1.0 - decay) - p.u_rest
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn integrate_and_fire_count(u_th in 0.5..5.0f64, tau in 1.0..50.0f64, drive_frac in 0.01..0.99f64, t in 1usize..2000) {
        let p = LifParams { u_th, u_rest: 0.0, tau };
        let g = drive_frac * u_th * tau;
        let mut st = LifState::default();
        let count = (0..t).filter(|&n| if_step(&mut st, g, &p, n as u32)).count() as f64;
        let formula = (g * t as f64 / (u_th * tau)).floor();
        prop_assert!((count - formula).abs() <= 1.0, "{count} vs {formula}");
    }

    #[test]
    fn leaky_first_spike_time(tau in 20.0..500.0f64, ratio in 0.1..0.85f64, drive in 0.1..100.0f64, u_rest in 0.0..10.0f64) {
        let p = LifParams { u_th: ratio * (drive + u_rest), u_rest, tau };
        let steps = steps_to_first_spike(&p, drive, 100_000, rate_lif_step).unwrap() as f64;
        let want = -tau * (1.0 - ratio).ln();
        prop_assert!((steps - want).abs() <= 1.0, "{steps} vs {want}");
    }

    #[test]
    fn time_codec_roundtrip(tau in 5.0..200.0f64, u_rest in 0.0..300.0f64, u_th in 1.0..100.0f64, fracs in prop::collection::vec(0.0..3.0f64, 2..8)) {
        let t_c = 512;
        let p = LifParams { u_th, u_rest, tau };
        prop_assume!(p.plateau(t_c) < u_th);
        // beyond a few time constants neighbouring drives differ by less than rounding
        let picks: std::collections::BTreeSet<usize> = fracs.iter().map(|f| 1 + (f * tau) as usize).filter(|&n| n <= t_c).collect();
        let mut decoded = Vec::new();
        for &n in picks.iter().rev() {
            let base = drive_for_steps(&p, n);
            let g = base + 1e-9 * (base.abs() + u_rest + u_th);
            let mut st = LifState::default();
            for s in 0..t_c {
                time_lif_step(&mut st, g, &p, s as u32);
            }
            let t_s = st.first_spike.expect("drive chosen to fire");
            prop_assert_eq!(t_s as usize + 1, n);
            let recovered = drive_for_steps(&p, t_s as usize + 1);
            let coarser = drive_for_steps(&p, t_s as usize);
            prop_assert!(recovered <= g);
            prop_assert!(t_s == 0 || g < coarser);
            decoded.push((g, decode_time(st.first_spike, t_c)));
        }
        for w in decoded.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
    }
}

#[test]
fn spike_after_one_time_constant() {
    for tau in [10.0, 37.0, 100.0, 300.0] {
        for drive in [0.5, 3.0, 250.0] {
            let p = LifParams {
                u_th: (1.0 - (-1.0f64).exp()) * drive,
                u_rest: 0.0,
                tau,
            };
            let steps = steps_to_first_spike(&p, drive, 10_000, rate_lif_step).unwrap() as f64;
            assert!((steps - tau).abs() <= 1.0, "tau {tau}: {steps}");
        }
    }
}

#[test]
fn time_codec_is_refractory_after_first_spike() {
    let p = LifParams { u_th: 0.5, u_rest: 1.0, tau: 2.0 };
    let mut st = LifState::default();
    let fired = (0..100).filter(|&n| time_lif_step(&mut st, 5.0, &p, n)).count();
    assert_eq!(fired, 1);
    assert_eq!(st.first_spike, Some(0));
    assert_eq!(decode_time(st.first_spike, 512), 512.0);
    assert_eq!(decode_time(None, 512), 0.0);
}

#[test]
fn rate_codec_fires_at_most_once_per_step() {
    let p = LifParams { u_th: 0.1, u_rest: 0.0, tau: 1.0 };
    let mut st = LifState::default();
    let fired = (0..50).filter(|&n| rate_lif_step(&mut st, 10.0, &p, n)).count();
    assert_eq!(fired, 50);
    assert_eq!(st.n_spikes, 50);
}

#[test]
fn adaptive_emits_one_spike_per_crossing() {
    let mut st = AdaptiveThresholdState::new(0.5);
    let e = adaptive_step(&mut st, 1.6, 0.0);
    assert_eq!((e.positive, e.negative), (3, 0));
    let e = adaptive_step(&mut st, 1.6, 1.2);
    assert_eq!((e.positive, e.negative), (0, 2));
    assert_eq!(st.readout(), 1.0);
}

#[test]
fn zero_input_gives_no_spikes() {
    let frame = ChirpFrame::zeros(3, 512, 8);
    for kind in [ModelKind::Adaptive, ModelKind::Rate, ModelKind::Time] {
        for mode in [Mode::Single, Mode::Continuous, Mode::Average] {
            let out = run_frame(&frame, &ModelSpec::defaults(kind), mode, &Sequential).unwrap();
            assert!(out.spikes.is_empty(), "{kind} {mode}");
            assert!(out.map.values().iter().all(|&v| v == 0.0));
        }
    }
    let p = LifParams { u_th: 1.0, u_rest: 0.0, tau: 10.0 };
    let mut st = LifState::default();
    assert!(!(0..1000).any(|n| if_step(&mut st, 0.0, &p, n) || rate_lif_step(&mut st, 0.0, &p, n)));
}
