use dddm::commands;
use dddm::config::RunConfig;
use dddm::metrics::{BaseMetric, MetricSpec};
use dddm::micronet::Architecture;
use dddm::trainer::{f_theta, train_epoch, TrainConfig, TrainState};
use dddm::{SampleSet, Schedule};

fn small_config(lr: f64, batch_size: usize) -> TrainConfig {
    TrainConfig {
        epochs: 1,
        batch_size,
        lr,
        metric: MetricSpec::new(BaseMetric::SquaredL2, 0.01).unwrap(),
        ema_decay: 0.9,
        seed: 11,
        timing: false,
    }
}

fn toy() -> (SampleSet, Schedule, Architecture) {
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let a = i as f64 * 0.37;
            vec![a.cos(), a.sin() * 0.5]
        })
        .collect();
    let data = SampleSet::from_rows(2, &rows).unwrap();
    let sched = Schedule::linear(50, 1e-4, 0.05).unwrap();
    let arch = Architecture::new(2, 8, vec![16, 16], 50).unwrap();
    (data, sched, arch)
}

#[test]
fn zero_lr_freezes_params_but_moves_the_bank() {
    let (data, sched, arch) = toy();
    let mut state = TrainState::new(arch, data.len(), 11, 0.9).unwrap();
    let before = state.clone();
    let (rec, trace) = train_epoch(&mut state, &data, &sched, &small_config(0.0, 8)).unwrap();
    assert_eq!(state.params, before.params);
    for (a, b) in state.ema.shadow.as_slice().iter().zip(before.ema.shadow.as_slice()) {
        assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
    }
    assert_ne!(state.bank.as_slice(), before.bank.as_slice());
    assert_eq!(state.bank.epoch(), 1);
    assert_eq!(rec.epoch, 1);
    // with frozen params every bank entry is f_θ of its old estimate
    for i in 0..data.len() {
        let eps = &trace.noise[i * 2..i * 2 + 2];
        let x_t = sched.perturb(data.point(i), trace.steps[i], eps).unwrap();
        let want = f_theta(&before.params, before.bank.get(i), &x_t, trace.steps[i]).unwrap();
        for (a, b) in state.bank.get(i).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn bank_holds_pre_step_predictions() {
    // one batch per epoch, so every prediction uses the parameters from before the step
    let (data, sched, arch) = toy();
    let mut state = TrainState::new(arch, data.len(), 5, 0.9).unwrap();
    let before = state.clone();
    let (_, trace) = train_epoch(&mut state, &data, &sched, &small_config(1e-2, data.len())).unwrap();
    assert_ne!(state.params, before.params);
    for i in [0, 7, 23, 39] {
        let eps = &trace.noise[i * 2..i * 2 + 2];
        let x_t = sched.perturb(data.point(i), trace.steps[i], eps).unwrap();
        let want = f_theta(&before.params, before.bank.get(i), &x_t, trace.steps[i]).unwrap();
        let after_step = f_theta(&state.params, before.bank.get(i), &x_t, trace.steps[i]).unwrap();
        for k in 0..2 {
            assert!((state.bank.get(i)[k] - want[k]).abs() < 1e-12);
        }
        assert_ne!(after_step, want);
    }
}

#[test]
fn one_sample_hand_trace() {
    let x0 = vec![0.4, -1.2];
    let data = SampleSet::from_rows(2, &[x0.clone()]).unwrap();
    let sched = Schedule::linear(1, 0.5, 0.5).unwrap();
    let arch = Architecture::new(2, 4, vec![6], 1).unwrap();
    let mut state = TrainState::new(arch, 1, 3, 0.5).unwrap();
    let before = state.clone();
    let cfg = small_config(1e-3, 1);
    let (rec, trace) = train_epoch(&mut state, &data, &sched, &cfg).unwrap();

    assert_eq!(trace.steps, vec![1]);
    let eps = &trace.noise;
    let x1: Vec<f64> = x0.iter().zip(eps).map(|(a, e)| 0.5f64.sqrt() * a + 0.5f64.sqrt() * e).collect();
    let out = before.params.forward(before.bank.get(0), &x1, 1).unwrap();
    let pred: Vec<f64> = x1.iter().zip(&out).map(|(x, f)| x - f).collect();
    let d: f64 = pred.iter().zip(&x0).map(|(p, q)| (p - q) * (p - q)).sum();
    let c = 0.01;
    let loss = (d + c * c).sqrt() - c;
    assert!((trace.losses[0] - loss).abs() < 1e-12);
    assert!((rec.mean_loss - loss).abs() < 1e-12);
    assert_eq!(state.bank.get(0), pred.as_slice());
}

#[test]
fn identical_seeds_give_identical_epochs() {
    let (data, sched, arch) = toy();
    let cfg = small_config(1e-3, 8);
    let mut a = TrainState::new(arch.clone(), data.len(), 2, 0.9).unwrap();
    let mut b = TrainState::new(arch, data.len(), 2, 0.9).unwrap();
    for _ in 0..2 {
        let ra = train_epoch(&mut a, &data, &sched, &cfg).unwrap();
        let rb = train_epoch(&mut b, &data, &sched, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(ra.0.csv_row(), rb.0.csv_row());
    }
    assert_eq!(a, b);
}

#[test]
fn mismatched_state_is_rejected() {
    let (data, sched, arch) = toy();
    let mut state = TrainState::new(arch, data.len() + 1, 0, 0.9).unwrap();
    assert!(train_epoch(&mut state, &data, &sched, &small_config(1e-3, 8)).is_err());
    let (data, _, arch) = toy();
    let mut state = TrainState::new(arch, data.len(), 0, 0.9).unwrap();
    let other = Schedule::linear(60, 1e-4, 0.05).unwrap();
    assert!(train_epoch(&mut state, &data, &other, &small_config(1e-3, 8)).is_err());
}

#[test]
fn default_mixture_run_loss_falls_and_drift_contracts() {
    let cfg = RunConfig::from_pairs(&[("epochs", "50")]).unwrap();
    let out = commands::train_run(&cfg, |_, _| Ok(())).unwrap();
    let losses: Vec<f64> = out.records.iter().map(|r| r.mean_loss).collect();
    let trailing = |end: usize| {
        let start = end.saturating_sub(10);
        losses[start..end].iter().sum::<f64>() / (end - start) as f64
    };
    assert!(trailing(50) < trailing(5), "{} vs {}", trailing(50), trailing(5));
    let first = out.records.first().unwrap().mean_drift;
    let last = out.records.last().unwrap().mean_drift;
    assert!(last < first, "drift {first} -> {last}");
}
