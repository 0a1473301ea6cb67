use metavqt::circuit::ParamVector;
use metavqt::hamiltonian::HamiltonianFamily;
use metavqt::linalg::fidelity;
use metavqt::rng::SeedStream;
use metavqt::thermal::exact_gibbs;
use metavqt::training::*;
use metavqt::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(a: f64, b: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![a + (b - a) * i as f64 / (n - 1) as f64]).collect()
}

fn tfim_config(epochs: usize) -> MetaTrainConfig {
    let fam = HamiltonianFamily::tfim(2, 1.0).unwrap();
    let mut cfg = MetaTrainConfig::meta(fam, uniform(-2.0, 2.0, 4), 1, 1);
    cfg.epochs = epochs;
    cfg.seed = 7;
    cfg
}

#[test]
fn zero_epochs_returns_initial_parameters() {
    let cfg = tfim_config(0);
    let r = train_meta_vqt(&cfg).unwrap();
    assert!(r.loss_history.is_empty());
    let Preparer::Meta { trainables, ansatz } = &r.preparer else { panic!("meta preparer expected") };
    // omega slots start at zero, the rest in (-pi, pi)
    let w = ansatz.encoding_weight_slots();
    for (i, x) in trainables.0.iter().enumerate() {
        if w.contains(&i) {
            assert_eq!(*x, 0.0);
        } else {
            assert!(x.abs() < std::f64::consts::PI);
        }
    }

    let fam = HamiltonianFamily::heisenberg_fields();
    let mut nn = MetaTrainConfig::nn_meta(fam, vec![vec![0.5, -0.5]], 1, 0, vec![3]);
    nn.epochs = 0;
    nn.seed = 3;
    let r = train_nn_meta_vqt(&nn).unwrap();
    let Preparer::NnMeta { mlp, ansatz } = &r.preparer else { panic!("nn preparer expected") };
    let expected = Mlp::random(&[2, 3, ansatz.n_external], &mut SeedStream::new(3).fork()).unwrap();
    assert_eq!(mlp, &expected);
}

#[test]
fn trainer_kind_is_checked() {
    let cfg = tfim_config(1);
    assert!(train_nn_meta_vqt(&cfg).is_err());
    let mut bad = tfim_config(1);
    bad.h_train.clear();
    bad.lr = -1.0;
    match train(&bad) {
        Err(metavqt::Error::ConfigInvalid(msg)) => assert!(msg.contains("h_train") && msg.contains("lr")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn serial_runs_are_bitwise_reproducible_and_parallel_matches() {
    for gradient in [GradientMethod::Reverse, GradientMethod::CentralDifference { step: 1e-4 }] {
        let mut cfg = tfim_config(15);
        cfg.gradient = gradient;
        cfg.execution = Execution::Serial;
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        cfg.execution = Execution::Parallel;
        let c = train(&cfg).unwrap();
        for (x, y) in a.loss_history.iter().zip(&c.loss_history) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn reverse_and_finite_difference_training_agree() {
    let mut fd = tfim_config(20);
    fd.gradient = GradientMethod::CentralDifference { step: 1e-5 };
    let mut rev = fd.clone();
    rev.gradient = GradientMethod::Reverse;
    let a = train(&fd).unwrap();
    let b = train(&rev).unwrap();
    // Adam rescales each coordinate, so tiny gradient differences grow along the path
    assert!((a.loss_history[0] - b.loss_history[0]).abs() < 1e-12);
    for (x, y) in a.loss_history.iter().zip(&b.loss_history) {
        assert!((x - y).abs() < 1e-5, "{x} vs {y}");
    }

    let fam = HamiltonianFamily::heisenberg_fields();
    let mut nn = MetaTrainConfig::nn_meta(fam, vec![vec![0.5, -0.5], vec![-1.0, 1.5]], 2, 1, vec![4]);
    nn.epochs = 10;
    nn.lr = 0.01;
    nn.gradient = GradientMethod::CentralDifference { step: 1e-5 };
    let a = train(&nn).unwrap();
    nn.gradient = GradientMethod::Reverse;
    let b = train(&nn).unwrap();
    for (x, y) in a.loss_history.iter().zip(&b.loss_history) {
        assert!((x - y).abs() < 1e-5, "{x} vs {y}");
    }
}

#[test]
fn richardson_consistency_of_meta_loss_gradient() {
    let cfg = tfim_config(0);
    let r = train(&cfg).unwrap();
    let spec = r.preparer.ansatz().clone();
    let targets = build_targets(&cfg.family, &cfg.h_train).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let p: Vec<f64> = (0..spec.n_trainable).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let loss = |x: &[f64]| global_loss(&spec, x, &[], &targets, 1.0, Execution::Serial);
        let step = 1e-3;
        let g1 = grad_central_diff(loss, &p, step, Execution::Serial).unwrap();
        let g2 = grad_central_diff(loss, &p, step / 2.0, Execution::Serial).unwrap();
        let scale = g1.iter().fold(1.0f64, |m, g| m.max(g.abs()));
        for (a, b) in g1.iter().zip(&g2) {
            // truncation error is O(step^2); constant bounded by the third derivative
            assert!((a - b).abs() <= 50.0 * scale * step * step, "{a} vs {b}");
        }
    }
}

#[test]
fn variational_bound_at_every_epoch() {
    let mut cfg = tfim_config(40);
    cfg.gradient = GradientMethod::Reverse;
    let r = train(&cfg).unwrap();
    let exact: Vec<f64> = build_targets(&cfg.family, &cfg.h_train)
        .unwrap()
        .iter()
        .map(|t| t.exact_free_energy(cfg.beta).unwrap())
        .collect();
    for row in &r.point_history {
        for (g, e) in row.iter().zip(&exact) {
            assert!(*g >= e - 1e-9);
        }
    }
    assert!(r.loss_history.last().unwrap() < &r.loss_history[0]);
}

#[test]
fn warm_start_without_epochs_reproduces_inference() {
    let mut cfg = tfim_config(30);
    cfg.gradient = GradientMethod::Reverse;
    let r = train(&cfg).unwrap();
    let h = [0.4];
    let init = r.preparer.single_point_init(&h).unwrap();
    let spec = r.preparer.ansatz().clone();
    let s = train_vqt_single(&cfg.family, &h, 1.0, &spec, &VqtInit::Params { params: init }, 0, 0.01, GradientMethod::Reverse)
        .unwrap();
    let exact = exact_gibbs(&cfg.family.build(&h).unwrap(), 1.0).unwrap();
    let inferred = fidelity(&exact.gibbs_state, &r.preparer.prepare(&h).unwrap()).unwrap();
    assert!((s.final_fidelity - inferred).abs() < 1e-12);
    assert!(s.loss_history.is_empty());

    let run = train_vqt_single(&cfg.family, &h, 1.0, &spec, &VqtInit::Random { seed: 1 }, 50, 0.05, GradientMethod::Reverse)
        .unwrap();
    assert!(run.final_free_energy >= run.exact_free_energy - 1e-9);
    assert!(run.loss_history.iter().all(|l| *l >= run.exact_free_energy - 1e-9));
    let wrong = VqtInit::Params { params: ParamVector::zeros(3) };
    assert!(train_vqt_single(&cfg.family, &h, 1.0, &spec, &wrong, 1, 0.01, GradientMethod::Reverse).is_err());
}

#[test]
fn nn_preparer_warm_start_uses_network_output() {
    let fam = HamiltonianFamily::heisenberg_fields();
    let mut nn = MetaTrainConfig::nn_meta(fam.clone(), vec![vec![0.5, -0.5]], 1, 1, vec![4]);
    nn.epochs = 0;
    let r = train(&nn).unwrap();
    let h = [0.2, 0.3];
    let init = r.preparer.single_point_init(&h).unwrap();
    let spec = r.preparer.ansatz().clone();
    assert_eq!(init.len(), spec.n_external);
    let s = train_vqt_single(&fam, &h, 1.0, &spec, &VqtInit::Params { params: init }, 0, 0.01, GradientMethod::Reverse)
        .unwrap();
    let exact = exact_gibbs(&fam.build(&h).unwrap(), 1.0).unwrap();
    let inferred = fidelity(&exact.gibbs_state, &r.preparer.prepare(&h).unwrap()).unwrap();
    assert!((s.final_fidelity - inferred).abs() < 1e-12);
}

#[test]
fn report_and_checkpoint_serialize() {
    let r = train(&tfim_config(3)).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    let back: TrainReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.loss_history, r.loss_history);
    let cp = Checkpoint::new(tfim_config(0).family, 1.0, r.preparer);
    assert_eq!(Checkpoint::from_json(&cp.to_json().unwrap()).unwrap(), cp);
}
