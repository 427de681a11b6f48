use fnoseg3d::gradsuite;
use fnoseg3d::ops::gradcheck::random_linear_objective;
use fnoseg3d::ops::{grad_check, ParamStore, Tape};
use fnoseg3d::tensor::Field;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-5;

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rand_field(c: usize, dims: [usize; 3], rng: &mut ChaCha8Rng) -> Field<f64> {
    Field::from_fn(c, dims, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

fn check(report: fnoseg3d::ops::GradReport) {
    for e in &report.entries {
        assert!(
            e.rel_error <= TOL,
            "{}: {} rel error {:e}",
            report.label,
            e.name,
            e.rel_error
        );
    }
}

#[test]
fn pointwise_linear_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let w = store.add("w", vec![3, 2], rand_vec(6, &mut rng));
    let b = store.add("b", vec![3], rand_vec(3, &mut rng));
    let x = rand_field(2, [3, 4, 2], &mut rng);
    let obj = random_linear_objective(
        move |t: &mut Tape<f64>, s: &ParamStore<f64>, v: &[_]| t.pointwise_linear(s, v[0], w, b),
        2,
    );
    check(grad_check("pointwise_linear", &mut store, &[x], obj, H).unwrap());
}

#[test]
fn pointwise_linear_closed_form_weight_gradient() {
    // loss = sum(W v): dL/dW[o][i] = sum_x v_i(x)
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let w = store.add("w", vec![2, 3], rand_vec(6, &mut rng));
    let b = store.add("b", vec![2], vec![0.0; 2]);
    let x = rand_field(3, [2, 3, 4], &mut rng);
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let y = tape.pointwise_linear(&store, xv, w, b).unwrap();
    let ones = Field::constant(2, [2, 3, 4], 1.0);
    tape.backward(&mut store, &[(y, &ones)]).unwrap();
    for o in 0..2 {
        for i in 0..3 {
            let want: f64 = x.channel(i).iter().sum();
            assert!((store.get(w).grad[o * 3 + i] - want).abs() < 1e-12);
        }
    }
    assert!(store.get(b).grad.iter().all(|&g| (g - 24.0).abs() < 1e-12));
}

#[test]
fn zero_upstream_gradient_gives_zero_grads() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::new();
    let w = store.add("w", vec![2, 2], rand_vec(4, &mut rng));
    let b = store.add("b", vec![2], rand_vec(2, &mut rng));
    let g = store.add("g", vec![2], vec![1.0; 2]);
    let be = store.add("be", vec![2], vec![0.0; 2]);
    let mut tape = Tape::new();
    let x = tape.input(rand_field(2, [3, 3, 3], &mut rng));
    let h = tape.layer_norm(&store, x, g, be).unwrap();
    let y = tape.pointwise_linear(&store, h, w, b).unwrap();
    let s = tape.softmax_channels(y);
    let zero = Field::zeros(2, [3, 3, 3]);
    tape.backward(&mut store, &[(s, &zero)]).unwrap();
    assert!(store.grads_all_zero());
    assert_eq!(tape.input_grad(x).unwrap().max_abs(), 0.0);
}

#[test]
fn second_backward_is_an_error() {
    let mut store = ParamStore::<f64>::new();
    let mut tape = Tape::new();
    let x = tape.input(Field::zeros(1, [2, 2, 2]));
    let y = tape.selu(x);
    let g = Field::constant(1, [2, 2, 2], 1.0);
    tape.backward(&mut store, &[(y, &g)]).unwrap();
    assert!(matches!(
        tape.backward(&mut store, &[(y, &g)]),
        Err(fnoseg3d::Error::NoForward)
    ));
    let mut empty = Tape::<f64>::new();
    assert!(empty.backward(&mut store, &[]).is_err());
}

#[test]
fn every_op_matches_finite_differences() {
    let reports = gradsuite::op_suite(7).unwrap();
    assert!(reports.len() >= 13);
    for r in reports {
        check(r);
    }
}

#[test]
fn pcc_loss_matches_finite_differences() {
    for seed in [1, 2, 3] {
        let r = gradsuite::pcc_suite(seed).unwrap();
        assert!(r.passed(1e-6), "{:e}", r.max_rel_error());
    }
}

#[test]
fn tiny_model_end_to_end() {
    let r = gradsuite::model_suite(&gradsuite::tiny_model_config(), 11).unwrap();
    assert!(r.passed(gradsuite::MODEL_TOLERANCE), "{:?}", r.entries);
    // every parameter tensor receives gradient
    assert!(r.entries.iter().all(|e| e.max_abs_grad > 0.0));
}
