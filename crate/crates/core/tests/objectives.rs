use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sam_edge::harness::{load_dataset, DatasetSpec};
use sam_edge::objectives::{glorot_init, Activation, Mlp, Quadratic};
use sam_edge::optim::{edge_ratio, gd_edge, gd_step, sam_edge, sam_step, OptimConfig};
use sam_edge::{Objective, Params};

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Params<f64> {
    Params::new((0..d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn small_mlp(act: Activation) -> Mlp<f64> {
    let data = load_dataset(&DatasetSpec::synthetic(200, 4, 8), 3).unwrap();
    Mlp::new(vec![8, 16, 16, 4], act, Arc::new(data)).unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

fn central_hvp(m: &Mlp<f64>, w: &Params<f64>, v: &Params<f64>, h: f64) -> Vec<f64> {
    let gp = m.gradient(&w.add_scaled(h, v)).unwrap();
    let gm = m.gradient(&w.add_scaled(-h, v)).unwrap();
    gp.grad
        .iter()
        .zip(gm.grad.iter())
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect()
}

#[test]
fn mlp_hvp_matches_finite_differences() {
    for act in [Activation::Tanh, Activation::Relu] {
        let m = small_mlp(act);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10 {
            let w = glorot_init::<f64>(m.widths(), trial).unwrap();
            // ReLU gradients jump where a pre-activation crosses zero, so the
            // difference step must be small enough to cross none.
            let (v, h) = match act {
                Activation::Tanh => (gaussian(&mut rng, m.dim()), 1e-5),
                Activation::Relu => (gaussian(&mut rng, m.dim()).normalized().unwrap(), 1e-7),
            };
            let hv = m.hvp(&w, &v).unwrap();
            let fd = central_hvp(&m, &w, &v, h);
            let err = rel(hv.as_slice(), &fd);
            assert!(err < 1e-4, "{act} trial {trial}: {err}");
        }
    }
}

#[test]
fn mlp_hvp_is_symmetric() {
    let m = small_mlp(Activation::Tanh);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = glorot_init::<f64>(m.widths(), 9).unwrap();
    for _ in 0..10 {
        let u = gaussian(&mut rng, m.dim());
        let v = gaussian(&mut rng, m.dim());
        let a = u.dot(&m.hvp(&w, &v).unwrap());
        let b = v.dot(&m.hvp(&w, &u).unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()), "{a} vs {b}");
    }
}

#[test]
fn mlp_gradient_matches_directional_differences() {
    let m = small_mlp(Activation::Tanh);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = glorot_init::<f64>(m.widths(), 2).unwrap();
    let g = m.gradient(&w).unwrap();
    for _ in 0..10 {
        let v = gaussian(&mut rng, m.dim());
        let h = 1e-5;
        let fd = (m.loss(&w.add_scaled(h, &v)).unwrap() - m.loss(&w.add_scaled(-h, &v)).unwrap()) / (2.0 * h);
        let exact = g.grad.dot(&v);
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
    }
    let (loss, g2) = m.loss_and_gradient(&w).unwrap();
    assert_eq!(loss, m.loss(&w).unwrap());
    assert_eq!(g2, g);
}

#[test]
fn mlp_loss_is_mean_squared_error_of_predictions() {
    let m = small_mlp(Activation::Relu);
    let w = glorot_init::<f64>(m.widths(), 4).unwrap();
    let pred = m.predict(&w).unwrap();
    let targets = m.data().targets();
    let sse: f64 = pred.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum();
    let expected = sse / m.data().len() as f64;
    assert!((m.loss(&w).unwrap() - expected).abs() <= 1e-12 * expected);
}

#[test]
fn f32_mlp_tracks_f64() {
    let m64 = small_mlp(Activation::Tanh);
    let d = m64.data();
    let data32 = sam_edge::objectives::Dataset::new(
        d.inputs().iter().map(|&x| x as f32).collect(),
        d.targets().iter().map(|&x| x as f32).collect(),
        d.input_dim(),
        d.output_dim(),
    )
    .unwrap();
    let m32 = Mlp::new(m64.widths().to_vec(), Activation::Tanh, Arc::new(data32)).unwrap();
    let w64 = glorot_init::<f64>(m64.widths(), 1).unwrap();
    let w32 = Params::new(w64.iter().map(|&x| x as f32).collect()).unwrap();
    let g64 = m64.gradient(&w64).unwrap();
    let g32 = m32.gradient(&w32).unwrap();
    let g32_as64: Vec<f64> = g32.grad.iter().map(|&x| x as f64).collect();
    assert!(rel(&g32_as64, g64.grad.as_slice()) < 1e-4);
}

#[test]
fn quadratic_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 7;
    let mut h = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let x: f64 = rng.sample(StandardNormal);
            h[i * d + j] = x;
            h[j * d + i] = x;
        }
    }
    let b: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let q = Quadratic::from_dense(d, &h, b.clone(), 0.75).unwrap();
    let w = gaussian(&mut rng, d);
    let v = gaussian(&mut rng, d);
    let mut loss = 0.75;
    let mut grad = b.clone();
    let mut hv = vec![0.0; d];
    for i in 0..d {
        loss += b[i] * w[i];
        for j in 0..d {
            loss += 0.5 * w[i] * h[i * d + j] * w[j];
            grad[i] += h[i * d + j] * w[j];
            hv[i] += h[i * d + j] * v[j];
        }
    }
    assert!((q.loss(&w).unwrap() - loss).abs() < 1e-12 * loss.abs().max(1.0));
    assert!(rel(q.gradient(&w).unwrap().grad.as_slice(), &grad) < 1e-14);
    assert!(rel(q.hvp(&w, &v).unwrap().as_slice(), &hv) < 1e-14);
}

#[test]
fn gd_one_step_loss_change_is_exact_on_quadratics() {
    // ℓ(w − ηg) − ℓ(w) = −η‖g‖² + ½η² gᵀHg for any quadratic.
    let q = Quadratic::diagonal(&[4.0, 1.0, 0.25]).unwrap();
    let w = Params::new(vec![0.5, -1.0, 2.0]).unwrap();
    let eta: f64 = 0.3;
    let g = q.gradient(&w).unwrap();
    let hg = q.hvp(&w, &g.grad).unwrap();
    let expected = -eta * g.norm * g.norm + 0.5 * eta * eta * g.grad.dot(&hg);
    let cfg = OptimConfig::new(eta, 0.0, 1).unwrap();
    let next = gd_step(&q, &w, &cfg).unwrap();
    let got = q.loss(&next).unwrap() - q.loss(&w).unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

proptest! {
    #[test]
    fn sam_edge_is_positive_root_and_below_gd_edge(
        eta in 1e-3f64..1.0, rho in 1e-3f64..1.0, g in 1e-3f64..10.0,
    ) {
        let edge = sam_edge(eta, rho, g).unwrap();
        prop_assert!(edge > 0.0 && edge <= gd_edge(eta).unwrap());
        // Positive root of ηρλ² + η‖g‖λ − 2‖g‖ by the textbook formula.
        let (a, b, c) = (eta * rho, eta * g, -2.0 * g);
        let root = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        prop_assert!((edge - root).abs() <= 1e-9 * root);
        let ratio = edge_ratio(eta * g / (2.0 * rho)).unwrap();
        prop_assert!((edge / gd_edge(eta).unwrap() - ratio).abs() <= 1e-12);
    }

    #[test]
    fn zero_rho_sam_is_gd_bitwise(w in prop::collection::vec(-5.0f64..5.0, 1..8), eta in 1e-3f64..1.0) {
        let d = w.len();
        let eigs: Vec<f64> = (0..d).map(|i| 1.0 + i as f64).collect();
        let q = Quadratic::diagonal(&eigs).unwrap();
        let w = Params::new(w).unwrap();
        let cfg = OptimConfig::new(eta, 0.0, 1).unwrap();
        prop_assert_eq!(sam_step(&q, &w, &cfg).unwrap(), gd_step(&q, &w, &cfg).unwrap());
    }

    #[test]
    fn add_scaled_is_linear(
        a in prop::collection::vec(-10.0f64..10.0, 4),
        b in prop::collection::vec(-10.0f64..10.0, 4),
        s in -3.0f64..3.0,
    ) {
        let pa = Params::new(a.clone()).unwrap();
        let pb = Params::new(b.clone()).unwrap();
        let c = pa.add_scaled(s, &pb);
        for i in 0..4 {
            prop_assert_eq!(c[i], a[i] + s * b[i]);
        }
        prop_assert!((pa.dot(&pb) - pb.dot(&pa)).abs() == 0.0);
    }
}
