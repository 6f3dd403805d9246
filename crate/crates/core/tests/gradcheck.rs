use pigano_core::autodiff::{Tape, Tensor, Var};
use pigano_core::stochastic::{stream_rng, uniform};
use rand::Rng;

struct Net {
    w1: Tensor,
    b1: Tensor,
    w2: Tensor,
    b2: Tensor,
}

fn random(rng: &mut impl Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| uniform(rng, -1.0, 1.0)).collect()).unwrap()
}

fn net(seed: u64) -> (Net, Tensor) {
    let mut rng = stream_rng(seed, 0);
    let h = rng.random_range(3..9);
    let n = Net {
        w1: random(&mut rng, 2, h),
        b1: random(&mut rng, 1, h),
        w2: random(&mut rng, h, 1),
        b2: random(&mut rng, 1, 1),
    };
    let x = random(&mut rng, 4, 2);
    (n, x)
}

fn forward(tape: &mut Tape, x: Var, p: &[Var]) -> Var {
    let z = tape.matmul(x, p[0]).unwrap();
    let z = tape.add_row(z, p[1]).unwrap();
    let z = tape.tanh(z).unwrap();
    let z = tape.matmul(z, p[2]).unwrap();
    let z = tape.add_row(z, p[3]).unwrap();
    tape.tanh(z).unwrap()
}

fn leaves(tape: &mut Tape, n: &Net) -> Vec<Var> {
    [&n.w1, &n.b1, &n.w2, &n.b2]
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param(i, (*t).clone()))
        .collect()
}

fn params(n: &Net) -> Vec<Tensor> {
    vec![n.w1.clone(), n.b1.clone(), n.w2.clone(), n.b2.clone()]
}

fn scalar_loss(ps: &[Tensor], x: &Tensor) -> f64 {
    let mut tape = Tape::new();
    let p: Vec<Var> = ps.iter().enumerate().map(|(i, t)| tape.param(i, t.clone())).collect();
    let xv = tape.constant(x.clone());
    let u = forward(&mut tape, xv, &p);
    let sq = tape.square(u).unwrap();
    let s = tape.sum(sq).unwrap();
    tape.value(s).item().unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

#[test]
fn parameter_gradients_match_central_differences() {
    let h = 1e-5;
    for seed in 0..50 {
        let (n, x) = net(seed);
        let mut tape = Tape::new();
        let p = leaves(&mut tape, &n);
        let xv = tape.constant(x.clone());
        let u = forward(&mut tape, xv, &p);
        let sq = tape.square(u).unwrap();
        let loss = tape.sum(sq).unwrap();
        let grads = tape.grad(loss, &p).unwrap();
        let base = params(&n);
        for (k, g) in grads.iter().enumerate() {
            let mut fd = vec![0.0; g.len()];
            for (j, slot) in fd.iter_mut().enumerate() {
                let mut plus = base.clone();
                plus[k].data_mut()[j] += h;
                let mut minus = base.clone();
                minus[k].data_mut()[j] -= h;
                *slot = (scalar_loss(&plus, &x) - scalar_loss(&minus, &x)) / (2.0 * h);
            }
            let e = rel(g.data(), &fd);
            assert!(e <= 1e-5, "seed {seed} param {k}: relative error {e:e}");
        }
    }
}

fn point_value(n: &Net, px: f64, py: f64) -> f64 {
    let x = Tensor::matrix(1, 2, vec![px, py]).unwrap();
    let mut tape = Tape::new();
    let p = leaves(&mut tape, n);
    let xv = tape.constant(x);
    let u = forward(&mut tape, xv, &p);
    tape.value(u).item().unwrap()
}

#[test]
fn second_spatial_derivatives_match_central_differences() {
    let h = 1e-4;
    for seed in 0..50 {
        let (n, x) = net(seed);
        let mut tape = Tape::new();
        let p = leaves(&mut tape, &n);
        let xv = tape.input(x.clone());
        let u = forward(&mut tape, xv, &p);
        for (i, j) in [(0, 0), (1, 1), (0, 1)] {
            let d = tape.spatial_derivs(u, xv, 2, (i, j)).unwrap();
            let ad: Vec<f64> = tape.value(d).data().to_vec();
            let fd: Vec<f64> = (0..x.rows())
                .map(|r| {
                    let (px, py) = (x.get(r, 0), x.get(r, 1));
                    let shift = |a: f64, b: f64| {
                        let mut q = [px, py];
                        q[i] += a;
                        q[j] += b;
                        point_value(&n, q[0], q[1])
                    };
                    if i == j {
                        (shift(h, 0.0) - 2.0 * point_value(&n, px, py) + shift(-h, 0.0)) / (h * h)
                    } else {
                        (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h)
                    }
                })
                .collect();
            let e = rel(&ad, &fd);
            assert!(e <= 1e-4, "seed {seed} axes ({i},{j}): relative error {e:e}");
        }
    }
}

#[test]
fn first_spatial_derivative_of_rows_is_independent() {
    let (n, x) = net(7);
    let mut tape = Tape::new();
    let p = leaves(&mut tape, &n);
    let xv = tape.input(x.clone());
    let u = forward(&mut tape, xv, &p);
    let d = tape.spatial_derivs(u, xv, 1, (0, 0)).unwrap();
    let h = 1e-6;
    for r in 0..x.rows() {
        let (px, py) = (x.get(r, 0), x.get(r, 1));
        let fd = (point_value(&n, px + h, py) - point_value(&n, px - h, py)) / (2.0 * h);
        assert!((tape.value(d).get(r, 0) - fd).abs() < 1e-8);
    }
}

#[test]
fn gradient_of_squared_derivative_loss_matches_differences() {
    // Parameter gradient of mean((u_xx + u_yy)^2), the residual loss shape used in training.
    let (n, x) = net(3);
    let loss_of = |ps: &[Tensor]| -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let p: Vec<Var> = ps.iter().enumerate().map(|(i, t)| tape.param(i, t.clone())).collect();
        let xv = tape.input(x.clone());
        let u = forward(&mut tape, xv, &p);
        let uxx = tape.spatial_derivs(u, xv, 2, (0, 0)).unwrap();
        let uyy = tape.spatial_derivs(u, xv, 2, (1, 1)).unwrap();
        let lap = tape.add(uxx, uyy).unwrap();
        let sq = tape.square(lap).unwrap();
        let l = tape.mean(sq).unwrap();
        let g = tape.grad(l, &p).unwrap();
        (tape.value(l).item().unwrap(), g)
    };
    let base = params(&n);
    let (_, grads) = loss_of(&base);
    let h = 1e-5;
    for (k, g) in grads.iter().enumerate() {
        let fd: Vec<f64> = (0..g.len())
            .map(|j| {
                let mut plus = base.clone();
                plus[k].data_mut()[j] += h;
                let mut minus = base.clone();
                minus[k].data_mut()[j] -= h;
                (loss_of(&plus).0 - loss_of(&minus).0) / (2.0 * h)
            })
            .collect();
        let e = rel(g.data(), &fd);
        assert!(e <= 1e-5, "param {k}: relative error {e:e}");
    }
}

#[test]
fn grad_graph_agrees_with_numeric_grad() {
    let (n, x) = net(11);
    let mut tape = Tape::new();
    let p = leaves(&mut tape, &n);
    let xv = tape.constant(x);
    let u = forward(&mut tape, xv, &p);
    let s = tape.sum(u).unwrap();
    let numeric = tape.grad(s, &p).unwrap();
    let recorded = tape.grad_graph(s, &p).unwrap();
    for (a, b) in numeric.iter().zip(&recorded) {
        assert!(rel(a.data(), tape.value(*b).data()) < 1e-14);
    }
}

#[test]
fn grad_rejects_non_scalar_output() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::zeros(3, 2));
    assert!(tape.grad(x, &[x]).is_err());
    assert!(tape.spatial_derivs(x, x, 3, (0, 0)).is_err());
}
