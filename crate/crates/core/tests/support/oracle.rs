//! Brute-force GP reference: explicit kernels, a Gauss-Jordan inverse and the
//! textbook predictive equations.

#![allow(dead_code)]

use loopsched_core::gp::{FittedGp, Hyperparams, Input, KernelKind, TrainingSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn kernel(kind: KernelKind, a: &Input, b: &Input, hp: &Hyperparams) -> f64 {
    let r = (a.x - b.x).abs() / hp.lengthscale;
    let s5 = 5f64.sqrt();
    let m = hp.signal_var * (1.0 + s5 * r + 5.0 * r * r / 3.0) * (-s5 * r).exp();
    match kind {
        KernelKind::Matern => m,
        KernelKind::MaternPlusExp => m + (hp.exp_beta / (a.ell + b.ell + hp.exp_beta)).powf(hp.exp_alpha),
    }
}

pub fn gram(kind: KernelKind, xs: &[Input], hp: &Hyperparams) -> Vec<Vec<f64>> {
    xs.iter().map(|a| xs.iter().map(|b| kernel(kind, a, b, hp)).collect()).collect()
}

/// Inverse and log-determinant by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut log_det = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        log_det += piv.abs().ln();
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    (m.into_iter().map(|r| r[n..].to_vec()).collect(), log_det)
}

pub struct Dense {
    pub inv: Vec<Vec<f64>>,
    pub log_det: f64,
    pub alpha: Vec<f64>,
}

pub fn dense(kind: KernelKind, xs: &[Input], ys: &[f64], hp: &Hyperparams, jitter: f64) -> Dense {
    let mut k = gram(kind, xs, hp);
    for (i, row) in k.iter_mut().enumerate() {
        row[i] += hp.noise_std * hp.noise_std + jitter;
    }
    let (inv, log_det) = invert(&k);
    let alpha = inv
        .iter()
        .map(|row| row.iter().zip(ys).map(|(a, y)| a * (y - hp.mean)).sum())
        .collect();
    Dense { inv, log_det, alpha }
}

pub fn predict(kind: KernelKind, xs: &[Input], d: &Dense, hp: &Hyperparams, q: &Input) -> (f64, f64) {
    let k: Vec<f64> = xs.iter().map(|p| kernel(kind, q, p, hp)).collect();
    let mean = hp.mean + k.iter().zip(&d.alpha).map(|(a, b)| a * b).sum::<f64>();
    let quad: f64 = (0..k.len())
        .map(|i| k[i] * d.inv[i].iter().zip(&k).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    (mean, kernel(kind, q, q, hp) - quad)
}

pub fn lml(ys: &[f64], d: &Dense, hp: &Hyperparams) -> f64 {
    let fit: f64 = ys.iter().zip(&d.alpha).map(|(y, a)| (y - hp.mean) * a).sum();
    -0.5 * fit - 0.5 * d.log_det - 0.5 * ys.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

pub struct Instance {
    pub kind: KernelKind,
    pub inputs: Vec<Input>,
    pub targets: Vec<f64>,
    pub hp: Hyperparams,
    pub queries: Vec<Input>,
}

pub fn random_instance(seed: u64, kind: KernelKind, max_points: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = rng.random_range(1..=max_points);
    let point = |rng: &mut ChaCha8Rng| Input::at(rng.random(), rng.random_range(1..=20) as f64);
    let inputs: Vec<Input> = (0..t).map(|_| point(&mut rng)).collect();
    let targets = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
    let hp = Hyperparams {
        mean: rng.random_range(-1.0..1.0),
        noise_std: rng.random_range(0.05..1.0),
        signal_var: rng.random_range(0.2..3.0),
        lengthscale: rng.random_range(0.05..1.0),
        exp_alpha: rng.random_range(0.3..3.0),
        exp_beta: rng.random_range(0.3..3.0),
    };
    let queries = (0..5).map(|_| point(&mut rng)).collect();
    Instance {
        kind,
        inputs,
        targets,
        hp,
        queries,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Largest relative disagreement between the fitted model and the dense
/// reference, over predictive means, variances and the log marginal likelihood.
pub fn max_disagreement(inst: &Instance) -> f64 {
    let train = TrainingSet::new(inst.inputs.clone(), inst.targets.clone()).unwrap();
    let gp = FittedGp::fit(&train, &inst.hp, inst.kind).unwrap();
    let d = dense(inst.kind, &inst.inputs, &inst.targets, &inst.hp, gp.jitter());
    let mut worst = rel_err(
        loopsched_core::gp::log_marginal_likelihood(&train, &inst.hp, inst.kind).unwrap(),
        lml(&inst.targets, &d, &inst.hp),
    );
    for q in inst.queries.iter().chain(&inst.inputs) {
        let (m, v) = gp.predict(q);
        let (om, ov) = predict(inst.kind, &inst.inputs, &d, &inst.hp, q);
        worst = worst.max(rel_err(m, om)).max(rel_err(v, ov.max(0.0)));
    }
    worst
}
