use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ritcbf::controller::QpProblem;

/// Exhaustive KKT search over active sets of size at most the dimension.
/// Returns `None` when no subset yields a feasible KKT point.
pub fn brute_force_qp(p: &QpProblem) -> Option<DVector<f64>> {
    let n = p.u_nom.len();
    let mut rows: Vec<(DVector<f64>, f64)> = p.constraints.clone();
    if let Some(m) = p.u_max {
        for s in [1.0, -1.0] {
            for k in 0..n {
                let mut a = DVector::zeros(n);
                a[k] = s;
                rows.push((a, m));
            }
        }
    }
    let m = rows.len();
    let scale = 1.0
        + rows
            .iter()
            .map(|(_, c)| c.abs())
            .fold(p.u_nom.amax(), f64::max);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u64..(1u64 << m) {
        let set: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if set.len() > n {
            continue;
        }
        let x = if set.is_empty() {
            p.u_nom.clone()
        } else {
            let a = DMatrix::from_fn(set.len(), n, |i, j| rows[set[i]].0[j]);
            let c = DVector::from_iterator(set.len(), set.iter().map(|&i| rows[i].1));
            let gram = &a * a.transpose();
            if gram.determinant().abs() < 1e-12 {
                continue;
            }
            let mu = gram.lu().solve(&(&a * &p.u_nom - c)).unwrap();
            if mu.iter().any(|&v| v < -1e-9) {
                continue;
            }
            &p.u_nom - a.transpose() * mu
        };
        let feasible = rows
            .iter()
            .all(|(a, c)| a.dot(&x) <= c + 1e-9 * (scale + a.amax() * x.amax()));
        if feasible {
            let f = (&x - &p.u_nom).norm_squared();
            if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Random problem: dimension 1 to 3, up to 6 constraints, optional box.
pub fn random_problem(rng: &mut ChaCha8Rng) -> QpProblem {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(0..=6);
    let mut p = QpProblem::new(DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)));
    for _ in 0..m {
        let a = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        p.push(a, rng.gen_range(-1.5..1.0));
    }
    if rng.gen_bool(0.3) {
        p.u_max = Some(rng.gen_range(0.1..2.0));
    }
    p
}
