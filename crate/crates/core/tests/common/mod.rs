//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls the selection code: validity of proxies is decided by
//! conditional independence on the exact joint covariance of `(U, X, Y)`,
//! and total effects by enumerating directed paths.

#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use proxysel::scm::{CoefficientSampler, LinearScm, NoiseKind, ScmBuilder};
use rand::Rng;

/// Exact covariance over `U_1..U_q, X_1..X_p, Y` (in that order).
pub fn joint_covariance(scm: &LinearScm) -> DMatrix<f64> {
    let (m, var) = scm.mixing_matrix().unwrap();
    let q = scm.q();
    let rows = q + m.nrows();
    let mut full = DMatrix::zeros(rows, m.ncols());
    for j in 0..q {
        full[(j, j)] = 1.0;
    }
    full.view_mut((q, 0), (m.nrows(), m.ncols())).copy_from(&m);
    &full * DMatrix::from_diagonal(&var) * full.transpose()
}

/// `a ⫫ b | s` for jointly Gaussian-equivalent linear models: the partial
/// cross-covariance vanishes.
pub fn indep(cov: &DMatrix<f64>, a: &[usize], b: &[usize], s: &[usize]) -> bool {
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| cov[(r[i], c[j])]);
    let mut part = sub(a, b);
    if !s.is_empty() {
        let inv = sub(s, s).try_inverse().expect("conditioning set is nonsingular");
        part -= sub(a, s) * inv * sub(s, b);
    }
    let scale = a.iter().chain(b).map(|&i| cov[(i, i)]).fold(0.0, f64::max);
    part.iter().all(|v| v.abs() < 1e-9 * scale)
}

/// Joint-covariance indices for a model.
pub struct Layout {
    pub q: usize,
    pub p: usize,
}

impl Layout {
    pub fn of(scm: &LinearScm) -> Self {
        Self { q: scm.q(), p: scm.p() }
    }
    pub fn u(&self) -> Vec<usize> {
        (0..self.q).collect()
    }
    pub fn x(&self, i: usize) -> usize {
        self.q + i
    }
    pub fn xs(&self, set: &[usize]) -> Vec<usize> {
        set.iter().map(|&i| self.q + i).collect()
    }
    pub fn y(&self) -> usize {
        self.q + self.p
    }
}

/// Whether `U` alone is a valid adjustment set for `X_k -> Y`: the partial
/// regression coefficient of `Y` on `X_k` given `U` equals the total effect.
/// This is the setting in which proxies for `U` suffice.
pub fn confounded_only_through_u(scm: &LinearScm, cov: &DMatrix<f64>, l: &Layout, k: usize) -> bool {
    let u = l.u();
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| cov[(r[i], c[j])]);
    let inv = sub(&u, &u).try_inverse().expect("confounders are nondegenerate");
    let (x, y) = (l.x(k), l.y());
    let sxy = cov[(x, y)] - (sub(&[x], &u) * &inv * sub(&u, &[y]))[(0, 0)];
    let sxx = cov[(x, x)] - (sub(&[x], &u) * &inv * sub(&u, &[x]))[(0, 0)];
    let truth = scm.total_effect(k).unwrap();
    (sxy / sxx - truth).abs() < 1e-9 * (1.0 + truth.abs())
}

/// Proximal validity of `(Z, W)` for `X_k -> Y`.
pub fn valid_proxies(cov: &DMatrix<f64>, l: &Layout, k: usize, z: &[usize], w: &[usize]) -> bool {
    let u = l.u();
    let mut uk = u.clone();
    uk.push(l.x(k));
    let mut kz = vec![l.x(k)];
    kz.extend(l.xs(z));
    indep(cov, &l.xs(z), &[l.y()], &uk) && indep(cov, &l.xs(w), &kz, &u)
}

pub fn quadruple_disconnected(cov: &DMatrix<f64>, l: &Layout, k: usize, z: &[usize], w: &[usize], qv: usize) -> bool {
    let u = l.u();
    let mut others = vec![l.x(k), l.y()];
    others.extend(l.xs(z));
    others.extend(l.xs(w));
    others.iter().all(|&o| indep(cov, &[l.x(qv)], &[o], &u))
}

/// Whether `U` is the only confounding and a valid `(Z, W)` of size `q` with a quadruple-disconnected
/// variable exists, or a valid pair of size `q + 1` exists.
pub fn identifiable_by_rank(scm: &LinearScm, k: usize) -> bool {
    let cov = joint_covariance(scm);
    let l = Layout::of(scm);
    if !confounded_only_through_u(scm, &cov, &l, k) {
        return false;
    }
    let q = l.q;
    let others: Vec<usize> = (0..l.p).filter(|&i| i != k).collect();
    for size in [q, q + 1] {
        for z in others.iter().copied().combinations(size) {
            let rest: Vec<usize> = others.iter().copied().filter(|i| !z.contains(i)).collect();
            for w in rest.iter().copied().combinations(size) {
                if !valid_proxies(&cov, &l, k, &z, &w) {
                    continue;
                }
                if size == q + 1 {
                    return true;
                }
                let found_q = rest
                    .iter()
                    .filter(|i| !w.contains(i))
                    .any(|&qv| quadruple_disconnected(&cov, &l, k, &z, &w, qv));
                if found_q {
                    return true;
                }
            }
        }
    }
    false
}

/// Sum over directed paths `X_k -> ... -> Y` of coefficient products.
pub fn path_total_effect(scm: &LinearScm, k: usize) -> f64 {
    fn walk(scm: &LinearScm, node: usize, acc: f64) -> f64 {
        let mut total = acc * scm.beta()[node];
        for child in 0..scm.p() {
            let c = scm.b()[(child, node)];
            if c != 0.0 {
                total += walk(scm, child, acc * c);
            }
        }
        total
    }
    walk(scm, k, 1.0)
}

/// Random DAG over `p` treatments with one or more confounders that touch
/// every treatment and `Y`. Edges follow index order.
pub fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    p: usize,
    q: usize,
    edge_prob: f64,
    effect_prob: f64,
    noise: NoiseKind,
) -> LinearScm {
    let sampler = CoefficientSampler::default();
    let names: Vec<String> = (1..=p).map(|i| format!("X{i}")).collect();
    let mut b = ScmBuilder::new(&names, q);
    for u in 0..q {
        for x in 0..p {
            b = b.confounds(u, x, sampler.draw(rng));
        }
        b = b.outcome_confounder(u, sampler.draw(rng));
    }
    for to in 0..p {
        for from in 0..to {
            if rng.random_bool(edge_prob) {
                b = b.edge(from, to, sampler.draw(rng));
            }
        }
        if rng.random_bool(effect_prob) {
            b = b.effect(to, sampler.draw(rng));
        }
    }
    b.all_noise(noise).build().unwrap()
}

/// Population GIN decision with every noise term non-Gaussian: holds iff the
/// combination `ωᵀY` shares no noise term with any `Z` variable.
pub fn population_gin(scm: &LinearScm, zs: &[usize], ys: &[usize]) -> bool {
    let pop = scm.covariance_oracle().unwrap();
    let omega = proxysel::gin::estimate_omega_cov(&pop, ys, zs).unwrap();
    let (m, _) = scm.mixing_matrix().unwrap();
    let mut combo = DVector::zeros(m.ncols());
    for (w, &y) in omega.iter().zip(ys) {
        combo += m.row(y).transpose() * *w;
    }
    let scale = combo.amax().max(1.0);
    (0..m.ncols()).all(|j| {
        combo[j].abs() < 1e-9 * scale || zs.iter().all(|&z| m[(z, j)].abs() < 1e-12)
    })
}
