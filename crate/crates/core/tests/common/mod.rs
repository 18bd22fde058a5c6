//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use limetree::blackbox::{BlackBoxBinding, SyntheticModel};
use limetree::domain::InterpretableDomain;
use limetree::explain::{CounterfactualQuery, Oracle, Target};
use limetree::tree::SurrogateTree;
use limetree::InterpretablePoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn text_domain(d: usize) -> InterpretableDomain {
    let text: Vec<String> = (0..d).map(|i| format!("t{i}")).collect();
    InterpretableDomain::text(&text.join(" ")).unwrap()
}

/// Random probability table over `2^d` points with `k` classes.
pub fn random_table(d: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..1usize << d)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn table_box(d: usize, rows: &[Vec<f64>]) -> (InterpretableDomain, BlackBoxBinding) {
    let domain = text_domain(d);
    let bb = BlackBoxBinding::synthetic(SyntheticModel::table(d, rows.to_vec()).unwrap(), &domain).unwrap();
    (domain, bb)
}

pub fn all_points(d: usize) -> Vec<InterpretablePoint> {
    (0..1u64 << d).map(|i| InterpretablePoint::from_index(i, d)).collect()
}

pub fn hamming(a: &InterpretablePoint, b: &InterpretablePoint) -> usize {
    a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count()
}

fn first_argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..row.len() {
        if row[i] > row[best] {
            best = i;
        }
    }
    best
}

/// Scans every point of the domain for the nearest ones meeting the query.
pub fn brute_force_counterfactual(
    query: &CounterfactualQuery,
    tree: &SurrogateTree,
    table: &[Vec<f64>],
) -> (Option<usize>, Vec<InterpretablePoint>) {
    let d = tree.d;
    let reference = query.reference.clone().unwrap_or_else(|| InterpretablePoint::ones(d));
    let oracle = query.oracle.unwrap_or(Oracle::BlackBox);
    let mut best: Option<usize> = None;
    let mut hits = Vec::new();
    for p in all_points(d) {
        if query.given.iter().any(|(&f, &b)| p.get(f) != (b == 1)) {
            continue;
        }
        if query.despite.iter().any(|&f| p.get(f) != reference.get(f)) {
            continue;
        }
        let row: Vec<f64> = match oracle {
            Oracle::Tree => tree.predict(&p).unwrap(),
            Oracle::BlackBox => tree.classes.iter().map(|&c| table[p.index() as usize][c]).collect(),
        };
        let top = tree.classes[first_argmax(&row)];
        let ok = match query.target {
            Target::ArgmaxIs { class } => top == class,
            Target::ArgmaxIsNot { class } => top != class,
            Target::ProbAtLeast { class, threshold } => {
                let i = tree.classes.iter().position(|&c| c == class).unwrap();
                row[i] >= threshold
            }
        };
        if !ok {
            continue;
        }
        let dist = hamming(&p, &reference);
        match best {
            Some(b) if dist > b => {}
            Some(b) if dist == b => hits.push(p),
            _ => {
                best = Some(dist);
                hits = vec![p];
            }
        }
    }
    hits.sort();
    (best, hits)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None`
/// when a pivot is numerically zero.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (k, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[col + 1 + k] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Weighted ridge with an unpenalised intercept via the augmented normal
/// equations. Returns `[intercept, beta...]`.
pub fn wls_oracle(points: &[InterpretablePoint], y: &[f64], w: &[f64], alpha: f64) -> Option<Vec<f64>> {
    let d = points[0].len();
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| std::iter::once(1.0).chain(p.bits().iter().map(|&b| f64::from(u8::from(b)))).collect())
        .collect();
    let mut a = vec![vec![0.0; d + 1]; d + 1];
    let mut b = vec![0.0; d + 1];
    for ((x, &yi), &wi) in rows.iter().zip(y).zip(w) {
        for i in 0..=d {
            b[i] += wi * x[i] * yi;
            for j in 0..=d {
                a[i][j] += wi * x[i] * x[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] += alpha;
    }
    gauss_solve(a, b)
}

/// Max absolute entry of the penalised normal-equation residual for
/// `theta = [intercept, beta...]`.
pub fn ridge_residual(points: &[InterpretablePoint], y: &[f64], w: &[f64], alpha: f64, theta: &[f64]) -> f64 {
    let d = points[0].len();
    let mut grad = vec![0.0; d + 1];
    for ((p, &yi), &wi) in points.iter().zip(y).zip(w) {
        let x: Vec<f64> = std::iter::once(1.0).chain(p.bits().iter().map(|&b| f64::from(u8::from(b)))).collect();
        let r = x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - yi;
        for i in 0..=d {
            grad[i] += wi * x[i] * r;
        }
    }
    for i in 1..=d {
        grad[i] += alpha * theta[i];
    }
    grad.iter().fold(0.0, |m, g| m.max(g.abs()))
}

/// Random target, reference, constraints and oracle over `classes`.
pub fn random_query(rng: &mut ChaCha8Rng, d: usize, classes: &[usize]) -> CounterfactualQuery {
    let class = classes[rng.random_range(0..classes.len())];
    let target = match rng.random_range(0..3) {
        0 => Target::ArgmaxIs { class },
        1 => Target::ArgmaxIsNot { class },
        _ => Target::ProbAtLeast { class, threshold: rng.random_range(0.0..0.8) },
    };
    let mut q = CounterfactualQuery::new(target);
    if rng.random_bool(0.5) {
        q = q.reference(InterpretablePoint::from_index(rng.random_range(0..1u64 << d), d));
    }
    for f in 0..d {
        match rng.random_range(0..6) {
            0 => q = q.given(f, rng.random_range(0..2)),
            1 => q = q.despite(f),
            _ => {}
        }
    }
    if rng.random_bool(0.5) {
        q = q.oracle(if rng.random_bool(0.5) { Oracle::Tree } else { Oracle::BlackBox });
    }
    q
}
