//! Independent oracles for the integration tests. They work on type-path
//! strings and plain sets, never on the library's index structures.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;

/// Random forest of at most `max_types` paths, depth at most `max_depth`.
/// Every parent precedes its children.
pub fn random_forest(rng: &mut impl Rng, max_types: usize, max_depth: usize) -> Vec<String> {
    let n = rng.random_range(1..=max_types);
    let mut names: Vec<String> = Vec::with_capacity(n);
    for i in 0..n {
        let parents: Vec<&String> = names.iter().filter(|p| p.matches('/').count() < max_depth).collect();
        let name = if parents.is_empty() || rng.random_bool(0.25) {
            format!("/t{i}")
        } else {
            format!("{}/t{i}", parents[rng.random_range(0..parents.len())])
        };
        names.push(name);
    }
    names
}

/// Every prefix path of `name`, including itself.
pub fn prefixes(name: &str) -> BTreeSet<String> {
    let segments: Vec<&str> = name.split('/').skip(1).collect();
    (1..=segments.len()).map(|k| format!("/{}", segments[..k].join("/"))).collect()
}

/// Proper prefixes only.
pub fn strict_prefixes(name: &str) -> BTreeSet<String> {
    let mut p = prefixes(name);
    p.remove(name);
    p
}

/// Members that are not a proper prefix of another member.
pub fn terminals(set: &BTreeSet<String>) -> BTreeSet<String> {
    set.iter()
        .filter(|t| !set.iter().any(|o| strict_prefixes(o).contains(*t)))
        .cloned()
        .collect()
}

/// Union of the prefix closures of every member.
pub fn closure(set: &BTreeSet<String>) -> BTreeSet<String> {
    set.iter().flat_map(|t| prefixes(t)).collect()
}

/// `q(y) ∝ p(y) + β Σ_{proper prefixes t of y} p(t)`.
pub fn adjust(names: &[String], p: &[f64], beta: f64) -> Vec<f64> {
    let q: Vec<f64> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let anc = strict_prefixes(n);
            p[i] + beta * names.iter().zip(p).filter(|(m, _)| anc.contains(*m)).map(|(_, v)| v).sum::<f64>()
        })
        .collect();
    let z: f64 = q.iter().sum();
    q.into_iter().map(|v| v / z).collect()
}

/// `(strict, macro P, macro R, macro F1, micro P, micro R, micro F1)`
/// by direct set arithmetic.
pub fn metrics(pairs: &[(BTreeSet<String>, BTreeSet<String>)]) -> [f64; 7] {
    let n = pairs.len() as f64;
    let strict = pairs.iter().filter(|(g, p)| g == p).count() as f64 / n;
    let inter = |g: &BTreeSet<String>, p: &BTreeSet<String>| g.intersection(p).count();
    let (mut mp, mut mr) = (0.0, 0.0);
    for (g, p) in pairs {
        mp += inter(g, p) as f64 / p.len() as f64;
        mr += inter(g, p) as f64 / g.len() as f64;
    }
    let (mp, mr) = (mp / n, mr / n);
    let hits: usize = pairs.iter().map(|(g, p)| inter(g, p)).sum();
    let np: usize = pairs.iter().map(|(_, p)| p.len()).sum();
    let ng: usize = pairs.iter().map(|(g, _)| g.len()).sum();
    let (up, ur) = (hits as f64 / np as f64, hits as f64 / ng as f64);
    let f = |p: f64, r: f64| if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    [strict, mp, mr, f(mp, mr), up, ur, f(up, ur)]
}
