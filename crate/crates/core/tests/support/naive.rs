//! Reference metric implementations written directly from the textbook
//! definitions, with no shared code with the library.

use std::collections::HashSet;

pub struct Judgment {
    pub ranked: Vec<u64>,
    pub relevant: HashSet<u64>,
    pub rel_size: usize,
}

fn rel(j: &Judgment, i: usize) -> f64 {
    if j.relevant.contains(&j.ranked[i]) {
        1.0
    } else {
        0.0
    }
}

pub fn p_at(j: &Judgment, k: usize) -> f64 {
    let mut hits = 0.0;
    for i in 0..k {
        if i < j.ranked.len() {
            hits += rel(j, i);
        }
    }
    hits / k as f64
}

pub fn ap(j: &Judgment) -> f64 {
    let mut total = 0.0;
    for i in 0..j.ranked.len() {
        total += rel(j, i) * p_at(j, i + 1);
    }
    total / j.rel_size as f64
}

pub fn first_hit(j: &Judgment) -> Option<usize> {
    for i in 0..j.ranked.len() {
        if rel(j, i) == 1.0 {
            return Some(i + 1);
        }
    }
    None
}

pub fn rr(j: &Judgment) -> f64 {
    match first_hit(j) {
        Some(r) => 1.0 / r as f64,
        None => 0.0,
    }
}

pub fn acc_at(j: &Judgment, k: usize) -> f64 {
    match first_hit(j) {
        Some(r) if r <= k => 1.0,
        _ => 0.0,
    }
}

pub fn capped_rank(j: &Judgment) -> usize {
    first_hit(j).unwrap_or(1000)
}

pub fn mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

pub fn lower_median(xs: &[usize]) -> usize {
    let mut v = xs.to_vec();
    v.sort();
    if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        v[v.len() / 2 - 1]
    }
}
