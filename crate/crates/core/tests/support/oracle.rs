//! Successor distribution obtained by tracking every oscillator and every
//! individual broadcast outcome.

use std::collections::BTreeMap;

use pcosync_core::{GlobalState, ModelParams, PerceptionRule};

fn perturb(p: &ModelParams, phi: u32, alpha: u32) -> u32 {
    if phi <= p.r {
        0
    } else {
        (f64::from(phi) * f64::from(alpha) * p.epsilon).round() as u32
    }
}

/// Distribution obtained by enumerating the broadcast outcome of every
/// oscillator separately (2^N cases, each weighted over all oscillators).
pub fn oracle(sigma: &GlobalState, p: &ModelParams) -> BTreeMap<Vec<u32>, f64> {
    let t = p.t;
    let mut phases: Vec<u32> = Vec::new();
    for phi in 1..=t {
        phases.extend(std::iter::repeat_n(phi, sigma.count(phi) as usize));
    }
    let mut out = BTreeMap::new();
    if !phases.contains(&t) {
        // single steps until some oscillator reaches the end of its cycle
        while !phases.contains(&t) {
            phases.iter_mut().for_each(|x| *x += 1);
        }
        let mut counts = vec![0; t as usize];
        phases.iter().for_each(|&x| counts[(x - 1) as usize] += 1);
        out.insert(counts, 1.0);
        return out;
    }
    let n = phases.len();
    for mask in 0u32..(1 << n) {
        let success = |i: usize| mask & (1 << i) != 0;
        let weight: f64 = (0..n)
            .map(|i| if success(i) { 1.0 - p.mu } else { p.mu })
            .product();
        if weight == 0.0 {
            continue;
        }
        // oscillators in descending phase order decide whether they fire
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| phases[b].cmp(&phases[a]));
        let mut fired = vec![false; n];
        let mut next = vec![0u32; n];
        for &i in &order {
            let heard = (0..n)
                .filter(|&j| fired[j] && success(j) && phases[j] > phases[i])
                .filter(|&j| p.perception == PerceptionRule::Cascade || phases[j] == t)
                .count() as u32;
            let updated = phases[i] + 1 + perturb(p, phases[i], heard);
            fired[i] = updated > t;
            next[i] = if fired[i] { 1 } else { updated };
        }
        let mut counts = vec![0; t as usize];
        next.iter().for_each(|&x| counts[(x - 1) as usize] += 1);
        *out.entry(counts).or_insert(0.0) += weight;
    }
    out
}
