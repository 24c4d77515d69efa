#![allow(dead_code)]

use bbupool_core::{DelaySamples, LatencyMixture, SystemConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

/// Run one frame of a `servers`-server FIFO queue holding `occupied`
/// transfers, with exponential services at `mu_f` per frame. Returns how many
/// transfers are left at the end of the frame.
pub fn one_frame(rng: &mut ChaCha8Rng, occupied: usize, servers: usize, mu_f: f64) -> usize {
    let service = Exp::new(mu_f).unwrap();
    let mut finishes: Vec<f64> = (0..occupied.min(servers))
        .map(|_| service.sample(rng))
        .collect();
    let mut waiting = occupied.saturating_sub(servers);
    loop {
        let (idx, t) = match finishes
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
        {
            Some((i, t)) if *t < 1.0 => (i, *t),
            _ => break,
        };
        if waiting > 0 {
            waiting -= 1;
            finishes[idx] = t + service.sample(rng);
        } else {
            finishes.swap_remove(idx);
        }
    }
    finishes.len() + waiting
}

/// One chain transition drawn by brute force: Poisson arrivals clipped at
/// `q_max`, then one frame of service.
pub fn one_transition(
    rng: &mut ChaCha8Rng,
    q: usize,
    lambda: f64,
    servers: usize,
    mu_f: f64,
    q_max: usize,
) -> usize {
    let k = if lambda > 0.0 {
        Poisson::new(lambda).unwrap().sample(rng) as usize
    } else {
        0
    };
    one_frame(rng, (q + k).min(q_max), servers, mu_f)
}

/// Single RRH with `servers` servers of its own.
pub fn single_rrh(lambda: f64, servers: u32, mu_f: f64) -> SystemConfig {
    SystemConfig::new(servers.max(1), 10.0, mu_f / 10.0, vec![lambda]).unwrap()
}

/// Kolmogorov–Smirnov distance between an empirical delay sample and a
/// mixture with an atom at zero and a continuous remainder.
pub fn ks_distance(samples: &DelaySamples, mix: &LatencyMixture) -> f64 {
    let n = samples.len() as f64;
    let mut d = (samples.zeros as f64 / n - mix.atom_weight).abs();
    let mut rank = samples.zeros as f64;
    for &x in &samples.positive {
        let f = mix.cdf(x);
        d = d.max((f - rank / n).abs());
        rank += 1.0;
        d = d.max((f - rank / n).abs());
    }
    d
}

pub fn uniform_ks(samples: &mut [f64], width: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = x / width;
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

pub fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}
