//! Chi-square goodness of fit for the samplers.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use twentyq_core::agents::PrioritizedReplay;
use twentyq_core::ka::{sample_candidates, uncertainty_weights};
use twentyq_core::kb::EntryCounts;
use twentyq_core::rng::seeded;
use twentyq_core::sim::SimulatorWorld;

use super::oracle::random_kb_shaped;

pub const DRAWS: usize = 100_000;

/// Upper-tail p-value of Pearson's statistic for `observed` against the
/// probabilities `expected` (normalized here). Cells with zero expected
/// mass must be empty.
pub fn p_value(observed: &[u64], expected: &[f64]) -> f64 {
    let total: f64 = expected.iter().sum();
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        let e = e / total * n as f64;
        if e == 0.0 {
            assert_eq!(o, 0, "draw in a zero-probability cell");
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dist = ChiSquared::new((cells - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Targets drawn by the simulator against entity popularity.
pub fn targets(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let kb = random_kb_shaped(&mut rng, 12, 2);
    let mut world = SimulatorWorld::new(&kb, seed ^ 1);
    let mut hits = vec![0u64; kb.num_entities()];
    for _ in 0..DRAWS {
        hits[world.sample_target()] += 1;
    }
    let pop: Vec<f64> = kb.entities().iter().map(|e| e.popularity).collect();
    p_value(&hits, &pop)
}

/// Responses against the entry's count shares.
pub fn responses(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut kb = random_kb_shaped(&mut rng, 2, 2);
    let counts = EntryCounts::new(7, 4, 2).unwrap();
    kb.set_counts(1, 0, counts).unwrap();
    let mut world = SimulatorWorld::new(&kb, seed ^ 2);
    let mut hits = [0u64; 3];
    for _ in 0..DRAWS {
        hits[world.respond(1, 0).code()] += 1;
    }
    p_value(&hits, &[7.0, 4.0, 2.0])
}

/// A single KA candidate against `1/sqrt(N_mn)`, with one question asked
/// and one rejected.
pub fn candidates(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut kb = random_kb_shaped(&mut rng, 1, 8);
    for n in 0..8 {
        let c = EntryCounts::new(rng.gen_range(1..20), rng.gen_range(1..20), rng.gen_range(1..20)).unwrap();
        kb.set_counts(0, n, c).unwrap();
    }
    kb.reject(0, 5).unwrap();
    let mut asked = vec![false; 8];
    asked[2] = true;
    let weights = uncertainty_weights(&kb, 0, &asked);
    let expected: Vec<f64> = (0..8)
        .map(|n| {
            if n == 2 || n == 5 {
                0.0
            } else {
                let c = kb.counts(0, n);
                1.0 / ((c.yes + c.no + c.unknown) as f64).sqrt()
            }
        })
        .collect();
    let mut draw_rng = seeded(seed ^ 3);
    let mut hits = vec![0u64; 8];
    for _ in 0..DRAWS {
        let pick = sample_candidates(&weights, 1, &mut draw_rng);
        hits[pick[0]] += 1;
    }
    p_value(&hits, &expected)
}

/// Replay slots against `p^0.5` after explicit priority updates.
pub fn replay(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut buf = PrioritizedReplay::new(10, 0.5).unwrap();
    let mut raw = Vec::new();
    for i in 0..10 {
        buf.insert(i);
        let p = rng.gen_range(0.01..4.0);
        buf.set_priority(i, p);
        raw.push(p);
    }
    let mut hits = vec![0u64; 10];
    let mut draw_rng = seeded(seed ^ 4);
    for s in buf.sample(DRAWS, &mut draw_rng).unwrap() {
        hits[s] += 1;
    }
    let expected: Vec<f64> = raw.iter().map(|p| p.sqrt()).collect();
    p_value(&hits, &expected)
}
