//! Brute-force posterior and KB distance computed straight from counts.

use rand::Rng;
use twentyq_core::kb::{Entity, EntryCounts, KnowledgeBase, Question, Response};
use twentyq_core::rng::SimRng;

/// A random KB of at most 6 x 6 with random popularity, some missing
/// entries and counts in `1..=6`.
pub fn random_kb(rng: &mut SimRng) -> KnowledgeBase {
    let m = rng.gen_range(1..=6);
    let n = rng.gen_range(1..=6);
    random_kb_shaped(rng, m, n)
}

pub fn random_kb_shaped(rng: &mut SimRng, m: usize, n: usize) -> KnowledgeBase {
    let entities = (0..m)
        .map(|i| Entity {
            id: format!("e{i}"),
            name: format!("entity {i}"),
            popularity: rng.gen_range(0.05..5.0),
        })
        .collect();
    let questions = (0..n)
        .map(|j| Question {
            id: format!("q{j}"),
            text: format!("question {j}?"),
        })
        .collect();
    let mut kb = KnowledgeBase::new(entities, questions).unwrap();
    for a in 0..m {
        for b in 0..n {
            if rng.gen_bool(0.7) {
                let c = EntryCounts::new(rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=6)).unwrap();
                kb.set_counts(a, b, c).unwrap();
            }
        }
    }
    kb
}

pub fn random_response(rng: &mut SimRng) -> Response {
    match rng.gen_range(0..3) {
        0 => Response::Yes,
        1 => Response::No,
        _ => Response::Unknown,
    }
}

/// Up to three distinct questions with random answers.
pub fn random_history(rng: &mut SimRng, questions: usize) -> Vec<(usize, Response)> {
    let mut qs: Vec<usize> = (0..questions).collect();
    for i in (1..qs.len()).rev() {
        qs.swap(i, rng.gen_range(0..=i));
    }
    qs.truncate(3);
    qs.into_iter().map(|q| (q, random_response(rng))).collect()
}

/// Probability of `x` under an entry: the count share if known, 1/3 if not.
pub fn likelihood(c: EntryCounts, x: Response) -> f64 {
    if c.yes + c.no + c.unknown == 3 {
        return 1.0 / 3.0;
    }
    let hit = match x {
        Response::Yes => c.yes,
        Response::No => c.no,
        Response::Unknown => c.unknown,
    };
    hit as f64 / (c.yes + c.no + c.unknown) as f64
}

/// `P(g | X) = P0(g) prod_t P(x_t | g) / Z` by direct products.
pub fn posterior(kb: &KnowledgeBase, history: &[(usize, Response)]) -> Vec<f64> {
    let pop_total: f64 = kb.entities().iter().map(|e| e.popularity).sum();
    let joint: Vec<f64> = kb
        .entities()
        .iter()
        .enumerate()
        .map(|(m, e)| {
            history
                .iter()
                .fold(e.popularity / pop_total, |acc, &(q, x)| acc * likelihood(kb.counts(m, q), x))
        })
        .collect();
    let z: f64 = joint.iter().sum();
    joint.into_iter().map(|j| j / z).collect()
}

fn shares(c: EntryCounts) -> [f64; 3] {
    let t = (c.yes + c.no + c.unknown) as f64;
    [c.yes as f64 / t, c.no as f64 / t, c.unknown as f64 / t]
}

/// Mean over every cell of `exp(sum_i p_i ln(p_i / q_i))`, agent `p`
/// against player `q`.
pub fn kb_distance(agent: &KnowledgeBase, player: &KnowledgeBase) -> f64 {
    let (m, n) = (agent.num_entities(), agent.num_questions());
    let mut sum = 0.0;
    for a in 0..m {
        for b in 0..n {
            let p = shares(agent.counts(a, b));
            let q = shares(player.counts(a, b));
            let kl: f64 = (0..3).map(|i| p[i] * (p[i] / q[i]).ln()).sum();
            sum += kl.exp();
        }
    }
    sum / (m * n) as f64
}
