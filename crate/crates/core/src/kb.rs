//! The entity-question knowledge matrix.
//!
//! Every entry is a multinoulli distribution over {yes, no, unknown}
//! estimated from response tallies. Missing entries are not stored; they read
//! back as one pseudo-count per response, i.e. the uniform distribution.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::rng;

/// A player's answer to a yes/no question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Response {
    Yes,
    No,
    Unknown,
}

impl Response {
    pub const ALL: [Response; 3] = [Response::Yes, Response::No, Response::Unknown];

    /// Stable integer code: yes=0, no=1, unknown=2.
    pub fn code(self) -> usize {
        match self {
            Response::Yes => 0,
            Response::No => 1,
            Response::Unknown => 2,
        }
    }

    pub fn from_code(code: usize) -> Option<Response> {
        match code {
            0 => Some(Response::Yes),
            1 => Some(Response::No),
            2 => Some(Response::Unknown),
            _ => None,
        }
    }

    /// yes=+1, no=-1, unknown=0.
    pub fn signed_value(self) -> f64 {
        match self {
            Response::Yes => 1.0,
            Response::No => -1.0,
            Response::Unknown => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Response::Yes => "yes",
            Response::No => "no",
            Response::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Response {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yes" => Ok(Response::Yes),
            "no" => Ok(Response::No),
            "unknown" => Ok(Response::Unknown),
            other => Err(Error::InvalidParameter(format!("unknown response {other:?}"))),
        }
    }
}

/// Response tallies for one entry. Always at least one of each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntryCounts {
    pub yes: u32,
    pub no: u32,
    pub unknown: u32,
}

impl EntryCounts {
    /// The uniform prior used for every missing entry.
    pub const MISSING: EntryCounts = EntryCounts {
        yes: 1,
        no: 1,
        unknown: 1,
    };

    pub fn new(yes: u32, no: u32, unknown: u32) -> Result<Self> {
        if yes == 0 || no == 0 || unknown == 0 {
            return Err(Error::InvalidParameter(format!(
                "entry counts must all be positive, got ({yes},{no},{unknown})"
            )));
        }
        Ok(EntryCounts { yes, no, unknown })
    }

    /// `N_mn`, the number of records including pseudo-counts.
    pub fn total(&self) -> u32 {
        self.yes + self.no + self.unknown
    }

    pub fn get(&self, response: Response) -> u32 {
        match response {
            Response::Yes => self.yes,
            Response::No => self.no,
            Response::Unknown => self.unknown,
        }
    }

    fn slot(&mut self, response: Response) -> &mut u32 {
        match response {
            Response::Yes => &mut self.yes,
            Response::No => &mut self.no,
            Response::Unknown => &mut self.unknown,
        }
    }

    /// An entry is known once it holds any record beyond the three pseudo-counts.
    pub fn is_known(&self) -> bool {
        self.total() != 3
    }

    pub fn distribution(&self) -> [f64; 3] {
        entry_distribution(*self)
    }

    /// `E[d]` with yes=+1, no=-1, unknown=0.
    pub fn signed_expectation(&self) -> f64 {
        let p = self.distribution();
        p[0] - p[1]
    }
}

impl Default for EntryCounts {
    fn default() -> Self {
        EntryCounts::MISSING
    }
}

/// `(c_yes/N, c_no/N, c_unknown/N)`.
pub fn entry_distribution(counts: EntryCounts) -> [f64; 3] {
    let n = counts.total() as f64;
    [
        counts.yes as f64 / n,
        counts.no as f64 / n,
        counts.unknown as f64 / n,
    ]
}

/// `KL(p || q)` in nats.
pub fn kl_divergence(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| if pi == 0.0 { 0.0 } else { pi * math::ln(pi / qi) })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub popularity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub id: String,
    pub text: String,
}

/// Dense known/missing mask over the KB, row-major `M x N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<bool>,
}

impl IndicatorMatrix {
    pub fn get(&self, m: usize, n: usize) -> bool {
        self.data[m * self.cols + n]
    }

    pub fn positives(&self) -> usize {
        self.data.iter().filter(|&&y| y).count()
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for m in 0..rows {
            for n in 0..cols {
                data.push(f(m, n));
            }
        }
        IndicatorMatrix { rows, cols, data }
    }
}

/// The M x N entity-question matrix plus entity popularity and the set of
/// entries barred from knowledge acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    entities: Vec<Entity>,
    questions: Vec<Question>,
    entries: BTreeMap<(usize, usize), EntryCounts>,
    rejected: BTreeSet<(usize, usize)>,
}

impl KnowledgeBase {
    pub fn new(entities: Vec<Entity>, questions: Vec<Question>) -> Result<Self> {
        if entities.is_empty() {
            return Err(Error::NoEntities);
        }
        if questions.is_empty() {
            return Err(Error::InvalidParameter("knowledge base has no questions".into()));
        }
        if let Some(e) = entities
            .iter()
            .find(|e| !(e.popularity > 0.0 && e.popularity.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "entity {} has non-positive popularity {}",
                e.id, e.popularity
            )));
        }
        Ok(KnowledgeBase {
            entities,
            questions,
            entries: BTreeMap::new(),
            rejected: BTreeSet::new(),
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_questions(&self) -> usize {
        self.questions.len()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    fn check(&self, m: usize, n: usize) -> Result<()> {
        if m >= self.entities.len() {
            return Err(Error::OutOfRange {
                what: "entity",
                index: m,
                len: self.entities.len(),
            });
        }
        if n >= self.questions.len() {
            return Err(Error::OutOfRange {
                what: "question",
                index: n,
                len: self.questions.len(),
            });
        }
        Ok(())
    }

    /// Counts for `(m, n)`; missing entries read as `(1,1,1)`.
    pub fn counts(&self, m: usize, n: usize) -> EntryCounts {
        self.entries.get(&(m, n)).copied().unwrap_or_default()
    }

    pub fn distribution(&self, m: usize, n: usize) -> [f64; 3] {
        entry_distribution(self.counts(m, n))
    }

    /// Overwrite an entry. Writing `(1,1,1)` makes the entry missing again.
    pub fn set_counts(&mut self, m: usize, n: usize, counts: EntryCounts) -> Result<()> {
        self.check(m, n)?;
        EntryCounts::new(counts.yes, counts.no, counts.unknown)?;
        if counts == EntryCounts::MISSING {
            self.entries.remove(&(m, n));
        } else {
            self.entries.insert((m, n), counts);
        }
        Ok(())
    }

    /// Add one recorded response to an entry.
    pub fn update_entry(&mut self, m: usize, n: usize, response: Response) -> Result<EntryCounts> {
        self.check(m, n)?;
        let entry = self.entries.entry((m, n)).or_default();
        *entry.slot(response) += 1;
        Ok(*entry)
    }

    /// Undo one `update_entry` of the same response.
    pub fn retract_entry(&mut self, m: usize, n: usize, response: Response) -> Result<EntryCounts> {
        self.check(m, n)?;
        let mut counts = self.counts(m, n);
        let slot = counts.slot(response);
        if *slot <= 1 {
            return Err(Error::NothingToRetract(response));
        }
        *slot -= 1;
        self.set_counts(m, n, counts)?;
        Ok(counts)
    }

    /// Known entries in `(m, n)` order.
    pub fn known_entries(&self) -> impl Iterator<Item = ((usize, usize), EntryCounts)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    /// Number of known entries (the KB "size").
    pub fn known_count(&self) -> usize {
        self.entries.len()
    }

    pub fn indicator_matrix(&self) -> IndicatorMatrix {
        let cols = self.num_questions();
        let mut data = alloc::vec![false; self.num_entities() * cols];
        for &(m, n) in self.entries.keys() {
            data[m * cols + n] = true;
        }
        IndicatorMatrix {
            rows: self.num_entities(),
            cols,
            data,
        }
    }

    pub fn reject(&mut self, m: usize, n: usize) -> Result<()> {
        self.check(m, n)?;
        self.rejected.insert((m, n));
        Ok(())
    }

    pub fn is_rejected(&self, m: usize, n: usize) -> bool {
        self.rejected.contains(&(m, n))
    }

    pub fn rejected(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rejected.iter().copied()
    }

    pub fn rejected_count(&self) -> usize {
        self.rejected.len()
    }

    /// Popularity normalized to a probability vector.
    pub fn popularity_prior(&self) -> Vec<f64> {
        let total: f64 = self.entities.iter().map(|e| e.popularity).sum();
        self.entities.iter().map(|e| e.popularity / total).collect()
    }

    /// Remove all knowledge about an entry, leaving the uniform prior.
    pub fn clear_entry(&mut self, m: usize, n: usize) -> Result<()> {
        self.check(m, n)?;
        self.entries.remove(&(m, n));
        Ok(())
    }

    pub fn same_shape(&self, other: &KnowledgeBase) -> Result<()> {
        if self.num_entities() != other.num_entities()
            || self.num_questions() != other.num_questions()
        {
            return Err(Error::DimensionMismatch {
                left_entities: self.num_entities(),
                left_questions: self.num_questions(),
                right_entities: other.num_entities(),
                right_questions: other.num_questions(),
            });
        }
        Ok(())
    }
}

/// Average of `exp(KL(agent_mn || player_mn))` over all `M * N` entries.
///
/// Missing entries on either side are the uniform distribution. Rejected
/// entries are included in the average like any other.
pub fn kb_distance(agent: &KnowledgeBase, player: &KnowledgeBase) -> Result<f64> {
    agent.same_shape(player)?;
    let total = agent.num_entities() * agent.num_questions();
    let mut touched: BTreeSet<(usize, usize)> = agent.entries.keys().copied().collect();
    touched.extend(player.entries.keys().copied());
    let mut sum = (total - touched.len()) as f64;
    for (m, n) in touched {
        let kl = kl_divergence(&agent.distribution(m, n), &player.distribution(m, n));
        sum += math::exp(kl);
    }
    Ok(sum / total as f64)
}

/// Parameters of the seeded synthetic KB generator.
///
/// Entities and questions are dealt round-robin into `clusters` latent
/// groups. An entry is known with probability `p_in` when entity and question
/// share a group and `p_out` otherwise; the two are set so the expected known
/// fraction equals `density`, with `affinity` in `[0, 1]` controlling how much
/// of the knowledge concentrates inside groups (0 = no structure).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub entities: usize,
    pub questions: usize,
    pub density: f64,
    pub zipf_exponent: f64,
    pub concentration: f64,
    pub clusters: usize,
    pub affinity: f64,
    /// Minimum records per known entry; actual totals fall in `[records, records + records/3]`.
    pub records: u32,
    /// Weights of the dominant response (yes, no, unknown).
    pub dominant_weights: [f64; 3],
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            entities: 100,
            questions: 80,
            density: 0.4,
            zipf_exponent: 1.0,
            concentration: 0.85,
            clusters: 4,
            affinity: 0.5,
            records: 30,
            dominant_weights: [0.45, 0.45, 0.10],
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.entities == 0 || self.questions == 0 {
            return bad(format!(
                "need at least one entity and question, got {}x{}",
                self.entities, self.questions
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must be in (0, 1], got {}", self.density));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad(format!("zipf exponent must be >= 0, got {}", self.zipf_exponent));
        }
        if !(self.concentration > 0.0 && self.concentration < 1.0) {
            return bad(format!("concentration must be in (0, 1), got {}", self.concentration));
        }
        if self.clusters == 0 {
            return bad("clusters must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.affinity) {
            return bad(format!("affinity must be in [0, 1], got {}", self.affinity));
        }
        if self.records < 3 {
            return bad(format!("records must be >= 3, got {}", self.records));
        }
        if self.dominant_weights.iter().any(|&w| !(w >= 0.0 && w.is_finite()))
            || self.dominant_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("dominant weights must be non-negative with a positive sum".into());
        }
        Ok(())
    }

    /// Known-entry probabilities `(p_in, p_out)`.
    pub fn known_probabilities(&self) -> (f64, f64) {
        let k = self.clusters;
        let in_pairs: usize = (0..k)
            .map(|g| group_size(self.entities, k, g) * group_size(self.questions, k, g))
            .sum();
        let frac_in = in_pairs as f64 / (self.entities * self.questions) as f64;
        if k == 1 || frac_in >= 1.0 || self.affinity == 0.0 {
            return (self.density, self.density);
        }
        let mut p_out = self.density * (1.0 - self.affinity);
        let mut p_in = (self.density - (1.0 - frac_in) * p_out) / frac_in;
        if p_in > 1.0 {
            p_in = 1.0;
            p_out = (self.density - frac_in) / (1.0 - frac_in);
        }
        (p_in, p_out)
    }
}

fn group_size(len: usize, groups: usize, g: usize) -> usize {
    len / groups + usize::from(g < len % groups)
}

/// Latent group of an entity or question index under round-robin dealing.
pub fn latent_group(index: usize, clusters: usize) -> usize {
    index % clusters
}

pub fn generate_synthetic_kb(spec: &SyntheticSpec) -> Result<KnowledgeBase> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let entities = (0..spec.entities)
        .map(|m| Entity {
            id: format!("e{:05}", m + 1),
            name: format!("Entity {}", m + 1),
            popularity: math::powf((m + 1) as f64, -spec.zipf_exponent),
        })
        .collect();
    let questions = (0..spec.questions)
        .map(|n| Question {
            id: format!("q{:05}", n + 1),
            text: format!("Question {} (topic {})?", n + 1, latent_group(n, spec.clusters)),
        })
        .collect();
    let mut kb = KnowledgeBase::new(entities, questions)?;

    let (p_in, p_out) = spec.known_probabilities();
    let weight_sum: f64 = spec.dominant_weights.iter().sum();
    for m in 0..spec.entities {
        for n in 0..spec.questions {
            let same = latent_group(m, spec.clusters) == latent_group(n, spec.clusters);
            let p = if same { p_in } else { p_out };
            if rng.gen::<f64>() >= p {
                continue;
            }
            let mut u = rng.gen::<f64>() * weight_sum;
            let mut dominant = Response::Unknown;
            for r in Response::ALL {
                let w = spec.dominant_weights[r.code()];
                if u < w {
                    dominant = r;
                    break;
                }
                u -= w;
            }
            let total = spec.records + rng.gen_range(0..=spec.records / 3);
            let top = (math::round(spec.concentration * total as f64) as u32).clamp(1, total - 2);
            let rest = total - top;
            let mut first = 1;
            for _ in 0..rest - 2 {
                if rng.gen::<bool>() {
                    first += 1;
                }
            }
            let second = rest - first;
            let mut tallies = [0u32; 3];
            tallies[dominant.code()] = top;
            let others: Vec<usize> = (0..3).filter(|&c| c != dominant.code()).collect();
            tallies[others[0]] = first;
            tallies[others[1]] = second;
            kb.set_counts(m, n, EntryCounts::new(tallies[0], tallies[1], tallies[2])?)?;
        }
    }
    Ok(kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn tiny(m: usize, n: usize) -> KnowledgeBase {
        let entities = (0..m)
            .map(|i| Entity {
                id: format!("e{i}"),
                name: format!("E{i}"),
                popularity: 1.0,
            })
            .collect();
        let questions = (0..n)
            .map(|i| Question {
                id: format!("q{i}"),
                text: format!("Q{i}"),
            })
            .collect();
        KnowledgeBase::new(entities, questions).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn response_codes_are_stable() {
        for r in Response::ALL {
            assert_eq!(Response::from_code(r.code()), Some(r));
            assert_eq!(r.as_str().parse::<Response>().unwrap(), r);
        }
        assert_eq!(Response::Yes.code(), 0);
        assert_eq!(Response::No.code(), 1);
        assert_eq!(Response::Unknown.code(), 2);
        assert_eq!(Response::No.signed_value(), -1.0);
        assert!("maybe".parse::<Response>().is_err());
    }

    #[test]
    fn distribution_examples() {
        let d = entry_distribution(EntryCounts::MISSING);
        assert!(d.iter().all(|&p| close(p, 1.0 / 3.0, 1e-15)));
        let d = entry_distribution(EntryCounts::new(28, 1, 1).unwrap());
        assert!(close(d[0], 0.93333, 1e-5) && close(d[1], 0.03333, 1e-5) && close(d[2], 0.03333, 1e-5));
        let d = entry_distribution(EntryCounts::new(1, 27, 2).unwrap());
        assert!(close(d[0], 0.03333, 1e-5) && close(d[1], 0.9, 1e-12) && close(d[2], 0.06667, 1e-5));
    }

    #[test]
    fn zero_counts_are_rejected() {
        assert!(EntryCounts::new(0, 1, 1).is_err());
    }

    #[test]
    fn indicator_follows_record_count() {
        let mut kb = tiny(1, 3);
        kb.set_counts(0, 1, EntryCounts::new(28, 1, 1).unwrap()).unwrap();
        kb.update_entry(0, 2, Response::No).unwrap();
        let y = kb.indicator_matrix();
        assert!(!y.get(0, 0));
        assert!(y.get(0, 1));
        assert!(y.get(0, 2));
        assert_eq!(y.positives(), 2);
    }

    #[test]
    fn update_entry_examples() {
        let mut kb = tiny(2, 2);
        assert_eq!(kb.update_entry(0, 0, Response::Yes).unwrap(), EntryCounts::new(2, 1, 1).unwrap());
        kb.set_counts(1, 1, EntryCounts::new(5, 2, 1).unwrap()).unwrap();
        assert_eq!(kb.update_entry(1, 1, Response::Unknown).unwrap(), EntryCounts::new(5, 2, 2).unwrap());
        kb.set_counts(1, 0, EntryCounts::new(5, 2, 1).unwrap()).unwrap();
        kb.update_entry(1, 0, Response::Yes).unwrap();
        assert_eq!(kb.update_entry(1, 0, Response::Yes).unwrap(), EntryCounts::new(7, 2, 1).unwrap());
        assert!(matches!(kb.update_entry(2, 0, Response::Yes), Err(Error::OutOfRange { .. })));
        assert!(matches!(kb.update_entry(0, 9, Response::Yes), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn retract_restores_missing() {
        let mut kb = tiny(1, 1);
        kb.update_entry(0, 0, Response::Yes).unwrap();
        kb.retract_entry(0, 0, Response::Yes).unwrap();
        assert_eq!(kb.known_count(), 0);
        assert!(kb.retract_entry(0, 0, Response::No).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = tiny(1, 1);
        assert_eq!(kb_distance(&a, &a).unwrap(), 1.0);

        let mut b = tiny(1, 1);
        b.set_counts(0, 0, EntryCounts::new(2, 1, 1).unwrap()).unwrap();
        assert!(close(kb_distance(&a, &b).unwrap(), 1.058267, 1e-5));

        let a2 = tiny(1, 2);
        let mut b2 = tiny(1, 2);
        b2.set_counts(0, 1, EntryCounts::new(2, 1, 1).unwrap()).unwrap();
        assert!(close(kb_distance(&a2, &b2).unwrap(), 1.029134, 1e-5));

        assert!(matches!(kb_distance(&a, &a2), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn distance_is_asymmetric() {
        let mut a = tiny(1, 1);
        let mut b = tiny(1, 1);
        a.set_counts(0, 0, EntryCounts::new(8, 1, 1).unwrap()).unwrap();
        b.set_counts(0, 0, EntryCounts::new(2, 3, 5).unwrap()).unwrap();
        let ab = kb_distance(&a, &b).unwrap();
        let ba = kb_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() > 1e-3);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            entities: 2,
            questions: 2,
            density: 1.0,
            zipf_exponent: 1.0,
            seed: 7,
            ..SyntheticSpec::default()
        };
        assert_eq!(generate_synthetic_kb(&spec).unwrap(), generate_synthetic_kb(&spec).unwrap());
    }

    #[test]
    fn synthetic_zipf_ratio() {
        let spec = SyntheticSpec {
            entities: 2,
            questions: 2,
            ..SyntheticSpec::default()
        };
        let kb = generate_synthetic_kb(&spec).unwrap();
        let e = kb.entities();
        assert!(close(e[0].popularity / e[1].popularity, 2.0, 1e-12));
    }

    #[test]
    fn synthetic_known_count_is_near_density() {
        let spec = SyntheticSpec {
            entities: 100,
            questions: 80,
            density: 0.4,
            ..SyntheticSpec::default()
        };
        let (p_in, p_out) = spec.known_probabilities();
        // Round-robin groups: 1/4 of pairs are in-group.
        assert!(close(0.25 * p_in + 0.75 * p_out, 0.4, 1e-12));
        let kb = generate_synthetic_kb(&spec).unwrap();
        let known = kb.known_count();
        assert!((3000..=3400).contains(&known), "known = {known}");
        for (_, c) in kb.known_entries() {
            assert!(c.total() >= 30);
            assert!(c.yes >= 1 && c.no >= 1 && c.unknown >= 1);
        }
    }

    #[test]
    fn synthetic_rejects_bad_specs() {
        let base = SyntheticSpec::default();
        for bad in [
            SyntheticSpec { entities: 0, ..base.clone() },
            SyntheticSpec { density: 0.0, ..base.clone() },
            SyntheticSpec { density: 1.5, ..base.clone() },
            SyntheticSpec { concentration: 1.0, ..base.clone() },
            SyntheticSpec { clusters: 0, ..base.clone() },
        ] {
            assert!(generate_synthetic_kb(&bad).is_err());
        }
    }

    #[test]
    fn new_rejects_bad_popularity() {
        let e = vec![Entity {
            id: "a".into(),
            name: "A".into(),
            popularity: 0.0,
        }];
        let q = vec![Question {
            id: "q".into(),
            text: "Q".into(),
        }];
        assert!(KnowledgeBase::new(e, q).is_err());
    }

    fn arb_counts() -> impl Strategy<Value = EntryCounts> {
        (1u32..40, 1u32..40, 1u32..40).prop_map(|(y, n, u)| EntryCounts { yes: y, no: n, unknown: u })
    }

    fn arb_kb(m: usize, n: usize) -> impl Strategy<Value = KnowledgeBase> {
        proptest::collection::vec(proptest::option::of(arb_counts()), m * n).prop_map(move |cells| {
            let mut kb = tiny(m, n);
            for (i, c) in cells.into_iter().enumerate() {
                if let Some(c) = c {
                    kb.set_counts(i / n, i % n, c).unwrap();
                }
            }
            kb
        })
    }

    proptest! {
        #[test]
        fn distribution_is_normalized(c in arb_counts()) {
            let d = c.distribution();
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(d.iter().all(|&p| p > 0.0 && p < 1.0));
        }

        #[test]
        fn distance_bounds(a in arb_kb(3, 4), b in arb_kb(3, 4)) {
            prop_assert_eq!(kb_distance(&a, &a).unwrap(), 1.0);
            prop_assert!(kb_distance(&a, &b).unwrap() >= 1.0);
        }

        #[test]
        fn update_then_retract_is_identity(c in arb_counts(), code in 0usize..3) {
            let mut kb = tiny(1, 1);
            kb.set_counts(0, 0, c).unwrap();
            let r = Response::from_code(code).unwrap();
            kb.update_entry(0, 0, r).unwrap();
            kb.retract_entry(0, 0, r).unwrap();
            prop_assert_eq!(kb.counts(0, 0), c);
        }
    }
}
