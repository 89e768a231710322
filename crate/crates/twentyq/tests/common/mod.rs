#![allow(dead_code)]

use twentyq::config::Config;
use twentyq_core::kb::{generate_synthetic_kb, SyntheticSpec};
use twentyq_core::KnowledgeBase;

/// A config small enough to train and evaluate in well under a second.
pub fn tiny_config() -> Config {
    let mut c = Config::default();
    c.kb.entities = 12;
    c.kb.questions = 10;
    c.kb.clusters = 2;
    c.kb.records = 6;
    c.game.total = 6;
    c.game.t1 = 4;
    c.agent.hidden = vec![8];
    c.agent.question_dim = 4;
    c.agent.lstm_hidden = 6;
    c.train.episodes = 60;
    c.train.curve_window = 20;
    c.train.curve_every = 20;
    c.train.epsilon_anneal_steps = 100;
    c.eval.episodes = 50;
    c.ka.t1 = 4;
    c.ka.buffer_size = 20;
    c.ka.cycles = 3;
    c.ka.latent_dim = 4;
    c.ka.gmf_epochs = 2;
    c.ka.n_c = 4;
    c.sweep.t1_values = vec![2, 4, 6, 8];
    c.validate().expect("tiny config is valid");
    c
}

pub fn small_kb(entities: usize, questions: usize, seed: u64) -> KnowledgeBase {
    generate_synthetic_kb(&SyntheticSpec {
        entities,
        questions,
        clusters: 2,
        records: 6,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}
