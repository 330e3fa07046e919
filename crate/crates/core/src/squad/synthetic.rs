//! Small generated SQuAD 2.0 documents for tests and smoke runs.
//!
//! Each question asks for the word that follows a key word in its
//! context. Unanswerable questions name a key absent from the context.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const VOCAB: usize = 60;

fn word(i: usize) -> String {
    const SYLLABLES: [&str; 10] = ["ka", "lo", "mi", "ru", "te", "vo", "zi", "pa", "ne", "su"];
    format!("{}{}", SYLLABLES[i % 10], SYLLABLES[(i / 10) % 10])
}

/// A document with `n` questions, one paragraph and article each. Every
/// other question (starting with the first) is answerable.
pub fn synthetic_squad(n: usize, seed: u64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..VOCAB).map(word).collect();
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let len = rng.random_range(8..=14);
        let mut picks: Vec<&String> = vocab.iter().collect();
        picks.shuffle(&mut rng);
        let (words, rest) = picks.split_at(len);
        let context = words.iter().map(|w| w.as_str()).collect::<Vec<_>>().join(" ");
        let answerable = i % 2 == 0;
        let qid = format!("syn{seed}-{i:04}");
        let qa = if answerable {
            let k = rng.random_range(0..len - 1);
            let answer = words[k + 1].as_str();
            let start = words[..=k].iter().map(|w| w.chars().count() + 1).sum::<usize>();
            json!({
                "id": qid,
                "question": format!("what follows {}?", words[k]),
                "is_impossible": false,
                "answers": [{"text": answer, "answer_start": start}],
            })
        } else {
            let key = rest.choose(&mut rng).expect("vocabulary exceeds context length");
            json!({
                "id": qid,
                "question": format!("what follows {key}?"),
                "is_impossible": true,
                "answers": [],
            })
        };
        data.push(json!({
            "title": format!("article {i}"),
            "paragraphs": [{"context": context, "qas": [qa]}],
        }));
    }
    json!({"version": "v2.0", "data": data})
}
