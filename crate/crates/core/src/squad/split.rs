use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SquadExample;

/// Article-level train/eval split: a shuffled `fraction` of the articles
/// (rounded, and at least one on each side when there are two or more)
/// goes to eval. Input order is preserved within each side.
pub fn split_train_eval(
    examples: &[SquadExample],
    fraction: f64,
    seed: u64,
) -> (Vec<SquadExample>, Vec<SquadExample>) {
    let mut by_article: BTreeMap<usize, usize> = BTreeMap::new();
    for ex in examples {
        *by_article.entry(ex.article).or_default() += 1;
    }
    let mut articles: Vec<usize> = by_article.into_keys().collect();
    articles.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = articles.len();
    let mut n_eval = (fraction * n as f64).round() as usize;
    if n >= 2 {
        n_eval = n_eval.clamp(1, n - 1);
    }
    let eval_articles: std::collections::HashSet<usize> = articles[..n_eval.min(n)].iter().copied().collect();

    examples
        .iter()
        .cloned()
        .partition(|ex| !eval_articles.contains(&ex.article))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(qid: &str, article: usize) -> SquadExample {
        SquadExample {
            qid: qid.into(),
            question: String::new(),
            context: String::new(),
            answers: vec![],
            is_impossible: true,
            article,
        }
    }

    #[test]
    fn two_articles_half_each() {
        let data = vec![ex("a", 0), ex("b", 0), ex("c", 1)];
        let (train, eval) = split_train_eval(&data, 0.5, 7);
        assert_eq!(train.len() + eval.len(), 3);
        let ta: Vec<_> = train.iter().map(|e| e.article).collect();
        let ea: Vec<_> = eval.iter().map(|e| e.article).collect();
        assert!(!ta.is_empty() && !ea.is_empty());
        assert!(ta.iter().all(|a| !ea.contains(a)));
    }

    #[test]
    fn deterministic_partition() {
        let data: Vec<_> = (0..200).map(|i| ex(&i.to_string(), i / 7)).collect();
        let a = split_train_eval(&data, 0.1, 3);
        let b = split_train_eval(&data, 0.1, 3);
        assert_eq!(a, b);
        let mut all: Vec<_> = a.0.iter().chain(&a.1).map(|e| e.qid.clone()).collect();
        all.sort();
        let mut want: Vec<_> = data.iter().map(|e| e.qid.clone()).collect();
        want.sort();
        assert_eq!(all, want);
        assert_ne!(split_train_eval(&data, 0.1, 4).1, a.1);
    }
}
