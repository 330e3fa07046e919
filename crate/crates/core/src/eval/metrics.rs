use std::collections::HashMap;

/// Lowercase, strip ASCII punctuation, drop the articles "a", "an", "the",
/// and collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1 if the normalized prediction equals any normalized gold. With no golds
/// (unanswerable) the prediction must normalize to the empty string.
pub fn em_score(pred: &str, golds: &[&str]) -> f64 {
    let p = normalize_answer(pred);
    if golds.is_empty() {
        return f64::from(u8::from(p.is_empty()));
    }
    f64::from(u8::from(golds.iter().any(|g| normalize_answer(g) == p)))
}

fn token_f1(pred: &str, gold: &str) -> f64 {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    if pt.is_empty() || gt.is_empty() {
        return f64::from(u8::from(pt == gt));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gt {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &pt {
        if let Some(c) = counts.get_mut(t).filter(|c| **c > 0) {
            *c -= 1;
            common += 1;
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pt.len() as f64;
    let recall = common as f64 / gt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Token-bag F1, maximized over golds. Unanswerable: 1 iff the prediction is null.
pub fn f1_score(pred: &str, golds: &[&str]) -> f64 {
    if golds.is_empty() {
        return em_score(pred, golds);
    }
    golds.iter().map(|g| token_f1(pred, g)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_answer("The  Beatles!"), "beatles");
        assert_eq!(normalize_answer("a an the"), "");
        assert_eq!(normalize_answer("Theatre, anew"), "theatre anew");
    }

    #[test]
    fn exact_match() {
        assert_eq!(em_score("the beatles", &["Beatles"]), 1.0);
        assert_eq!(em_score("", &[]), 1.0);
        assert_eq!(em_score("beatle", &["Beatles"]), 0.0);
        assert_eq!(em_score("something", &[]), 0.0);
    }

    #[test]
    fn f1_partial_overlap() {
        // "a" is an article and disappears before counting.
        assert!((f1_score("a b c", &["b c d"]) - 0.8).abs() < 1e-12);
        assert!((f1_score("x b c", &["b c d"]) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1_score("Beatles", &["the beatles"]), 1.0);
        assert_eq!(f1_score("", &["beatles"]), 0.0);
        assert_eq!(f1_score("", &[]), 1.0);
        assert_eq!(f1_score("x", &[]), 0.0);
    }

    #[test]
    fn f1_max_over_golds() {
        assert_eq!(f1_score("paris", &["london", "Paris"]), 1.0);
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["x", "y", "z", "w", "v", "u"]).prop_map(str::to_owned)
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once), once);
        }

        #[test]
        fn f1_is_symmetric(a in prop::collection::vec(word(), 1..6), b in prop::collection::vec(word(), 1..6)) {
            let (a, b) = (a.join(" "), b.join(" "));
            prop_assert!((f1_score(&a, &[&b]) - f1_score(&b, &[&a])).abs() < 1e-12);
        }

        #[test]
        fn em_never_exceeds_f1(a in "[a-c ]{0,12}", b in "[a-c ]{1,12}") {
            prop_assert!(em_score(&a, &[&b]) <= f1_score(&a, &[&b]));
        }
    }
}
