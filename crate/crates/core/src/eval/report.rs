use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::metrics::{em_score, f1_score};
use super::span::Prediction;
use crate::error::{Error, Result};
use crate::squad::SquadExample;

/// Scores as percentages. Slices with no examples report 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall_em: f64,
    pub overall_f1: f64,
    pub noans_em: f64,
    pub noans_f1: f64,
    pub hasans_em: f64,
    pub hasans_f1: f64,
    #[serde(serialize_with = "serialize_threshold")]
    pub threshold: f64,
    pub total: usize,
    pub noans_count: usize,
    pub hasans_count: usize,
}

fn serialize_threshold<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>7} {:>7} {:>7}", "slice", "EM", "F1", "count")?;
        for (name, em, f1, n) in [
            ("overall", self.overall_em, self.overall_f1, self.total),
            ("noans", self.noans_em, self.noans_f1, self.noans_count),
            ("hasans", self.hasans_em, self.hasans_f1, self.hasans_count),
        ] {
            writeln!(f, "{name:<10} {em:>7.2} {f1:>7.2} {n:>7}")?;
        }
        write!(f, "threshold  {}", self.threshold)
    }
}

/// Pair every example with its prediction. Examples without a prediction
/// and predictions for unknown questions are both errors.
pub(crate) fn align<'a>(
    predictions: &'a [Prediction],
    examples: &'a [SquadExample],
) -> Result<Vec<(&'a Prediction, &'a SquadExample)>> {
    let by_qid: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.qid.as_str(), p)).collect();
    let missing: Vec<String> = examples
        .iter()
        .filter(|e| !by_qid.contains_key(e.qid.as_str()))
        .map(|e| e.qid.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingQids {
            side: "predictions",
            qids: missing,
        });
    }
    let known: HashSet<&str> = examples.iter().map(|e| e.qid.as_str()).collect();
    let unknown: Vec<String> = predictions
        .iter()
        .filter(|p| !known.contains(p.qid.as_str()))
        .map(|p| p.qid.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::MissingQids {
            side: "dataset",
            qids: unknown,
        });
    }
    Ok(examples.iter().map(|e| (by_qid[e.qid.as_str()], e)).collect())
}

/// EM and F1 (each 0 or 1 / in [0, 1]) for one example at threshold `tau`.
pub fn score_example(prediction: &Prediction, example: &SquadExample, tau: f64) -> (f64, f64) {
    let golds = example.gold_texts();
    let text = prediction.decide(tau);
    (em_score(text, &golds), f1_score(text, &golds))
}

fn pct(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * sum / n as f64
    }
}

/// Apply the `tau` decision and aggregate EM/F1 overall and per slice.
pub fn report(predictions: &[Prediction], examples: &[SquadExample], tau: f64) -> Result<EvalReport> {
    let pairs = align(predictions, examples)?;
    let scores: Vec<(bool, f64, f64)> = pairs
        .par_iter()
        .map(|(p, e)| {
            let (em, f1) = score_example(p, e, tau);
            (e.is_impossible, em, f1)
        })
        .collect();
    let (mut na, mut ha) = ((0usize, 0.0, 0.0), (0usize, 0.0, 0.0));
    for (impossible, em, f1) in scores {
        let slot = if impossible { &mut na } else { &mut ha };
        slot.0 += 1;
        slot.1 += em;
        slot.2 += f1;
    }
    let total = na.0 + ha.0;
    Ok(EvalReport {
        overall_em: pct(na.1 + ha.1, total),
        overall_f1: pct(na.2 + ha.2, total),
        noans_em: pct(na.1, na.0),
        noans_f1: pct(na.2, na.0),
        hasans_em: pct(ha.1, ha.0),
        hasans_f1: pct(ha.2, ha.0),
        threshold: tau,
        total,
        noans_count: na.0,
        hasans_count: ha.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squad::Answer;

    pub(crate) fn example(qid: &str, answer: Option<&str>) -> SquadExample {
        SquadExample {
            qid: qid.into(),
            question: "q".into(),
            context: answer.unwrap_or("nothing").into(),
            answers: answer
                .map(|a| vec![Answer { text: a.into(), char_start: 0 }])
                .unwrap_or_default(),
            is_impossible: answer.is_none(),
            article: 0,
        }
    }

    #[test]
    fn perfect_predictions() {
        let ex = vec![example("a", Some("red fox")), example("b", None)];
        let preds = vec![
            Prediction::from_parts("a", "Red fox", -1.0, 0.0),
            Prediction::from_parts("b", "whatever", 3.0, 0.0),
        ];
        let r = report(&preds, &ex, 0.0).unwrap();
        for v in [r.overall_em, r.overall_f1, r.noans_em, r.noans_f1, r.hasans_em, r.hasans_f1] {
            assert_eq!(v, 100.0);
        }
    }

    #[test]
    fn forced_null_on_even_split() {
        let ex: Vec<_> = (0..10)
            .map(|i| example(&i.to_string(), (i % 2 == 0).then_some("x")))
            .collect();
        let preds: Vec<_> = ex.iter().map(|e| Prediction::from_parts(e.qid.clone(), "", 0.0, 0.0)).collect();
        let r = report(&preds, &ex, 0.0).unwrap();
        assert_eq!((r.noans_em, r.noans_f1, r.hasans_em, r.hasans_f1), (100.0, 100.0, 0.0, 0.0));
        assert_eq!((r.overall_em, r.overall_f1), (50.0, 50.0));
    }

    #[test]
    fn missing_prediction_listed() {
        let ex = vec![example("a", None), example("b", None)];
        let preds = vec![Prediction::from_parts("a", "", 0.0, 0.0)];
        match report(&preds, &ex, 0.0) {
            Err(Error::MissingQids { qids, .. }) => assert_eq!(qids, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threshold_serializes_infinite_as_string() {
        let ex = vec![example("a", None)];
        let preds = vec![Prediction::from_parts("a", "", 0.0, 0.0)];
        let r = report(&preds, &ex, f64::NEG_INFINITY).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["threshold"], "-inf");
        assert!(r.to_string().contains("100.00"));
    }
}
