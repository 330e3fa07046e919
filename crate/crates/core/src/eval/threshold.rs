use rayon::prelude::*;

use super::report::{align, score_example};
use super::span::Prediction;
use crate::error::{Error, Result};
use crate::squad::SquadExample;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSweep {
    pub tau: f64,
    /// Overall F1 (percent) at `tau`.
    pub f1: f64,
}

/// Choose the null threshold maximizing overall F1.
///
/// Candidates are `-inf` and every finite observed `score_diff`. Between
/// consecutive candidates the decisions do not change, so this set is
/// exhaustive. Ties keep the smaller threshold.
pub fn sweep_null_threshold(predictions: &[Prediction], examples: &[SquadExample]) -> Result<ThresholdSweep> {
    if predictions.is_empty() {
        return Err(Error::Invalid("cannot sweep a threshold over zero predictions".into()));
    }
    let pairs = align(predictions, examples)?;
    // (diff, f1 if null, f1 if answered)
    let mut items: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|(p, e)| {
            let null = score_example(p, e, f64::NEG_INFINITY).1;
            let answered = score_example(p, e, f64::INFINITY).1;
            (p.score_diff, null, answered)
        })
        .collect();
    if items.iter().any(|it| it.0.is_nan()) {
        return Err(Error::NonFinite {
            what: "score_diff".into(),
        });
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n = items.len() as f64;
    let mut current: f64 = items.iter().map(|it| it.1).sum();
    let mut best = ThresholdSweep {
        tau: f64::NEG_INFINITY,
        f1: current,
    };
    let mut k = 0;
    while k < items.len() {
        let tau = items[k].0;
        if !tau.is_finite() {
            break;
        }
        while k < items.len() && items[k].0 == tau {
            current += items[k].2 - items[k].1;
            k += 1;
        }
        if current > best.f1 + 1e-9 {
            best = ThresholdSweep { tau, f1: current };
        }
    }
    best.f1 *= 100.0 / n;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::report::report;
    use crate::squad::Answer;

    fn example(qid: &str, answer: Option<&str>) -> SquadExample {
        SquadExample {
            qid: qid.into(),
            question: "q".into(),
            context: answer.unwrap_or("x").into(),
            answers: answer
                .map(|a| vec![Answer { text: a.into(), char_start: 0 }])
                .unwrap_or_default(),
            is_impossible: answer.is_none(),
            article: 0,
        }
    }

    #[test]
    fn all_unanswerable_picks_negative_infinity() {
        let ex: Vec<_> = (0..4).map(|i| example(&i.to_string(), None)).collect();
        let preds: Vec<_> = (0..4)
            .map(|i| Prediction::from_parts(i.to_string(), "wrong", -(i as f64), 0.0))
            .collect();
        let s = sweep_null_threshold(&preds, &ex).unwrap();
        assert_eq!(s.tau, f64::NEG_INFINITY);
        assert_eq!(s.f1, 100.0);
    }

    #[test]
    fn all_answerable_picks_no_nulls() {
        let ex: Vec<_> = (0..4).map(|i| example(&i.to_string(), Some("yes"))).collect();
        let preds: Vec<_> = (0..4)
            .map(|i| Prediction::from_parts(i.to_string(), if i == 0 { "no" } else { "yes" }, 10.0 + i as f64, 0.0))
            .collect();
        let s = sweep_null_threshold(&preds, &ex).unwrap();
        assert_eq!(s.tau, 13.0);
        assert_eq!(s.f1, 75.0);
        let r = report(&preds, &ex, f64::INFINITY).unwrap();
        assert_eq!(s.f1, r.hasans_f1);
    }

    #[test]
    fn empty_rejected() {
        assert!(sweep_null_threshold(&[], &[]).is_err());
    }

    #[test]
    fn matches_report_at_chosen_tau() {
        let ex = vec![example("a", Some("cat")), example("b", None), example("c", Some("dog"))];
        let preds = vec![
            Prediction::from_parts("a", "cat", 1.0, 0.0),
            Prediction::from_parts("b", "cat", 2.0, 0.0),
            Prediction::from_parts("c", "dog", 0.5, 0.0),
        ];
        let s = sweep_null_threshold(&preds, &ex).unwrap();
        assert_eq!(s.tau, 1.0);
        let r = report(&preds, &ex, s.tau).unwrap();
        assert!((r.overall_f1 - s.f1).abs() < 1e-9);
        assert!((s.f1 - 100.0).abs() < 1e-9);
    }
}
