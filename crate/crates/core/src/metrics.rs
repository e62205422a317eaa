//! Detection quality of a label quality score against injected ground truth.
//! Low scores are predictions of "mislabeled".

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inject::ErrorLog;
use crate::io::ScoreRecord;
use crate::registry::Method;

/// Cut-off used alongside `T = E` in evaluation reports.
pub const DEFAULT_TOP_T: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub image_id: String,
    pub score: f64,
    pub is_error: bool,
}

impl LabeledScore {
    pub fn new(image_id: impl Into<String>, score: f64, is_error: bool) -> Self {
        Self {
            image_id: image_id.into(),
            score,
            is_error,
        }
    }
}

fn check_finite(items: &[LabeledScore]) -> Result<()> {
    match items.iter().find(|i| !i.score.is_finite()) {
        Some(i) => Err(Error::Validation(format!("score of {} is not finite", i.image_id))),
        None => Ok(()),
    }
}

/// Items sorted by ascending score, ties by image id.
fn ranked(items: &[LabeledScore]) -> Vec<&LabeledScore> {
    let mut sorted: Vec<&LabeledScore> = items.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.image_id.cmp(&b.image_id)));
    sorted
}

fn error_count(items: &[LabeledScore]) -> usize {
    items.iter().filter(|i| i.is_error).count()
}

/// Probability that a random error item scores below a random clean item,
/// ties counting one half (the normalized Mann-Whitney U statistic).
pub fn auroc(items: &[LabeledScore]) -> Result<f64> {
    check_finite(items)?;
    let errors = error_count(items);
    let clean = items.len() - errors;
    if errors == 0 || clean == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs at least one error and one clean item".into(),
        ));
    }
    let sorted = ranked(items);
    // sum of mid-ranks of the clean items
    let mut clean_rank_sum = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].score == sorted[start].score {
            end += 1;
        }
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let clean_in_group = sorted[start..end].iter().filter(|i| !i.is_error).count();
        clean_rank_sum += mid_rank * clean_in_group as f64;
        start = end;
    }
    let u = clean_rank_sum - (clean * (clean + 1)) as f64 / 2.0;
    Ok(u / (errors as f64 * clean as f64))
}

/// Average precision: mean over error items, in ranked order, of the
/// precision at each error's rank.
pub fn auprc(items: &[LabeledScore]) -> Result<f64> {
    check_finite(items)?;
    let errors = error_count(items);
    if errors == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs at least one error item".into()));
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, item) in ranked(items).iter().enumerate() {
        if item.is_error {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / errors as f64)
}

/// Error counts among the `t` lowest-scoring items, kept as integers so the
/// precision/lift relation holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopT {
    pub hits: usize,
    pub t: usize,
    pub errors: usize,
    pub total: usize,
}

impl TopT {
    pub fn precision(&self) -> f64 {
        self.hits as f64 / self.t as f64
    }

    /// `(hits * total, t * errors)`: lift as an unreduced fraction.
    pub fn lift_ratio(&self) -> Result<(u128, u128)> {
        if self.errors == 0 {
            return Err(Error::UndefinedMetric("lift is undefined without error items".into()));
        }
        Ok((
            self.hits as u128 * self.total as u128,
            self.t as u128 * self.errors as u128,
        ))
    }

    pub fn lift(&self) -> Result<f64> {
        let (num, den) = self.lift_ratio()?;
        Ok(num as f64 / den as f64)
    }
}

pub fn top_t(items: &[LabeledScore], t: usize) -> Result<TopT> {
    check_finite(items)?;
    if t == 0 || t > items.len() {
        return Err(Error::Validation(format!("T = {t} outside 1..={}", items.len())));
    }
    let hits = ranked(items).iter().take(t).filter(|i| i.is_error).count();
    Ok(TopT {
        hits,
        t,
        errors: error_count(items),
        total: items.len(),
    })
}

pub fn precision_at_t(items: &[LabeledScore], t: usize) -> Result<f64> {
    Ok(top_t(items, t)?.precision())
}

/// Error prevalence among the `t` lowest scores over overall prevalence.
pub fn lift_at_t(items: &[LabeledScore], t: usize) -> Result<f64> {
    top_t(items, t)?.lift()
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub auroc: f64,
    pub auprc: f64,
    #[serde(rename = "lift_at_E")]
    pub lift_at_e: f64,
    pub lift_at_100: f64,
    #[serde(rename = "precision_at_E")]
    pub precision_at_e: f64,
    pub precision_at_100: f64,
}

impl MethodMetrics {
    /// All metrics for one method. The fixed cut-off is clamped to the item count.
    pub fn compute(items: &[LabeledScore]) -> Result<Self> {
        let errors = error_count(items);
        let at_e = top_t(items, errors)?;
        let at_100 = top_t(items, DEFAULT_TOP_T.min(items.len()))?;
        Ok(Self {
            auroc: auroc(items)?,
            auprc: auprc(items)?,
            lift_at_e: at_e.lift()?,
            lift_at_100: at_100.lift()?,
            precision_at_e: at_e.precision(),
            precision_at_100: at_100.precision(),
        })
    }
}

pub type EvaluationReport = BTreeMap<Method, MethodMetrics>;

/// Joins report records with the error log by image id and computes metrics
/// per method. Every reported image must appear in the log.
pub fn evaluate(records: &[ScoreRecord], logs: &[ErrorLog]) -> Result<EvaluationReport> {
    let truth: HashMap<&str, bool> = logs.iter().map(|l| (l.image_id.as_str(), l.is_error())).collect();
    let mut missing: Vec<String> = records
        .iter()
        .filter(|r| !truth.contains_key(r.image_id.as_str()))
        .map(|r| r.image_id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::Join { missing });
    }
    let mut by_method: BTreeMap<Method, Vec<LabeledScore>> = BTreeMap::new();
    for r in records {
        by_method
            .entry(r.method)
            .or_default()
            .push(LabeledScore::new(r.image_id.clone(), r.score, truth[r.image_id.as_str()]));
    }
    by_method
        .into_iter()
        .map(|(method, items)| Ok((method, MethodMetrics::compute(&items)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(pairs: &[(f64, bool)]) -> Vec<LabeledScore> {
        pairs.iter()
            .enumerate()
            .map(|(i, &(s, e))| LabeledScore::new(format!("im{i:03}"), s, e))
            .collect()
    }

    #[test]
    fn auroc_perfect_ranking() {
        assert_eq!(auroc(&items(&[(0.1, true), (0.2, true), (0.9, false)])).unwrap(), 1.0);
    }

    #[test]
    fn auroc_all_ties() {
        assert_eq!(auroc(&items(&[(0.5, true), (0.5, false), (0.5, false), (0.5, true)])).unwrap(), 0.5);
    }

    #[test]
    fn auroc_mixed_pairs() {
        assert_eq!(auroc(&items(&[(0.8, true), (0.5, false), (0.9, false)])).unwrap(), 0.5);
    }

    #[test]
    fn auroc_reversed_is_zero() {
        assert_eq!(auroc(&items(&[(0.9, true), (0.1, false)])).unwrap(), 0.0);
    }

    #[test]
    fn auroc_single_class_undefined() {
        assert!(matches!(auroc(&items(&[(0.1, true)])), Err(Error::UndefinedMetric(_))));
        assert!(matches!(auroc(&items(&[(0.1, false)])), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn auprc_cases() {
        assert_eq!(auprc(&items(&[(0.1, true), (0.2, true), (0.3, false)])).unwrap(), 1.0);
        let last = items(&[(0.1, false), (0.2, false), (0.3, false), (0.4, true)]);
        assert_eq!(auprc(&last).unwrap(), 0.25);
        assert!(matches!(auprc(&items(&[(0.1, false)])), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn auprc_ties_break_by_id() {
        // equal scores: im000 (clean) precedes im001 (error)
        assert_eq!(auprc(&items(&[(0.5, false), (0.5, true)])).unwrap(), 0.5);
    }

    #[test]
    fn precision_and_lift_at_t() {
        let mut pairs = vec![(0.9, false); 10];
        pairs[1] = (0.1, true);
        pairs[4] = (0.2, true);
        let it = items(&pairs);
        assert_eq!(precision_at_t(&it, 5).unwrap(), 0.4);
        assert_eq!(lift_at_t(&it, 5).unwrap(), 2.0);
        assert_eq!(precision_at_t(&it, 2).unwrap(), 1.0);
        assert_eq!(lift_at_t(&it, 2).unwrap(), 5.0);
    }

    #[test]
    fn lift_without_errors_is_undefined() {
        let it = items(&[(0.1, false), (0.2, false)]);
        assert_eq!(precision_at_t(&it, 1).unwrap(), 0.0);
        assert!(matches!(lift_at_t(&it, 1), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn t_out_of_range() {
        let it = items(&[(0.1, true)]);
        assert!(top_t(&it, 0).is_err());
        assert!(top_t(&it, 2).is_err());
    }

    #[test]
    fn nan_scores_rejected() {
        assert!(auroc(&items(&[(f64::NAN, true), (0.1, false)])).is_err());
    }

    fn record(id: &str, method: Method, score: f64) -> ScoreRecord {
        ScoreRecord {
            image_id: id.into(),
            method,
            score,
            rank: 0,
        }
    }

    #[test]
    fn evaluate_joins_and_groups() {
        let logs = vec![
            ErrorLog {
                image_id: "a".into(),
                error: crate::inject::InjectedError::Drop { dropped_class: 1 },
                pixels_changed: 3,
            },
            ErrorLog::clean("b"),
        ];
        let records = vec![
            record("a", Method::Cil, 0.1),
            record("b", Method::Cil, 0.9),
            record("a", Method::Ccp, 0.9),
            record("b", Method::Ccp, 0.1),
        ];
        let report = evaluate(&records, &logs).unwrap();
        assert_eq!(report.len(), 2);
        assert_eq!(report[&Method::Cil].auroc, 1.0);
        assert_eq!(report[&Method::Cil].lift_at_e, 2.0);
        assert_eq!(report[&Method::Ccp].auroc, 0.0);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.starts_with("{\"CCP\":{\"auroc\":0.0"));
        assert!(json.contains("\"lift_at_E\""));
    }

    #[test]
    fn evaluate_reports_missing_ids() {
        let logs = vec![ErrorLog::clean("a")];
        let records = vec![record("a", Method::Cil, 0.1), record("zz", Method::Cil, 0.2)];
        match evaluate(&records, &logs) {
            Err(Error::Join { missing }) => assert_eq!(missing, vec!["zz".to_string()]),
            other => panic!("expected join error, got {other:?}"),
        }
    }
}
