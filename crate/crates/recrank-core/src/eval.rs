//! HR@k / NDCG@k metrics, paired significance testing with the
//! Holm-Bonferroni correction, and report assembly.

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::BTreeMap;

/// 1 iff the held-out item appears within the first k positions.
pub fn hit_ratio_at_k(ranking: &[ItemId], truth: &ItemId, k: usize) -> f64 {
    assert!(k >= 1);
    if ranking.iter().take(k).any(|i| i == truth) {
        1.0
    } else {
        0.0
    }
}

/// Single-relevant-item NDCG: 1/log2(rank+1) when the truth sits at
/// 1-based `rank` <= k, else 0; the ideal DCG is 1.
pub fn ndcg_at_k(ranking: &[ItemId], truth: &ItemId, k: usize) -> f64 {
    assert!(k >= 1);
    match ranking.iter().position(|i| i == truth) {
        Some(pos) if pos < k => 1.0 / ((pos as f64 + 2.0).log2()),
        _ => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    /// Zero variance of differences: p is 1.0 for equal means, else 0.0.
    pub degenerate: bool,
}

/// Two-sided paired t-test on per-user differences.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidInput("paired t-test needs n >= 2".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        return Ok(TTestResult {
            t: if mean == 0.0 { 0.0 } else { f64::INFINITY * mean.signum() },
            p: if mean == 0.0 { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let se = (var / n as f64).sqrt();
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0)
        .map_err(|e| Error::InvalidInput(format!("t-distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult {
        t,
        p: p.clamp(0.0, 1.0),
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub comparison: String,
    pub p: f64,
    pub t: f64,
    pub significant: bool,
}

/// Holm-Bonferroni step-down at level alpha: sort p ascending and reject
/// while p_i <= alpha / (m - i), stopping at the first failure.
pub fn holm_bonferroni(
    raw: &[(String, TTestResult)],
    alpha: f64,
) -> Result<Vec<SignificanceResult>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput("alpha must be in (0, 1)".into()));
    }
    let m = raw.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        raw[i]
            .1
            .p
            .partial_cmp(&raw[j].1.p)
            .expect("p values are not NaN")
            .then(raw[i].0.cmp(&raw[j].0))
    });
    let mut significant = vec![false; m];
    for (step, &idx) in order.iter().enumerate() {
        if raw[idx].1.p <= alpha / (m - step) as f64 {
            significant[idx] = true;
        } else {
            break;
        }
    }
    Ok(raw
        .iter()
        .enumerate()
        .map(|(i, (name, tt))| SignificanceResult {
            comparison: name.clone(),
            p: tt.p,
            t: tt.t,
            significant: significant[i],
        })
        .collect())
}

/// Per-user metric vectors for one method.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub label: String,
    /// Metric name -> per-user values in user order.
    pub per_user: BTreeMap<String, Vec<f64>>,
    pub parse_failure_rate: f64,
    pub fallback_rate: f64,
}

pub const METRIC_NAMES: [&str; 4] = ["HR@3", "NDCG@3", "HR@5", "NDCG@5"];

/// Evaluates one method's rankings against the per-user truth. Users whose
/// truth is absent from their candidate list score zero and count toward
/// the retrieval-miss rate.
pub fn evaluate_method(
    label: &str,
    rankings: &BTreeMap<UserId, Vec<ItemId>>,
    truth: &BTreeMap<UserId, ItemId>,
    parse_failure_rate: f64,
    fallback_rate: f64,
) -> Result<(MethodMetrics, f64)> {
    let mut per_user: BTreeMap<String, Vec<f64>> = METRIC_NAMES
        .iter()
        .map(|m| (m.to_string(), Vec::new()))
        .collect();
    let mut misses = 0usize;
    let mut evaluated = 0usize;
    for (user, ranking) in rankings {
        let t = truth
            .get(user)
            .ok_or_else(|| Error::UnknownUser(format!("{user} has no held-out item")))?;
        evaluated += 1;
        if !ranking.contains(t) {
            misses += 1;
        }
        per_user.get_mut("HR@3").expect("static key").push(hit_ratio_at_k(ranking, t, 3));
        per_user.get_mut("NDCG@3").expect("static key").push(ndcg_at_k(ranking, t, 3));
        per_user.get_mut("HR@5").expect("static key").push(hit_ratio_at_k(ranking, t, 5));
        per_user.get_mut("NDCG@5").expect("static key").push(ndcg_at_k(ranking, t, 5));
    }
    let miss_rate = if evaluated == 0 {
        0.0
    } else {
        misses as f64 / evaluated as f64
    };
    Ok((
        MethodMetrics {
            label: label.to_string(),
            per_user,
            parse_failure_rate,
            fallback_rate,
        },
        miss_rate,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    /// Metric means in METRIC_NAMES order.
    pub values: BTreeMap<String, f64>,
    pub n_users: usize,
    pub parse_failure_rate: f64,
    pub fallback_rate: f64,
    pub significance: Vec<SignificanceResult>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Aggregates methods into reports, testing every non-base method against
/// the base per metric under one Holm-Bonferroni family.
pub fn aggregate_report(
    methods: &[MethodMetrics],
    base_label: &str,
    alpha: f64,
) -> Result<(Vec<EvalReport>, String)> {
    let base = methods
        .iter()
        .find(|m| m.label == base_label)
        .ok_or_else(|| Error::InvalidInput(format!("base method `{base_label}` not present")))?;
    let n = base.per_user[METRIC_NAMES[0]].len();
    for m in methods {
        for metric in METRIC_NAMES {
            if m.per_user[metric].len() != n {
                return Err(Error::InvalidInput(format!(
                    "method `{}` evaluated on a different user set",
                    m.label
                )));
            }
        }
    }

    let mut family: Vec<(String, TTestResult)> = Vec::new();
    for m in methods.iter().filter(|m| m.label != base_label) {
        for metric in METRIC_NAMES {
            let tt = if n < 2 {
                TTestResult {
                    t: 0.0,
                    p: 1.0,
                    degenerate: true,
                }
            } else {
                paired_t_test(&m.per_user[metric], &base.per_user[metric])?
            };
            family.push((format!("{} vs {} on {}", m.label, base_label, metric), tt));
        }
    }
    let significance = holm_bonferroni(&family, alpha)?;

    let mut reports = Vec::new();
    for m in methods {
        let values: BTreeMap<String, f64> = METRIC_NAMES
            .iter()
            .map(|metric| (metric.to_string(), mean(&m.per_user[*metric])))
            .collect();
        let own: Vec<SignificanceResult> = significance
            .iter()
            .filter(|s| s.comparison.starts_with(&format!("{} vs ", m.label)))
            .cloned()
            .collect();
        reports.push(EvalReport {
            label: m.label.clone(),
            values,
            n_users: n,
            parse_failure_rate: m.parse_failure_rate,
            fallback_rate: m.fallback_rate,
            significance: own,
        });
    }

    // aligned text table: best bold-marked with **, second-best with *,
    // significance stars appended per metric
    let mut table = String::new();
    table.push_str(&format!("{:<24}", "method"));
    for metric in METRIC_NAMES {
        table.push_str(&format!("{:>14}", metric));
    }
    table.push('\n');
    for r in &reports {
        table.push_str(&format!("{:<24}", r.label));
        for metric in METRIC_NAMES {
            let v = r.values[metric];
            let mut sorted: Vec<f64> = reports.iter().map(|x| x.values[metric]).collect();
            sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite metrics"));
            let marker = if !sorted.is_empty() && v == sorted[0] {
                "**"
            } else if sorted.len() > 1 && v == sorted[1] {
                "*"
            } else {
                ""
            };
            let star = if r
                .significance
                .iter()
                .any(|s| s.significant && s.comparison.ends_with(metric))
            {
                "^"
            } else {
                ""
            };
            table.push_str(&format!("{:>14}", format!("{v:.4}{marker}{star}")));
        }
        table.push('\n');
    }
    Ok((reports, table))
}

pub fn write_reports(path: &std::path::Path, reports: &[EvalReport]) -> Result<()> {
    let text = serde_json::to_string_pretty(reports)
        .map_err(|e| Error::InvalidInput(format!("report serialize: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_reports(path: &std::path::Path) -> Result<Vec<EvalReport>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("report parse: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<ItemId> {
        names.iter().map(|s| ItemId::new(*s)).collect()
    }

    #[test]
    fn hit_ratio_positions() {
        let ranking = ids(&["a", "b", "c", "d", "e"]);
        let truth = ItemId::new("d");
        assert_eq!(hit_ratio_at_k(&ranking, &truth, 3), 0.0);
        assert_eq!(hit_ratio_at_k(&ranking, &truth, 5), 1.0);
        let first = ItemId::new("a");
        for k in 1..=5 {
            assert_eq!(hit_ratio_at_k(&ranking, &first, k), 1.0);
        }
        assert_eq!(hit_ratio_at_k(&ranking, &ItemId::new("zz"), 5), 0.0);
    }

    #[test]
    fn ndcg_hand_values() {
        let ranking = ids(&["a", "b", "c", "d"]);
        assert!((ndcg_at_k(&ranking, &ItemId::new("a"), 3) - 1.0).abs() < 1e-12);
        let expect = 1.0 / 3f64.log2();
        assert!((ndcg_at_k(&ranking, &ItemId::new("b"), 3) - expect).abs() < 1e-9);
        assert!((expect - 0.63093).abs() < 1e-5);
        assert_eq!(ndcg_at_k(&ranking, &ItemId::new("d"), 3), 0.0);
    }

    #[test]
    fn metric_brute_force_oracle_small_lists() {
        // enumerate all truth positions in lists of length <= 5 and
        // compare with an independent direct computation
        let items = ids(&["a", "b", "c", "d", "e"]);
        for len in 1..=5 {
            let ranking = &items[..len];
            for (pos, truth) in ranking.iter().enumerate() {
                for k in 1..=len {
                    let hr = if pos < k { 1.0 } else { 0.0 };
                    let ndcg = if pos < k {
                        1.0 / ((pos + 2) as f64).log2()
                    } else {
                        0.0
                    };
                    assert_eq!(hit_ratio_at_k(ranking, truth, k), hr);
                    assert!((ndcg_at_k(ranking, truth, k) - ndcg).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn ndcg_monotone_in_k_and_agrees_with_hr() {
        let ranking = ids(&["a", "b", "c", "d", "e"]);
        for truth in &ranking {
            assert!(ndcg_at_k(&ranking, truth, 5) >= ndcg_at_k(&ranking, truth, 3));
            let hit_full = hit_ratio_at_k(&ranking, truth, ranking.len());
            assert_eq!(ndcg_at_k(&ranking, truth, ranking.len()) > 0.0, hit_full == 1.0);
        }
    }

    #[test]
    fn t_test_identical_samples_degenerate() {
        let a = [0.3, 0.5, 0.7, 0.2];
        let r = paired_t_test(&a, &a).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn t_test_constant_shift_degenerate() {
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let a: Vec<f64> = b.iter().map(|x| x + 1.0).collect();
        let r = paired_t_test(&a, &b).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 0.0);
    }

    /// Hand-worked paired fixture: before/after values of 10 subjects.
    /// Differences 2, -1, 3, 4, 0, 2, 1, 3, -2, 2: mean 1.4, squared
    /// deviations sum 32.4, variance 3.6, se = sqrt(3.6/10) = 0.6, so
    /// t = 1.4/0.6 = 2.3333 with df 9; two-sided p ~ 0.0448 from t tables
    /// (between the 2.262 -> 0.05 and 2.398 -> 0.04 df-9 quantiles).
    #[test]
    fn t_test_textbook_fixture() {
        let before = [70.0, 68.0, 75.0, 80.0, 66.0, 72.0, 69.0, 74.0, 71.0, 73.0];
        let after = [68.0, 69.0, 72.0, 76.0, 66.0, 70.0, 68.0, 71.0, 73.0, 71.0];
        let r = paired_t_test(&before, &after).unwrap();
        assert!((r.t - 7.0 / 3.0).abs() < 1e-9, "t = {}", r.t);
        assert!((r.p - 0.0448).abs() < 1.5e-3, "p = {}", r.p);
    }

    #[test]
    fn holm_step_down_hand_example() {
        let raw = vec![
            (
                "c1".to_string(),
                TTestResult {
                    t: 3.0,
                    p: 0.01,
                    degenerate: false,
                },
            ),
            (
                "c2".to_string(),
                TTestResult {
                    t: 2.0,
                    p: 0.04,
                    degenerate: false,
                },
            ),
        ];
        let res = holm_bonferroni(&raw, 0.05).unwrap();
        // 0.01 <= 0.05/2, then 0.04 <= 0.05/1: both rejected
        assert!(res.iter().all(|r| r.significant));

        let raw = vec![
            (
                "c1".to_string(),
                TTestResult {
                    t: 0.0,
                    p: 0.03,
                    degenerate: false,
                },
            ),
            (
                "c2".to_string(),
                TTestResult {
                    t: 0.0,
                    p: 0.04,
                    degenerate: false,
                },
            ),
        ];
        let res = holm_bonferroni(&raw, 0.05).unwrap();
        // 0.03 > 0.05/2: stop immediately, nothing rejected
        assert!(res.iter().all(|r| !r.significant));
    }

    #[test]
    fn holm_never_adds_rejections() {
        let ps = [0.001, 0.02, 0.2, 0.9, 0.049];
        let raw: Vec<(String, TTestResult)> = ps
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                (
                    format!("c{i}"),
                    TTestResult {
                        t: 0.0,
                        p,
                        degenerate: false,
                    },
                )
            })
            .collect();
        let res = holm_bonferroni(&raw, 0.05).unwrap();
        for r in &res {
            if r.significant {
                assert!(r.p <= 0.05, "corrected rejection implies raw rejection");
            }
        }
        // all p = 1 -> nothing
        let ones: Vec<(String, TTestResult)> = (0..3)
            .map(|i| {
                (
                    format!("c{i}"),
                    TTestResult {
                        t: 0.0,
                        p: 1.0,
                        degenerate: false,
                    },
                )
            })
            .collect();
        assert!(holm_bonferroni(&ones, 0.05)
            .unwrap()
            .iter()
            .all(|r| !r.significant));
        // single comparison reduces to plain threshold
        let single = vec![(
            "only".to_string(),
            TTestResult {
                t: 0.0,
                p: 0.049,
                degenerate: false,
            },
        )];
        assert!(holm_bonferroni(&single, 0.05).unwrap()[0].significant);
    }

    fn method(label: &str, rankings: &[(&str, &[&str])], truth: &BTreeMap<UserId, ItemId>) -> MethodMetrics {
        let map: BTreeMap<UserId, Vec<ItemId>> = rankings
            .iter()
            .map(|(u, items)| (UserId::new(*u), ids(items)))
            .collect();
        evaluate_method(label, &map, truth, 0.0, 0.0).unwrap().0
    }

    #[test]
    fn aggregate_means_match_per_user_vectors() {
        let truth: BTreeMap<UserId, ItemId> = [
            (UserId::new("u1"), ItemId::new("a")),
            (UserId::new("u2"), ItemId::new("x")),
        ]
        .into();
        let m = method(
            "base",
            &[("u1", &["a", "b", "c"]), ("u2", &["p", "q", "x"])],
            &truth,
        );
        let (reports, _) = aggregate_report(&[m.clone()], "base", 0.05).unwrap();
        for metric in METRIC_NAMES {
            let brute = m.per_user[metric].iter().sum::<f64>() / m.per_user[metric].len() as f64;
            assert!((reports[0].values[metric] - brute).abs() < 1e-12);
        }
        // single method, single comparison family empty: no stars
        assert!(reports[0].significance.is_empty());
    }

    #[test]
    fn identical_methods_get_no_stars() {
        let truth: BTreeMap<UserId, ItemId> =
            [(UserId::new("u1"), ItemId::new("a")), (UserId::new("u2"), ItemId::new("b"))].into();
        let a = method("base", &[("u1", &["a", "b"]), ("u2", &["a", "b"])], &truth);
        let mut b = a.clone();
        b.label = "variant".into();
        let (reports, table) = aggregate_report(&[a, b], "base", 0.05).unwrap();
        let variant = reports.iter().find(|r| r.label == "variant").unwrap();
        assert!(variant.significance.iter().all(|s| !s.significant));
        assert!(table.contains("base") && table.contains("variant"));
    }

    #[test]
    fn mismatched_user_sets_error() {
        let truth: BTreeMap<UserId, ItemId> =
            [(UserId::new("u1"), ItemId::new("a")), (UserId::new("u2"), ItemId::new("b"))].into();
        let a = method("base", &[("u1", &["a", "b"]), ("u2", &["a", "b"])], &truth);
        let b = method("variant", &[("u1", &["a", "b"])], &truth);
        assert!(aggregate_report(&[a, b], "base", 0.05).is_err());
    }

    #[test]
    fn retrieval_miss_counted() {
        let truth: BTreeMap<UserId, ItemId> =
            [(UserId::new("u1"), ItemId::new("zz"))].into();
        let map: BTreeMap<UserId, Vec<ItemId>> =
            [(UserId::new("u1"), ids(&["a", "b"]))].into();
        let (m, miss_rate) = evaluate_method("base", &map, &truth, 0.0, 0.0).unwrap();
        assert_eq!(miss_rate, 1.0);
        assert!(m.per_user["HR@5"].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn report_file_roundtrip() {
        let truth: BTreeMap<UserId, ItemId> =
            [(UserId::new("u1"), ItemId::new("a")), (UserId::new("u2"), ItemId::new("b"))].into();
        let a = method("base", &[("u1", &["a", "b"]), ("u2", &["b", "a"])], &truth);
        let (reports, _) = aggregate_report(&[a], "base", 0.05).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("report.json");
        write_reports(&p, &reports).unwrap();
        let back = read_reports(&p).unwrap();
        assert_eq!(back.len(), reports.len());
        assert_eq!(back[0].values, reports[0].values);
    }
}
