//! pass@k estimation and campaign-level aggregates.
//!
//! pass@k is the probability that at least one of k snippets drawn (without
//! replacement) from a batch of n, of which c passed, is a pass. The unbiased
//! estimator `1 - C(n-c, k) / C(n, k)` is evaluated in product form so large
//! n never overflows:
//!
//! ```text
//! pass@k = 1 - prod_{i=0}^{k-1} (n - c - i) / (n - i)
//! ```
//!
//! with the convention that the product is 0 (hence pass@k = 1) when
//! `n - c < k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{EvalRecord, FailureClass};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("k={k} outside [1, n={n}]")]
    Domain { n: u64, k: u64 },
    #[error("pass count c={c} exceeds sample count n={n}")]
    BadCounts { n: u64, c: u64 },
    #[error("no evaluation records")]
    Empty,
}

/// Snippet counts for one batch: `n` generated, `c` counted as passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassCounts {
    pub n: u64,
    pub c: u64,
}

impl PassCounts {
    pub fn new(n: u64, c: u64) -> Result<Self, MetricsError> {
        if c > n {
            return Err(MetricsError::BadCounts { n, c });
        }
        Ok(Self { n, c })
    }
}

/// Unbiased pass@k estimate in [0, 1].
pub fn pass_at_k(counts: PassCounts, k: u64) -> Result<f64, MetricsError> {
    let PassCounts { n, c } = counts;
    if c > n {
        return Err(MetricsError::BadCounts { n, c });
    }
    if k < 1 || k > n {
        return Err(MetricsError::Domain { n, k });
    }
    let fails = n - c;
    if fails < k {
        return Ok(1.0);
    }
    let mut miss = 1.0f64;
    for i in 0..k {
        miss *= (fails - i) as f64 / (n - i) as f64;
    }
    Ok(1.0 - miss)
}

/// A probability rounded to 4 decimal places, the precision used in
/// human-readable reports.
pub fn round4(p: f64) -> f64 {
    (p * 10_000.0).round() / 10_000.0
}

/// Aggregates over one campaign's evaluation records.
///
/// Two pass definitions are tracked side by side: `valid` (compiles and the
/// simulation finishes without crashing) and `ipc` (valid and the measured
/// IPC is at least `threshold`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub n: u64,
    pub c_valid: u64,
    pub c_ipc: u64,
    pub threshold: f64,
    pub best_ipc: Option<f64>,
    pub failure_histogram: BTreeMap<FailureClass, u64>,
    /// Keys are `"<definition>@<k>"`, e.g. `"valid@1"`, `"ipc@5"`. Entries
    /// for k greater than n are omitted.
    pub pass_at: BTreeMap<String, f64>,
}

/// Fold evaluation records into campaign statistics. pass@k is filled for
/// k in {1, 5} under both pass definitions.
pub fn campaign_stats(
    records: &[EvalRecord],
    threshold: f64,
) -> Result<CampaignStats, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len() as u64;
    let mut c_valid = 0u64;
    let mut c_ipc = 0u64;
    let mut best_ipc: Option<f64> = None;
    let mut failure_histogram = BTreeMap::new();
    for record in records {
        *failure_histogram.entry(record.failure).or_insert(0) += 1;
        if let Some(ipc) = record.ipc {
            c_valid += 1;
            if ipc >= threshold {
                c_ipc += 1;
            }
            best_ipc = Some(best_ipc.map_or(ipc, |b: f64| b.max(ipc)));
        }
    }

    let mut pass_at = BTreeMap::new();
    for k in [1u64, 5] {
        if k > n {
            continue;
        }
        let valid = pass_at_k(PassCounts { n, c: c_valid }, k)?;
        let ipc = pass_at_k(PassCounts { n, c: c_ipc }, k)?;
        pass_at.insert(format!("valid@{k}"), valid);
        pass_at.insert(format!("ipc@{k}"), ipc);
    }

    Ok(CampaignStats {
        n,
        c_valid,
        c_ipc,
        threshold,
        best_ipc,
        failure_histogram,
        pass_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::ExtractionStatus;
    use proptest::prelude::*;

    /// Exhaustive oracle: enumerate every k-subset of n items where the
    /// first c items pass, and count subsets containing at least one pass.
    fn pass_at_k_oracle(n: u64, c: u64, k: u64) -> f64 {
        assert!(n <= 20, "oracle is exponential in n");
        let pass_mask: u32 = if c == 0 { 0 } else { (1u32 << c) - 1 };
        let mut total = 0u64;
        let mut hit = 0u64;
        for mask in 0u32..(1u32 << n) {
            if u64::from(mask.count_ones()) != k {
                continue;
            }
            total += 1;
            if mask & pass_mask != 0 {
                hit += 1;
            }
        }
        hit as f64 / total as f64
    }

    fn record(failure: FailureClass, ipc: Option<f64>) -> EvalRecord {
        EvalRecord {
            snippet_id: "0000000000000000".into(),
            extraction: ExtractionStatus::Fenced,
            compile_ok: ipc.is_some(),
            outcome: None,
            failure,
            ipc,
        }
    }

    #[test]
    fn reported_validity_numbers() {
        let counts = PassCounts::new(5000, 3998).unwrap();
        let p1 = pass_at_k(counts, 1).unwrap();
        let p5 = pass_at_k(counts, 5).unwrap();
        assert!((p1 - 0.7996).abs() < 1e-12);
        assert!((p5 - 0.9997).abs() < 1e-4);
    }

    #[test]
    fn reported_ipc_threshold_numbers() {
        let counts = PassCounts::new(5000, 3537).unwrap();
        let p1 = pass_at_k(counts, 1).unwrap();
        let p5 = pass_at_k(counts, 5).unwrap();
        assert!((p1 - 0.7074).abs() < 1e-12);
        assert!((p5 - 0.9979).abs() < 1e-4);
    }

    #[test]
    fn degenerate_counts() {
        assert_eq!(pass_at_k(PassCounts { n: 7, c: 7 }, 3).unwrap(), 1.0);
        assert_eq!(pass_at_k(PassCounts { n: 7, c: 0 }, 3).unwrap(), 0.0);
        // n - c < k forces probability 1.
        assert_eq!(pass_at_k(PassCounts { n: 5, c: 4 }, 3).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(
            pass_at_k(PassCounts { n: 5, c: 2 }, 0),
            Err(MetricsError::Domain { n: 5, k: 0 })
        );
        assert_eq!(
            pass_at_k(PassCounts { n: 5, c: 2 }, 6),
            Err(MetricsError::Domain { n: 5, k: 6 })
        );
        assert!(PassCounts::new(3, 4).is_err());
    }

    #[test]
    fn matches_subset_enumeration_up_to_n12() {
        for n in 1..=12u64 {
            for c in 0..=n {
                for k in 1..=n {
                    let est = pass_at_k(PassCounts { n, c }, k).unwrap();
                    let oracle = pass_at_k_oracle(n, c, k);
                    assert!(
                        (est - oracle).abs() < 1e-12,
                        "n={n} c={c} k={k}: {est} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn stats_over_records() {
        let mut records = vec![
            record(FailureClass::None, Some(0.799607)),
            record(FailureClass::None, Some(0.3)),
            record(FailureClass::CompileError, None),
            record(FailureClass::SimCrash, None),
        ];
        records.push(record(FailureClass::None, Some(0.55)));
        let stats = campaign_stats(&records, 0.5).unwrap();
        assert_eq!(stats.n, 5);
        assert_eq!(stats.c_valid, 3);
        assert_eq!(stats.c_ipc, 2);
        assert_eq!(stats.best_ipc, Some(0.799607));
        assert_eq!(stats.failure_histogram[&FailureClass::CompileError], 1);
        assert_eq!(stats.failure_histogram[&FailureClass::None], 3);
        let non_none: u64 = stats
            .failure_histogram
            .iter()
            .filter(|(class, _)| **class != FailureClass::None)
            .map(|(_, count)| count)
            .sum();
        assert_eq!(non_none, stats.n - stats.c_valid);
        assert!((stats.pass_at["valid@1"] - 0.6).abs() < 1e-12);
        assert!((stats.pass_at["valid@5"] - 1.0).abs() < 1e-12);
        // thresholded definition is never easier than validity
        assert!(stats.pass_at["ipc@1"] <= stats.pass_at["valid@1"]);
    }

    #[test]
    fn full_scale_campaign_counts() {
        // 5,000 records of which 1,002 fail: c_valid = 3,998.
        let mut records = Vec::with_capacity(5000);
        for i in 0..3998 {
            let ipc = if i == 0 { 0.799607 } else { 0.3 };
            records.push(record(FailureClass::None, Some(ipc)));
        }
        for _ in 0..1002 {
            records.push(record(FailureClass::SimCrash, None));
        }
        let stats = campaign_stats(&records, 0.5).unwrap();
        assert_eq!(stats.n, 5000);
        assert_eq!(stats.c_valid, 3998);
        assert_eq!(stats.best_ipc, Some(0.799607));
        assert!((stats.pass_at["valid@1"] - 0.7996).abs() < 1e-12);
        assert!((stats.pass_at["valid@5"] - 0.9997).abs() < 1e-4);
    }

    #[test]
    fn threshold_is_inclusive() {
        let records = vec![record(FailureClass::None, Some(0.5))];
        let stats = campaign_stats(&records, 0.5).unwrap();
        assert_eq!(stats.c_ipc, 1);
        let below = vec![record(FailureClass::None, Some(0.3))];
        let stats = campaign_stats(&below, 0.5).unwrap();
        assert_eq!(stats.c_valid, 1);
        assert_eq!(stats.c_ipc, 0);
    }

    #[test]
    fn empty_records_rejected() {
        assert_eq!(campaign_stats(&[], 0.5), Err(MetricsError::Empty));
    }

    #[test]
    fn small_n_omits_pass_at_5() {
        let records = vec![
            record(FailureClass::None, Some(1.0)),
            record(FailureClass::Refusal, None),
        ];
        let stats = campaign_stats(&records, 0.5).unwrap();
        assert!(stats.pass_at.contains_key("valid@1"));
        assert!(!stats.pass_at.contains_key("valid@5"));
    }

    proptest! {
        #[test]
        fn pass_at_1_equals_ratio(n in 1u64..2000, c_frac in 0.0f64..=1.0) {
            let c = ((n as f64) * c_frac).floor() as u64;
            let p = pass_at_k(PassCounts { n, c }, 1).unwrap();
            prop_assert!((p - c as f64 / n as f64).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_k(n in 2u64..200, c_frac in 0.0f64..=1.0, k in 1u64..100) {
            let c = ((n as f64) * c_frac).floor() as u64;
            prop_assume!(k < n);
            let pk = pass_at_k(PassCounts { n, c }, k).unwrap();
            let pk1 = pass_at_k(PassCounts { n, c }, k + 1).unwrap();
            prop_assert!(pk1 >= pk - 1e-15);
        }

        #[test]
        fn monotone_in_c(n in 1u64..200, c in 0u64..199, k in 1u64..50) {
            prop_assume!(c < n && k <= n);
            let lo = pass_at_k(PassCounts { n, c }, k).unwrap();
            let hi = pass_at_k(PassCounts { n, c: c + 1 }, k).unwrap();
            prop_assert!(hi >= lo - 1e-15);
        }

        #[test]
        fn full_draw_hits_any_pass(n in 1u64..200, c in 1u64..200) {
            prop_assume!(c <= n);
            let p = pass_at_k(PassCounts { n, c }, n).unwrap();
            prop_assert_eq!(p, 1.0);
        }
    }
}
