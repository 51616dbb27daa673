//! Measured outcomes of a simulation run, with deterministic JSON and CSV
//! renderings: the same config and seed always produce the same bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A peer newly flagging an offender, by round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub round: u64,
    pub detector: String,
    pub offender: String,
}

/// One executed double-spend and when the network first caught it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleSpendEvent {
    pub round: u64,
    pub offender: String,
    pub first_detection_round: Option<u64>,
    pub latency_rounds: Option<u64>,
}

/// One row of the per-round time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: u64,
    /// New (detector, offender) flags raised this round.
    pub detections: u64,
    /// Mean over offenders of the fraction of honest peers flagging them.
    pub aware_fraction: f64,
    pub bytes: u64,
    pub transactions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub rounds: u64,
    pub transactions_total: u64,
    /// Encounters skipped for insufficient balance.
    pub payments_skipped: u64,
    /// Payments whose contact list never arrived.
    pub transfer_failures: u64,
    pub bytes_total: u64,
    pub detections: Vec<DetectionEvent>,
    pub double_spends: Vec<DoubleSpendEvent>,
    /// Per offender: fraction of honest peers flagging it, per round.
    pub aware_curves: BTreeMap<String, Vec<f64>>,
    /// Per node class: histogram over scores 0..=100 of the opinions honest
    /// peers hold about members of that class.
    pub score_histograms: BTreeMap<String, Vec<u64>>,
    pub initial_balance_total: u64,
    pub final_balance_total: u64,
    /// Euro-cents conjured by double-spend forks (audit mode).
    pub created_surplus: u64,
    /// "strict" when no adversaries are configured, else "audit".
    pub conservation_mode: String,
    pub per_round: Vec<RoundRow>,
}

/// The stable summary schema written to `summary.json`.
#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    rounds: u64,
    transactions_total: u64,
    payments_skipped: u64,
    transfer_failures: u64,
    bytes_total: u64,
    detections_total: u64,
    detections: &'a [DetectionEvent],
    double_spends: &'a [DoubleSpendEvent],
    aware_fraction_final: BTreeMap<&'a str, f64>,
    score_histograms: &'a BTreeMap<String, Vec<u64>>,
    initial_balance_total: u64,
    final_balance_total: u64,
    created_surplus: u64,
    conservation_mode: &'a str,
}

impl Metrics {
    /// Distinct (detector, offender) flags raised over the whole run.
    pub fn detections_total(&self) -> u64 {
        self.detections.len() as u64
    }

    /// Pretty JSON summary, newline-terminated.
    pub fn summary_json(&self) -> String {
        let aware_fraction_final = self
            .aware_curves
            .iter()
            .map(|(offender, curve)| (offender.as_str(), curve.last().copied().unwrap_or(0.0)))
            .collect();
        let summary = Summary {
            seed: self.seed,
            rounds: self.rounds,
            transactions_total: self.transactions_total,
            payments_skipped: self.payments_skipped,
            transfer_failures: self.transfer_failures,
            bytes_total: self.bytes_total,
            detections_total: self.detections_total(),
            detections: &self.detections,
            double_spends: &self.double_spends,
            aware_fraction_final,
            score_histograms: &self.score_histograms,
            initial_balance_total: self.initial_balance_total,
            final_balance_total: self.final_balance_total,
            created_surplus: self.created_surplus,
            conservation_mode: &self.conservation_mode,
        };
        let mut out =
            serde_json::to_string_pretty(&summary).expect("summary serialization is infallible");
        out.push('\n');
        out
    }

    /// Per-round CSV time series: `round,detections,aware_fraction,bytes,transactions`.
    pub fn rounds_csv(&self) -> String {
        let mut out = String::from("round,detections,aware_fraction,bytes,transactions\n");
        for row in &self.per_round {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.round, row.detections, row.aware_fraction, row.bytes, row.transactions
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Metrics {
        Metrics {
            seed: 7,
            rounds: 2,
            transactions_total: 3,
            payments_skipped: 0,
            transfer_failures: 0,
            bytes_total: 1234,
            detections: vec![DetectionEvent {
                round: 1,
                detector: "aa".into(),
                offender: "bb".into(),
            }],
            double_spends: vec![DoubleSpendEvent {
                round: 0,
                offender: "bb".into(),
                first_detection_round: Some(1),
                latency_rounds: Some(1),
            }],
            aware_curves: BTreeMap::from([("bb".to_string(), vec![0.0, 0.5])]),
            score_histograms: BTreeMap::from([("honest".to_string(), vec![0; 101])]),
            initial_balance_total: 20_000,
            final_balance_total: 20_500,
            created_surplus: 500,
            conservation_mode: "audit".into(),
            per_round: vec![
                RoundRow {
                    round: 0,
                    detections: 0,
                    aware_fraction: 0.0,
                    bytes: 1000,
                    transactions: 2,
                },
                RoundRow {
                    round: 1,
                    detections: 1,
                    aware_fraction: 0.5,
                    bytes: 234,
                    transactions: 1,
                },
            ],
        }
    }

    #[test]
    fn summary_is_stable_and_terminated() {
        let m = sample();
        assert_eq!(m.summary_json(), m.summary_json());
        assert!(m.summary_json().ends_with('\n'));
        assert!(m.summary_json().contains("\"detections_total\": 1"));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = sample().rounds_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "round,detections,aware_fraction,bytes,transactions"
        );
        assert_eq!(lines[1], "0,0,0,1000,2");
        assert_eq!(lines[2], "1,1,0.5,234,1");
    }
}
