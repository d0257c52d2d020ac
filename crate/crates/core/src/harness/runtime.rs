use std::collections::BTreeMap;

use serde::Serialize;

use super::run::TimingRecord;
use crate::descriptors::DescriptorKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub descriptor: DescriptorKind,
    pub evaluations: usize,
    /// Mean of setup time plus the first `evaluations` evaluation times.
    pub mean_seconds: f64,
    pub units: usize,
}

/// Mean cumulative wall-clock per evaluation count per descriptor. A search
/// that stopped early contributes its final total to later counts.
pub fn report_runtime(timings: &[TimingRecord]) -> Vec<RuntimeRow> {
    let mut by_descriptor: BTreeMap<DescriptorKind, Vec<&TimingRecord>> = BTreeMap::new();
    for t in timings {
        by_descriptor.entry(t.descriptor).or_default().push(t);
    }
    let mut rows = Vec::new();
    for (descriptor, group) in by_descriptor {
        let max_e = group.iter().map(|t| t.eval_seconds.len()).max().unwrap_or(0);
        let cumulative: Vec<Vec<f64>> = group
            .iter()
            .map(|t| {
                let mut acc = t.setup_seconds;
                t.eval_seconds
                    .iter()
                    .map(|s| {
                        acc += s;
                        acc
                    })
                    .collect()
            })
            .collect();
        for e in 1..=max_e {
            let total: f64 = cumulative
                .iter()
                .zip(&group)
                .map(|(c, t)| c.get(e - 1).or(c.last()).copied().unwrap_or(t.setup_seconds))
                .sum();
            rows.push(RuntimeRow {
                descriptor,
                evaluations: e,
                mean_seconds: total / group.len() as f64,
                units: group.len(),
            });
        }
    }
    rows
}

pub fn runtime_csv(rows: &[RuntimeRow]) -> String {
    let mut out = String::from("descriptor,evaluations,mean_seconds,units\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6e},{}\n",
            r.descriptor, r.evaluations, r.mean_seconds, r.units
        ));
    }
    out
}
