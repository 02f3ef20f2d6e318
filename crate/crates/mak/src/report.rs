//! JSON and text renderings of selection results and strategy comparisons.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use mak_core::{Comparison, Group, ObjectiveTerms, SelectionConfig, SelectionResult, Strategy, Warning};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub index: usize,
    pub ecle: f64,
    pub proximity: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub tailness: f64,
    pub proximity: f64,
    pub proximity_defined: bool,
    pub coverage_radius: f64,
    /// `tailness − proximity − coverage_radius`.
    pub value: f64,
}

impl From<&ObjectiveTerms> for ObjectiveReport {
    fn from(t: &ObjectiveTerms) -> Self {
        Self {
            tailness: t.tailness,
            proximity: t.proximity,
            proximity_defined: t.proximity_defined,
            coverage_radius: t.coverage_radius,
            value: t.value(),
        }
    }
}

/// Settings that only matter when ECLE is computed from views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSettings {
    pub repeats: usize,
    pub temperature: f64,
    pub batch_size: usize,
    pub computed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub selection: SelectionConfig,
    pub loss: LossSettings,
}

/// On-disk form of a selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub format_version: u32,
    pub config: RunConfig,
    /// Pool indices in pick order.
    pub selected: Vec<usize>,
    pub scores: Vec<SampleScore>,
    pub objective_terms: ObjectiveReport,
    pub candidates: Vec<usize>,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<Warning>,
}

impl ResultFile {
    pub fn new(config: RunConfig, res: &SelectionResult) -> Self {
        let scores = res
            .selected
            .iter()
            .map(|&j| SampleScore {
                index: j,
                ecle: res.raw_tailness[j],
                proximity: res.raw_proximity[j],
                q: res.score_q[j],
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            config,
            selected: res.selected.clone(),
            scores,
            objective_terms: (&res.objective).into(),
            candidates: res.candidates.clone(),
            diagnostics: res.diagnostics.clone(),
            warnings: res.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFile {
    pub format_version: u32,
    pub spec: mak_core::MixtureSpec,
    pub comparison: Comparison,
}

fn fmt_share(v: Option<&f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

/// Aligned text table, one row per strategy, followed by the φ line.
pub fn comparison_table(cmp: &Comparison) -> String {
    let header = [
        "strategy", "selected", "many", "medium", "few", "ood", "pairwise", "radius", "sum_ecle",
        "prox", "cover", "objective",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in &cmp.rows {
        let d = &r.diagnostics;
        rows.push(vec![
            r.strategy.to_string(),
            d.selected.to_string(),
            fmt_share(d.group_shares.get(&Group::Many)),
            fmt_share(d.group_shares.get(&Group::Medium)),
            fmt_share(d.group_shares.get(&Group::Few)),
            format!("{:.4}", d.ood_fraction),
            format!("{:.4}", d.mean_pairwise_cosine),
            d.covering_radius.map_or("-".into(), |v| format!("{v:.4}")),
            format!("{:.3}", r.objective.tailness),
            format!("{:.4}", r.objective.proximity),
            format!("{:.4}", r.objective.coverage_radius),
            format!("{:.3}", r.objective.value()),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| {
                if c == 0 {
                    format!("{v:<w$}", w = widths[c])
                } else {
                    format!("{v:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    let phi: Vec<String> = cmp.phi.iter().map(|(g, v)| format!("{}={v:.4}", g.name())).collect();
    let _ = writeln!(out, "phi (top 10% by loss): {}", phi.join(" "));
    out
}
