//! Per-instance evaluation records, their aggregation and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::curriculum::{TaskKind, TestInstance};
use crate::scoring::{score_completion, ExtractionOutcome, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance_id: String,
    pub task: TaskKind,
    pub num_blocks: usize,
    pub optimal_len: usize,
    /// `None` when the endpoint never produced text.
    pub completion: Option<String>,
    pub extraction: ExtractionOutcome,
    pub verdict: Verdict,
    /// Seconds spent obtaining the completion.
    pub latency: f64,
    pub diagnostics: String,
}

impl EvalRecord {
    pub fn scored(instance: &TestInstance, completion: String, latency: f64) -> Self {
        let score = score_completion(instance, &completion);
        EvalRecord {
            instance_id: instance.id.clone(),
            task: instance.task,
            num_blocks: instance.payload.num_blocks,
            optimal_len: instance.payload.reference_cost,
            completion: Some(completion),
            extraction: score.extraction,
            verdict: score.verdict,
            latency,
            diagnostics: score.diagnostics,
        }
    }

    pub fn errored(instance: &TestInstance, error: impl Into<String>, latency: f64) -> Self {
        EvalRecord {
            instance_id: instance.id.clone(),
            task: instance.task,
            num_blocks: instance.payload.num_blocks,
            optimal_len: instance.payload.reference_cost,
            completion: None,
            extraction: ExtractionOutcome::NotAttempted,
            verdict: Verdict::Errored,
            latency,
            diagnostics: error.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub total: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub ignored: usize,
    pub errored: usize,
}

impl Counts {
    fn add(&mut self, v: Verdict) {
        self.total += 1;
        match v {
            Verdict::Correct => self.correct += 1,
            Verdict::Incorrect => self.incorrect += 1,
            Verdict::Ignored => self.ignored += 1,
            Verdict::Errored => self.errored += 1,
        }
    }

    /// Correct share of all instances, in percent.
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownCell {
    pub num_blocks: usize,
    pub optimal_len: usize,
    pub total: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub tasks: BTreeMap<TaskKind, Counts>,
    pub overall: Counts,
    /// Sorted by (num_blocks, optimal_len).
    pub breakdown: Vec<BreakdownCell>,
}

impl EvalTable {
    /// Order-independent fold over records.
    pub fn from_records(records: &[EvalRecord]) -> Self {
        let mut tasks: BTreeMap<TaskKind, Counts> = BTreeMap::new();
        let mut overall = Counts::default();
        let mut cells: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for r in records {
            tasks.entry(r.task).or_default().add(r.verdict);
            overall.add(r.verdict);
            let cell = cells.entry((r.num_blocks, r.optimal_len)).or_default();
            cell.0 += 1;
            cell.1 += usize::from(r.verdict == Verdict::Correct);
        }
        EvalTable {
            tasks,
            overall,
            breakdown: cells
                .into_iter()
                .map(|((num_blocks, optimal_len), (total, correct))| BreakdownCell {
                    num_blocks,
                    optimal_len,
                    total,
                    correct,
                })
                .collect(),
        }
    }

    /// Markdown summary: one row per task plus a total row, then the
    /// breakdown by block count and optimal plan length.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Evaluation results\n\n");
        out.push_str("| Task | Instances | Correct | Incorrect | Ignored | Errored | Accuracy |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
        let row = |out: &mut String, name: &str, c: &Counts| {
            let _ = writeln!(
                out,
                "| {name} | {} | {} | {} | {} | {} | {:.2}% |",
                c.total,
                c.correct,
                c.incorrect,
                c.ignored,
                c.errored,
                c.accuracy()
            );
        };
        for (task, c) in &self.tasks {
            row(&mut out, task.as_str(), c);
        }
        row(&mut out, "**all**", &self.overall);
        out.push_str("\n## By block count and optimal plan length\n\n");
        out.push_str("| Blocks | Optimal length | Instances | Correct |\n");
        out.push_str("|---:|---:|---:|---:|\n");
        for c in &self.breakdown {
            let _ = writeln!(out, "| {} | {} | {} | {} |", c.num_blocks, c.optimal_len, c.total, c.correct);
        }
        out
    }
}

/// Histogram rows `num_blocks,optimal_len,correct,count`, split by
/// whether the instance was answered correctly.
pub fn histogram_csv(records: &[EvalRecord]) -> String {
    let mut cells: BTreeMap<(usize, usize, bool), usize> = BTreeMap::new();
    for r in records {
        *cells
            .entry((r.num_blocks, r.optimal_len, r.verdict == Verdict::Correct))
            .or_default() += 1;
    }
    let mut out = String::from("num_blocks,optimal_len,correct,count\n");
    for ((b, l, c), n) in cells {
        let _ = writeln!(out, "{b},{l},{c},{n}");
    }
    out
}

/// Markdown table and CSV histogram for a set of records.
pub fn report(records: &[EvalRecord]) -> (EvalTable, String, String) {
    let table = EvalTable::from_records(records);
    let md = table.to_markdown();
    (table, md, histogram_csv(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(task: TaskKind, blocks: usize, len: usize, verdict: Verdict) -> EvalRecord {
        EvalRecord {
            instance_id: format!("{task}-{blocks}-{len}"),
            task,
            num_blocks: blocks,
            optimal_len: len,
            completion: None,
            extraction: ExtractionOutcome::NotAttempted,
            verdict,
            latency: 0.0,
            diagnostics: String::new(),
        }
    }

    fn fixture() -> Vec<EvalRecord> {
        vec![
            rec(TaskKind::PlanGeneration, 3, 4, Verdict::Correct),
            rec(TaskKind::PlanGeneration, 3, 4, Verdict::Incorrect),
            rec(TaskKind::PlanGeneration, 4, 6, Verdict::Ignored),
            rec(TaskKind::OptimalPlanning, 4, 6, Verdict::Correct),
            rec(TaskKind::Replanning, 5, 8, Verdict::Errored),
        ]
    }

    #[test]
    fn empty_records() {
        let (t, md, csv) = report(&[]);
        assert_eq!(t.overall.total, 0);
        assert!(md.contains("| **all** | 0 | 0 | 0 | 0 | 0 | 0.00% |"));
        assert_eq!(csv, "num_blocks,optimal_len,correct,count\n");
    }

    #[test]
    fn counts_and_percentages() {
        let t = EvalTable::from_records(&fixture());
        let pg = t.tasks[&TaskKind::PlanGeneration];
        assert_eq!((pg.total, pg.correct, pg.incorrect, pg.ignored), (3, 1, 1, 1));
        assert!((pg.accuracy() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(t.overall.errored, 1);
        assert_eq!(t.breakdown.iter().map(|c| c.total).sum::<usize>(), 5);
    }

    #[test]
    fn markdown_golden() {
        let md = EvalTable::from_records(&fixture()).to_markdown();
        let expected = "# Evaluation results

| Task | Instances | Correct | Incorrect | Ignored | Errored | Accuracy |
|---|---:|---:|---:|---:|---:|---:|
| plan_generation | 3 | 1 | 1 | 1 | 0 | 33.33% |
| optimal_planning | 1 | 1 | 0 | 0 | 0 | 100.00% |
| replanning | 1 | 0 | 0 | 0 | 1 | 0.00% |
| **all** | 5 | 2 | 1 | 1 | 1 | 40.00% |

## By block count and optimal plan length

| Blocks | Optimal length | Instances | Correct |
|---:|---:|---:|---:|
| 3 | 4 | 2 | 1 |
| 4 | 6 | 2 | 1 |
| 5 | 8 | 1 | 0 |
";
        assert_eq!(md, expected);
    }

    #[test]
    fn histogram_marginals() {
        let csv = histogram_csv(&fixture());
        let total: usize = csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 5);
        assert!(csv.contains("3,4,true,1\n3,4,false,1\n") || csv.contains("3,4,false,1\n3,4,true,1\n"));
    }

    #[test]
    fn aggregation_ignores_order() {
        let mut recs = fixture();
        let a = EvalTable::from_records(&recs);
        recs.reverse();
        recs.swap(0, 2);
        assert_eq!(EvalTable::from_records(&recs), a);
    }
}
