use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use planbench_core::curriculum::TestInstance;
use planbench_core::evaluator::{EvalRecord, EvalTable};

use crate::Llm;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    /// Same order as the input instances.
    pub records: Vec<EvalRecord>,
    pub table: EvalTable,
}

/// Queries every instance with at most `parallelism` requests in flight.
/// Failures become `Errored` records; the suite itself never aborts.
pub fn run_suite(instances: &[TestInstance], llm: &Llm) -> SuiteResult {
    let slots: Mutex<Vec<Option<EvalRecord>>> = Mutex::new(vec![None; instances.len()]);
    let next = AtomicUsize::new(0);
    let workers = llm.config().parallelism.min(instances.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(instance) = instances.get(i) else { break };
                let start = Instant::now();
                let record = match llm.query(&instance.prompt) {
                    Ok(c) => EvalRecord::scored(instance, c.text, c.latency),
                    Err(e) => EvalRecord::errored(instance, e.to_string(), start.elapsed().as_secs_f64()),
                };
                slots.lock().expect("no poisoned workers")[i] = Some(record);
            });
        }
    });
    let records: Vec<EvalRecord> = slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect();
    let table = EvalTable::from_records(&records);
    SuiteResult { records, table }
}
