//! Concurrent genome evaluation over scoped worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use wxnas_core::nas::{Evaluator, Executor, Genome, Objectives};

/// Evaluates a batch on up to `workers` threads. Results come back in input
/// order, so the outcome does not depend on scheduling.
pub struct ThreadedExecutor {
    pub workers: usize,
}

impl ThreadedExecutor {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    pub fn from_available() -> Self {
        Self::new(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

impl Executor for ThreadedExecutor {
    fn run(&self, evaluator: &dyn Evaluator, genomes: &[Genome]) -> Vec<wxnas_core::Result<Objectives>> {
        let workers = self.workers.min(genomes.len());
        if workers <= 1 {
            return genomes.iter().map(|g| evaluator.evaluate(g)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<wxnas_core::Result<Objectives>>>> =
            genomes.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(g) = genomes.get(i) else { break };
                    let r = evaluator.evaluate(g);
                    *slots[i].lock().expect("result slot poisoned") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("result slot poisoned").expect("every genome evaluated"))
            .collect()
    }
}
