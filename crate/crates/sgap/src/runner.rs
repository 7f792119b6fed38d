//! Parallel sweep execution.

use rayon::prelude::*;
use sgap_core::experiments::{Sweep, TrialOutcome};

use crate::error::{Error, Result};

/// Run every `(parameter, trial)` cell on a pool of `threads` workers.
///
/// Cells are independent, and results come back in `(parameter, trial)`
/// order, so the output does not depend on the thread count. The first error
/// in that order wins.
pub fn run_parallel<S: Sweep + ?Sized>(sweep: &S, base_seed: u64, threads: usize) -> Result<Vec<Vec<TrialOutcome>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let trials = sweep.trials();
    let cells: Vec<(usize, usize)> = (0..sweep.n_params())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let flat: Vec<_> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(p, t)| sweep.run_cell(p, t, base_seed))
            .collect()
    });
    let flat = flat.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(flat.chunks(trials.max(1)).map(<[_]>::to_vec).collect())
}
