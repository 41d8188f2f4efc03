//! OpenBLAS thread-count control.
//!
//! Trial-level parallelism lives in rayon; letting OpenBLAS also spawn its
//! own threads per GEMM oversubscribes the cores. Monte-Carlo drivers clamp
//! BLAS to one thread, single-shot linear algebra leaves it alone.

use std::sync::atomic::{AtomicI32, Ordering};

extern "C" {
    fn openblas_set_num_threads(n: i32);
}

static CURRENT: AtomicI32 = AtomicI32::new(0);

/// Set the OpenBLAS thread count (idempotent per value).
pub fn set_blas_threads(n: i32) {
    if CURRENT.swap(n, Ordering::SeqCst) != n {
        unsafe { openblas_set_num_threads(n) };
    }
}

/// Clamp BLAS to a single thread for the duration of trial-parallel work.
pub fn single_threaded_blas() {
    set_blas_threads(1);
}
