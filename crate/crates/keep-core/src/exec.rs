//! Execution policy shared by the stochastic training stages.

/// Chooses between the bit-reproducible single-worker path and lock-free
/// parallel updates. Walk generation and evaluation are deterministic in
/// either mode; SGNS and the factorization trainer are bit-exact only when
/// `deterministic` is set.
#[derive(Debug, Clone, Copy)]
pub struct ExecPolicy {
    pub deterministic: bool,
    pub threads: usize,
}

impl ExecPolicy {
    pub fn deterministic() -> Self {
        ExecPolicy {
            deterministic: true,
            threads: 1,
        }
    }

    pub fn parallel(threads: usize) -> Self {
        ExecPolicy {
            deterministic: false,
            threads: threads.max(1),
        }
    }

    /// Worker count honoring the deterministic flag.
    pub fn effective_threads(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.threads.max(1)
        }
    }
}

impl Default for ExecPolicy {
    fn default() -> Self {
        ExecPolicy::deterministic()
    }
}

/// Raw shared view over a parameter buffer for lock-free parallel updates.
///
/// Workers race on overlapping rows; the training stages that use this are
/// validated statistically, not bit-exactly, in parallel mode.
pub(crate) struct SharedParams {
    ptr: *mut f64,
    len: usize,
}

unsafe impl Send for SharedParams {}
unsafe impl Sync for SharedParams {}

impl SharedParams {
    pub(crate) fn new(buf: &mut [f64]) -> Self {
        SharedParams {
            ptr: buf.as_mut_ptr(),
            len: buf.len(),
        }
    }

    /// Callers must keep row ranges in bounds; overlapping access is racy by
    /// design.
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn slice_mut(&self, start: usize, len: usize) -> &mut [f64] {
        debug_assert!(start + len <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(start), len)
    }
}
