//! Cooperative stop signal observed at every wait point.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Weak;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};

/// Something blocked on its own condition variable that must re-check its
/// predicate when the system stops.
pub(crate) trait Wake: Send + Sync {
    fn wake(&self);
}

#[derive(Default)]
pub(crate) struct StopSignal {
    flag: AtomicBool,
    sleepers: Mutex<()>,
    sleep_cv: Condvar,
    wakers: Mutex<Vec<Weak<dyn Wake>>>,
}

impl StopSignal {
    pub(crate) fn is_set(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }

    pub(crate) fn register(&self, waker: Weak<dyn Wake>) {
        let mut wakers = self.wakers.lock();
        wakers.retain(|w| w.strong_count() > 0);
        wakers.push(waker);
    }

    pub(crate) fn trigger(&self) {
        if self.flag.swap(true, Ordering::SeqCst) {
            return;
        }
        {
            let _g = self.sleepers.lock();
            self.sleep_cv.notify_all();
        }
        let wakers: Vec<_> = self
            .wakers
            .lock()
            .iter()
            .filter_map(Weak::upgrade)
            .collect();
        for waker in wakers {
            waker.wake();
        }
    }

    /// Sleep for `period` unless the signal fires first. Returns `false` if
    /// interrupted by the signal.
    pub(crate) fn sleep(&self, period: Duration) -> bool {
        let deadline = Instant::now() + period;
        let mut guard = self.sleepers.lock();
        loop {
            if self.is_set() {
                return false;
            }
            if self.sleep_cv.wait_until(&mut guard, deadline).timed_out() {
                return !self.is_set();
            }
        }
    }
}
