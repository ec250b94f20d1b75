//! Per-thread operation counter used as a hardware-independent cost proxy.
//!
//! Every kernel-weight accumulation (one pixel touched by one mask point's
//! window) and every diffusion stencil application adds one unit.

use std::cell::Cell;

thread_local! {
    static COUNT: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub fn add(n: u64) {
    COUNT.with(|c| c.set(c.get().wrapping_add(n)));
}

pub fn reset() {
    COUNT.with(|c| c.set(0));
}

pub fn get() -> u64 {
    COUNT.with(|c| c.get())
}

/// Run `f` and return its result with the number of operations it counted.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = get();
    let out = f();
    (out, get().wrapping_sub(before))
}
