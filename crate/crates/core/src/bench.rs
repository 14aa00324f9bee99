//! Minimal timing helpers shared by benchmarks and timing-sensitive tests.

use std::time::{Duration, Instant};

/// Runs `f` once and returns its result together with the elapsed wall time.
pub fn time<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed())
}

/// Runs `f` `reps` times and returns the median elapsed wall time of the
/// individual runs. `reps` must be nonzero.
pub fn median_of<R>(reps: usize, mut f: impl FnMut() -> R) -> Duration {
    assert!(reps > 0);
    let mut samples: Vec<Duration> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            let r = f();
            let d = start.elapsed();
            std::hint::black_box(r);
            d
        })
        .collect();
    samples.sort();
    samples[samples.len() / 2]
}

/// Average nanoseconds per iteration when running `f` in a loop `iters`
/// times. The loop body result is black-boxed to keep the optimizer honest.
pub fn nanos_per_iter<R>(iters: usize, mut f: impl FnMut(usize) -> R) -> f64 {
    assert!(iters > 0);
    let start = Instant::now();
    for i in 0..iters {
        std::hint::black_box(f(i));
    }
    start.elapsed().as_nanos() as f64 / iters as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers_run() {
        let (v, d) = time(|| (0..1000u64).sum::<u64>());
        assert_eq!(v, 499_500);
        assert!(d.as_nanos() > 0 || d.as_nanos() == 0);
        let m = median_of(3, || 1 + 1);
        let _ = m;
        let ns = nanos_per_iter(100, |i| i * 2);
        assert!(ns >= 0.0);
    }
}
