use std::time::Instant;

/// Floor on timing repetitions.
pub const MIN_REPETITIONS: usize = 20;

fn median(mut times: Vec<f64>) -> f64 {
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    }
}

fn seconds(f: &mut dyn FnMut()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64()
}

/// Median wall time in seconds of `f` over at least [`MIN_REPETITIONS`]
/// runs, after one untimed warm-up call.
pub fn median_seconds<F: FnMut()>(repetitions: usize, mut f: F) -> f64 {
    f();
    let reps = repetitions.max(MIN_REPETITIONS);
    median((0..reps).map(|_| seconds(&mut f)).collect())
}

/// Median wall time of each closure, timed in interleaved rounds so slow
/// drift in machine load affects all of them alike.
pub fn interleaved_medians(repetitions: usize, fs: &mut [Box<dyn FnMut() + '_>]) -> Vec<f64> {
    for f in fs.iter_mut() {
        f();
    }
    let reps = repetitions.max(MIN_REPETITIONS);
    let mut times = vec![Vec::with_capacity(reps); fs.len()];
    for _ in 0..reps {
        for (f, t) in fs.iter_mut().zip(&mut times) {
            t.push(seconds(f.as_mut()));
        }
    }
    times.into_iter().map(median).collect()
}

/// Runs `f` once and returns its value with the elapsed seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_at_least_minimum() {
        let mut calls = 0;
        let t = median_seconds(3, || calls += 1);
        assert_eq!(calls, MIN_REPETITIONS + 1);
        assert!(t >= 0.0);
    }

    #[test]
    fn interleaved_runs_every_closure() {
        let (mut a, mut b) = (0, 0);
        let t = interleaved_medians(5, &mut [Box::new(|| a += 1), Box::new(|| b += 1)]);
        assert_eq!(t.len(), 2);
        assert_eq!((a, b), (MIN_REPETITIONS + 1, MIN_REPETITIONS + 1));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
