use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::series::{EstimateSequence, TimeSeries};

/// Prefix means `t^{-1} sum_{j<=t} x_j`, `t = 1..n`.
pub fn prefix_mean<T: Scalar>(ts: &TimeSeries<T>) -> Result<EstimateSequence<T>> {
    let mut sum = T::zero();
    let means = ts
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            sum += x;
            sum / T::from_count(i + 1)
        })
        .collect();
    EstimateSequence::from_scalars(ts.len(), 1, means)
}

/// Total order on finite floats, for the heaps below.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Finite<T>(T);

impl<T: Scalar> Eq for Finite<T> {}

impl<T: Scalar> PartialOrd for Finite<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Finite<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).expect("finite values")
    }
}

/// Running median over a growing prefix: a max-heap holds the lower half
/// and a min-heap the upper half, with the lower half at most one larger.
#[derive(Debug, Default)]
pub struct RunningMedian<T: Scalar> {
    lower: BinaryHeap<Finite<T>>,
    upper: BinaryHeap<Reverse<Finite<T>>>,
}

impl<T: Scalar> RunningMedian<T> {
    pub fn new() -> Self {
        Self {
            lower: BinaryHeap::new(),
            upper: BinaryHeap::new(),
        }
    }

    pub fn push(&mut self, x: T) {
        match self.lower.peek() {
            Some(top) if x > top.0 => self.upper.push(Reverse(Finite(x))),
            _ => self.lower.push(Finite(x)),
        }
        if self.lower.len() > self.upper.len() + 1 {
            let v = self.lower.pop().expect("non-empty");
            self.upper.push(Reverse(v));
        } else if self.upper.len() > self.lower.len() {
            let Reverse(v) = self.upper.pop().expect("non-empty");
            self.lower.push(v);
        }
    }

    pub fn median(&self) -> Option<T> {
        let lo = self.lower.peek()?.0;
        if self.lower.len() > self.upper.len() {
            Some(lo)
        } else {
            let hi = self.upper.peek()?.0 .0;
            Some(lo + (hi - lo) / T::lit(2.0))
        }
    }
}

/// Prefix medians; even prefixes use the midpoint of the two central order
/// statistics.
pub fn prefix_median<T: Scalar>(ts: &TimeSeries<T>) -> Result<EstimateSequence<T>> {
    let mut rm = RunningMedian::new();
    let medians = ts
        .iter()
        .map(|&x| {
            rm.push(x);
            rm.median().expect("non-empty")
        })
        .collect();
    EstimateSequence::from_scalars(ts.len(), 1, medians)
}

pub(crate) fn median_of<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    crate::stats::sort_floats(&mut v);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (lo, hi) = (v[n / 2 - 1], v[n / 2]);
        lo + (hi - lo) / T::lit(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: &[f64]) -> TimeSeries<f64> {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mean_examples() {
        let s = prefix_mean(&ts(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!(s.scalars().unwrap(), &[1.0, 1.5, 2.0, 2.5, 3.0]);
        let s = prefix_mean(&ts(&[-1.0, 1.0])).unwrap();
        assert_eq!(s.scalars().unwrap(), &[-1.0, 0.0]);
        let s = prefix_mean(&ts(&[2.5; 6])).unwrap();
        assert!(s.scalars().unwrap().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn median_examples() {
        let s = prefix_median(&ts(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.scalars().unwrap(), &[3.0, 2.0, 2.0]);
        let s = prefix_median(&ts(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!(s.scalars().unwrap(), &[1.0, 1.5, 2.0, 2.5, 3.0]);
        let s = prefix_median(&ts(&[-4.0; 5])).unwrap();
        assert!(s.scalars().unwrap().iter().all(|&v| v == -4.0));
    }

    #[test]
    fn running_median_matches_sort() {
        let data = [5.0, -1.0, 3.0, 3.0, 8.0, 0.5, -2.0, 7.0, 7.0, 1.0];
        let s = prefix_median(&ts(&data)).unwrap();
        for (t, v) in s.iter() {
            assert_eq!(v[0], median_of(&data[..t]), "t = {t}");
        }
    }

    #[test]
    fn works_for_f32() {
        let s = prefix_median(&TimeSeries::new(vec![3.0f32, 1.0, 2.0, 10.0]).unwrap()).unwrap();
        assert_eq!(s.scalars().unwrap(), &[3.0f32, 2.0, 2.0, 2.5]);
    }
}
