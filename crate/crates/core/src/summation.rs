//! Neumaier compensated accumulation.
//!
//! The lattice sums behind the periodized potential add many terms of mixed
//! sign whose total is much smaller than the individual magnitudes, so plain
//! `+=` loses digits. The accumulator also tracks the sum of absolute values,
//! which bounds the remaining rounding error.

#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
    abs_sum: f64,
    infinite: bool,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if x.is_infinite() {
            self.infinite = true;
            return;
        }
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs_sum += x.abs();
    }

    pub fn value(&self) -> f64 {
        if self.infinite {
            f64::INFINITY
        } else {
            self.sum + self.compensation
        }
    }

    /// Sum of the magnitudes of everything added so far.
    pub fn magnitude(&self) -> f64 {
        self.abs_sum
    }

    /// A conservative bound on the rounding error of [`value`](Self::value).
    pub fn rounding_bound(&self) -> f64 {
        4.0 * f64::EPSILON * (self.abs_sum + self.sum.abs())
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        let abs_sum = self.abs_sum + other.abs_sum;
        self.infinite |= other.infinite;
        self.add(other.sum);
        self.add(other.compensation);
        self.abs_sum = abs_sum;
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_digits_lost_by_naive_summation() {
        let terms = [1.0, 1e100, 1.0, -1e100];
        let naive: f64 = terms.iter().sum();
        assert_eq!(naive, 0.0);
        assert_eq!(compensated_sum(terms), 2.0);
    }

    #[test]
    fn infinite_term_poisons_the_sum() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        acc.add(f64::INFINITY);
        acc.add(-3.0);
        assert_eq!(acc.value(), f64::INFINITY);
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (1..1000).map(|k| (k as f64).sqrt().sin() * 1e3).collect();
        let whole = compensated_sum(xs.iter().copied());
        let mut a: CompensatedSum = xs[..400].iter().copied().collect();
        let b: CompensatedSum = xs[400..].iter().copied().collect();
        a.merge(&b);
        assert!((a.value() - whole).abs() <= 1e-12 * whole.abs().max(1.0));
    }
}
