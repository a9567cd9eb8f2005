use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymptotic Kolmogorov critical value at the 1% level.
pub const KS_C_01: f64 = 1.628;

/// A distribution function together with its left limits.
pub trait Cdf {
    /// `F(x) = P(X <= x)`.
    fn cdf(&self, x: f64) -> f64;

    /// `F(x-) = P(X < x)`. Equal to `cdf` for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

/// Continuous distribution function given by a closure.
pub struct Continuous<F>(pub F);

impl<F: Fn(f64) -> f64> Cdf for Continuous<F> {
    fn cdf(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// Step distribution function given by closures for `F(x)` and `F(x-)`.
pub struct Stepped<F, G> {
    pub right: F,
    pub left: G,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> Cdf for Stepped<F, G> {
    fn cdf(&self, x: f64) -> f64 {
        (self.right)(x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        (self.left)(x)
    }
}

/// Empirical distribution function.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("sample contains NaN".into()));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted: sample })
    }

    pub fn from_counts(sample: &[u64]) -> Result<Self> {
        Ecdf::new(sample.iter().map(|&v| v as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Empirical quantile: the smallest sample value `v` with `F_n(v) >= q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let i = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[i - 1]
    }
}

impl Cdf for Ecdf {
    fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v < x) as f64 / self.sorted.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl KsResult {
    fn new(statistic: f64, threshold: f64) -> Self {
        KsResult {
            statistic,
            threshold,
            pass: statistic <= threshold,
        }
    }

    /// Same statistic judged against a fixed tolerance.
    pub fn with_threshold(self, threshold: f64) -> Self {
        KsResult::new(self.statistic, threshold)
    }
}

/// Two-sample statistic `sup |F_a - F_b|`; threshold `c sqrt((m + n) / (m n))`.
pub fn ks_two_sample(a: &Ecdf, b: &Ecdf) -> KsResult {
    let (xa, xb) = (a.sorted(), b.sorted());
    let (m, n) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < m && j < n {
        let v = xa[i].min(xb[j]);
        // step past every copy of v in both samples before comparing
        while i < m && xa[i] <= v {
            i += 1;
        }
        while j < n && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    let threshold = KS_C_01 * ((m + n) as f64 / (m as f64 * n as f64)).sqrt();
    KsResult::new(d, threshold)
}

/// One-sample statistic against a reference law; threshold `c / sqrt(n)`.
/// Both `F` and `F(-)` are checked at each sample value, which makes the
/// statistic exact for discrete references too.
pub fn ks_one_sample<C: Cdf + ?Sized>(sample: &Ecdf, reference: &C) -> KsResult {
    let xs = sample.sorted();
    let n = xs.len();
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let v = xs[i];
        let below = i as f64 / n as f64;
        while i < n && xs[i] <= v {
            i += 1;
        }
        let at = i as f64 / n as f64;
        d = d
            .max((below - reference.cdf_left(v)).abs())
            .max((at - reference.cdf(v)).abs());
    }
    KsResult::new(d, KS_C_01 / (n as f64).sqrt())
}

/// `sup_y |F(y) - G(y)|` for `F` the law of a non-negative integer variable
/// (given by `F(m)` on integers) and `G` continuous and increasing with
/// `G(0) = 0`. The scan stops once both tails are below the running
/// supremum or at `cap`.
pub fn integer_law_distance<F, G>(f: F, g: G, cap: u64) -> f64
where
    F: Fn(u64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut d: f64 = 0.0;
    let mut g_lo = g(0.0);
    for m in 0..cap {
        let fm = f(m);
        let g_hi = g((m + 1) as f64);
        // F is flat on [m, m + 1) while G moves from g_lo to g_hi
        d = d.max((fm - g_lo).abs()).max((fm - g_hi).abs());
        if 1.0 - fm < d && 1.0 - g_hi < d {
            break;
        }
        g_lo = g_hi;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn identical_samples() {
        let a = Ecdf::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &a.clone()).statistic, 0.0);
    }

    #[test]
    fn disjoint_supports() {
        let a = Ecdf::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = Ecdf::new(vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &b).statistic, 1.0);
    }

    #[test]
    fn ties_are_stepped_together() {
        // F_a jumps to 1 at 1, F_b to 0.5; sup is 0.5 and not 1
        let a = Ecdf::new(vec![1.0, 1.0]).unwrap();
        let b = Ecdf::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &b).statistic, 0.5);
    }

    #[test]
    fn uniform_sample_passes() {
        let mut rng = RngStream::new(5, 0);
        let e = Ecdf::new((0..10_000).map(|_| rng.random::<f64>()).collect()).unwrap();
        let r = ks_one_sample(&e, &Continuous(|x: f64| x.clamp(0.0, 1.0)));
        assert!((r.threshold - 0.01628).abs() < 1e-12);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn discrete_reference_uses_left_limits() {
        // a sample that matches a fair coin exactly has distance 0
        let e = Ecdf::new(vec![0.0, 1.0]).unwrap();
        let coin = Stepped {
            right: |x: f64| if x < 0.0 { 0.0 } else if x < 1.0 { 0.5 } else { 1.0 },
            left: |x: f64| if x <= 0.0 { 0.0 } else if x <= 1.0 { 0.5 } else { 1.0 },
        };
        assert_eq!(ks_one_sample(&e, &coin).statistic, 0.0);
        // ignoring left limits would miss the gap below a jump
        let e = Ecdf::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(ks_one_sample(&e, &coin).statistic, 0.5);
    }

    #[test]
    fn integer_distance_to_itself_shifted() {
        // F(m) = 1 - 2^-(m+1) against G(y) = 1 - 2^-y: gap at y -> (m+1)- is 2^-(m+1) - 2^-(m+1) = 0,
        // at y = m it is 2^-m - 2^-(m+1) = 2^-(m+1), largest at m = 0
        let d = integer_law_distance(|m| 1.0 - 0.5f64.powi(m as i32 + 1), |y| 1.0 - 0.5f64.powf(y), 1000);
        assert!((d - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ecdf_is_monotone_and_right_continuous(
            sample in prop::collection::vec(-100i32..100, 1..60),
            grid in prop::collection::vec(-120.0f64..120.0, 1..40),
        ) {
            let e = Ecdf::new(sample.iter().map(|&v| v as f64).collect()).unwrap();
            let mut grid = grid;
            grid.sort_by(f64::total_cmp);
            let mut prev = 0.0;
            for &x in &grid {
                let f = e.cdf(x);
                prop_assert!(f >= prev);
                prop_assert!(e.cdf_left(x) <= f);
                prev = f;
            }
            for &v in e.sorted() {
                prop_assert_eq!(e.cdf(v), e.cdf(v + 1e-9));
            }
            prop_assert_eq!(e.cdf(f64::NEG_INFINITY), 0.0);
            prop_assert_eq!(e.cdf(f64::INFINITY), 1.0);
        }

        #[test]
        fn two_sample_statistic_is_symmetric_and_order_free(
            a in prop::collection::vec(0u8..20, 1..50),
            b in prop::collection::vec(0u8..20, 1..50),
        ) {
            let ea = Ecdf::new(a.iter().map(|&v| v as f64).collect()).unwrap();
            let eb = Ecdf::new(b.iter().map(|&v| v as f64).collect()).unwrap();
            let mut rev = a.clone();
            rev.reverse();
            let er = Ecdf::new(rev.iter().map(|&v| v as f64).collect()).unwrap();
            let d = ks_two_sample(&ea, &eb).statistic;
            prop_assert_eq!(d, ks_two_sample(&eb, &ea).statistic);
            prop_assert_eq!(d, ks_two_sample(&er, &eb).statistic);
            // brute force over the support
            let brute = (0..20).map(|v| (ea.cdf(v as f64) - eb.cdf(v as f64)).abs()).fold(0.0, f64::max);
            prop_assert!((d - brute).abs() < 1e-15);
        }
    }
}
