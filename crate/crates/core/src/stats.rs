//! Welch's two-sample t-test, means and edit distance.

use num_traits::Float;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("each sample needs at least two values")]
    TooFewSamples,
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("sample contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest<T> {
    pub statistic: T,
    /// Two-sided.
    pub p_value: T,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: T,
    pub method: &'static str,
}

pub fn mean<T: Float>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let n = T::from(xs.len())?;
    Some(xs.iter().fold(T::zero(), |acc, &x| acc + x) / n)
}

/// Unbiased sample variance.
pub fn variance<T: Float>(xs: &[T]) -> Option<T> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m));
    Some(ss / T::from(xs.len() - 1)?)
}

/// Independent-samples t-test without the equal-variance assumption.
pub fn ttest_ind<T: Float>(xs: &[T], ys: &[T]) -> Result<TTest<T>, StatsError> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(StatsError::TooFewSamples);
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let nx = T::from(xs.len()).ok_or(StatsError::NonFinite)?;
    let ny = T::from(ys.len()).ok_or(StatsError::NonFinite)?;
    let (mx, my) = (mean(xs).unwrap(), mean(ys).unwrap());
    let (vx, vy) = (variance(xs).unwrap(), variance(ys).unwrap());
    let (sx, sy) = (vx / nx, vy / ny);
    let se2 = sx + sy;
    if se2 <= T::zero() {
        return Err(StatsError::ZeroVariance);
    }
    let statistic = (mx - my) / se2.sqrt();
    let one = T::one();
    let df = se2 * se2 / (sx * sx / (nx - one) + sy * sy / (ny - one));
    let dist = StudentsT::new(0.0, 1.0, df.to_f64().ok_or(StatsError::NonFinite)?)
        .map_err(|_| StatsError::NonFinite)?;
    let t = statistic.abs().to_f64().ok_or(StatsError::NonFinite)?;
    let p = (2.0 * dist.sf(t)).min(1.0);
    Ok(TTest {
        statistic,
        p_value: T::from(p).ok_or(StatsError::NonFinite)?,
        df,
        method: "welch",
    })
}

/// Minimum number of insertions, deletions and substitutions turning `a`
/// into `b`.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance over whole ground actions.
pub fn plan_distance(a: &crate::pddl::Plan, b: &crate::pddl::Plan) -> usize {
    levenshtein(&a.tokens(), &b.tokens())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Full-matrix recurrence, kept separate from the two-row version.
    fn dp_oracle(a: &[u8], b: &[u8]) -> usize {
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }

    /// Two-sided tail of Student's t by Simpson integration of the density.
    fn t_two_sided(t: f64, df: f64) -> f64 {
        let ln_c = statrs::function::gamma::ln_gamma((df + 1.0) / 2.0)
            - statrs::function::gamma::ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        let f = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
        let n = 200_000;
        let h = t.abs() / n as f64;
        let mut s = f(0.0) + f(t.abs());
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        1.0 - 2.0 * (s * h / 3.0)
    }

    #[test]
    fn identical_samples() {
        let r = ttest_ind(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
        assert_eq!(r.method, "welch");
    }

    #[test]
    fn shifted_samples_separate() {
        let r = ttest_ind(&[1.0, 2.0, 3.0], &[101.0, 102.0, 103.0]).unwrap();
        assert!(r.p_value < 0.05);
        assert!(r.statistic < 0.0);
    }

    #[test]
    fn fixture_matches_direct_formula() {
        let xs = [12.1, 14.3, 9.8, 11.0, 13.7, 10.4];
        let ys = [15.2, 16.8, 14.1, 17.5, 13.9];
        let r = ttest_ind(&xs, &ys).unwrap();

        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let s2 = |v: &[f64]| {
            let mu = m(v);
            v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
        };
        let (a, b) = (s2(&xs) / 6.0, s2(&ys) / 5.0);
        let t = (m(&xs) - m(&ys)) / (a + b).sqrt();
        let df = (a + b).powi(2) / (a * a / 5.0 + b * b / 4.0);
        assert_abs_diff_eq!(r.statistic, t, epsilon = 1e-9);
        assert_abs_diff_eq!(r.df, df, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p_value, t_two_sided(t, df), epsilon = 1e-9);
    }

    #[test]
    fn generic_over_f32() {
        let r = ttest_ind(&[1.0f32, 2.0, 4.0], &[2.0f32, 3.0, 5.5]).unwrap();
        let r64 = ttest_ind(&[1.0f64, 2.0, 4.0], &[2.0f64, 3.0, 5.5]).unwrap();
        assert_abs_diff_eq!(r.statistic as f64, r64.statistic, epsilon = 1e-5);
        assert_abs_diff_eq!(r.p_value as f64, r64.p_value, epsilon = 1e-5);
    }

    #[test]
    fn degenerate_samples() {
        assert_eq!(ttest_ind(&[1.0], &[1.0, 2.0]).unwrap_err(), StatsError::TooFewSamples);
        assert_eq!(ttest_ind(&[2.0, 2.0], &[5.0, 5.0]).unwrap_err(), StatsError::ZeroVariance);
        assert_eq!(mean::<f64>(&[]), None);
        assert_eq!(mean(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0]), Some(35.0));
    }

    #[test]
    fn levenshtein_fixtures() {
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein::<u8>(b"", b"abc"), 3);
        assert_eq!(levenshtein(b"abc", b"abc"), 0);
        assert_eq!(levenshtein(b"flaw", b"lawn"), 2);
    }

    proptest! {
        #[test]
        fn levenshtein_matches_dp(a in prop::collection::vec(0u8..4, 0..12), b in prop::collection::vec(0u8..4, 0..12)) {
            prop_assert_eq!(levenshtein(&a, &b), dp_oracle(&a, &b));
        }

        #[test]
        fn levenshtein_is_a_metric(
            a in prop::collection::vec(0u8..3, 0..8),
            b in prop::collection::vec(0u8..3, 0..8),
            c in prop::collection::vec(0u8..3, 0..8),
        ) {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }
    }
}
