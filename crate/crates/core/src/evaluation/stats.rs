//! Summary statistics and the one-sided paired comparison used for regime claims.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    /// Standard error: sd / sqrt(n).
    pub se: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            sd: f64::NAN,
            se: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        n,
        mean,
        sd,
        se: sd / (n as f64).sqrt(),
    }
}

/// One-sided paired t-test of H1: mean(x - y) < 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

pub fn paired_less(x: &[f64], y: &[f64], alpha: f64) -> PairedTest {
    assert_eq!(x.len(), y.len(), "paired samples need equal lengths");
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let s = summarize(&d);
    let (t, p) = if s.n < 2 {
        (f64::NAN, 1.0)
    } else if s.se == 0.0 {
        if s.mean < 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (f64::NAN, 1.0)
        }
    } else {
        let t = s.mean / s.se;
        let dist = StudentsT::new(0.0, 1.0, (s.n - 1) as f64).expect("valid degrees of freedom");
        (t, dist.cdf(t))
    };
    PairedTest {
        n: s.n,
        mean_diff: s.mean,
        t,
        p_value: p,
        alpha,
        significant: p < alpha,
    }
}
