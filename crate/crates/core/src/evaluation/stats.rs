//! Two-group comparisons of a single feature between label 0 and label 1.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use super::{EvalError, Result};
use crate::dataset::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum GroupTest {
    /// Welch two-sample t, computed as group 0 minus group 1.
    WelchT,
    /// 2×k chi-square on the feature's distinct values.
    ChiSquare { max_levels: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub degrees_of_freedom: f64,
}

pub fn compare_groups(d: &Dataset, feature: &str, test: GroupTest) -> Result<GroupComparison> {
    d.require_both_classes()?;
    let j = d.feature_index(feature).ok_or_else(|| EvalError::UnknownFeature(feature.to_string()))?;
    let column = d.features().column(j);
    let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&v, &y) in column.iter().zip(d.labels()) {
        groups[usize::from(y)].push(v);
    }
    match test {
        GroupTest::WelchT => welch_t(&groups[0], &groups[1]),
        GroupTest::ChiSquare { max_levels } => chi_square(&groups, max_levels),
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub(crate) fn welch_t(a: &[f64], b: &[f64]) -> Result<GroupComparison> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::UndefinedStatistic("t-test needs two samples per group".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Err(EvalError::UndefinedStatistic("zero variance in both groups".into()));
    }
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let t = (ma - mb) / se2.sqrt();
    let p_value = if t == 0.0 {
        1.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(GroupComparison { statistic: t, p_value, degrees_of_freedom: df })
}

fn chi_square(groups: &[Vec<f64>; 2], max_levels: usize) -> Result<GroupComparison> {
    let mut levels: Vec<f64> = groups.iter().flatten().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() > max_levels {
        return Err(EvalError::UndefinedStatistic(format!(
            "{} distinct values exceed the chi-square limit of {max_levels}",
            levels.len()
        )));
    }
    if levels.len() < 2 {
        return Err(EvalError::UndefinedStatistic("chi-square needs at least two distinct values".into()));
    }
    let counts: Vec<[f64; 2]> = levels
        .iter()
        .map(|&l| {
            let c = |g: &Vec<f64>| g.iter().filter(|&&v| v == l).count() as f64;
            [c(&groups[0]), c(&groups[1])]
        })
        .collect();
    let rows = [groups[0].len() as f64, groups[1].len() as f64];
    let total = rows[0] + rows[1];
    let mut stat = 0.0;
    for col in &counts {
        let col_total = col[0] + col[1];
        for g in 0..2 {
            let expected = rows[g] * col_total / total;
            if expected == 0.0 {
                return Err(EvalError::UndefinedStatistic("expected cell count 0".into()));
            }
            stat += (col[g] - expected).powi(2) / expected;
        }
    }
    let df = (levels.len() - 1) as f64;
    let p_value = if stat == 0.0 {
        1.0
    } else {
        ChiSquared::new(df).expect("positive degrees of freedom").sf(stat)
    };
    Ok(GroupComparison { statistic: stat, p_value, degrees_of_freedom: df })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn two_column(values: &[f64], labels: Vec<u8>) -> Dataset {
        let x = Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
        Dataset::from_matrix(x, labels).unwrap()
    }

    #[test]
    fn identical_groups() {
        let d = two_column(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0], vec![0, 0, 0, 1, 1, 1]);
        let r = compare_groups(&d, "f0", GroupTest::WelchT).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn welch_reference_values() {
        // Hand-computed: a = (1,2,3,4), b = (2,4,6,8,10).
        // means 2.5, 6; vars 5/3, 10; se² = 5/12 + 2 = 29/12.
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let r = welch_t(&a, &b).unwrap();
        let se2: f64 = 29.0 / 12.0;
        assert!((r.statistic - (-3.5 / se2.sqrt())).abs() < 1e-14);
        let df = se2 * se2 / ((5.0f64 / 12.0).powi(2) / 3.0 + 4.0 / 4.0);
        assert!((r.degrees_of_freedom - df).abs() < 1e-12);
        assert!(r.p_value > 0.01 && r.p_value < 0.1);
    }

    #[test]
    fn welch_undefined_for_constant_groups() {
        let d = two_column(&[1.0, 1.0, 2.0, 2.0], vec![0, 0, 1, 1]);
        assert!(compare_groups(&d, "f0", GroupTest::WelchT).is_err());
    }

    #[test]
    fn chi_square_independence() {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (v, y, n) in [(0.0, 0u8, 50), (1.0, 0, 50), (0.0, 1, 50), (1.0, 1, 50)] {
            values.extend(std::iter::repeat(v).take(n));
            labels.extend(std::iter::repeat(y).take(n));
        }
        let d = two_column(&values, labels);
        let r = compare_groups(&d, "f0", GroupTest::ChiSquare { max_levels: 5 }).unwrap();
        assert_eq!((r.statistic, r.p_value, r.degrees_of_freedom), (0.0, 1.0, 1.0));
    }

    #[test]
    fn chi_square_reference_value() {
        // Table (10, 20 / 30, 40): stat = Σ (O-E)²/E with E from margins.
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (v, y, n) in [(0.0, 0u8, 10), (1.0, 0, 20), (0.0, 1, 30), (1.0, 1, 40)] {
            values.extend(std::iter::repeat(v).take(n));
            labels.extend(std::iter::repeat(y).take(n));
        }
        let d = two_column(&values, labels);
        let r = compare_groups(&d, "f0", GroupTest::ChiSquare { max_levels: 2 }).unwrap();
        let e = [[30.0 * 40.0 / 100.0, 30.0 * 60.0 / 100.0], [70.0 * 40.0 / 100.0, 70.0 * 60.0 / 100.0]];
        let o = [[10.0, 20.0], [30.0, 40.0]];
        let mut expect = 0.0;
        for g in 0..2 {
            for l in 0..2 {
                expect += (o[g][l] - e[g][l]) * (o[g][l] - e[g][l]) / e[g][l];
            }
        }
        assert!((r.statistic - expect).abs() < 1e-12);
        // df = 1: p = erfc(√(stat/2))
        let p = statrs::function::erf::erfc((expect / 2.0).sqrt());
        assert!((r.p_value - p).abs() < 1e-10);
    }

    #[test]
    fn chi_square_level_limit() {
        let d = two_column(&[1.0, 2.0, 3.0, 4.0], vec![0, 0, 1, 1]);
        assert!(compare_groups(&d, "f0", GroupTest::ChiSquare { max_levels: 3 }).is_err());
        assert!(compare_groups(&d, "nope", GroupTest::WelchT).is_err());
    }
}
