use ndarray::Array2;
use sparsebench::evaluation::{compare_groups, GroupTest};
use sparsebench::rng::SeededRng;
use sparsebench::Dataset;

fn abs_welch_t(values: &[f64], labels: &[u8]) -> f64 {
    let moments = |class: u8| {
        let g: Vec<f64> = values.iter().zip(labels).filter(|(_, &y)| y == class).map(|(&v, _)| v).collect();
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n)
    };
    let (m0, s0) = moments(0);
    let (m1, s1) = moments(1);
    ((m0 - m1) / (s0 + s1).sqrt()).abs()
}

/// Two-sided permutation p-value of the Welch statistic.
fn permutation_p(values: &[f64], labels: &[u8], shuffles: usize, rng: &mut SeededRng) -> f64 {
    let observed = abs_welch_t(values, labels);
    let mut perm = labels.to_vec();
    let extreme = (0..shuffles)
        .filter(|_| {
            rng.shuffle(&mut perm);
            abs_welch_t(values, &perm) >= observed
        })
        .count();
    (1 + extreme) as f64 / (1 + shuffles) as f64
}

fn groups(shift: f64, n: usize, rng: &mut SeededRng) -> Dataset {
    let labels: Vec<u8> = (0..2 * n).map(|i| u8::from(i >= n)).collect();
    let values: Vec<f64> = labels.iter().map(|&y| rng.normal() + shift * f64::from(y)).collect();
    Dataset::from_matrix(Array2::from_shape_vec((2 * n, 1), values).unwrap(), labels).unwrap()
}

#[test]
fn welch_agrees_with_a_permutation_oracle() {
    let mut rng = SeededRng::new(2024);
    for shift in [0.0, 0.3, 1.0] {
        let mut agree = 0;
        let seeds = 20;
        for _ in 0..seeds {
            let d = groups(shift, 100, &mut rng);
            let values: Vec<f64> = d.features().column(0).to_vec();
            let welch = compare_groups(&d, "f0", GroupTest::WelchT).unwrap();
            let oracle = permutation_p(&values, d.labels(), 2000, &mut rng);
            assert!((welch.statistic.abs() - abs_welch_t(&values, d.labels())).abs() < 1e-12);
            assert!((welch.p_value - oracle).abs() <= 0.05, "shift {shift}: welch {} permutation {oracle}", welch.p_value);
            if (welch.p_value < 0.01) == (oracle < 0.01) {
                agree += 1;
            }
        }
        assert!(agree >= seeds - 1, "shift {shift}: {agree}/{seeds}");
    }
}

#[test]
fn welch_sign_follows_group_zero_minus_group_one() {
    let mut rng = SeededRng::new(5);
    let d = groups(1.0, 100, &mut rng);
    let r = compare_groups(&d, "f0", GroupTest::WelchT).unwrap();
    assert!(r.statistic < 0.0);
    assert!(r.p_value < 0.001);
}
