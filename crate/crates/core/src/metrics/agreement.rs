use super::MetricsError;

/// Fleiss' kappa over a subjects x categories count matrix where every row
/// sums to the number of raters `m`.
pub fn fleiss_kappa(ratings: &[Vec<usize>], m: usize) -> Result<f64, MetricsError> {
    if ratings.is_empty() {
        return Err(MetricsError::Empty("fleiss_kappa"));
    }
    if m < 2 {
        return Err(MetricsError::Undefined("fewer than two raters"));
    }
    let k = ratings[0].len();
    let mut col = vec![0usize; k];
    let mut p_bar = 0.0;
    for (i, row) in ratings.iter().enumerate() {
        let sum: usize = row.iter().sum();
        if sum != m || row.len() != k {
            return Err(MetricsError::RowSum { subject: i, got: sum, expected: m });
        }
        let agree: usize = row.iter().map(|&n| n * n).sum::<usize>() - m;
        p_bar += agree as f64 / (m * (m - 1)) as f64;
        for (c, &n) in col.iter_mut().zip(row) {
            *c += n;
        }
    }
    let n = ratings.len() as f64;
    p_bar /= n;
    let total = n * m as f64;
    let p_e: f64 = col.iter().map(|&c| (c as f64 / total).powi(2)).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(MetricsError::Undefined("chance agreement is 1"));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let mut s = 0.0;
    for i in 0..k {
        s += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    s
}

/// Exact two-sided binomial sign test at p = 0.5: twice the smaller tail,
/// capped at 1. Ties are excluded by the caller.
pub fn sign_test(wins: u64, losses: u64) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses);
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let tail: f64 = (0..=k).map(|i| (ln_choose(n, i) + ln_half_n).exp()).sum();
    (2.0 * tail).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kappa_fixtures() {
        assert_eq!(fleiss_kappa(&[vec![3, 0], vec![0, 3]], 3).unwrap(), 1.0);
        assert!(matches!(
            fleiss_kappa(&[vec![3, 0], vec![3, 0]], 3),
            Err(MetricsError::Undefined(_))
        ));
        assert!(matches!(fleiss_kappa(&[vec![2, 0]], 3), Err(MetricsError::RowSum { .. })));
    }

    #[test]
    fn kappa_textbook() {
        // Fleiss (1971) style check computed by hand: 4 subjects, 2 raters.
        let r = [vec![2, 0], vec![1, 1], vec![0, 2], vec![1, 1]];
        // P_bar = (1 + 0 + 1 + 0)/4 = 0.5, marginals 0.5/0.5 -> Pe = 0.5
        assert_eq!(fleiss_kappa(&r, 2).unwrap(), 0.0);
    }

    #[test]
    fn sign_fixtures() {
        assert!((sign_test(8, 2) - 112.0 / 1024.0).abs() < 1e-12);
        assert_eq!(sign_test(5, 5), 1.0);
        assert_eq!(sign_test(0, 0), 1.0);
        assert!((sign_test(10, 0) - 2.0 / 1024.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sign_symmetric(w in 0u64..60, l in 0u64..60) {
            prop_assert_eq!(sign_test(w, l), sign_test(l, w));
            let p = sign_test(w, l);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
