use super::AnnotationError;

/// Probability that at least `quorum` of `k` independent workers, each correct
/// with probability `alpha`, give the correct label.
///
/// This is the upper tail of a `Binomial(k, alpha)` distribution:
/// `sum_{j=quorum}^{k} C(k, j) alpha^j (1 - alpha)^(k - j)`.
pub fn estimate_consensus_accuracy(alpha: f64, k: u32, quorum: u32) -> Result<f64, AnnotationError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AnnotationError::Domain(format!(
            "accuracy {alpha} is not a probability"
        )));
    }
    if k == 0 {
        return Err(AnnotationError::Domain("k must be positive".into()));
    }
    if quorum == 0 || quorum > k {
        return Err(AnnotationError::Domain(format!(
            "quorum {quorum} outside 1..={k}"
        )));
    }
    let miss = 1.0 - alpha;
    let total = (quorum..=k)
        .map(|j| binomial(k, j) * alpha.powi(j as i32) * miss.powi((k - j) as i32))
        .sum::<f64>();
    Ok(total.clamp(0.0, 1.0))
}

fn binomial(n: u32, r: u32) -> f64 {
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Enumerates all 3^k label vectors: each vote is right with probability
    /// `alpha` and picks either wrong class with probability `(1-alpha)/2`.
    fn enumeration_oracle(alpha: f64, k: u32, quorum: u32) -> f64 {
        let mut total = 0.0;
        for code in 0..3u32.pow(k) {
            let mut c = code;
            let mut p = 1.0;
            let mut correct = 0;
            for _ in 0..k {
                match c % 3 {
                    0 => {
                        p *= alpha;
                        correct += 1;
                    }
                    _ => p *= (1.0 - alpha) / 2.0,
                }
                c /= 3;
            }
            if correct >= quorum {
                total += p;
            }
        }
        total
    }

    #[test]
    fn symmetric_point() {
        let v = estimate_consensus_accuracy(0.5, 5, 3).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn endpoints() {
        assert_eq!(estimate_consensus_accuracy(0.0, 5, 3).unwrap(), 0.0);
        assert_eq!(estimate_consensus_accuracy(1.0, 5, 3).unwrap(), 1.0);
    }

    #[test]
    fn reproduces_published_independent_estimates() {
        let cases = [
            (2676.0 / 3085.0, 0.9811),
            (614.0 / 905.0, 0.8073),
            (153.0 / 250.0, 0.7031),
        ];
        for (alpha, expected) in cases {
            let v = estimate_consensus_accuracy(alpha, 5, 3).unwrap();
            assert!((v - expected).abs() < 5e-3, "{alpha} -> {v}");
            // published values are rounded to two decimals of a percentage
            assert!((v - expected).abs() < 1e-4, "{alpha} -> {v}");
        }
    }

    #[test]
    fn matches_enumeration_on_grid() {
        for i in 0..=10 {
            let alpha = i as f64 / 10.0;
            let closed = estimate_consensus_accuracy(alpha, 5, 3).unwrap();
            let brute = enumeration_oracle(alpha, 5, 3);
            assert!((closed - brute).abs() < 1e-12, "alpha {alpha}: {closed} vs {brute}");
        }
        for (k, q) in [(3, 2), (7, 4), (5, 5), (5, 1)] {
            let closed = estimate_consensus_accuracy(0.37, k, q).unwrap();
            assert!((closed - enumeration_oracle(0.37, k, q)).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_alpha() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = estimate_consensus_accuracy(i as f64 / 1000.0, 5, 3).unwrap();
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn domain_errors() {
        assert!(estimate_consensus_accuracy(-0.1, 5, 3).is_err());
        assert!(estimate_consensus_accuracy(1.1, 5, 3).is_err());
        assert!(estimate_consensus_accuracy(f64::NAN, 5, 3).is_err());
        assert!(estimate_consensus_accuracy(0.5, 5, 6).is_err());
        assert!(estimate_consensus_accuracy(0.5, 5, 0).is_err());
    }
}
