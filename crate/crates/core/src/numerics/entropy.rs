use crate::error::{Error, Result};

/// Shannon entropy in bits of a histogram; `0·log 0 = 0`.
pub fn discrete_entropy(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("counts", "at least one count must be positive"));
    }
    let n = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

/// `H(Y | F)` in bits from a joint table indexed `joint[f][y]`.
pub fn conditional_entropy(joint: &[Vec<u64>]) -> Result<f64> {
    let total: u64 = joint.iter().flatten().sum();
    if total == 0 {
        return Err(Error::invalid("joint_counts", "at least one count must be positive"));
    }
    let n = total as f64;
    let mut h = 0.0;
    for row in joint {
        let row_total: u64 = row.iter().sum();
        if row_total == 0 {
            continue;
        }
        h += row_total as f64 / n * discrete_entropy(row)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_binary_is_one_bit() {
        assert_eq!(discrete_entropy(&[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_is_zero() {
        assert_eq!(discrete_entropy(&[4, 0]).unwrap(), 0.0);
    }

    #[test]
    fn all_zero_is_error() {
        assert!(discrete_entropy(&[0, 0]).is_err());
        assert!(conditional_entropy(&[vec![0, 0]]).is_err());
    }

    #[test]
    fn deterministic_dependence() {
        assert_eq!(conditional_entropy(&[vec![2, 0], vec![0, 2]]).unwrap(), 0.0);
    }

    #[test]
    fn independent_joint_keeps_marginal_entropy() {
        let h = conditional_entropy(&[vec![3, 3], vec![5, 5]]).unwrap();
        assert!((h - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut counts in prop::collection::vec(0u64..50, 1..12), seed in any::<u64>()) {
            prop_assume!(counts.iter().any(|&c| c > 0));
            let h = discrete_entropy(&counts).unwrap();
            let n = counts.len();
            counts.rotate_left((seed as usize) % n);
            counts.reverse();
            prop_assert!((discrete_entropy(&counts).unwrap() - h).abs() < 1e-12);
        }
    }
}
