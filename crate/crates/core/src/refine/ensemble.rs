use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Elementwise mean of the members' score tensors (`[K]` or `[B, K]`).
///
/// Each element is averaged incrementally over its sorted values, so the result
/// is bit-identical under any permutation of `members` and exact when the
/// members agree.
pub fn ensemble_average<T: Scalar>(members: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = members
        .first()
        .ok_or_else(|| Error::Usage("ensemble needs at least one member".into()))?;
    for m in &members[1..] {
        if m.shape() != first.shape() {
            return Err(Error::dim("ensemble average", "score length", first.len(), m.len()));
        }
    }
    let mut vals = Vec::with_capacity(members.len());
    Ok(Tensor::from_fn(first.shape(), |i| {
        vals.clear();
        vals.extend(members.iter().map(|m| m.data()[i]));
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mut mean = vals[0];
        for (i, &v) in vals.iter().enumerate().skip(1) {
            mean += (v - mean) / T::of((i + 1) as f64);
        }
        mean
    }))
}

/// Index of the largest score; the first one wins ties.
pub fn argmax<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Per-row argmax of a `[B, K]` score matrix.
pub fn predict_classes<T: Scalar>(scores: &Tensor<T>) -> Vec<usize> {
    let k = scores.dim(scores.rank() - 1);
    scores.data().chunks(k).map(argmax).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[x.len()], x.to_vec()).unwrap()
    }

    #[test]
    fn hand_case() {
        let y = ensemble_average(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 0.0])]).unwrap();
        assert!((y.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((y.data()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(argmax(y.data()), 0);
    }

    #[test]
    fn identical_members_are_a_fixed_point() {
        let a = v(&[0.1, -2.5, 3.0]);
        assert_eq!(ensemble_average(&[a.clone(), a.clone(), a.clone()]).unwrap(), a);
    }

    #[test]
    fn permutations_agree_bitwise() {
        let (a, b, c) = (v(&[0.1, 0.7, 1e-9]), v(&[0.2, 1e8, 0.3]), v(&[-0.3, -1e8, 0.1]));
        let base = ensemble_average(&[a.clone(), b.clone(), c.clone()]).unwrap();
        for p in [[&b, &a, &c], [&c, &b, &a], [&a, &c, &b], [&b, &c, &a], [&c, &a, &b]] {
            let m: Vec<_> = p.iter().map(|t| (*t).clone()).collect();
            assert_eq!(ensemble_average(&m).unwrap(), base);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            ensemble_average(&[v(&[1.0]), v(&[1.0, 2.0])]),
            Err(Error::Dimension { .. })
        ));
    }
}
