//! Exact sorting-family operators and the linear maximization oracle over
//! the permutahedron.
//!
//! Indices are 0-based. Sorting is always descending and ties are broken by
//! ascending original index, so every operator here is deterministic.

use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// A bijection on `{0, .., n-1}` stored in one-line notation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("{indices:?} is not a permutation")));
            }
        }
        Ok(Permutation(indices))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// The reversal used by the rank LP, as a permutation of indices.
    pub fn reversal(n: usize) -> Self {
        Permutation((0..n).rev().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (j, &i) in self.0.iter().enumerate() {
            inv[i] = j;
        }
        Permutation(inv)
    }

    /// `out[j] = x[self[j]]`, i.e. `x` permuted by this permutation.
    pub fn gather<T: Copy>(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.0.len());
        self.0.iter().map(|&i| x[i]).collect()
    }

    /// Inverse of [`gather`](Self::gather): `out[self[j]] = v[j]`.
    pub fn scatter<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.0.len());
        let mut out = vec![T::default(); v.len()];
        for (j, &i) in self.0.iter().enumerate() {
            out[i] = v[j];
        }
        out
    }
}

pub(crate) fn check_vector<T: Scalar>(x: &[T], name: &str) -> Result<()> {
    if x.is_empty() {
        return Err(invalid(format!("{name} must be non-empty")));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("{name}[{i}] is not finite")));
    }
    Ok(())
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} must lie in [1, {n}]")));
    }
    Ok(())
}

/// Sorts `x` descending, returning the sorting permutation and sorted values.
///
/// Each entry is packed as `(!key, index)` in one integer so a plain integer
/// sort gives descending values with ties in ascending index order.
pub(crate) fn sort_with_perm<T: Scalar>(x: &[T]) -> (Permutation, Vec<T>) {
    let mut packed: Vec<u128> =
        x.iter().enumerate().map(|(i, v)| (u128::from(!v.order_key()) << 64) | i as u128).collect();
    packed.sort_unstable();
    let idx: Vec<usize> = packed.into_iter().map(|p| p as u64 as usize).collect();
    let values = idx.iter().map(|&i| x[i]).collect();
    (Permutation(idx), values)
}

pub(crate) fn sorted_desc<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut v = x.to_vec();
    v.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    v
}

/// Permutation σ with `x[σ_0] ≥ x[σ_1] ≥ …`, ties by ascending index.
pub fn argsort<T: Scalar>(x: &[T]) -> Result<Permutation> {
    check_vector(x, "x")?;
    Ok(sort_with_perm(x).0)
}

pub fn sort_desc<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    check_vector(x, "x")?;
    Ok(sort_with_perm(x).1)
}

/// Inverse of [`argsort`]; rank 0 is the largest entry.
pub fn rank<T: Scalar>(x: &[T]) -> Result<Permutation> {
    Ok(argsort(x)?.inverse())
}

/// Binary mask with ones on the `k` largest entries.
pub fn topkmask<T: Scalar>(x: &[T], k: usize) -> Result<Vec<T>> {
    check_vector(x, "x")?;
    check_k(k, x.len())?;
    let (sigma, _) = sort_with_perm(x);
    let mut mask = vec![T::zero(); x.len()];
    for &i in &sigma.as_slice()[..k] {
        mask[i] = T::one();
    }
    Ok(mask)
}

/// `x ∘ topkmask(x)`.
pub fn topk<T: Scalar>(x: &[T], k: usize) -> Result<Vec<T>> {
    let mask = topkmask(x, k)?;
    Ok(x.iter().zip(&mask).map(|(&a, &m)| a * m).collect())
}

/// `x ∘ topkmask(|x|)`: keeps the `k` entries of largest magnitude.
pub fn topkmag<T: Scalar>(x: &[T], k: usize) -> Result<Vec<T>> {
    check_vector(x, "x")?;
    let abs: Vec<T> = x.iter().map(|v| v.abs()).collect();
    let mask = topkmask(&abs, k)?;
    Ok(x.iter().zip(&mask).map(|(&a, &m)| a * m).collect())
}

/// Value and maximizer of `⟨x, y⟩` over the permutahedron `P(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmoOutput<T> {
    pub value: T,
    pub argmax: Vec<T>,
}

/// Linear maximization oracle over `P(w)`.
///
/// `value = Σ_i w_[i] x_[i]` and `argmax = sort(w)` placed at `rank(x)`.
/// `w` may be given in any order.
pub fn lmo<T: Scalar>(x: &[T], w: &[T]) -> Result<LmoOutput<T>> {
    check_vector(x, "x")?;
    check_vector(w, "w")?;
    if x.len() != w.len() {
        return Err(Error::LengthMismatch(x.len(), w.len()));
    }
    let w_sorted = sorted_desc(w);
    let (sigma, xs) = sort_with_perm(x);
    let value = xs.iter().zip(&w_sorted).map(|(&a, &b)| a * b).sum();
    let argmax = sigma.scatter(&w_sorted);
    Ok(LmoOutput { value, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argsort_examples() {
        assert_eq!(argsort(&[1.0, -3.0, 2.0]).unwrap().as_slice(), &[2, 0, 1]);
        assert_eq!(argsort(&[5.0, 4.0, 3.0]).unwrap().as_slice(), &[0, 1, 2]);
        assert_eq!(argsort(&[7.0, 7.0, 7.0]).unwrap().as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn sort_and_rank_examples() {
        assert_eq!(sort_desc(&[1.0, -3.0, 2.0]).unwrap(), vec![2.0, 1.0, -3.0]);
        assert_eq!(rank(&[1.0, -3.0, 2.0]).unwrap().as_slice(), &[1, 2, 0]);
        assert_eq!(rank(&[9.0, 4.0, 1.0, -2.0]).unwrap(), Permutation::identity(4));
    }

    #[test]
    fn empty_input_is_rejected() {
        let empty: [f64; 0] = [];
        assert!(matches!(argsort(&empty), Err(Error::InvalidArgument(_))));
        assert!(matches!(sort_desc(&empty), Err(Error::InvalidArgument(_))));
        assert!(matches!(rank(&empty), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        assert!(argsort(&[1.0, f64::NAN]).is_err());
        assert!(topk(&[f64::INFINITY], 1).is_err());
    }

    #[test]
    fn topk_family_examples() {
        let x = [1.0, -3.0, 2.0];
        assert_eq!(topkmask(&x, 2).unwrap(), vec![1.0, 0.0, 1.0]);
        assert_eq!(topkmag(&x, 2).unwrap(), vec![0.0, -3.0, 2.0]);
        assert_eq!(topk(&x, 2).unwrap(), vec![1.0, 0.0, 2.0]);
        assert_eq!(topk(&x, 3).unwrap(), vec![1.0, -3.0, 2.0]);
    }

    #[test]
    fn k_out_of_range() {
        let x = [1.0, 2.0];
        assert!(topkmask(&x, 0).is_err());
        assert!(topkmask(&x, 3).is_err());
        assert!(topkmag(&x, 3).is_err());
    }

    #[test]
    fn lmo_examples() {
        let out = lmo(&[1.0, -3.0, 2.0], &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(out.value, 3.0);
        assert_eq!(out.argmax, vec![1.0, 0.0, 1.0]);

        let out = lmo(&[1.0, -3.0, 2.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(out.value, 5.0);
        assert_eq!(out.argmax, vec![2.0, 1.0, 3.0]);

        // unsorted w gives the same answer
        let out = lmo(&[1.0, -3.0, 2.0], &[1.0, 3.0, 2.0]).unwrap();
        assert_eq!(out.value, 5.0);

        let x = [0.5, -1.25, 4.0, 2.0];
        let out = lmo(&x, &[2.0; 4]).unwrap();
        assert_eq!(out.value, 2.0 * x.iter().sum::<f64>());
        assert_eq!(out.argmax, vec![2.0; 4]);
    }

    #[test]
    fn lmo_length_mismatch() {
        assert_eq!(lmo(&[1.0, 2.0], &[1.0]).unwrap_err(), Error::LengthMismatch(2, 1));
    }

    #[test]
    fn permutation_validation_and_inverse() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let inv = p.inverse();
        assert_eq!(inv.as_slice(), &[1, 2, 0]);
        let x = [10, 20, 30];
        assert_eq!(p.scatter(&p.gather(&x)), x.to_vec());
        assert_eq!(Permutation::reversal(3).as_slice(), &[2, 1, 0]);
    }

    #[test]
    fn works_on_f32() {
        let out = topkmag(&[1.0_f32, -3.0, 2.0], 2).unwrap();
        assert_eq!(out, vec![0.0, -3.0, 2.0]);
    }
}
