//! Sparse order-`t` tensors over `[n]`, used to represent forms.
//!
//! Index tuples are 0-based here and 1-based in JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::poly::{MultiIndex, Partition, Polynomial};
use crate::scalar::Scalar;

pub const MAX_ORDER: usize = 6;

/// Largest operator dimension accepted by dense evaluations and certificates.
pub const DIM_CAP: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    n: usize,
    t: usize,
    entries: BTreeMap<Vec<usize>, S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zero(n: usize, t: usize) -> Self {
        Tensor {
            n,
            t,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        n: usize,
        t: usize,
        entries: impl IntoIterator<Item = (Vec<usize>, S)>,
    ) -> Result<Self> {
        if t > MAX_ORDER {
            return Err(Error::CapExceeded {
                what: "tensor order",
                size: t,
                cap: MAX_ORDER,
            });
        }
        let mut map: BTreeMap<Vec<usize>, S> = BTreeMap::new();
        for (idx, v) in entries {
            check_dim("index tuple length", t, idx.len())?;
            if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidInput(format!("index {} outside 1..={n}", bad + 1)));
            }
            let e = map.entry(idx).or_insert_with(S::zero);
            *e = e.clone() + v;
        }
        map.retain(|_, v| !v.is_zero());
        Ok(Tensor { n, t, entries: map })
    }

    /// Standard basis tensor `e_ind`.
    pub fn basis(n: usize, ind: &[usize]) -> Result<Self> {
        Self::from_entries(n, ind.len(), [(ind.to_vec(), S::one())])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.t
    }

    pub fn entries(&self) -> &BTreeMap<Vec<usize>, S> {
        &self.entries
    }

    pub fn get(&self, idx: &[usize]) -> S {
        self.entries.get(idx).cloned().unwrap_or_else(S::zero)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1_norm(&self) -> S {
        self.entries
            .values()
            .fold(S::zero(), |acc, v| acc + v.abs())
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::from_entries(
            self.n,
            self.t,
            self.entries.iter().map(|(i, v)| (i.clone(), v.clone() * s.clone())),
        )
        .expect("same shape")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim("tensor sum dimension", self.n, other.n)?;
        if self.t != other.t {
            return Err(Error::OrderMismatch(self.t, other.t));
        }
        Self::from_entries(
            self.n,
            self.t,
            self.entries
                .iter()
                .chain(other.entries.iter())
                .map(|(i, v)| (i.clone(), v.clone())),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-S::one()))
    }

    /// Entrywise inner product `Σ_i T_i S_i`.
    pub fn inner(&self, other: &Self) -> Result<S> {
        check_dim("tensor inner product", self.n, other.n)?;
        if self.t != other.t {
            return Err(Error::OrderMismatch(self.t, other.t));
        }
        Ok(self
            .entries
            .iter()
            .filter_map(|(i, v)| other.entries.get(i).map(|w| v.clone() * w.clone()))
            .fold(S::zero(), |a, b| a + b))
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Tensor<T> {
        Tensor::from_entries(self.n, self.t, self.entries.iter().map(|(i, v)| (i.clone(), f(v))))
            .expect("same shape")
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        self.map_scalar(|v| v.to_f64())
    }

    /// `T(x) = Σ_i T_i x_{i_1} ⋯ x_{i_t}`.
    pub fn eval_point(&self, x: &[S]) -> Result<S> {
        check_dim("evaluation point", self.n, x.len())?;
        Ok(self.entries.iter().fold(S::zero(), |acc, (idx, v)| {
            acc + idx.iter().fold(v.clone(), |m, &i| m * x[i].clone())
        }))
    }

    /// `T(A) = Σ_i T_i A(i_1) ⋯ A(i_t)`, products taken left to right.
    pub fn eval_ops(&self, ops: &[Matrix<S>]) -> Result<Matrix<S>> {
        let d = check_family(self.n, ops)?;
        let mut out = Matrix::zeros(d, d);
        for (idx, v) in &self.entries {
            let mut prod = Matrix::identity(d);
            for &i in idx {
                prod = prod.matmul(&ops[i])?;
            }
            out = out.add(&prod.scale(v))?;
        }
        Ok(out)
    }

    /// `(T∘σ)_i = T_{(i_{σ(1)}, …, i_{σ(t)})}` for a permutation `σ` of `0..t`.
    pub fn permute(&self, sigma: &[usize]) -> Result<Self> {
        check_dim("permutation length", self.t, sigma.len())?;
        let mut inv = vec![usize::MAX; self.t];
        for (s, &k) in sigma.iter().enumerate() {
            if k >= self.t || inv[k] != usize::MAX {
                return Err(Error::InvalidInput("not a permutation".into()));
            }
            inv[k] = s;
        }
        // Entry j of T lands at the tuple i with i_{σ(s)} = j_s.
        Self::from_entries(
            self.n,
            self.t,
            self.entries.iter().map(|(j, v)| {
                let mut i = vec![0; self.t];
                for (s, &k) in sigma.iter().enumerate() {
                    i[k] = j[s];
                }
                (i, v.clone())
            }),
        )
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries.iter().all(|(idx, v)| {
            let mut perm = idx.clone();
            perm.sort_unstable();
            let mut ok = true;
            loop {
                if self.get(&perm) != *v {
                    ok = false;
                    break;
                }
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            ok
        })
    }

    /// Keeps entries whose tuple has an odd number of indices in every part of `q`.
    pub fn project(&self, q: &Partition) -> Result<Self> {
        check_dim("partition ground set", self.n, q.n())?;
        let part_of: Vec<Option<usize>> = (0..self.n).map(|v| q.part_of(v)).collect();
        Ok(Tensor {
            n: self.n,
            t: self.t,
            entries: self
                .entries
                .iter()
                .filter(|(idx, _)| odd_in_every_part(idx, &part_of, q.len()))
                .map(|(i, v)| (i.clone(), v.clone()))
                .collect(),
        })
    }

    /// Checks `Σ_{i ∈ I_α} T_i = c_α` for every `α`, exactly for exact scalars and
    /// to a relative tolerance of 1e-9 otherwise.
    pub fn consistency_check(&self, p: &Polynomial<S>) -> Result<ConsistencyReport<S>> {
        check_dim("tensor/polynomial dimension", self.n, p.n())?;
        if !p.is_homogeneous(self.t) {
            return Err(Error::NotHomogeneous(self.t));
        }
        let mut sums: BTreeMap<MultiIndex, S> = BTreeMap::new();
        for (idx, v) in &self.entries {
            let e = sums
                .entry(MultiIndex::from_vars(self.n, idx))
                .or_insert_with(S::zero);
            *e = e.clone() + v.clone();
        }
        for alpha in p.support() {
            sums.entry(alpha.clone()).or_insert_with(S::zero);
        }
        let mut violations = Vec::new();
        for (alpha, got) in sums {
            let expected = p.coefficient(&alpha);
            let diff = (got.clone() - expected.clone()).abs();
            let bad = if S::EXACT {
                !diff.is_zero()
            } else {
                diff.to_f64() > 1e-9 * expected.to_f64().abs().max(1.0)
            };
            if bad {
                violations.push(Violation { alpha, expected, got });
            }
        }
        Ok(ConsistencyReport {
            consistent: violations.is_empty(),
            violations,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport<S> {
    pub consistent: bool,
    pub violations: Vec<Violation<S>>,
}

#[derive(Clone, Debug)]
pub struct Violation<S> {
    pub alpha: MultiIndex,
    pub expected: S,
    pub got: S,
}

pub(crate) fn odd_in_every_part(idx: &[usize], part_of: &[Option<usize>], parts: usize) -> bool {
    let mut counts = vec![0usize; parts];
    for &i in idx {
        if let Some(k) = part_of[i] {
            counts[k] += 1;
        }
    }
    counts.iter().all(|c| c % 2 == 1)
}

/// Checks that `ops` is a family of `n` square matrices of one common dimension
/// within [`DIM_CAP`], returning that dimension.
pub fn check_family<S: Scalar>(n: usize, ops: &[Matrix<S>]) -> Result<usize> {
    check_dim("operator family size", n, ops.len())?;
    let d = ops.first().map_or(0, Matrix::rows);
    if d > DIM_CAP {
        return Err(Error::CapExceeded {
            what: "operator dimension",
            size: d,
            cap: DIM_CAP,
        });
    }
    for a in ops {
        check_dim("operator rows", d, a.rows())?;
        check_dim("operator cols", d, a.cols())?;
    }
    Ok(d)
}

/// The family `(A·z)(i) = z_I A(i)` for `i ∈ I ∈ Q` and `A(i)` otherwise; bit `k`
/// of `z` set means `z_{I_k} = -1`.
pub fn flip_family<S: Scalar>(ops: &[Matrix<S>], q: &Partition, z: u64) -> Vec<Matrix<S>> {
    ops.iter()
        .enumerate()
        .map(|(i, a)| match q.part_of(i) {
            Some(k) if (z >> k) & 1 == 1 => a.scale(&-S::one()),
            _ => a.clone(),
        })
        .collect()
}

/// `τ(i) = t! / Π m_j!` where `m_j` are the multiplicities in `ind`.
pub fn distinct_permutation_count(ind: &[usize]) -> u64 {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for &i in ind {
        *counts.entry(i).or_default() += 1;
    }
    let fact = |k: u64| (1..=k).product::<u64>();
    fact(ind.len() as u64) / counts.values().map(|&m| fact(m)).product::<u64>()
}

/// Advances `v` to the next lexicographic permutation; false when `v` was the last.
pub fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        v.reverse();
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All distinct orderings of the multiset `vars`, in lexicographic order.
pub fn distinct_orderings(vars: &[usize]) -> Vec<Vec<usize>> {
    let mut perm = vars.to_vec();
    perm.sort_unstable();
    let mut out = vec![perm.clone()];
    while next_permutation(&mut perm) {
        out.push(perm.clone());
    }
    out
}

/// The unique symmetric tensor `T_p` with `T_p(x) = p(x)`, for `p` homogeneous of degree `t`.
pub fn symmetric_tensor_of<S: Scalar>(p: &Polynomial<S>, t: usize) -> Result<Tensor<S>> {
    if !p.is_homogeneous(t) {
        return Err(Error::NotHomogeneous(t));
    }
    let mut entries = Vec::new();
    for (alpha, c) in p.terms() {
        let orderings = distinct_orderings(&alpha.vars());
        let share = c.clone() / S::from_i64(orderings.len() as i64);
        entries.extend(orderings.into_iter().map(|i| (i, share.clone())));
    }
    Tensor::from_entries(p.n(), t, entries)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorJson {
    pub n: usize,
    pub t: usize,
    pub entries: Vec<EntryJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryJson {
    pub i: Vec<usize>,
    pub v: f64,
}

impl Tensor<f64> {
    pub fn to_json(&self) -> TensorJson {
        TensorJson {
            n: self.n,
            t: self.t,
            entries: self
                .entries
                .iter()
                .map(|(i, v)| EntryJson {
                    i: i.iter().map(|x| x + 1).collect(),
                    v: *v,
                })
                .collect(),
        }
    }

    pub fn from_json(j: &TensorJson) -> Result<Self> {
        let mut entries = Vec::with_capacity(j.entries.len());
        for e in &j.entries {
            if e.i.contains(&0) {
                return Err(Error::InvalidInput("tensor indices are numbered from 1".into()));
            }
            entries.push((e.i.iter().map(|x| x - 1).collect(), e.v));
        }
        Self::from_entries(j.n, j.t, entries)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn e(n: usize, ind: &[usize]) -> Tensor<f64> {
        Tensor::basis(n, ind).unwrap()
    }

    #[test]
    fn point_evaluation() {
        assert_eq!(e(2, &[0, 1]).eval_point(&[1.0, -1.0]).unwrap(), -1.0);
        let p = Polynomial::from_monomials(2, &[(&[0, 1], 1.0)]).unwrap();
        let tp = symmetric_tensor_of(&p, 2).unwrap();
        assert_eq!(tp.eval_point(&[1.0, 1.0]).unwrap(), 1.0);
        let x = [0.3, -1.7];
        assert_eq!(
            tp.permute(&[1, 0]).unwrap().eval_point(&x).unwrap(),
            tp.eval_point(&x).unwrap()
        );
    }

    #[test]
    fn operator_evaluation() {
        let id = Matrix::<f64>::identity(2);
        assert_eq!(e(2, &[0, 1]).eval_ops(&[id.clone(), id.clone()]).unwrap(), id);
        let t = Tensor::from_entries(2, 2, [(vec![0, 1], 2.0), (vec![1, 1], -1.0)]).unwrap();
        let a1 = Matrix::diag(&[1.0, 2.0]);
        let a2 = Matrix::diag(&[3.0, -1.0]);
        // 2·diag(3,-2) - diag(9,1)
        assert_eq!(t.eval_ops(&[a1, a2]).unwrap(), Matrix::diag(&[-3.0, -5.0]));
        assert!(t.eval_ops(&[Matrix::identity(2)]).is_err());
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(distinct_permutation_count(&[0, 0, 1]), 3);
        assert_eq!(distinct_permutation_count(&[0, 1, 2]), 6);
        assert_eq!(distinct_permutation_count(&[1, 1]), 1);
        assert_eq!(distinct_orderings(&[1, 0, 0]).len(), 3);
    }

    #[test]
    fn symmetric_tensors() {
        let half = BigRational::from_ratio(1, 2);
        let p = Polynomial::from_monomials(2, &[(&[0, 1], BigRational::from_ratio(1, 1))]).unwrap();
        let tp = symmetric_tensor_of(&p, 2).unwrap();
        assert_eq!(tp.get(&[0, 1]), half);
        assert_eq!(tp.get(&[1, 0]), half);
        assert_eq!(tp.nnz(), 2);
        let sq = Polynomial::from_monomials(1, &[(&[0, 0], 1.0)]).unwrap();
        assert_eq!(symmetric_tensor_of(&sq, 2).unwrap().get(&[0, 0]), 1.0);
        assert!(symmetric_tensor_of(&sq, 3).is_err());
        assert!(tp.is_symmetric());
        assert!(!Tensor::<f64>::basis(2, &[0, 1]).unwrap().is_symmetric());
    }

    #[test]
    fn permute_basis() {
        assert_eq!(e(2, &[0, 1]).permute(&[1, 0]).unwrap(), e(2, &[1, 0]));
        let t = e(3, &[0, 1, 2]);
        // (T∘σ)_i = T_{i∘σ}: the entry moves to i with i_{σ(s)} = (0,1,2)_s.
        assert_eq!(t.permute(&[1, 2, 0]).unwrap(), e(3, &[2, 0, 1]));
        assert!(t.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn tensor_projection() {
        let q = Partition::from_one_based(3, vec![vec![1, 2]]).unwrap();
        assert!(e(3, &[0, 1]).project(&q).unwrap().is_zero());
        assert_eq!(e(3, &[0, 2]).project(&q).unwrap(), e(3, &[0, 2]));
    }

    #[test]
    fn coefficient_consistency() {
        let p = Polynomial::from_monomials(2, &[(&[0, 1], 1.0)]).unwrap();
        let tp = symmetric_tensor_of(&p, 2).unwrap();
        assert!(tp.consistency_check(&p).unwrap().consistent);
        assert!(e(2, &[0, 1]).consistency_check(&p).unwrap().consistent);
        let rep = e(2, &[0, 1]).scale(&2.0).consistency_check(&p).unwrap();
        assert!(!rep.consistent);
        assert_eq!(rep.violations[0].alpha, MultiIndex::new(vec![1, 1]));
    }

    #[test]
    fn json_round_trip() {
        let t = Tensor::from_entries(3, 2, [(vec![2, 0], 0.1), (vec![0, 1], -2.5)]).unwrap();
        let s = t.to_json_string();
        assert_eq!(s, r#"{"n":3,"t":2,"entries":[{"i":[1,2],"v":-2.5},{"i":[3,1],"v":0.1}]}"#);
        assert_eq!(Tensor::from_json_str(&s).unwrap(), t);
    }
}
