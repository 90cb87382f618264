//! Dense row-major tensors and the shape arithmetic shared by the tape.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != data.len() {
            return Err(Error::shape("Tensor::new", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let n = numel(&shape);
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn of_f64(shape: impl Into<Vec<usize>>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| T::of_f64(v)).collect())
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> T) -> Self {
        let shape = shape.into();
        let data = (0..numel(&shape)).map(&mut f).collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != self.data.len() {
            return Err(Error::shape("reshape", &self.shape, &shape));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn get(&self, index: &[usize]) -> Option<T> {
        offset_of(&self.shape, index).map(|o| self.data[o])
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of_f64(v.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Row-major offset of a multi-index, `None` when out of bounds.
pub fn offset_of(shape: &[usize], index: &[usize]) -> Option<usize> {
    if index.len() != shape.len() {
        return None;
    }
    let mut off = 0;
    for (&i, &d) in index.iter().zip(shape) {
        if i >= d {
            return None;
        }
        off = off * d + i;
    }
    Some(off)
}

pub fn index_of(shape: &[usize], mut offset: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = offset % shape[k];
        offset /= shape[k];
    }
    idx
}

/// Trailing-axis broadcast: axes are aligned from the right, a size-1 axis
/// expands to match.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for k in 0..n {
        let da = if k < n - a.len() { 1 } else { a[k - (n - a.len())] };
        let db = if k < n - b.len() { 1 } else { b[k - (n - b.len())] };
        out[k] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// How an input of a broadcast op maps onto the output index space.
#[derive(Clone, Debug)]
pub(crate) enum BroadcastMap {
    Same,
    /// Input equals the trailing block of the output; offset = i % len.
    Cyclic(usize),
    Explicit(Vec<usize>),
}

impl BroadcastMap {
    pub(crate) fn new(input: &[usize], out: &[usize]) -> Self {
        let n_in = numel(input);
        let n_out = numel(out);
        if input == out || n_in == n_out {
            return BroadcastMap::Same;
        }
        let lead = out.len() - input.len();
        let leading_ones = input.iter().take_while(|&&d| d == 1).count();
        let kept = &input[leading_ones..];
        if !kept.is_empty() && out.ends_with(kept) {
            return BroadcastMap::Cyclic(n_in);
        }
        let in_strides = strides(input);
        let mut eff = vec![0; out.len()];
        for k in 0..input.len() {
            if input[k] != 1 {
                eff[lead + k] = in_strides[k];
            }
        }
        let mut map = Vec::with_capacity(n_out);
        let mut idx = vec![0usize; out.len()];
        let mut cur = 0usize;
        for _ in 0..n_out {
            map.push(cur);
            for k in (0..out.len()).rev() {
                idx[k] += 1;
                cur += eff[k];
                if idx[k] < out[k] {
                    break;
                }
                cur -= eff[k] * idx[k];
                idx[k] = 0;
            }
        }
        BroadcastMap::Explicit(map)
    }

    #[inline]
    pub(crate) fn at(&self, i: usize) -> usize {
        match self {
            BroadcastMap::Same => i,
            BroadcastMap::Cyclic(n) => i % n,
            BroadcastMap::Explicit(m) => m[i],
        }
    }
}

/// Offsets splitting a tensor into "kept" and "reduced" coordinates for a
/// set of axes: element offset = kept[k] + reduced[r].
#[derive(Clone, Debug)]
pub(crate) struct AxisGroups {
    pub kept: Vec<usize>,
    pub reduced: Vec<usize>,
}

impl AxisGroups {
    pub(crate) fn new(shape: &[usize], axes: &[usize]) -> Self {
        let st = strides(shape);
        let mut kept_axes = Vec::new();
        let mut red_axes = Vec::new();
        for k in 0..shape.len() {
            if axes.contains(&k) {
                red_axes.push(k);
            } else {
                kept_axes.push(k);
            }
        }
        AxisGroups {
            kept: enumerate_offsets(shape, &st, &kept_axes),
            reduced: enumerate_offsets(shape, &st, &red_axes),
        }
    }

    /// True when the reduced axes are exactly the trailing axes, so each
    /// group is a contiguous run.
    pub(crate) fn is_trailing(&self) -> bool {
        let n = self.reduced.len();
        self.reduced.iter().enumerate().all(|(i, &o)| o == i) && self.kept.iter().enumerate().all(|(i, &o)| o == i * n)
    }
}

fn enumerate_offsets(shape: &[usize], st: &[usize], axes: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &a in axes {
        let mut next = Vec::with_capacity(out.len() * shape[a]);
        for &base in &out {
            for i in 0..shape[a] {
                next.push(base + i * st[a]);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn check_axes(op: &'static str, shape: &[usize], axes: &[usize]) -> Result<Vec<usize>> {
    if axes.is_empty() {
        return Err(Error::contract(op, "empty axis set"));
    }
    let mut v = axes.to_vec();
    v.sort_unstable();
    v.dedup();
    if v.len() != axes.len() || v.iter().any(|&a| a >= shape.len()) {
        return Err(Error::contract(op, alloc::format!("invalid axes {:?} for shape {:?}", axes, shape)));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn new_checks_length() {
        assert!(Tensor::<f32>::new([2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new([2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn broadcast_rules() {
        assert_eq!(broadcast_shape(&[2, 3], &[3]), Some(vec![2, 3]));
        assert_eq!(broadcast_shape(&[2, 1, 4], &[3, 1]), Some(vec![2, 3, 4]));
        assert_eq!(broadcast_shape(&[2, 3], &[2]), None);
    }

    #[test]
    fn broadcast_map_matches_naive() {
        let cases: &[(&[usize], &[usize])] = &[
            (&[3], &[2, 3]),
            (&[1, 3], &[2, 3]),
            (&[2, 1], &[2, 3]),
            (&[2, 1, 1], &[2, 3, 4]),
            (&[3, 1], &[2, 3, 4]),
            (&[1, 1, 4], &[2, 3, 4]),
        ];
        for &(input, out) in cases {
            let map = BroadcastMap::new(input, out);
            let full = broadcast_shape(input, out).unwrap();
            assert_eq!(full, out);
            for i in 0..numel(out) {
                let oi = index_of(out, i);
                let lead = out.len() - input.len();
                let ii: Vec<usize> = (0..input.len())
                    .map(|k| if input[k] == 1 { 0 } else { oi[lead + k] })
                    .collect();
                assert_eq!(map.at(i), offset_of(input, &ii).unwrap(), "{input:?}->{out:?} at {i}");
            }
        }
    }

    #[test]
    fn axis_groups_cover_everything_once() {
        let shape = [2, 3, 4];
        let g = AxisGroups::new(&shape, &[1]);
        let mut seen = vec![0; 24];
        for &k in &g.kept {
            for &r in &g.reduced {
                seen[k + r] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(!g.is_trailing());
        assert!(AxisGroups::new(&shape, &[1, 2]).is_trailing());
    }

    proptest! {
        #[test]
        fn offset_index_round_trip(dims in proptest::collection::vec(1usize..5, 1..5), seed in 0usize..1000) {
            let n = numel(&dims);
            let off = seed % n;
            let idx = index_of(&dims, off);
            prop_assert_eq!(offset_of(&dims, &idx), Some(off));
        }
    }
}
