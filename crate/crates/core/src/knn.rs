//! Exact Euclidean nearest-neighbor search over a kd-tree.
//!
//! Results are identical to sorting every row by `(squared distance, row id)`:
//! ties always resolve to the lower row id.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Matrix, Result};

const LEAF_SIZE: usize = 8;

/// Neighbor count: a positive integer or every available row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Neighbors {
    Count(usize),
    All,
}

impl Neighbors {
    /// Number of neighbors actually returned when `available` rows qualify.
    pub fn clip(self, available: usize) -> usize {
        match self {
            Neighbors::Count(k) => k.min(available),
            Neighbors::All => available,
        }
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            Neighbors::Count(0) => Err(Error::invalid("neighbor count must be at least 1")),
            n => Ok(n),
        }
    }
}

impl fmt::Display for Neighbors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Neighbors::Count(k) => write!(f, "{k}"),
            Neighbors::All => f.write_str("ALL"),
        }
    }
}

impl FromStr for Neighbors {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") || s == "inf" {
            return Ok(Neighbors::All);
        }
        s.parse::<usize>()
            .map_err(|_| Error::invalid(alloc::format!("not a neighbor count: {s:?}")))
            .and_then(|k| Neighbors::Count(k).validate())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Neighbors {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Neighbors::Count(k) => s.serialize_u64(*k as u64),
            Neighbors::All => s.serialize_str("ALL"),
        }
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Neighbors {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Neighbors;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"ALL\"")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> core::result::Result<Neighbors, E> {
                Neighbors::Count(v as usize).validate().map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> core::result::Result<Neighbors, E> {
                if v < 1 {
                    return Err(E::custom("neighbor count must be at least 1"));
                }
                self.visit_u64(v as u64)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> core::result::Result<Neighbors, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    id: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable kd-tree over the rows of a feature matrix.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    points: Matrix,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

impl KnnIndex {
    pub fn build(points: Matrix) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::invalid("cannot index an empty matrix"));
        }
        if !points.all_finite() {
            return Err(Error::invalid("index points must be finite"));
        }
        let mut index = KnnIndex {
            perm: (0..points.rows()).collect(),
            points,
            nodes: Vec::new(),
        };
        let n = index.perm.len();
        index.build_node(0, n);
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.widest_dim(start, end);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points.get(a, dim).total_cmp(&points.get(b, dim))
        });
        let value = points.get(self.perm[mid], dim);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn widest_dim(&self, start: usize, end: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for dim in 0..self.points.cols() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.perm[start..end] {
                let v = self.points.get(i, dim);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (dim, hi - lo);
            }
        }
        best.0
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    /// Row ids of the `k` nearest rows to `x`, nearest first.
    ///
    /// Returns `min(k, available)` ids, where `exclude` (if any) is never
    /// available.
    pub fn query(&self, x: &[f64], k: Neighbors, exclude: Option<usize>) -> Result<Vec<usize>> {
        Ok(self
            .query_with_distances(x, k, exclude)?
            .into_iter()
            .map(|(id, _)| id)
            .collect())
    }

    /// Like [`query`](Self::query) but also yields squared distances.
    pub fn query_with_distances(
        &self,
        x: &[f64],
        k: Neighbors,
        exclude: Option<usize>,
    ) -> Result<Vec<(usize, f64)>> {
        Error::check_dim(self.dim(), x.len())?;
        k.validate()?;
        if let Some(j) = exclude {
            if j >= self.len() {
                return Err(Error::invalid(alloc::format!(
                    "excluded row {j} out of range for {} rows",
                    self.len()
                )));
            }
        }
        let available = self.len() - usize::from(exclude.is_some());
        let want = k.clip(available);
        if want == 0 {
            return Ok(Vec::new());
        }

        let mut found: Vec<Candidate> = if want == available {
            (0..self.len())
                .filter(|&i| Some(i) != exclude)
                .map(|i| Candidate {
                    dist2: squared_distance(self.points.row(i), x),
                    id: i,
                })
                .collect()
        } else {
            let mut heap = BinaryHeap::with_capacity(want + 1);
            self.search(0, x, want, exclude, &mut heap);
            heap.into_vec()
        };
        found.sort_unstable();
        Ok(found.into_iter().map(|c| (c.id, c.dist2)).collect())
    }

    fn search(
        &self,
        node: usize,
        x: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let c = Candidate {
                        dist2: squared_distance(self.points.row(i), x),
                        id: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = x[dim] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, x, k, exclude, heap);
                // Equal bound still has to be visited: a tie may hold a lower id.
                if heap.len() < k || diff * diff <= heap.peek().expect("heap is full").dist2 {
                    self.search(far, x, k, exclude, heap);
                }
            }
        }
    }
}

/// Unweighted mean of `targets` over the `k` nearest rows of `x`.
pub fn knn_predict(index: &KnnIndex, targets: &[f64], x: &[f64], k: Neighbors) -> Result<f64> {
    Error::check_dim(index.len(), targets.len())?;
    let ids = index.query(x, k, None)?;
    Ok(ids.iter().map(|&i| targets[i]).sum::<f64>() / ids.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(vals: &[f64]) -> Matrix {
        Matrix::from_rows(&vals.iter().map(|&v| [v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_and_duplicate_points() {
        let idx = KnnIndex::build(line(&[4.0])).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(
            idx.query(&[0.0], Neighbors::Count(3), None).unwrap(),
            vec![0]
        );

        let dup = KnnIndex::build(Matrix::from_rows(&[[1.0, 1.0]; 20]).unwrap()).unwrap();
        assert_eq!(dup.len(), 20);
        let ids = dup
            .query(&[1.0, 1.0], Neighbors::Count(5), Some(2))
            .unwrap();
        assert_eq!(ids, vec![0, 1, 3, 4, 5]);
    }

    #[test]
    fn empty_matrix_is_rejected() {
        assert!(KnnIndex::build(Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn exact_match_wins_and_exclusion_holds() {
        let pts = line(&[0.0, 1.0, 3.0, 7.0, 7.0]);
        let idx = KnnIndex::build(pts).unwrap();
        assert_eq!(
            idx.query(&[3.0], Neighbors::Count(1), None).unwrap(),
            vec![2]
        );
        assert_eq!(
            idx.query(&[3.0], Neighbors::Count(1), Some(2)).unwrap(),
            vec![1]
        );
        // Ties resolve to the lower row id.
        assert_eq!(
            idx.query(&[7.0], Neighbors::Count(1), None).unwrap(),
            vec![3]
        );
        assert_eq!(
            idx.query(&[2.0], Neighbors::Count(2), None).unwrap(),
            vec![1, 2]
        );
    }

    #[test]
    fn all_and_clipping() {
        let idx = KnnIndex::build(line(&[5.0, 1.0, 4.0, 2.0, 3.0])).unwrap();
        let mut all = idx.query(&[0.0], Neighbors::All, None).unwrap();
        assert_eq!(all, vec![1, 3, 4, 2, 0]);
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        assert_eq!(
            idx.query(&[0.0], Neighbors::Count(10), None).unwrap().len(),
            5
        );
        assert_eq!(
            idx.query(&[0.0], Neighbors::Count(10), Some(0))
                .unwrap()
                .len(),
            4
        );
        assert!(idx.query(&[0.0], Neighbors::Count(0), None).is_err());
        assert!(idx.query(&[0.0], Neighbors::All, Some(5)).is_err());
        assert!(idx.query(&[0.0, 1.0], Neighbors::All, None).is_err());
    }

    #[test]
    fn knn_predict_basics() {
        let idx = KnnIndex::build(line(&[0.0, 1.0, 2.0, 10.0])).unwrap();
        let t = [1.0, 2.0, 3.0, 10.0];
        assert_eq!(
            knn_predict(&idx, &t, &[10.0], Neighbors::Count(1)).unwrap(),
            10.0
        );
        assert_eq!(
            knn_predict(&idx, &t, &[0.4], Neighbors::Count(4)).unwrap(),
            4.0
        );
        assert_eq!(
            knn_predict(&idx, &t, &[0.9], Neighbors::Count(2)).unwrap(),
            1.5
        );
    }

    #[test]
    fn neighbors_parse_and_display() {
        assert_eq!("ALL".parse::<Neighbors>().unwrap(), Neighbors::All);
        assert_eq!("all".parse::<Neighbors>().unwrap(), Neighbors::All);
        assert_eq!(" 16".parse::<Neighbors>().unwrap(), Neighbors::Count(16));
        assert!("0".parse::<Neighbors>().is_err());
        assert!("x".parse::<Neighbors>().is_err());
        assert_eq!(alloc::format!("{}", Neighbors::All), "ALL");
        assert_eq!(Neighbors::Count(3).clip(2), 2);
    }
}
