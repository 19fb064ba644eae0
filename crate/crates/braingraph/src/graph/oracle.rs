//! Reference adjacencies for planted-structure experiments: the true
//! coupling support and a degree-matched random rewiring of it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::adjacency::{normalize_adjacency, Adjacency};
use crate::numerics::{Stream, Tensor};

/// Binary union support of the given coupling matrices: edge (i, j) iff
/// any matrix has a nonzero off-diagonal entry there.
pub fn support_adjacency(couplings: &[&Tensor]) -> Result<Adjacency> {
    let first = couplings.first().ok_or_else(|| Error::Contract("no coupling matrices".into()))?;
    let n = first.rows();
    let mut out = Tensor::zeros(&[n, n]);
    for c in couplings {
        if c.rank() != 2 || c.rows() != n || c.cols() != n {
            return Err(Error::Dimension("coupling matrices must share square shape".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && c.at2(i, j) != 0.0 {
                    out.set2(i, j, 1.0);
                    out.set2(j, i, 1.0);
                }
            }
        }
    }
    Adjacency::raw(out)
}

/// Random simple graph with exactly the same degree sequence, obtained
/// by repeated double-edge swaps: edges (a,b),(c,d) become (a,d),(c,b)
/// when that creates no self-loop or duplicate edge.
pub fn degree_matched_rewire(binary: &Adjacency, stream: &mut Stream) -> Result<Adjacency> {
    let n = binary.dim();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = binary.values.at2(i, j);
            if v != 0.0 {
                if v != 1.0 {
                    return Err(Error::Contract("rewiring expects a 0/1 adjacency".into()));
                }
                edges.push((i, j));
            }
        }
    }
    if edges.len() < 2 {
        return Ok(binary.clone());
    }
    let mut present: std::collections::BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };

    let target_swaps = 10 * edges.len();
    let max_attempts = 100 * edges.len();
    let mut swaps = 0;
    for _ in 0..max_attempts {
        if swaps >= target_swaps {
            break;
        }
        let ei = stream.random_range(0..edges.len());
        let ej = stream.random_range(0..edges.len());
        if ei == ej {
            continue;
        }
        let (a, b) = edges[ei];
        let (mut c, mut d) = edges[ej];
        if stream.random_range(0..2) == 1 {
            std::mem::swap(&mut c, &mut d);
        }
        if a == c || a == d || b == c || b == d {
            continue;
        }
        let (n1, n2) = (key(a, d), key(c, b));
        if present.contains(&n1) || present.contains(&n2) {
            continue;
        }
        present.remove(&key(a, b));
        present.remove(&key(c, d));
        present.insert(n1);
        present.insert(n2);
        edges[ei] = n1;
        edges[ej] = n2;
        swaps += 1;
    }

    let mut out = Tensor::zeros(&[n, n]);
    for &(i, j) in &present {
        out.set2(i, j, 1.0);
        out.set2(j, i, 1.0);
    }
    Adjacency::raw(out)
}

/// Convenience: normalized ground-truth and degree-matched-random
/// adjacencies for a planted-coupling dataset.
pub fn oracle_and_rewired(
    couplings: &[&Tensor],
    seed: u64,
) -> Result<(Adjacency, Adjacency)> {
    let support = support_adjacency(couplings)?;
    let mut stream = Stream::new(seed).derive("rewire");
    let rewired = degree_matched_rewire(&support, &mut stream)?;
    Ok((normalize_adjacency(&support)?, normalize_adjacency(&rewired)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> Adjacency {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            let j = (i + 1) % n;
            t.set2(i, j, 1.0);
            t.set2(j, i, 1.0);
        }
        Adjacency::raw(t).unwrap()
    }

    fn degrees(a: &Adjacency) -> Vec<usize> {
        let n = a.dim();
        (0..n)
            .map(|i| (0..n).filter(|&j| a.values.at2(i, j) != 0.0).count())
            .collect()
    }

    #[test]
    fn support_is_binary_union() {
        let mut a = Tensor::zeros(&[3, 3]);
        a.set2(0, 1, -0.5);
        a.set2(1, 0, -0.5);
        let mut b = Tensor::zeros(&[3, 3]);
        b.set2(1, 2, 0.7);
        b.set2(2, 1, 0.7);
        b.set2(0, 0, 9.0); // diagonal ignored
        let s = support_adjacency(&[&a, &b]).unwrap();
        assert_eq!(s.values.at2(0, 1), 1.0);
        assert_eq!(s.values.at2(1, 2), 1.0);
        assert_eq!(s.values.at2(0, 2), 0.0);
        assert_eq!(s.values.at2(0, 0), 0.0);
    }

    #[test]
    fn rewiring_preserves_degrees() {
        let mut t = Tensor::zeros(&[8, 8]);
        for &(i, j) in &[(0usize, 1usize), (0, 2), (0, 3), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (1, 7)] {
            t.set2(i, j, 1.0);
            t.set2(j, i, 1.0);
        }
        let orig = Adjacency::raw(t).unwrap();
        let mut s = Stream::new(4);
        let rew = degree_matched_rewire(&orig, &mut s).unwrap();
        assert_eq!(degrees(&orig), degrees(&rew));
        // no self loops
        for i in 0..8 {
            assert_eq!(rew.values.at2(i, i), 0.0);
        }
    }

    #[test]
    fn rewiring_changes_larger_graphs() {
        let orig = ring(12);
        let mut s = Stream::new(9);
        let rew = degree_matched_rewire(&orig, &mut s).unwrap();
        assert_eq!(degrees(&orig), degrees(&rew));
        assert_ne!(orig.values.values(), rew.values.values());
    }

    #[test]
    fn rewiring_is_deterministic() {
        let orig = ring(10);
        let a = degree_matched_rewire(&orig, &mut Stream::new(3)).unwrap();
        let b = degree_matched_rewire(&orig, &mut Stream::new(3)).unwrap();
        assert_eq!(a.values.values(), b.values.values());
    }
}
