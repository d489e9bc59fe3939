//! Cyclic Latin squares of prime order.
//!
//! For prime `N` the squares `A_m(i, j) = ((m (i-1) + (j-1)) mod N) + 1`
//! with `m = 1..N-1` form a family of `N-1` mutually orthogonal Latin
//! squares: superimposing any two distinct members produces every ordered
//! pair exactly once. Sounding-sequence hopping uses one square per
//! hexagonal cell class so that users in different cells collide on a
//! subcarrier at most once per `N` slots.

use crate::error::{Error, Result};

/// Entries of the order-`n` square `A_m`, row-major, values in `[1, n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatinSquare {
    pub n: usize,
    pub m: usize,
    rows: Vec<Vec<usize>>,
}

impl LatinSquare {
    /// Entry at 0-indexed `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.rows[row][col]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Build `A_m` of prime order `n` with `1 <= m <= n-1`.
pub fn latin_square(n: usize, m: usize) -> Result<LatinSquare> {
    if !is_prime(n) {
        return Err(Error::UnsupportedOrder(n));
    }
    if m == 0 || m >= n {
        return Err(Error::InvalidConfig(format!(
            "square index must lie in [1, {}], got {m}",
            n - 1
        )));
    }
    let rows = (0..n)
        .map(|i| (0..n).map(|j| (m * i + j) % n + 1).collect())
        .collect();
    Ok(LatinSquare { n, m, rows })
}

/// Every row and column a permutation of `1..=n`.
pub fn is_latin(square: &LatinSquare) -> bool {
    let n = square.n;
    let full: Vec<usize> = (1..=n).collect();
    for i in 0..n {
        let mut row: Vec<usize> = (0..n).map(|j| square.get(i, j)).collect();
        row.sort_unstable();
        if row != full {
            return false;
        }
        let mut col: Vec<usize> = (0..n).map(|j| square.get(j, i)).collect();
        col.sort_unstable();
        if col != full {
            return false;
        }
    }
    true
}

/// Superimposing `a` and `b` yields each ordered pair exactly once.
pub fn are_orthogonal(a: &LatinSquare, b: &LatinSquare) -> bool {
    if a.n != b.n {
        return false;
    }
    let n = a.n;
    let mut seen = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let idx = (a.get(i, j) - 1) * n + (b.get(i, j) - 1);
            if seen[idx] {
                return false;
            }
            seen[idx] = true;
        }
    }
    seen.iter().all(|&s| s)
}

/// Multiplicative inverse of `a` modulo prime `p`.
pub(crate) fn mod_inverse(a: usize, p: usize) -> usize {
    // Fermat: a^(p-2) mod p, by square-and-multiply.
    let mut base = a % p;
    let mut exp = p - 2;
    let mut acc = 1usize;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_five_squares_match_reference() {
        // Hand-computed A_1 and A_2 of order 5.
        let a = latin_square(5, 1).unwrap();
        assert_eq!(
            a.rows(),
            &[
                vec![1, 2, 3, 4, 5],
                vec![2, 3, 4, 5, 1],
                vec![3, 4, 5, 1, 2],
                vec![4, 5, 1, 2, 3],
                vec![5, 1, 2, 3, 4],
            ]
        );
        let b = latin_square(5, 2).unwrap();
        assert_eq!(
            b.rows(),
            &[
                vec![1, 2, 3, 4, 5],
                vec![3, 4, 5, 1, 2],
                vec![5, 1, 2, 3, 4],
                vec![2, 3, 4, 5, 1],
                vec![4, 5, 1, 2, 3],
            ]
        );
        assert!(is_latin(&a));
        assert!(is_latin(&b));
        assert!(are_orthogonal(&a, &b));
    }

    #[test]
    fn families_are_latin_and_mutually_orthogonal() {
        for n in [5usize, 19] {
            let squares: Vec<LatinSquare> =
                (1..n).map(|m| latin_square(n, m).unwrap()).collect();
            for s in &squares {
                assert!(is_latin(s), "A_{} of order {n} is not Latin", s.m);
            }
            for i in 0..squares.len() {
                for j in (i + 1)..squares.len() {
                    assert!(
                        are_orthogonal(&squares[i], &squares[j]),
                        "A_{} and A_{} of order {n} not orthogonal",
                        i + 1,
                        j + 1
                    );
                }
            }
        }
    }

    #[test]
    fn order_61_family_spot_checked() {
        // Checking all C(60,2) pairs would dominate the suite's runtime;
        // every square is still validated, orthogonality on sampled pairs.
        let n = 61usize;
        let squares: Vec<LatinSquare> = (1..n).map(|m| latin_square(n, m).unwrap()).collect();
        for s in &squares {
            assert!(is_latin(s), "A_{} of order {n} is not Latin", s.m);
        }
        use rand::RngCore;
        let mut rng = crate::rng::substream(61, "latin-pairs", 0);
        for _ in 0..10 {
            let i = (rng.next_u64() % 60) as usize;
            let j = loop {
                let j = (rng.next_u64() % 60) as usize;
                if j != i {
                    break j;
                }
            };
            assert!(
                are_orthogonal(&squares[i], &squares[j]),
                "A_{} and A_{} of order {n} not orthogonal",
                i + 1,
                j + 1
            );
        }
    }

    #[test]
    fn composite_orders_are_rejected() {
        for n in [0usize, 1, 4, 6, 9, 15] {
            match latin_square(n, 1) {
                Err(Error::UnsupportedOrder(got)) => assert_eq!(got, n),
                other => panic!("expected UnsupportedOrder for n={n}, got {other:?}"),
            }
        }
        assert!(latin_square(5, 0).is_err());
        assert!(latin_square(5, 5).is_err());
    }

    #[test]
    fn mod_inverse_is_correct() {
        for p in [5usize, 19, 61] {
            for a in 1..p {
                assert_eq!(a * mod_inverse(a, p) % p, 1, "inverse of {a} mod {p}");
            }
        }
    }
}
