/// Word-level Levenshtein distance with unit costs.
pub fn word_levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut row: alloc::vec::Vec<usize> = (0..=short.len()).collect();
    for (j, lt) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = j + 1;
        for (i, st) in short.iter().enumerate() {
            let up = row[i + 1];
            row[i + 1] = if st == lt {
                diag
            } else {
                1 + diag.min(up).min(row[i])
            };
            diag = up;
        }
    }
    row[short.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-matrix reference, written independently of the rolling-row version.
    fn full_matrix(a: &[u8], b: &[u8]) -> usize {
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn basic_cases() {
        assert_eq!(word_levenshtein(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(word_levenshtein(&['a', 'b', 'c'], &['a', 'c']), 1);
        assert_eq!(word_levenshtein::<u8>(&[], &[1, 2]), 2);
        assert_eq!(word_levenshtein(&[1, 2], &[2, 1]), 2);
    }

    #[test]
    fn matches_full_matrix_on_random_pairs() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(7);
        for _ in 0..50 {
            let la = rng.gen_range(0..12);
            let lb = rng.gen_range(0..12);
            let a: Vec<u8> = (0..la).map(|_| rng.gen_range(0..4)).collect();
            let b: Vec<u8> = (0..lb).map(|_| rng.gen_range(0..4)).collect();
            assert_eq!(word_levenshtein(&a, &b), full_matrix(&a, &b));
        }
    }

    proptest! {
        #[test]
        fn metric_axioms(
            a in proptest::collection::vec(0u8..4, 0..10),
            b in proptest::collection::vec(0u8..4, 0..10),
            c in proptest::collection::vec(0u8..4, 0..10),
        ) {
            let ab = word_levenshtein(&a, &b);
            prop_assert_eq!(ab, word_levenshtein(&b, &a));
            prop_assert!(word_levenshtein(&a, &c) <= ab + word_levenshtein(&b, &c));
            prop_assert_eq!(ab == 0, a == b);
        }
    }
}
