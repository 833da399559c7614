use std::collections::BTreeSet;

use super::LayoutError;

pub const NUM_BANKS: usize = 32;
pub const BANK_WIDTH: usize = 4;

/// Bank serving a 4-byte aligned shared address, `(addr / 4) mod 32`.
pub fn bank_of(byte_addr: usize) -> Result<usize, LayoutError> {
    if byte_addr % BANK_WIDTH != 0 {
        return Err(LayoutError::Misaligned(byte_addr));
    }
    Ok((byte_addr / BANK_WIDTH) % NUM_BANKS)
}

/// Serialized transactions for one warp access of `word_bytes`-wide values.
///
/// Each access touches `word_bytes / 4` consecutive bank words; the result is
/// the largest number of distinct words landing in a single bank, so lanes
/// reading the same word are a broadcast.
pub fn conflict_count(byte_addrs: &[usize], word_bytes: usize) -> usize {
    let mut per_bank: [BTreeSet<usize>; NUM_BANKS] = Default::default();
    for &addr in byte_addrs {
        for part in 0..(word_bytes / BANK_WIDTH).max(1) {
            let word = addr / BANK_WIDTH + part;
            per_bank[word % NUM_BANKS].insert(word);
        }
    }
    per_bank.iter().map(BTreeSet::len).max().unwrap_or(0)
}

/// Transactions a conflict-free access to the same words would need.
pub fn ideal_transactions(byte_addrs: &[usize], word_bytes: usize) -> usize {
    let words: BTreeSet<usize> = byte_addrs
        .iter()
        .flat_map(|&a| (0..(word_bytes / BANK_WIDTH).max(1)).map(move |p| a / BANK_WIDTH + p))
        .collect();
    words.len().div_ceil(NUM_BANKS)
}

/// Transactions beyond the conflict-free minimum.
pub fn extra_transactions(byte_addrs: &[usize], word_bytes: usize) -> usize {
    conflict_count(byte_addrs, word_bytes) - ideal_transactions(byte_addrs, word_bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bank_formula() {
        assert_eq!(bank_of(0), Ok(0));
        assert_eq!(bank_of(4), Ok(1));
        assert_eq!(bank_of(128), Ok(0));
        assert_eq!(bank_of(6), Err(LayoutError::Misaligned(6)));
    }

    #[test]
    fn warp_patterns() {
        let lanes: Vec<usize> = (0..32).collect();
        let stride4: Vec<usize> = lanes.iter().map(|l| 4 * l).collect();
        assert_eq!(conflict_count(&stride4, 4), 1);
        assert_eq!(conflict_count(&[0; 32], 4), 1);
        let stride128: Vec<usize> = lanes.iter().map(|l| 128 * l).collect();
        assert_eq!(conflict_count(&stride128, 4), 32);
        // consecutive doubles cover 64 words, two per bank, and nothing more
        let doubles: Vec<usize> = lanes.iter().map(|l| 8 * l).collect();
        assert_eq!(conflict_count(&doubles, 8), 2);
        assert_eq!(extra_transactions(&doubles, 8), 0);
        assert_eq!(conflict_count(&[], 4), 0);
    }

    proptest! {
        #[test]
        fn matches_bucket_count(addrs in proptest::collection::vec(0usize..4096, 1..=32)) {
            let addrs: Vec<usize> = addrs.into_iter().map(|a| a * 4).collect();
            let mut buckets = vec![Vec::new(); 32];
            for &a in &addrs {
                if !buckets[(a / 4) % 32].contains(&a) {
                    buckets[(a / 4) % 32].push(a);
                }
            }
            let want = buckets.iter().map(Vec::len).max().unwrap();
            prop_assert_eq!(conflict_count(&addrs, 4), want);
            prop_assert!(conflict_count(&addrs, 4) >= ideal_transactions(&addrs, 4));
        }
    }
}
