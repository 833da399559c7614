use super::banks::{conflict_count, ideal_transactions, NUM_BANKS};
use super::LayoutError;

/// Largest per-point variable count any lines configuration stores.
pub const MAX_LINES_VARS: usize = 25;

/// Shared word offset of variable `v` at point `(i, j, k)` of block-local
/// element `e_l` in the lines layout, `e_l + n (i + j m + k m^2 + v m^3)`.
pub fn lines_index(
    e_l: usize,
    i: usize,
    j: usize,
    k: usize,
    v: usize,
    n: usize,
    p: usize,
) -> Result<usize, LayoutError> {
    let m = p + 1;
    if e_l >= n || i >= m || j >= m || k >= m || v >= MAX_LINES_VARS {
        return Err(LayoutError::IndexRange);
    }
    Ok(e_l + n * (i + j * m + k * m * m + v * m * m * m))
}

/// Global element handled by a lines-method thread, `tid mod n + n bid`.
pub fn global_element(thread_idx: usize, n: usize, block_idx: usize) -> Result<usize, LayoutError> {
    if n == 0 {
        return Err(LayoutError::ZeroElements);
    }
    Ok(thread_idx % n + n * block_idx)
}

/// Point along the x-line a planar-method thread owns,
/// `(tid mod warp_size) mod (p + 1)`.
pub fn planar_lane(thread_idx: usize, p: usize, warp_size: usize) -> Result<usize, LayoutError> {
    if p + 1 > warp_size {
        return Err(LayoutError::LineTooLong { m: p + 1, warp_size });
    }
    Ok((thread_idx % warp_size) % (p + 1))
}

/// Element-major shared layout: element `e` occupies words
/// `[e (elem_words + pad_words), e (elem_words + pad_words) + elem_words)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementLayout {
    pub elem_words: usize,
    pub pad_words: usize,
    pub elements: usize,
    pub word_bytes: usize,
}

impl ElementLayout {
    pub fn new(elem_words: usize, elements: usize, word_bytes: usize) -> Self {
        Self { elem_words, pad_words: 0, elements, word_bytes }
    }

    pub fn stride_words(&self) -> usize {
        self.elem_words + self.pad_words
    }

    pub fn total_bytes(&self) -> usize {
        self.elements * self.stride_words() * self.word_bytes
    }

    pub fn byte_addr(&self, element: usize, offset: usize) -> usize {
        (element * self.stride_words() + offset) * self.word_bytes
    }

    /// Worst serialization over the planned warp accesses, each a list of
    /// `(element, word offset)` pairs, one per active lane.
    pub fn worst_extra(&self, accesses: &[Vec<(usize, usize)>]) -> usize {
        accesses
            .iter()
            .map(|acc| {
                let addrs: Vec<usize> = acc.iter().map(|&(e, o)| self.byte_addr(e, o)).collect();
                conflict_count(&addrs, self.word_bytes) - ideal_transactions(&addrs, self.word_bytes)
            })
            .max()
            .unwrap_or(0)
    }
}

/// Pads the element stride by the smallest constant that makes every planned
/// access conflict-free.
pub fn deconflict_layout(
    layout: ElementLayout,
    accesses: &[Vec<(usize, usize)>],
    capacity_bytes: usize,
) -> Result<ElementLayout, LayoutError> {
    let bank_words = NUM_BANKS * super::banks::BANK_WIDTH / layout.word_bytes;
    let found = (0..bank_words)
        .map(|pad| ElementLayout { pad_words: pad, ..layout })
        .find(|l| l.worst_extra(accesses) == 0)
        .ok_or(LayoutError::NoPadding)?;
    if found.total_bytes() > capacity_bytes {
        return Err(LayoutError::Capacity { needed: found.total_bytes(), capacity: capacity_bytes });
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_index_examples() {
        assert_eq!(lines_index(0, 0, 0, 0, 0, 1, 0), Ok(0));
        assert_eq!(lines_index(1, 1, 0, 0, 0, 2, 1), Ok(3));
        assert_eq!(lines_index(3, 3, 3, 3, 12, 4, 3), Ok(3327));
        assert_eq!(lines_index(4, 0, 0, 0, 0, 4, 3), Err(LayoutError::IndexRange));
        assert_eq!(lines_index(0, 4, 0, 0, 0, 4, 3), Err(LayoutError::IndexRange));
    }

    #[test]
    fn lines_index_is_a_bijection() {
        for p in 0..=3 {
            for n in 1..=4 {
                let m = p + 1;
                let total = n * m * m * m * 13;
                let mut seen = vec![false; total];
                for v in 0..13 {
                    for k in 0..m {
                        for j in 0..m {
                            for i in 0..m {
                                for e in 0..n {
                                    let o = lines_index(e, i, j, k, v, n, p).unwrap();
                                    assert!(o < total && !seen[o]);
                                    seen[o] = true;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn thread_mappings() {
        assert_eq!(global_element(0, 4, 0), Ok(0));
        assert_eq!(global_element(5, 4, 2), Ok(9));
        assert_eq!(global_element(7, 8, 3), Ok(31));
        assert_eq!(global_element(7, 0, 3), Err(LayoutError::ZeroElements));
        assert_eq!(planar_lane(0, 3, 32), Ok(0));
        assert_eq!(planar_lane(33, 3, 32), Ok(1));
        assert_eq!(planar_lane(38, 3, 32), Ok(2));
        assert!(planar_lane(0, 32, 32).is_err());
    }

    /// Store and broadcast-read pattern of one warp of planar threads.
    fn plane_accesses(m: usize) -> Vec<Vec<(usize, usize)>> {
        let epw = 32 / m;
        let mut out = Vec::new();
        for v in 0..13 {
            for j in 0..m {
                out.push((0..epw * m).map(|l| (l / m, (v * m + j) * m + l % m)).collect());
                for c in 0..m {
                    out.push((0..epw * m).map(|l| (l / m, (v * m + j) * m + c)).collect());
                }
            }
        }
        out
    }

    #[test]
    fn planar_plane_deconflicts() {
        for m in 2..=5 {
            let base = ElementLayout::new(13 * m * m, 32 / m, 4);
            let padded = deconflict_layout(base, &plane_accesses(m), 1 << 20).unwrap();
            assert_eq!(padded.worst_extra(&plane_accesses(m)), 0, "m={m}");
        }
        let base = ElementLayout::new(13 * 16, 8, 4);
        assert!(base.worst_extra(&plane_accesses(4)) > 0);
    }

    #[test]
    fn conflict_free_layout_is_unchanged() {
        let base = ElementLayout::new(32, 1, 4);
        let acc = vec![(0..32).map(|l| (0, l)).collect()];
        assert_eq!(deconflict_layout(base, &acc, base.total_bytes()), Ok(base));
    }

    #[test]
    fn padding_beyond_capacity_rejected() {
        let base = ElementLayout::new(13 * 16, 8, 4);
        assert!(matches!(
            deconflict_layout(base, &plane_accesses(4), base.total_bytes()),
            Err(LayoutError::Capacity { .. })
        ));
    }
}
