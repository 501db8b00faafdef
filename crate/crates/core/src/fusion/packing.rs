use serde::{Deserialize, Serialize};

use crate::graph::EntityId;
use crate::{Error, Result};

/// The `step`-th element of an entity's sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotRef {
    pub entity: EntityId,
    pub step: usize,
}

/// Sequences concatenated into fixed-length rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedBatch {
    /// `None` marks padding.
    pub rows: Vec<Vec<Option<SlotRef>>>,
    pub row_length: usize,
    /// `mask[r][p]` is set iff slots `p` and `p + 1` of row `r` belong to the
    /// same sequence, i.e. the hidden state may flow between them.
    pub mask: Vec<Vec<bool>>,
    pub padding_count: usize,
}

impl PackedBatch {
    /// Whether slot `p` of row `r` receives the previous slot's hidden state.
    pub fn carries_into(&self, r: usize, p: usize) -> bool {
        p > 0 && self.mask[r][p - 1]
    }

    /// Lengths of the packed sequences, in row order.
    pub fn sequence_lengths(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            let mut p = 0;
            while p < row.len() {
                if row[p].is_none() {
                    p += 1;
                    continue;
                }
                let start = p;
                while p + 1 < row.len() && self.mask[r][p] {
                    p += 1;
                }
                out.push(p + 1 - start);
                p += 1;
            }
        }
        out
    }
}

/// Padding needed to pad every sequence to the longest one.
pub fn naive_padding(lengths: &[usize]) -> usize {
    let longest = lengths.iter().copied().max().unwrap_or(0);
    lengths.iter().map(|&l| longest - l).sum()
}

/// First-fit-decreasing packing into rows as long as the longest sequence.
/// Ties in length keep ascending entity order.
pub fn pack_sequences(sequences: &[(EntityId, usize)]) -> Result<PackedBatch> {
    if let Some(&(e, _)) = sequences.iter().find(|(_, l)| *l == 0) {
        return Err(Error::invalid(format!("sequence of entity {e} is empty")));
    }
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    order.sort_by(|&a, &b| {
        sequences[b]
            .1
            .cmp(&sequences[a].1)
            .then(sequences[a].0.cmp(&sequences[b].0))
    });
    let row_length = sequences.iter().map(|s| s.1).max().unwrap_or(0);

    let mut rows: Vec<Vec<Option<SlotRef>>> = Vec::new();
    let mut mask: Vec<Vec<bool>> = Vec::new();
    for i in order {
        let (entity, len) = sequences[i];
        let r = match rows.iter().position(|row| row_length - row.len() >= len) {
            Some(r) => r,
            None => {
                rows.push(Vec::with_capacity(row_length));
                mask.push(Vec::with_capacity(row_length.saturating_sub(1)));
                rows.len() - 1
            }
        };
        if !rows[r].is_empty() {
            mask[r].push(false);
        }
        for step in 0..len {
            rows[r].push(Some(SlotRef { entity, step }));
            if step + 1 < len {
                mask[r].push(true);
            }
        }
    }
    let mut padding_count = 0;
    for (row, m) in rows.iter_mut().zip(&mut mask) {
        while row.len() < row_length {
            if !row.is_empty() {
                m.push(false);
            }
            row.push(None);
            padding_count += 1;
        }
    }
    Ok(PackedBatch {
        rows,
        row_length,
        mask,
        padding_count,
    })
}

/// `(padded slots, slots naive per-sequence padding would need)`.
pub fn padding_waste(batch: &PackedBatch) -> (usize, usize) {
    (batch.padding_count, naive_padding(&batch.sequence_lengths()))
}

/// Upper bound on first-fit-decreasing rows given the optimum:
/// `floor(11/9 * opt + 6/9)`.
pub fn ffd_bin_bound(optimal_rows: usize) -> usize {
    (11 * optimal_rows + 6) / 9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concatenates_two_short_sequences() {
        let b = pack_sequences(&[(0, 4), (1, 2), (2, 2)]).unwrap();
        assert_eq!(b.rows.len(), 2);
        assert_eq!(b.row_length, 4);
        assert_eq!(b.padding_count, 0);
        assert_eq!(padding_waste(&b), (0, 4));
        // Row 1 is (B1, B2, C1, C2): the join between B2 and C1 is masked.
        assert_eq!(b.mask[1], vec![true, false, true]);
        assert_eq!(b.mask[0], vec![true, true, true]);
    }

    #[test]
    fn single_sequence() {
        let b = pack_sequences(&[(9, 5)]).unwrap();
        assert_eq!(b.rows.len(), 1);
        assert_eq!(b.padding_count, 0);
        assert!(b.mask[0].iter().all(|&m| m));
    }

    #[test]
    fn five_three_three() {
        let b = pack_sequences(&[(0, 5), (1, 3), (2, 3)]).unwrap();
        assert_eq!(b.rows.len(), 3);
        assert_eq!(b.padding_count, 4);
        assert_eq!(b.mask[1], vec![true, true, false, false]);
    }

    #[test]
    fn equal_lengths_need_no_padding() {
        let b = pack_sequences(&[(0, 3), (1, 3), (2, 3)]).unwrap();
        assert_eq!(padding_waste(&b), (0, 0));
    }

    #[test]
    fn empty_sequence_rejected() {
        assert!(pack_sequences(&[(0, 0)]).is_err());
        let b = pack_sequences(&[]).unwrap();
        assert!(b.rows.is_empty());
    }

    #[test]
    fn sequence_lengths_recovered() {
        let b = pack_sequences(&[(0, 6), (1, 1), (2, 2), (3, 3)]).unwrap();
        let mut lens = b.sequence_lengths();
        lens.sort_unstable();
        assert_eq!(lens, vec![1, 2, 3, 6]);
    }
}
