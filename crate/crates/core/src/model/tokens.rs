use alloc::format;
use alloc::vec::Vec;

use super::config::mask_count;
use crate::geometry::Point3;
use crate::rng::rng;
use crate::{Error, Result};

/// Role of a token in the in-context sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    QueryInput,
    QueryTarget,
    PromptInput,
    PromptTarget,
}

impl Segment {
    /// Sequence order.
    pub const ORDER: [Segment; 4] = [Segment::QueryInput, Segment::QueryTarget, Segment::PromptInput, Segment::PromptTarget];

    pub fn position(self) -> usize {
        Segment::ORDER.iter().position(|&s| s == self).unwrap_or(0)
    }
}

/// Per-patch tokens, stored row-major `n x C` (one contiguous row per token).
///
/// `pos` holds the positional embedding already included in `tokens`; it is
/// kept so masked tokens can retain it.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    pub dim: usize,
    pub tokens: Vec<f64>,
    pub pos: Vec<f64>,
    pub centers: Vec<Point3>,
    /// `None` until the matrix is placed in a sequence.
    pub segments: Vec<Option<Segment>>,
}

impl TokenMatrix {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.tokens[i * self.dim..(i + 1) * self.dim]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.centers.len();
        if self.tokens.len() != n * self.dim || self.pos.len() != n * self.dim || self.segments.len() != n {
            return Err(Error::shape("token matrix buffers disagree on length"));
        }
        if self.tokens.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("token matrix".into()));
        }
        Ok(())
    }

    /// Rows `range` as a standalone matrix, keeping tags.
    pub fn slice(&self, range: core::ops::Range<usize>) -> TokenMatrix {
        let d = self.dim;
        TokenMatrix {
            dim: d,
            tokens: self.tokens[range.start * d..range.end * d].to_vec(),
            pos: self.pos[range.start * d..range.end * d].to_vec(),
            centers: self.centers[range.clone()].to_vec(),
            segments: self.segments[range].to_vec(),
        }
    }

    /// The rows tagged with `segment`, assuming the canonical four-way layout.
    pub fn segment(&self, segment: Segment) -> TokenMatrix {
        let m = self.len() / 4;
        let start = segment.position() * m;
        self.slice(start..start + m)
    }
}

/// Element-wise maximum over tokens.
pub fn global_feature(tokens: &TokenMatrix) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::invalid("global feature of an empty token matrix"));
    }
    let d = tokens.dim;
    let mut out = tokens.token(0).to_vec();
    for i in 1..tokens.len() {
        for (o, &v) in out.iter_mut().zip(&tokens.tokens[i * d..(i + 1) * d]) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(out)
}

/// Concatenates `[query-input, query-target, prompt-input, prompt-target]`
/// and tags each run.
pub fn assemble_icl_sequence(
    query_input: &TokenMatrix,
    query_target: &TokenMatrix,
    prompt_input: &TokenMatrix,
    prompt_target: &TokenMatrix,
) -> Result<TokenMatrix> {
    let parts = [query_input, query_target, prompt_input, prompt_target];
    let m = query_input.len();
    let d = query_input.dim;
    for p in parts {
        p.validate()?;
        if p.len() != m || p.dim != d {
            return Err(Error::shape(format!("segment of {}x{} tokens, expected {m}x{d}", p.len(), p.dim)));
        }
    }
    let mut seq = TokenMatrix {
        dim: d,
        tokens: Vec::with_capacity(4 * m * d),
        pos: Vec::with_capacity(4 * m * d),
        centers: Vec::with_capacity(4 * m),
        segments: Vec::with_capacity(4 * m),
    };
    for (p, seg) in parts.iter().zip(Segment::ORDER) {
        seq.tokens.extend_from_slice(&p.tokens);
        seq.pos.extend_from_slice(&p.pos);
        seq.centers.extend_from_slice(&p.centers);
        seq.segments.extend(core::iter::repeat_n(Some(seg), m));
    }
    Ok(seq)
}

/// Sorted patch indices (within the query-target segment) to mask:
/// `ceil(ratio * m)` drawn without replacement.
pub fn draw_mask(m: usize, ratio: f64, seed: u64) -> Vec<usize> {
    let count = mask_count(ratio, m);
    let mut idx = rand::seq::index::sample(&mut rng(seed), m, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Replaces the given query-target tokens with `mask_token` plus their
/// positional embedding.
pub fn apply_mask(seq: &TokenMatrix, masked: &[usize], mask_token: &[f64]) -> Result<TokenMatrix> {
    let m = seq.len() / 4;
    if seq.len() != 4 * m || mask_token.len() != seq.dim {
        return Err(Error::shape("mask expects a four-segment sequence and a C-vector"));
    }
    let d = seq.dim;
    let mut out = seq.clone();
    for &i in masked {
        if i >= m {
            return Err(Error::contract(format!("mask index {i} outside the query-target segment")));
        }
        let row = m + i;
        for c in 0..d {
            out.tokens[row * d + c] = mask_token[c] + seq.pos[row * d + c];
        }
    }
    Ok(out)
}

/// Masks `ceil(ratio * M)` randomly chosen query-target tokens.
pub fn mask_tokens(seq: &TokenMatrix, ratio: f64, mask_token: &[f64], seed: u64) -> Result<(TokenMatrix, Vec<usize>)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid("mask ratio must lie in [0, 1]"));
    }
    let idx = draw_mask(seq.len() / 4, ratio, seed);
    Ok((apply_mask(seq, &idx, mask_token)?, idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn toy(m: usize, d: usize, base: f64) -> TokenMatrix {
        TokenMatrix {
            dim: d,
            tokens: (0..m * d).map(|i| base + i as f64).collect(),
            pos: (0..m * d).map(|i| 0.5 * i as f64).collect(),
            centers: (0..m).map(|i| [i as f64, base, 0.0]).collect(),
            segments: vec![None; m],
        }
    }

    #[test]
    fn global_feature_examples() {
        let t = TokenMatrix { dim: 2, tokens: vec![1.0, 0.0, 0.0, 1.0], pos: vec![0.0; 4], centers: vec![[0.0; 3]; 2], segments: vec![None; 2] };
        assert_eq!(global_feature(&t).unwrap(), vec![1.0, 1.0]);
        let one = t.slice(0..1);
        assert_eq!(global_feature(&one).unwrap(), vec![1.0, 0.0]);
        let mut dup = t.clone();
        dup.tokens.extend_from_slice(&[0.0, 1.0]);
        dup.pos.extend_from_slice(&[0.0, 0.0]);
        dup.centers.push([0.0; 3]);
        dup.segments.push(None);
        assert_eq!(global_feature(&dup).unwrap(), global_feature(&t).unwrap());
    }

    #[test]
    fn assembly_layout_and_round_trip() {
        let parts = [toy(4, 3, 0.0), toy(4, 3, 100.0), toy(4, 3, 200.0), toy(4, 3, 300.0)];
        let seq = assemble_icl_sequence(&parts[0], &parts[1], &parts[2], &parts[3]).unwrap();
        assert_eq!(seq.len(), 16);
        for (i, s) in seq.segments.iter().enumerate() {
            assert_eq!(*s, Some(Segment::ORDER[i / 4]));
        }
        let again = assemble_icl_sequence(
            &seq.segment(Segment::QueryInput),
            &seq.segment(Segment::QueryTarget),
            &seq.segment(Segment::PromptInput),
            &seq.segment(Segment::PromptTarget),
        )
        .unwrap();
        assert_eq!(again, seq);
        assert!(assemble_icl_sequence(&parts[0], &toy(3, 3, 0.0), &parts[2], &parts[3]).is_err());
    }

    #[test]
    fn mask_counts_and_placement() {
        let parts = [toy(64, 2, 0.0), toy(64, 2, 1.0), toy(64, 2, 2.0), toy(64, 2, 3.0)];
        let seq = assemble_icl_sequence(&parts[0], &parts[1], &parts[2], &parts[3]).unwrap();
        let mask = [9.0, -9.0];
        let (same, none) = mask_tokens(&seq, 0.0, &mask, 1).unwrap();
        assert!(none.is_empty());
        assert_eq!(same, seq);
        let (_, all) = mask_tokens(&seq, 1.0, &mask, 1).unwrap();
        assert_eq!(all, (0..64).collect::<Vec<_>>());
        let (masked, idx) = mask_tokens(&seq, 0.7, &mask, 1).unwrap();
        assert_eq!(idx.len(), 45);
        assert_eq!(mask_tokens(&seq, 0.7, &mask, 1).unwrap().1, idx);
        for row in 0..256 {
            let changed = masked.token(row) != seq.token(row);
            let expect = (64..128).contains(&row) && idx.contains(&(row - 64));
            assert_eq!(changed, expect, "row {row}");
            if expect {
                assert_eq!(masked.token(row)[0], 9.0 + seq.pos[row * 2]);
            }
        }
    }
}
