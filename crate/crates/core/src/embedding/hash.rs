//! Deterministic text embedder used in place of a sentence transformer.
//!
//! Scheme, so other implementations can reproduce vectors bit for bit:
//!
//! 1. Split the text on every character that is not alphanumeric and
//!    lowercase each piece; empty pieces are discarded. If no token remains,
//!    the whole text (possibly empty) is the single token.
//! 2. Each token seeds a SplitMix64 stream with the 64-bit FNV-1a hash of its
//!    UTF-8 bytes. Component `i` of the token vector is
//!    `(next_u64() >> 11) * 2^-53 * 2 - 1`, drawn in order `i = 0..dim`.
//! 3. Token vectors are summed (repeated tokens count repeatedly) and the sum
//!    is scaled to unit Euclidean norm.
//!
//! Texts sharing tokens get positively correlated vectors, which makes the
//! embedder usable for retrieval fixtures.

use super::{EmbeddingError, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn next_signed_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

fn tokens(text: &str) -> Vec<String> {
    let toks: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    if toks.is_empty() {
        vec![text.to_string()]
    } else {
        toks
    }
}

/// Unit-norm embedding of `text`; see the module docs for the exact scheme.
pub fn hash_embedder(text: &str, dim: usize) -> Result<Vec<f64>> {
    if dim < 2 {
        return Err(EmbeddingError::BadDim { min: 2, got: dim });
    }
    let mut acc = vec![0.0f64; dim];
    for tok in tokens(text) {
        let mut rng = SplitMix64(fnv1a(tok.as_bytes()));
        for a in acc.iter_mut() {
            *a += rng.next_signed_unit();
        }
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        acc[0] = 1.0;
    } else {
        acc.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(acc)
}
