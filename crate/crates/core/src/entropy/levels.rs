//! Adaptive coding of quantised levels as fixed-width binary fields.
//!
//! Each level is written MSB first in `bits` bits. A bit's context is the
//! node it sits at in the binary tree of field prefixes, combined with the
//! top bits of the previous level in coding order.

use super::binary::{AdaptiveBitModel, BitDecoder, BitEncoder};
use crate::error::{Error, Result};

/// How many leading bits of the previous level take part in the context.
const PREV_BITS: u32 = 2;

struct LevelContexts {
    bits: u32,
    prev_bits: u32,
    model: AdaptiveBitModel,
}

impl LevelContexts {
    fn new(bits: u32) -> Self {
        let prev_bits = PREV_BITS.min(bits);
        LevelContexts {
            bits,
            prev_bits,
            model: AdaptiveBitModel::new(1 << (bits + prev_bits)),
        }
    }

    #[inline]
    fn ctx(&self, prev: u16, node: usize) -> usize {
        let p = (prev >> (self.bits - self.prev_bits)) as usize;
        (p << self.bits) | node
    }
}

fn check_bits(bits: u32) -> Result<()> {
    if !(1..=15).contains(&bits) {
        return Err(Error::InvalidParameter(format!("level field width {bits}")));
    }
    Ok(())
}

pub fn encode_levels(levels: &[u16], bits: u32) -> Result<Vec<u8>> {
    check_bits(bits)?;
    let mut cx = LevelContexts::new(bits);
    let mut enc = BitEncoder::new();
    let mut prev = 0u16;
    for &l in levels {
        if (l as u32) >> bits != 0 {
            return Err(Error::SymbolOutOfRange {
                symbol: l as usize,
                alphabet: 1 << bits,
            });
        }
        let mut node = 1usize;
        for i in (0..bits).rev() {
            let b = (l >> i) & 1 == 1;
            let ctx = cx.ctx(prev, node);
            enc.encode(&mut cx.model, ctx, b);
            node = (node << 1) | b as usize;
        }
        prev = l;
    }
    Ok(enc.finish())
}

pub fn decode_levels(bytes: &[u8], count: usize, bits: u32) -> Result<Vec<u16>> {
    check_bits(bits)?;
    let mut cx = LevelContexts::new(bits);
    let mut dec = BitDecoder::new(bytes);
    let mut prev = 0u16;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut node = 1usize;
        for _ in 0..bits {
            let ctx = cx.ctx(prev, node);
            let b = dec.decode(&mut cx.model, ctx);
            node = (node << 1) | b as usize;
        }
        let l = (node - (1 << bits)) as u16;
        out.push(l);
        prev = l;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smooth_sequence_compresses() {
        let levels: Vec<u16> = (0..4000).map(|i| ((i / 50) % 32) as u16).collect();
        let bytes = encode_levels(&levels, 5).unwrap();
        assert!(bytes.len() * 8 < levels.len() * 5 * 3 / 4, "{}", bytes.len());
        assert_eq!(decode_levels(&bytes, levels.len(), 5).unwrap(), levels);
    }

    #[test]
    fn rejects_wide_level() {
        assert!(encode_levels(&[8], 3).is_err());
        assert!(encode_levels(&[1], 0).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(bits in 1u32..=8, raw in proptest::collection::vec(any::<u16>(), 0..500)) {
            let levels: Vec<u16> = raw.iter().map(|v| v & ((1 << bits) - 1)).collect();
            let bytes = encode_levels(&levels, bits).unwrap();
            prop_assert_eq!(decode_levels(&bytes, levels.len(), bits).unwrap(), levels);
        }
    }
}
