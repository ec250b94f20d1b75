//! Adaptive binary arithmetic coder with 12-bit probabilities.

use crate::error::{Error, Result};

const PROB_BITS: u32 = 12;
const PROB_ONE: u16 = 1 << PROB_BITS;
const SHIFT: u32 = 5;

/// Probability that the next bit is 1, in units of 2⁻¹², for each context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdaptiveBitModel {
    probs: Vec<u16>,
}

impl AdaptiveBitModel {
    pub fn new(contexts: usize) -> Self {
        AdaptiveBitModel {
            probs: vec![PROB_ONE / 2; contexts.max(1)],
        }
    }

    #[inline]
    pub fn p1(&self, ctx: usize) -> u16 {
        self.probs[ctx]
    }

    #[inline]
    pub fn update(&mut self, ctx: usize, bit: bool) {
        let p = &mut self.probs[ctx];
        if bit {
            *p += (PROB_ONE - *p) >> SHIFT;
        } else {
            *p -= *p >> SHIFT;
        }
    }
}

#[inline]
fn split(x1: u32, x2: u32, p: u16) -> u32 {
    let range = x2 - x1;
    let p = p as u32;
    x1 + (range >> PROB_BITS) * p + (((range & 0xfff) * p) >> PROB_BITS)
}

pub struct BitEncoder {
    x1: u32,
    x2: u32,
    out: Vec<u8>,
}

impl Default for BitEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl BitEncoder {
    pub fn new() -> Self {
        BitEncoder {
            x1: 0,
            x2: u32::MAX,
            out: Vec::new(),
        }
    }

    /// Code `bit` under context `ctx` and adapt the model.
    pub fn encode(&mut self, model: &mut AdaptiveBitModel, ctx: usize, bit: bool) {
        let xmid = split(self.x1, self.x2, model.p1(ctx));
        if bit {
            self.x2 = xmid;
        } else {
            self.x1 = xmid + 1;
        }
        model.update(ctx, bit);
        while (self.x1 ^ self.x2) & 0xff00_0000 == 0 {
            self.out.push((self.x2 >> 24) as u8);
            self.x1 <<= 8;
            self.x2 = (self.x2 << 8) | 0xff;
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        self.out.push((self.x1 >> 24) as u8);
        self.out
    }
}

pub struct BitDecoder<'a> {
    x1: u32,
    x2: u32,
    x: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> BitDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        let mut d = BitDecoder {
            x1: 0,
            x2: u32::MAX,
            x: 0,
            input,
            pos: 0,
        };
        for _ in 0..4 {
            d.x = (d.x << 8) | d.byte() as u32;
        }
        d
    }

    fn byte(&mut self) -> u8 {
        // bytes past the end read as 0xFF, matching the one-byte flush
        let b = self.input.get(self.pos).copied().unwrap_or(0xff);
        self.pos += 1;
        b
    }

    pub fn decode(&mut self, model: &mut AdaptiveBitModel, ctx: usize) -> bool {
        let xmid = split(self.x1, self.x2, model.p1(ctx));
        let bit = self.x <= xmid;
        if bit {
            self.x2 = xmid;
        } else {
            self.x1 = xmid + 1;
        }
        model.update(ctx, bit);
        while (self.x1 ^ self.x2) & 0xff00_0000 == 0 {
            self.x1 <<= 8;
            self.x2 = (self.x2 << 8) | 0xff;
            self.x = (self.x << 8) | self.byte() as u32;
        }
        bit
    }

    /// Bytes consumed so far, including implicit padding.
    pub fn position(&self) -> usize {
        self.pos
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > 16 {
        return Err(Error::InvalidParameter(format!("model order {order} above 16")));
    }
    Ok(())
}

/// Context of the next bit: the previous `order` bits with a leading marker.
#[inline]
fn next_ctx(ctx: usize, bit: bool, order: usize) -> usize {
    let mask = (1usize << order) - 1;
    (1 << order) | (((ctx << 1) | bit as usize) & mask)
}

/// Code a bit stream with contexts formed by the previous `order` bits.
pub fn bit_encode(bits: &[bool], order: usize) -> Result<Vec<u8>> {
    check_order(order)?;
    let mut model = AdaptiveBitModel::new(2 << order);
    let mut enc = BitEncoder::new();
    let mut ctx = 1 << order;
    for &b in bits {
        enc.encode(&mut model, ctx, b);
        ctx = next_ctx(ctx, b, order);
    }
    Ok(enc.finish())
}

pub fn bit_decode(bytes: &[u8], count: usize, order: usize) -> Result<Vec<bool>> {
    check_order(order)?;
    let mut model = AdaptiveBitModel::new(2 << order);
    let mut dec = BitDecoder::new(bytes);
    let mut ctx = 1 << order;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let b = dec.decode(&mut model, ctx);
        ctx = next_ctx(ctx, b, order);
        out.push(b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zeros_compress_well() {
        let bits = vec![false; 1000];
        let bytes = bit_encode(&bits, 0).unwrap();
        assert!(bytes.len() < 30, "{}", bytes.len());
        assert_eq!(bit_decode(&bytes, 1000, 0).unwrap(), bits);
    }

    #[test]
    fn alternating_prefers_order_one() {
        let bits: Vec<bool> = (0..4000).map(|i| i % 2 == 1).collect();
        let o0 = bit_encode(&bits, 0).unwrap();
        let o1 = bit_encode(&bits, 1).unwrap();
        assert!(o1.len() < o0.len(), "{} vs {}", o1.len(), o0.len());
        assert_eq!(bit_decode(&o1, bits.len(), 1).unwrap(), bits);
    }

    #[test]
    fn random_roundtrip_all_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bits: Vec<bool> = (0..50_000).map(|_| rng.gen_bool(0.3)).collect();
        for order in 0..=2 {
            let bytes = bit_encode(&bits, order).unwrap();
            assert_eq!(bit_decode(&bytes, bits.len(), order).unwrap(), bits);
        }
    }

    #[test]
    fn probabilities_stay_inside() {
        let mut m = AdaptiveBitModel::new(1);
        for _ in 0..10_000 {
            m.update(0, true);
        }
        assert!(m.p1(0) < PROB_ONE);
        for _ in 0..10_000 {
            m.update(0, false);
        }
        assert!(m.p1(0) > 0);
    }

    #[test]
    fn empty_stream() {
        let bytes = bit_encode(&[], 1).unwrap();
        assert!(bit_decode(&bytes, 0, 1).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn roundtrip(bits in proptest::collection::vec(any::<bool>(), 0..2000), order in 0usize..=2) {
            let bytes = bit_encode(&bits, order).unwrap();
            prop_assert_eq!(bit_decode(&bytes, bits.len(), order).unwrap(), bits);
        }
    }
}
