//! Static-model range coder (32-bit, carry-less, byte renormalisation).

use crate::error::{ContainerError, Error, Result};

const TOP: u32 = 1 << 24;
const BOT: u32 = 1 << 16;
/// Upper bound for the sum of all frequencies.
pub const MAX_TOTAL: u32 = BOT;

/// Symbol frequencies with cumulative offsets. Every count is at least one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u32>,
    cum: Vec<u32>,
}

impl FrequencyTable {
    pub fn from_counts(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(Error::InvalidParameter("frequency counts must be positive".into()));
        }
        let mut cum = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for &c in &counts {
            acc += c as u64;
            if acc > MAX_TOTAL as u64 {
                return Err(Error::InvalidParameter(format!("frequency total exceeds {MAX_TOTAL}")));
            }
            cum.push(acc as u32);
        }
        Ok(FrequencyTable { counts, cum })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn alphabet(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        *self.cum.last().expect("non-empty")
    }

    /// Ideal code length of `symbols` under this table, in bits.
    pub fn cross_entropy_bits(&self, symbols: &[usize]) -> f64 {
        let t = self.total() as f64;
        symbols.iter().map(|&s| -(self.counts[s] as f64 / t).log2()).sum()
    }

    fn symbol_at(&self, target: u32) -> usize {
        self.cum.partition_point(|&c| c <= target) - 1
    }
}

/// Histogram plus one, rescaled with `c' = max(1, ⌊c·(2¹⁶ − q)/total⌋)` when
/// the total would exceed 2¹⁶.
pub fn build_table(symbols: &[usize], q: usize) -> Result<FrequencyTable> {
    if q == 0 || q > MAX_TOTAL as usize / 2 {
        return Err(Error::InvalidParameter(format!("alphabet size {q}")));
    }
    let mut counts = vec![1u64; q];
    for &s in symbols {
        if s >= q {
            return Err(Error::SymbolOutOfRange { symbol: s, alphabet: q });
        }
        counts[s] += 1;
    }
    let total: u64 = counts.iter().sum();
    if total > MAX_TOTAL as u64 {
        let budget = MAX_TOTAL as u64 - q as u64;
        for c in &mut counts {
            *c = (*c * budget / total).max(1);
        }
    }
    FrequencyTable::from_counts(counts.into_iter().map(|c| c as u32).collect())
}

struct Encoder {
    low: u32,
    range: u32,
    out: Vec<u8>,
}

impl Encoder {
    fn new() -> Self {
        Encoder {
            low: 0,
            range: u32::MAX,
            out: Vec::new(),
        }
    }

    fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        self.range /= total;
        self.low = self.low.wrapping_add(cum * self.range);
        self.range *= freq;
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = self.low.wrapping_neg() & (BOT - 1);
            }
            self.out.push((self.low >> 24) as u8);
            self.low <<= 8;
            self.range <<= 8;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        for _ in 0..4 {
            self.out.push((self.low >> 24) as u8);
            self.low <<= 8;
        }
        self.out
    }
}

struct Decoder<'a> {
    low: u32,
    range: u32,
    code: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(input: &'a [u8]) -> Self {
        let mut d = Decoder {
            low: 0,
            range: u32::MAX,
            code: 0,
            input,
            pos: 0,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.byte() as u32;
        }
        d
    }

    fn byte(&mut self) -> u8 {
        let b = self.input.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    fn decode(&mut self, table: &FrequencyTable) -> usize {
        let total = table.total();
        self.range /= total;
        let target = (self.code.wrapping_sub(self.low) / self.range).min(total - 1);
        let s = table.symbol_at(target);
        self.low = self.low.wrapping_add(table.cum[s] * self.range);
        self.range *= table.counts[s];
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = self.low.wrapping_neg() & (BOT - 1);
            }
            self.code = (self.code << 8) | self.byte() as u32;
            self.low <<= 8;
            self.range <<= 8;
        }
        s
    }
}

pub fn range_encode(symbols: &[usize], table: &FrequencyTable) -> Result<Vec<u8>> {
    if symbols.is_empty() {
        return Ok(Vec::new());
    }
    let total = table.total();
    let mut enc = Encoder::new();
    for &s in symbols {
        if s >= table.alphabet() {
            return Err(Error::SymbolOutOfRange {
                symbol: s,
                alphabet: table.alphabet(),
            });
        }
        enc.encode(table.cum[s], table.counts[s], total);
    }
    Ok(enc.finish())
}

pub fn range_decode(bytes: &[u8], count: usize, table: &FrequencyTable) -> Result<Vec<usize>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if bytes.len() < 4 {
        return Err(ContainerError::Truncated("range coded payload").into());
    }
    let mut dec = Decoder::new(bytes);
    let out = (0..count).map(|_| dec.decode(table)).collect();
    // the encoder always flushes four bytes, so reading far past the end
    // means the payload was cut short
    if dec.pos > bytes.len() + 4 {
        return Err(ContainerError::Truncated("range coded payload").into());
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
    fn table_examples() {
        assert_eq!(build_table(&[0, 0, 0], 2).unwrap().counts(), &[4, 1]);
        assert_eq!(build_table(&[], 4).unwrap().counts(), &[1, 1, 1, 1]);
        let t = build_table(&vec![0; 70000], 2).unwrap();
        assert!(t.counts().iter().all(|&c| c >= 1));
        assert!(t.total() <= 65536);
        assert!(build_table(&[5], 4).is_err());
    }

    #[test]
    fn constant_stream_is_tiny() {
        let s = vec![3usize; 1000];
        let t = build_table(&s, 8).unwrap();
        let bytes = range_encode(&s, &t).unwrap();
        assert!(bytes.len() <= 32, "{}", bytes.len());
        assert_eq!(range_decode(&bytes, 1000, &t).unwrap(), s);
    }

    #[test]
    fn empty_stream() {
        let t = build_table(&[], 4).unwrap();
        let bytes = range_encode(&[], &t).unwrap();
        assert!(bytes.is_empty());
        assert!(range_decode(&bytes, 0, &t).unwrap().is_empty());
    }

    #[test]
    fn random_roundtrip_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s: Vec<usize> = (0..100_000).map(|_| rng.gen_range(0..32)).collect();
        let t = build_table(&s, 32).unwrap();
        let bytes = range_encode(&s, &t).unwrap();
        assert_eq!(range_decode(&bytes, s.len(), &t).unwrap(), s);
        let bound = t.cross_entropy_bits(&s) / 8.0;
        assert!(
            (bytes.len() as f64) <= bound * 1.02 + 16.0,
            "{} vs {bound}",
            bytes.len()
        );
    }

    #[test]
    fn skewed_stream_near_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<usize> = (0..50_000)
            .map(|_| if rng.gen_bool(0.9) { 0 } else { rng.gen_range(1..200) })
            .collect();
        let t = build_table(&s, 200).unwrap();
        let bytes = range_encode(&s, &t).unwrap();
        assert_eq!(range_decode(&bytes, s.len(), &t).unwrap(), s);
        let bound = t.cross_entropy_bits(&s) / 8.0;
        assert!((bytes.len() as f64) <= bound * 1.02 + 16.0);
    }

    #[test]
    fn out_of_alphabet_symbol() {
        let t = build_table(&[], 4).unwrap();
        assert!(range_encode(&[4], &t).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(s in proptest::collection::vec(0usize..7, 0..600)) {
            let t = build_table(&s, 7).unwrap();
            let bytes = range_encode(&s, &t).unwrap();
            prop_assert_eq!(range_decode(&bytes, s.len(), &t).unwrap(), s);
        }
    }
}
