use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{DaisError, Result};

const MAGIC: &[u8; 8] = b"DAISREV1";

/// Every page starts at `2^64` so that the first pops have bits to borrow.
const SENTINEL_BITS: u64 = 64;

fn sentinel() -> BigUint {
    BigUint::from(1u8) << SENTINEL_BITS
}

fn limbs(b: &BigUint) -> usize {
    b.bits().div_ceil(32) as usize
}

/// Stack of information destroyed by momentum damping, one page per
/// coordinate.
///
/// Each page is an arbitrary-precision integer `B`. `push(r, radix)` sets
/// `B = B * radix + r` and `pop(radix)` undoes it, so values pushed with
/// mixed radices come back exactly in reverse order. The information
/// content of a page is `log2(B) - 64` bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfoBuffer {
    pages: Vec<BigUint>,
    tag: Option<(u64, u64)>,
    cap_bytes: Option<usize>,
    limbs: usize,
}

impl InfoBuffer {
    pub fn new(pages: usize) -> Self {
        let s = sentinel();
        let per_page = limbs(&s);
        InfoBuffer { pages: vec![s; pages], tag: None, cap_bytes: None, limbs: pages * per_page }
    }

    /// A buffer that refuses to grow beyond `cap_bytes` of storage.
    pub fn with_cap(pages: usize, cap_bytes: usize) -> Self {
        InfoBuffer { cap_bytes: Some(cap_bytes), ..Self::new(pages) }
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    /// `(final seed, step count)` of the forward run that filled the buffer.
    pub fn tag(&self) -> Option<(u64, u64)> {
        self.tag
    }

    pub fn set_tag(&mut self, seed: u64, steps: u64) {
        self.tag = Some((seed, steps));
    }

    /// Storage used by all pages as 32-bit limbs, sentinels included.
    pub fn size_bytes(&self) -> usize {
        self.limbs * 4
    }

    /// Measured information content in bits.
    pub fn payload_bits(&self) -> f64 {
        self.pages.iter().map(|p| log2(p) - SENTINEL_BITS as f64).sum()
    }

    /// True when every page is back at its initial value.
    pub fn is_empty(&self) -> bool {
        let s = sentinel();
        self.pages.iter().all(|p| *p == s)
    }

    pub fn push(&mut self, page: usize, value: u32, radix: u32) -> Result<()> {
        debug_assert!(radix >= 2 && value < radix);
        let p = &mut self.pages[page];
        let before = limbs(p);
        *p *= radix;
        *p += value;
        self.limbs = self.limbs + limbs(p) - before;
        if let Some(cap) = self.cap_bytes {
            if self.limbs * 4 > cap {
                return Err(DaisError::BufferOverflow { cap_bytes: cap });
            }
        }
        Ok(())
    }

    pub fn pop(&mut self, page: usize, radix: u32) -> Result<u32> {
        debug_assert!(radix >= 2);
        let p = &mut self.pages[page];
        let before = limbs(p);
        let rem = (&*p % radix).to_u32().expect("remainder is below the radix");
        *p /= radix;
        self.limbs = self.limbs + limbs(p) - before;
        if p.bits() <= SENTINEL_BITS {
            return Err(DaisError::Corruption(format!("buffer page {page} underflowed")));
        }
        Ok(rem)
    }

    /// Magic bytes, a header page holding the tag, then one page per
    /// coordinate; every page is a little-endian `u64` byte length followed
    /// by the little-endian bytes of its integer.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        match self.tag {
            Some((seed, steps)) => {
                w.write_all(&16u64.to_le_bytes())?;
                w.write_all(&seed.to_le_bytes())?;
                w.write_all(&steps.to_le_bytes())?;
            }
            None => w.write_all(&0u64.to_le_bytes())?,
        }
        for p in &self.pages {
            let bytes = p.to_bytes_le();
            w.write_all(&(bytes.len() as u64).to_le_bytes())?;
            w.write_all(&bytes)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DaisError::Corruption("not a reversible buffer file".into()));
        }
        let header = read_page(&mut r)?.ok_or_else(|| DaisError::Corruption("missing header page".into()))?;
        let tag = match header.len() {
            0 => None,
            16 => Some((
                u64::from_le_bytes(header[..8].try_into().unwrap()),
                u64::from_le_bytes(header[8..].try_into().unwrap()),
            )),
            n => return Err(DaisError::Corruption(format!("header page has {n} bytes"))),
        };
        let mut pages = Vec::new();
        while let Some(bytes) = read_page(&mut r)? {
            let p = BigUint::from_bytes_le(&bytes);
            if p.bits() <= SENTINEL_BITS {
                return Err(DaisError::Corruption(format!("page {} is below its sentinel", pages.len())));
            }
            pages.push(p);
        }
        let limbs = pages.iter().map(limbs).sum();
        Ok(InfoBuffer { pages, tag, cap_bytes: None, limbs })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// `None` at a clean end of input.
fn read_page<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 8];
    let mut got = 0;
    while got < 8 {
        let n = r.read(&mut len[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(DaisError::Corruption("truncated page length".into()));
        }
        got += n;
    }
    let len = u64::from_le_bytes(len);
    if len > (1 << 40) {
        return Err(DaisError::Corruption(format!("implausible page length {len}")));
    }
    let mut bytes = vec![0u8; len as usize];
    r.read_exact(&mut bytes)
        .map_err(|_| DaisError::Corruption("truncated page".into()))?;
    Ok(Some(bytes))
}

fn log2(b: &BigUint) -> f64 {
    let bits = b.bits();
    if bits <= 64 {
        return b.to_f64().expect("finite").log2();
    }
    let shift = bits - 64;
    (b >> shift).to_f64().expect("finite").log2() + shift as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pops_reverse_pushes(ops in proptest::collection::vec((2u32..70000, any::<u32>()), 1..300)) {
            let mut b = InfoBuffer::new(2);
            let mut pushed = Vec::new();
            for (i, (radix, raw)) in ops.iter().enumerate() {
                let page = i % 2;
                let v = raw % radix;
                b.push(page, v, *radix).unwrap();
                pushed.push((page, v, *radix));
            }
            for (page, v, radix) in pushed.into_iter().rev() {
                prop_assert_eq!(b.pop(page, radix).unwrap(), v);
            }
            prop_assert!(b.is_empty());
            prop_assert_eq!(b.size_bytes(), 24);
        }
    }

    #[test]
    fn payload_bits_track_the_radix() {
        let mut b = InfoBuffer::new(1);
        for _ in 0..1000 {
            b.push(0, 1, 2).unwrap();
        }
        assert!((b.payload_bits() - 1000.0).abs() < 1e-6);
        assert_eq!(b.size_bytes(), 12 + 4 * 31);
    }

    #[test]
    fn popping_past_the_sentinel_is_corruption() {
        let mut b = InfoBuffer::new(1);
        let mut failed = false;
        for _ in 0..70 {
            if b.pop(0, 2).is_err() {
                failed = true;
                break;
            }
        }
        assert!(failed);
    }

    #[test]
    fn cap_is_enforced() {
        let mut b = InfoBuffer::with_cap(1, 16);
        let err = (0..100).try_for_each(|_| b.push(0, 255, 256)).unwrap_err();
        assert!(matches!(err, DaisError::BufferOverflow { cap_bytes: 16 }));
    }

    #[test]
    fn serialisation_round_trip() {
        let mut b = InfoBuffer::new(3);
        for i in 0..500u32 {
            b.push((i % 3) as usize, i % 7, 7).unwrap();
        }
        b.set_tag(0xDEAD_BEEF, 500);
        let mut bytes = Vec::new();
        b.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"DAISREV1");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 16);
        let back = InfoBuffer::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, b);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("buf.bin");
        b.save(&path).unwrap();
        assert_eq!(InfoBuffer::load(&path).unwrap(), b);

        assert!(InfoBuffer::read_from(&b"NOTMAGIC"[..]).is_err());
        assert!(InfoBuffer::read_from(&bytes[..bytes.len() - 3]).is_err());
    }
}
