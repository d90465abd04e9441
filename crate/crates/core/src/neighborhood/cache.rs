//! On-disk cache of neighbourhood sets.
//!
//! Little-endian layout:
//!
//! ```text
//! "KGNH1"            5 bytes magic
//! train hash         32 bytes, SHA-256 of the train triples file
//! flags              u8, bit 0 = backtracking walks included
//! n_entities         u32
//! n_entities x { entity u32, count1 u32, count1 x u64, count2 u32, count2 x u64 }
//! ```

use std::io::{self, Read, Write};

use super::{NeighborhoodOptions, NeighborhoodSets};

pub const MAGIC: &[u8; 5] = b"KGNH1";

pub type ContentHash = [u8; 32];

pub fn write<W: Write>(mut w: W, sets: &NeighborhoodSets, train_hash: &ContentHash) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(train_hash)?;
    w.write_all(&[sets.options.include_backtracking as u8])?;
    w.write_all(&(sets.num_entities() as u32).to_le_bytes())?;
    for (e, (one, two)) in sets.one_hop.iter().zip(&sets.two_hop).enumerate() {
        w.write_all(&(e as u32).to_le_bytes())?;
        for keys in [one, two] {
            w.write_all(&(keys.len() as u32).to_le_bytes())?;
            for k in keys {
                w.write_all(&k.to_le_bytes())?;
            }
        }
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_keys<R: Read>(r: &mut R) -> io::Result<Vec<u64>> {
    let count = read_u32(r)? as usize;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_owned())
}

/// Reads a cache file. Returns `Ok(None)` when the file is valid but stale
/// (different train hash, options or entity count).
pub fn read<R: Read>(
    mut r: R,
    train_hash: &ContentHash,
    options: NeighborhoodOptions,
    n_entities: usize,
) -> io::Result<Option<NeighborhoodSets>> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(invalid("bad neighbourhood cache magic"));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    let mut flags = [0u8; 1];
    r.read_exact(&mut flags)?;
    let n = read_u32(&mut r)? as usize;
    if &hash != train_hash || (flags[0] & 1 == 1) != options.include_backtracking || n != n_entities {
        return Ok(None);
    }
    let mut one_hop = Vec::with_capacity(n);
    let mut two_hop = Vec::with_capacity(n);
    for expected in 0..n {
        if read_u32(&mut r)? as usize != expected {
            return Err(invalid("neighbourhood cache entities out of order"));
        }
        one_hop.push(read_keys(&mut r)?);
        two_hop.push(read_keys(&mut r)?);
    }
    Ok(Some(NeighborhoodSets::from_parts(one_hop, two_hop, options)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{build_graph, LabeledTriple};

    fn sample() -> NeighborhoodSets {
        let train = [
            LabeledTriple::new("A", "p", "B"),
            LabeledTriple::new("B", "q", "C"),
            LabeledTriple::new("C", "p", "A"),
        ];
        let (g, _) = build_graph(&train, &[], &[], &[]);
        NeighborhoodSets::build(&g, Default::default()).unwrap()
    }

    #[test]
    fn round_trip() {
        let sets = sample();
        let hash = [7u8; 32];
        let mut buf = Vec::new();
        write(&mut buf, &sets, &hash).unwrap();
        assert_eq!(&buf[..5], MAGIC);
        let back = read(buf.as_slice(), &hash, Default::default(), 3).unwrap().unwrap();
        assert_eq!(back, sets);
    }

    #[test]
    fn stale_hash_or_options_invalidate() {
        let sets = sample();
        let mut buf = Vec::new();
        write(&mut buf, &sets, &[1u8; 32]).unwrap();
        assert!(read(buf.as_slice(), &[2u8; 32], Default::default(), 3)
            .unwrap()
            .is_none());
        let bt = NeighborhoodOptions {
            include_backtracking: true,
        };
        assert!(read(buf.as_slice(), &[1u8; 32], bt, 3).unwrap().is_none());
    }

    #[test]
    fn corrupt_magic_is_an_error() {
        assert!(read(&b"XXXXX"[..], &[0u8; 32], Default::default(), 0).is_err());
    }
}
