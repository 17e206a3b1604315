//! Word vector files.
//!
//! Binary `W2V1` layout, little-endian throughout:
//!
//! ```text
//! "W2V1"  u32 vocab_size  u32 dim
//! vocab_size × { u16 token_len, token_len bytes UTF-8, dim × f32 }
//! ```
//!
//! The text format is one `token v1 v2 ... v_dim` line per token.

use std::io::{BufRead, Read, Write};

use super::KeyedVectors;
use crate::binio::{write_f32s, LeReader};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"W2V1";

pub fn write_w2v<W: Write>(mut w: W, vectors: &KeyedVectors) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(vectors.len() as u32).to_le_bytes())?;
    w.write_all(&(vectors.dim() as u32).to_le_bytes())?;
    for (i, token) in vectors.tokens().iter().enumerate() {
        let len = u16::try_from(token.len()).map_err(|_| {
            Error::Format(format!(
                "token of {} bytes does not fit a u16 length",
                token.len()
            ))
        })?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(token.as_bytes())?;
        write_f32s(&mut w, vectors.vector(i).iter().copied())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_w2v<R: Read>(r: R) -> Result<KeyedVectors> {
    let mut r = LeReader::new(r);
    r.magic(MAGIC)?;
    let v = r.u32("vocabulary size")? as usize;
    let dim = r.u32("dimension")? as usize;
    let mut tokens = Vec::with_capacity(v.min(1 << 20));
    let mut data = Vec::with_capacity((v * dim).min(1 << 26));
    let mut row = vec![0f32; dim];
    for _ in 0..v {
        let start = r.offset();
        let len = r.u16("token length")? as usize;
        let mut bytes = vec![0u8; len];
        r.bytes(&mut bytes, "token")?;
        let token = String::from_utf8(bytes).map_err(|_| Error::Corrupt {
            offset: start,
            message: "token is not valid UTF-8".into(),
        })?;
        r.f32_into(&mut row, "vector")?;
        tokens.push(token);
        data.extend_from_slice(&row);
    }
    if !r.at_end()? {
        return Err(Error::Corrupt {
            offset: r.offset(),
            message: "trailing bytes after last record".into(),
        });
    }
    KeyedVectors::new(tokens, dim, data)
}

pub fn write_text<W: Write>(mut w: W, vectors: &KeyedVectors) -> Result<()> {
    for (i, token) in vectors.tokens().iter().enumerate() {
        w.write_all(token.as_bytes())?;
        for x in vectors.vector(i) {
            write!(w, " {x}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_text<R: BufRead>(r: R) -> Result<KeyedVectors> {
    let mut tokens = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line").to_string();
        let before = data.len();
        for p in parts {
            let x: f32 = p.parse().map_err(|_| Error::Record {
                row: lineno + 1,
                message: format!("bad float `{p}`"),
            })?;
            data.push(x);
        }
        let n = data.len() - before;
        match dim {
            None => dim = Some(n),
            Some(d) if d != n => {
                return Err(Error::Dimension {
                    expected: d,
                    found: n,
                })
            }
            _ => {}
        }
        tokens.push(token);
    }
    KeyedVectors::new(tokens, dim.unwrap_or(0), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kv(tokens: &[&str], dim: usize) -> KeyedVectors {
        let data = (0..tokens.len() * dim)
            .map(|i| i as f32 * 0.25 - 1.0)
            .collect();
        KeyedVectors::new(tokens.iter().map(|s| s.to_string()).collect(), dim, data).unwrap()
    }

    #[test]
    fn binary_layout() {
        let mut buf = Vec::new();
        write_w2v(&mut buf, &kv(&["ab"], 2)).unwrap();
        assert_eq!(&buf[..4], b"W2V1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(buf[12..14].try_into().unwrap()), 2);
        assert_eq!(&buf[14..16], b"ab");
        assert_eq!(buf.len(), 16 + 8);
        assert_eq!(f32::from_le_bytes(buf[16..20].try_into().unwrap()), -1.0);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut buf = Vec::new();
        write_w2v(&mut buf, &kv(&["a", "b"], 3)).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_w2v(bad.as_slice()), Err(Error::Format(_))));
        let cut = &buf[..buf.len() - 2];
        match read_w2v(cut) {
            Err(Error::Corrupt { offset, .. }) => assert_eq!(offset, 12 + 2 + 1 + 12 + 2 + 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn text_round_trip() {
        let v = kv(&["x", "y"], 3);
        let mut buf = Vec::new();
        write_text(&mut buf, &v).unwrap();
        assert_eq!(read_text(buf.as_slice()).unwrap(), v);
        assert!(matches!(
            read_text("a 1 2\nb 1\n".as_bytes()),
            Err(Error::Dimension { .. })
        ));
    }

    proptest! {
        #[test]
        fn binary_save_load_save_is_byte_identical(
            n in 0usize..20,
            dim in 1usize..16,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let tokens: Vec<String> = (0..n).map(|i| format!("tok{i}é")).collect();
            let data: Vec<f32> = (0..n * dim).map(|_| rng.random::<f32>() * 2.0 - 1.0).collect();
            let v = KeyedVectors::new(tokens, dim, data).unwrap();
            let mut first = Vec::new();
            write_w2v(&mut first, &v).unwrap();
            let back = read_w2v(first.as_slice()).unwrap();
            prop_assert_eq!(&back, &v);
            let mut second = Vec::new();
            write_w2v(&mut second, &back).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
