//! Versioned binary blobs: 4-byte magic, little-endian u32 format version,
//! then a bincode payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported blob version {0}")]
    Version(u32),
    #[error("payload encoding: {0}")]
    Encoding(#[from] bincode::Error),
}

pub fn write_blob<W: Write, S: Serialize>(
    mut w: W,
    magic: &[u8; 4],
    value: &S,
) -> Result<(), BlobError> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    bincode::serialize_into(&mut w, value)?;
    w.flush()?;
    Ok(())
}

pub fn read_blob<R: Read, S: DeserializeOwned>(mut r: R, magic: &[u8; 4]) -> Result<S, BlobError> {
    let mut head = [0u8; 4];
    r.read_exact(&mut head)?;
    if &head != magic {
        return Err(BlobError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&head).into_owned(),
        });
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    let ver = u32::from_le_bytes(ver);
    if ver != FORMAT_VERSION {
        return Err(BlobError::Version(ver));
    }
    Ok(bincode::deserialize_from(r)?)
}

pub fn save<S: Serialize>(path: impl AsRef<Path>, magic: &[u8; 4], value: &S) -> Result<(), BlobError> {
    write_blob(BufWriter::new(File::create(path)?), magic, value)
}

pub fn load<S: DeserializeOwned>(path: impl AsRef<Path>, magic: &[u8; 4]) -> Result<S, BlobError> {
    read_blob(BufReader::new(File::open(path)?), magic)
}

/// Returns the first four bytes of a file, if it has that many.
pub fn peek_magic(path: impl AsRef<Path>) -> std::io::Result<Option<[u8; 4]>> {
    let mut f = File::open(path)?;
    let mut head = [0u8; 4];
    match f.read_exact(&mut head) {
        Ok(()) => Ok(Some(head)),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_magic_is_rejected() {
        let mut buf = Vec::new();
        write_blob(&mut buf, b"BCK1", &vec![1.0f64, 2.0]).unwrap();
        let back: Vec<f64> = read_blob(&buf[..], b"BCK1").unwrap();
        assert_eq!(back, vec![1.0, 2.0]);
        let err = read_blob::<_, Vec<f64>>(&buf[..], b"BCD1").unwrap_err();
        assert!(matches!(err, BlobError::BadMagic { .. }));
    }

    #[test]
    fn future_version_is_rejected() {
        let mut buf = Vec::new();
        write_blob(&mut buf, b"BCP1", &3u8).unwrap();
        buf[4] = 9;
        assert!(matches!(
            read_blob::<_, u8>(&buf[..], b"BCP1"),
            Err(BlobError::Version(9))
        ));
    }
}
