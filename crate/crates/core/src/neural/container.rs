//! Versioned JSON envelope for persisted models.
//!
//! Layout: `{"format": ..., "version": ..., "payload": ...}`. The header is
//! validated before the payload is deserialized, so a version mismatch is
//! reported as such even when the payload shape changed too.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FORMAT: &str = "deid-audit-model";
pub const VERSION: u32 = 1;

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format: &'a str,
    version: u32,
    payload: &'a T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    payload: T,
}

pub fn save<T: Serialize, W: Write>(value: &T, mut writer: W) -> Result<()> {
    serde_json::to_writer(
        &mut writer,
        &EnvelopeOut { format: FORMAT, version: VERSION, payload: value },
    )?;
    writer.flush()?;
    Ok(())
}

pub fn to_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    save(value, &mut buf)?;
    Ok(buf)
}

pub fn from_bytes<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let header: Header =
        serde_json::from_slice(bytes).map_err(|e| Error::CorruptModel(e.to_string()))?;
    if header.format != FORMAT {
        return Err(Error::CorruptModel(format!("unknown format {:?}", header.format)));
    }
    if header.version != VERSION {
        return Err(Error::VersionMismatch { expected: VERSION, found: header.version });
    }
    let env: EnvelopeIn<T> =
        serde_json::from_slice(bytes).map_err(|e| Error::CorruptModel(e.to_string()))?;
    Ok(env.payload)
}

pub fn load<T: DeserializeOwned, R: Read>(mut reader: R) -> Result<T> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{FfnParams, Activation};
    use crate::seed;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = FfnParams::init(&[3, 4, 2], Activation::Relu, &mut seed::rng(1));
        let back: FfnParams = from_bytes(&to_bytes(&p).unwrap()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn version_and_corruption_errors() {
        let p = vec![1.0f64, 2.0];
        let bytes = to_bytes(&p).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap().replace("\"version\":1", "\"version\":9");
        assert!(matches!(
            from_bytes::<Vec<f64>>(text.as_bytes()),
            Err(Error::VersionMismatch { expected: 1, found: 9 })
        ));
        assert!(matches!(
            from_bytes::<Vec<f64>>(&bytes[..bytes.len() - 3]),
            Err(Error::CorruptModel(_))
        ));
        assert!(matches!(from_bytes::<String>(&bytes), Err(Error::CorruptModel(_))));
    }
}
