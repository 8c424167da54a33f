//! Versioned file layout shared by episodes, teleop records and
//! checkpoints: a text header, length-prefixed binary records and a CRC32
//! of everything before it.
//!
//! ```text
//! peg-gail <kind> v<version>
//! <key> <value>
//! ...
//! payload <bytes>
//!
//! u64 record count, then per record: u32 length, bytes
//! u32 crc32
//! ```

use crate::codec::{Reader, Writer};
use crate::{Error, Result};

const MAGIC: &str = "peg-gail";
const MAX_HEADER: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub header: Vec<(String, String)>,
    pub records: Vec<Vec<u8>>,
}

impl Container {
    pub fn new() -> Self {
        Container {
            header: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        debug_assert!(!value.contains('\n'));
        self.header.push((key.to_string(), value));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Malformed(format!("missing header field `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Malformed(format!("bad header field `{key}`")))
    }

    pub fn encode(&self, kind: &str, version: u32) -> Vec<u8> {
        let mut payload = Writer::new();
        payload.u64(self.records.len() as u64);
        for r in &self.records {
            payload.u32(r.len() as u32);
            payload.buf.extend_from_slice(r);
        }
        let mut out = format!("{MAGIC} {kind} v{version}\n");
        for (k, v) in &self.header {
            out.push_str(&format!("{k} {v}\n"));
        }
        out.push_str(&format!("payload {}\n\n", payload.buf.len()));
        let mut bytes = out.into_bytes();
        bytes.extend_from_slice(&payload.buf);
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        bytes
    }

    pub fn decode(bytes: &[u8], kind: &'static str, version: u32) -> Result<Container> {
        let scan = &bytes[..bytes.len().min(MAX_HEADER)];
        let first_nl = scan.iter().position(|&b| b == b'\n').ok_or(Error::Truncated)?;
        let first = std::str::from_utf8(&scan[..first_nl]).map_err(|_| Error::WrongKind { expected: kind })?;
        let mut parts = first.split(' ');
        if parts.next() != Some(MAGIC) || parts.next() != Some(kind) {
            return Err(Error::WrongKind { expected: kind });
        }
        let found: u32 = parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Malformed("bad version tag".into()))?;
        if found != version {
            return Err(Error::VersionMismatch { found, expected: version });
        }
        let end = scan
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or(Error::Truncated)?;
        let text = std::str::from_utf8(&scan[first_nl + 1..end + 1])
            .map_err(|_| Error::Malformed("header is not utf-8".into()))?;
        let mut c = Container::new();
        for line in text.lines() {
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| Error::Malformed(format!("header line `{line}`")))?;
            c.header.push((k.to_string(), v.to_string()));
        }
        let payload_len: usize = c.parse("payload")?;
        c.header.retain(|(k, _)| k != "payload");
        let body = &bytes[end + 2..];
        if body.len() < payload_len.saturating_add(4) {
            return Err(Error::Truncated);
        }
        if body.len() > payload_len + 4 {
            return Err(Error::Malformed("trailing bytes".into()));
        }
        let split = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[split..].try_into().expect("4 bytes"));
        if crc32fast::hash(&bytes[..split]) != stored {
            return Err(Error::Checksum);
        }
        let mut r = Reader::new(&body[..payload_len]);
        let n = r.len(4)?;
        for _ in 0..n {
            let len = r.u32()? as usize;
            c.records.push(r.take(len)?.to_vec());
        }
        r.finish()?;
        Ok(c)
    }
}

impl Default for Container {
    fn default() -> Self {
        Container::new()
    }
}
