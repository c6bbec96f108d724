//! Framing. A request is a type byte, a big-endian u32 payload length and
//! the payload; a response is a status byte, a u32 length and the body.
//!
//! | type | payload                 | ok body                                      |
//! |------|-------------------------|----------------------------------------------|
//! | 0x01 | envelope bytes          | `samples=<n>`                                |
//! | 0x02 | envelope bytes          | `score=<S>`                                  |
//! | 0x03 | 16-byte user id         | `k_selected=..;clusters=..;q=..;samples=..`  |
//! | 0x04 | 16-byte user id         | `adopted=old|new;old_wins=..;total=..[;note=..]` |
//! | 0x05 | 16-byte user id         | `samples=..;last_seen=..;enrolled=..`        |
//!
//! Error bodies are a UTF-8 message.

use std::io::{self, Read, Write};

/// Frames above this size are refused before the payload is read.
pub const MAX_PAYLOAD: u32 = 1 << 20;

#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageType {
    Ingest = 0x01,
    Authenticate = 0x02,
    Enroll = 0x03,
    Refresh = 0x04,
    Status = 0x05,
}

impl MessageType {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(Self::Ingest),
            0x02 => Some(Self::Authenticate),
            0x03 => Some(Self::Enroll),
            0x04 => Some(Self::Refresh),
            0x05 => Some(Self::Status),
            _ => None,
        }
    }
}

#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Ok = 0x00,
    Integrity = 0x10,
    Unwrap = 0x11,
    Replay = 0x12,
    Skew = 0x13,
    Malformed = 0x14,
    NotReady = 0x20,
    UnknownUser = 0x21,
    BadRequest = 0x30,
    Internal = 0x3F,
}

impl Status {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x00 => Self::Ok,
            0x10 => Self::Integrity,
            0x11 => Self::Unwrap,
            0x12 => Self::Replay,
            0x13 => Self::Skew,
            0x14 => Self::Malformed,
            0x20 => Self::NotReady,
            0x21 => Self::UnknownUser,
            0x30 => Self::BadRequest,
            0x3F => Self::Internal,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Integrity => "integrity",
            Self::Unwrap => "unwrap",
            Self::Replay => "replay",
            Self::Skew => "skew",
            Self::Malformed => "malformed",
            Self::NotReady => "not-ready",
            Self::UnknownUser => "unknown-user",
            Self::BadRequest => "bad-request",
            Self::Internal => "internal",
        }
    }
}

/// A request as read off the wire. The type byte is kept raw so an
/// unknown type can still be answered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub kind: u8,
    pub payload: Vec<u8>,
}

impl Request {
    pub fn new(kind: MessageType, payload: Vec<u8>) -> Self {
        Self { kind: kind as u8, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        frame(self.kind, &self.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: Status,
    pub body: Vec<u8>,
}

impl Response {
    pub fn ok(body: String) -> Self {
        Self { status: Status::Ok, body: body.into_bytes() }
    }

    pub fn error(status: Status, msg: String) -> Self {
        Self { status, body: msg.into_bytes() }
    }

    pub fn encode(&self) -> Vec<u8> {
        frame(self.status as u8, &self.body)
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    /// `key=value` pairs of an ok body.
    pub fn fields(&self) -> Vec<(String, String)> {
        self.body_text()
            .split(';')
            .filter_map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect()
    }

    pub fn field(&self, key: &str) -> Option<String> {
        self.fields().into_iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

fn frame(tag: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + payload.len());
    out.push(tag);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

/// Reads one frame. `Ok(None)` on a clean end of stream before the first byte.
fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<(u8, Vec<u8>)>> {
    let mut tag = [0u8; 1];
    loop {
        match r.read(&mut tag) {
            Ok(0) => return Ok(None),
            Ok(_) => break,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len);
    if len > MAX_PAYLOAD {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds {MAX_PAYLOAD}")));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(Some((tag[0], payload)))
}

pub fn read_request<R: Read>(r: &mut R) -> io::Result<Option<Request>> {
    Ok(read_frame(r)?.map(|(kind, payload)| Request { kind, payload }))
}

pub fn read_response<R: Read>(r: &mut R) -> io::Result<Response> {
    let (tag, body) = read_frame(r)?.ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?;
    let status = Status::from_u8(tag)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("unknown status byte {tag:#04x}")))?;
    Ok(Response { status, body })
}

pub fn write_all<W: Write>(w: &mut W, bytes: &[u8]) -> io::Result<()> {
    w.write_all(bytes)?;
    w.flush()
}
