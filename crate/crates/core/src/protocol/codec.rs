use crc::{Crc, CRC_16_IBM_3740};
use serde::Serialize;
use thiserror::Error;

use super::message::{msg_type, Message};
use super::{FRAME_OVERHEAD, MAX_PAYLOAD, MAX_SECRET_LEN, SYNC};

// IBM-3740 is the catalogue name for CRC-16/CCITT-FALSE.
const CCITT_FALSE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CCITT_FALSE.checksum(bytes)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds the 64 byte limit")]
    PayloadTooLong(usize),
    #[error("secret of {0} bytes exceeds the 32 byte limit")]
    SecretTooLong(usize),
    #[error("type 0x{0:02X} is a known message type and cannot be sent as Unknown")]
    ReservedType(u8),
}

/// Wrap a raw payload. Used for fuzzing and for forging unusual frames.
pub fn frame(msg_type: u8, payload: &[u8]) -> Result<Vec<u8>, EncodeError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(EncodeError::PayloadTooLong(payload.len()));
    }
    let mut out = Vec::with_capacity(payload.len() + FRAME_OVERHEAD);
    out.push(SYNC);
    out.push(payload.len() as u8);
    out.push(msg_type);
    out.extend_from_slice(payload);
    let crc = crc16(&out[1..]);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

pub fn encode(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    match msg {
        Message::Auth { secret } if secret.len() > MAX_SECRET_LEN => {
            return Err(EncodeError::SecretTooLong(secret.len()))
        }
        Message::Unknown { msg_type: t, .. } if msg_type::is_known(*t) => {
            return Err(EncodeError::ReservedType(*t))
        }
        _ => {}
    }
    frame(msg.msg_type(), &msg.payload())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DecodeStats {
    pub frames_ok: u64,
    /// Complete frames whose CRC did not match.
    pub crc_errors: u64,
    /// Frames with a good CRC but a payload that does not fit the type.
    pub malformed: u64,
    /// Bytes discarded while hunting for a sync byte.
    pub skipped_bytes: u64,
}

impl DecodeStats {
    /// Frames the receiver threw away.
    pub fn dropped(&self) -> u64 {
        self.crc_errors + self.malformed
    }
}

/// Streaming decoder. Feeding a stream in any split yields the same
/// messages as feeding it whole, because a decision about the bytes at the
/// cursor is only made once the whole candidate frame has arrived.
#[derive(Debug, Clone, Default)]
pub struct Decoder {
    buf: Vec<u8>,
    stats: DecodeStats,
}

enum Step {
    Need,
    Skip(usize),
    Frame(usize, Option<Message>),
    BadCrc,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> DecodeStats {
        self.stats
    }

    pub fn remainder(&self) -> &[u8] {
        &self.buf
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<Message> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut pos = 0;
        loop {
            match self.examine(&self.buf[pos..]) {
                Step::Need => break,
                Step::Skip(n) => {
                    self.stats.skipped_bytes += n as u64;
                    pos += n;
                }
                Step::BadCrc => {
                    self.stats.crc_errors += 1;
                    pos += 1;
                }
                Step::Frame(n, Some(m)) => {
                    self.stats.frames_ok += 1;
                    out.push(m);
                    pos += n;
                }
                Step::Frame(n, None) => {
                    self.stats.malformed += 1;
                    pos += n;
                }
            }
        }
        self.buf.drain(..pos);
        out
    }

    fn examine(&self, b: &[u8]) -> Step {
        if b.is_empty() {
            return Step::Need;
        }
        if b[0] != SYNC {
            let n = b.iter().position(|&x| x == SYNC).unwrap_or(b.len());
            return Step::Skip(n);
        }
        let Some(&len) = b.get(1) else {
            return Step::Need;
        };
        let len = len as usize;
        if len > MAX_PAYLOAD {
            return Step::Skip(1);
        }
        let total = len + FRAME_OVERHEAD;
        if b.len() < total {
            return Step::Need;
        }
        let body = &b[1..3 + len];
        let sent = u16::from_be_bytes([b[3 + len], b[4 + len]]);
        if crc16(body) != sent {
            return Step::BadCrc;
        }
        Step::Frame(total, Message::parse(b[2], &b[3..3 + len]))
    }
}

/// One-shot decode of a buffer: the messages found and the unconsumed tail.
pub fn decode(bytes: &[u8]) -> (Vec<Message>, Vec<u8>) {
    let mut d = Decoder::new();
    let msgs = d.push(bytes);
    (msgs, d.buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bit-at-a-time reference, independent of the table-driven crate.
    fn crc_reference(bytes: &[u8]) -> u16 {
        let mut crc: u16 = 0xFFFF;
        for &b in bytes {
            crc ^= (b as u16) << 8;
            for _ in 0..8 {
                crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
            }
        }
        crc
    }

    #[test]
    fn crc_check_value() {
        assert_eq!(crc16(b"123456789"), 0x29B1);
        assert_eq!(crc_reference(b"123456789"), 0x29B1);
        for n in 0..64u8 {
            let data: Vec<u8> = (0..n).map(|i| i.wrapping_mul(37).wrapping_add(n)).collect();
            assert_eq!(crc16(&data), crc_reference(&data));
        }
    }

    #[test]
    fn ping_frame_bytes() {
        let bytes = encode(&Message::Ping).unwrap();
        let crc = crc_reference(&[0x00, 0x08]);
        assert_eq!(bytes, vec![0xA5, 0x00, 0x08, (crc >> 8) as u8, crc as u8]);
    }

    #[test]
    fn back_to_back_frames() {
        let mut s = encode(&Message::Ping).unwrap();
        s.extend(encode(&Message::SetLevel { level: 2 }).unwrap());
        let (m, rest) = decode(&s);
        assert_eq!(m, vec![Message::Ping, Message::SetLevel { level: 2 }]);
        assert!(rest.is_empty());
    }

    #[test]
    fn flipped_bit_is_dropped_and_counted() {
        let mut f = encode(&Message::SetTimer { minutes: 8 }).unwrap();
        f[3] ^= 0x04;
        let mut d = Decoder::new();
        assert!(d.push(&f).is_empty());
        assert_eq!(d.stats().crc_errors, 1);
    }

    #[test]
    fn partial_frame_is_remainder() {
        let f = encode(&Message::Nack { reason: 2 }).unwrap();
        let (m, rest) = decode(&f[..4]);
        assert!(m.is_empty());
        assert_eq!(rest, &f[..4]);
    }

    #[test]
    fn resyncs_after_garbage() {
        let mut s = vec![0x00, 0xA5, 0xFF, 0xA5, 0x03, 0x01];
        s.extend(encode(&Message::Pong).unwrap());
        let (m, _) = decode(&s);
        assert_eq!(m, vec![Message::Pong]);
    }

    #[test]
    fn wrong_shape_is_malformed() {
        let f = frame(msg_type::PING, &[1, 2]).unwrap();
        let mut d = Decoder::new();
        assert!(d.push(&f).is_empty());
        assert_eq!(d.stats().malformed, 1);
    }

    #[test]
    fn unknown_type_survives() {
        let f = frame(0x7E, &[9, 8]).unwrap();
        let (m, _) = decode(&f);
        assert_eq!(
            m,
            vec![Message::Unknown {
                msg_type: 0x7E,
                payload: vec![9, 8]
            }]
        );
    }

    #[test]
    fn encode_limits() {
        assert_eq!(
            encode(&Message::Auth { secret: vec![b'x'; 33] }),
            Err(EncodeError::SecretTooLong(33))
        );
        assert!(frame(0x40, &[0; 65]).is_err());
        assert!(encode(&Message::Unknown {
            msg_type: msg_type::PING,
            payload: vec![]
        })
        .is_err());
    }
}
