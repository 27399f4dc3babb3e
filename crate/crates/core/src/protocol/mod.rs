//! Framed app-to-device wire format.
//!
//! ```text
//! A5 | len | type | payload[len] | crc_hi crc_lo
//! ```
//!
//! `len` counts payload bytes only (0..=64). The CRC is CRC-16/CCITT-FALSE
//! over `len`, `type` and the payload, sent big-endian.

mod codec;
mod message;

pub use codec::{crc16, decode, encode, frame, DecodeStats, Decoder, EncodeError};
pub use message::{msg_type, Message, Telemetry, MAX_SECRET_LEN};

pub const SYNC: u8 = 0xA5;
pub const MAX_PAYLOAD: usize = 64;
/// Sync, length, type and two CRC bytes.
pub const FRAME_OVERHEAD: usize = 5;
pub const MAX_FRAME: usize = MAX_PAYLOAD + FRAME_OVERHEAD;
