use std::path::PathBuf;

use mima_core::firmware::{AnomalyCode, NackReason};
use mima_core::protocol::{decode, encode, Message, Telemetry};

fn doc() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/protocol.md");
    std::fs::read_to_string(path).expect("docs/protocol.md")
}

fn spaced_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02X}")).collect::<Vec<_>>().join(" ")
}

fn examples() -> Vec<(Message, &'static str)> {
    vec![
        (Message::Ping, "A5 00 08 9C 07"),
        (Message::Pong, "A5 00 09 8C 26"),
        (Message::Auth { secret: b"mima".to_vec() }, "A5 04 01 6D 69 6D 61 C6 BF"),
        (Message::AuthResult { ok: true }, "A5 01 02 01 8D EF"),
        (Message::SetLevel { level: 1 }, "A5 01 03 01 BE DE"),
        (Message::SetTimer { minutes: 8 }, "A5 01 06 08 D0 02"),
        (Message::StartHeat, "A5 00 04 5D 8B"),
        (Message::StopHeat, "A5 00 05 4D AA"),
        (Message::ResetLatch, "A5 00 07 6D E8"),
        (
            Message::Anomaly {
                code: AnomalyCode::SigmaTrip.code(),
            },
            "A5 01 0B 01 37 77",
        ),
        (
            Message::Nack {
                reason: NackReason::WrongMode.code(),
            },
            "A5 01 0C 02 9E 83",
        ),
        (
            Message::Nack {
                reason: NackReason::Busy.code(),
            },
            "A5 01 0C 07 CE 26",
        ),
        (
            Message::Telemetry(Telemetry::from_celsius([52.10, 51.95, 52.30], 42.12, 0.87, 3, 0b101)),
            "A5 0B 0A 14 5A 14 4B 14 6E 10 74 57 03 05 13 98",
        ),
    ]
}

#[test]
fn documented_frames_match_the_encoder() {
    let doc = doc();
    for (msg, hex) in examples() {
        let bytes = encode(&msg).unwrap();
        assert_eq!(spaced_hex(&bytes), hex, "{msg:?}");
        assert!(doc.contains(hex), "docs/protocol.md lacks {hex}");
        let (decoded, rest) = decode(&bytes);
        assert_eq!(decoded, vec![msg]);
        assert!(rest.is_empty());
    }
}

#[test]
fn documented_codes_match() {
    let doc = doc();
    for c in AnomalyCode::ALL {
        assert!(doc.contains(&format!("| {} | {} |", c.code(), c.name())), "{c:?}");
    }
    assert!(doc.contains("| 7 | Busy"));
}
