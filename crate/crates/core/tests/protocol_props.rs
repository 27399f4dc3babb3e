use mima_core::protocol::{crc16, decode, encode, frame, Decoder, Message, Telemetry, MAX_FRAME, MAX_PAYLOAD, SYNC};
use proptest::prelude::*;

fn telemetry() -> impl Strategy<Value = Telemetry> {
    (any::<[i16; 3]>(), any::<i16>(), 0u8..=100, 0u8..=5, 0u8..8).prop_map(|(z, s, soc, mode, duty)| Telemetry {
        zone_centi: z,
        skin_centi: s,
        soc_percent: soc,
        mode,
        duty_bits: duty,
    })
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        proptest::collection::vec(any::<u8>(), 0..=32).prop_map(|secret| Message::Auth { secret }),
        any::<bool>().prop_map(|ok| Message::AuthResult { ok }),
        any::<u8>().prop_map(|level| Message::SetLevel { level }),
        Just(Message::StartHeat),
        Just(Message::StopHeat),
        any::<u8>().prop_map(|minutes| Message::SetTimer { minutes }),
        Just(Message::ResetLatch),
        Just(Message::Ping),
        Just(Message::Pong),
        telemetry().prop_map(Message::Telemetry),
        any::<u8>().prop_map(|code| Message::Anomaly { code }),
        any::<u8>().prop_map(|reason| Message::Nack { reason }),
        (0x0Du8.., proptest::collection::vec(any::<u8>(), 0..=MAX_PAYLOAD))
            .prop_map(|(msg_type, payload)| Message::Unknown { msg_type, payload }),
    ]
}

fn stream(msgs: &[Message]) -> Vec<u8> {
    msgs.iter().flat_map(|m| encode(m).unwrap()).collect()
}

proptest! {
    #[test]
    fn round_trip(msg in message()) {
        let bytes = encode(&msg).unwrap();
        prop_assert_eq!(bytes[0], SYNC);
        let (out, rest) = decode(&bytes);
        prop_assert_eq!(out, vec![msg]);
        prop_assert!(rest.is_empty());
    }

    #[test]
    fn any_split_decodes_the_same(msgs in proptest::collection::vec(message(), 1..12), cuts in proptest::collection::vec(any::<usize>(), 0..20)) {
        let bytes = stream(&msgs);
        let mut cuts: Vec<usize> = cuts.into_iter().map(|c| c % (bytes.len() + 1)).collect();
        cuts.push(bytes.len());
        cuts.sort_unstable();
        let mut d = Decoder::new();
        let mut out = Vec::new();
        let mut from = 0;
        for c in cuts {
            out.extend(d.push(&bytes[from..c]));
            from = c;
        }
        prop_assert_eq!(out, msgs);
        prop_assert!(d.remainder().is_empty());
    }

    #[test]
    fn resyncs_after_garbage(garbage in proptest::collection::vec(any::<u8>(), 0..200), msg in message()) {
        let mut bytes = garbage;
        bytes.extend(encode(&msg).unwrap());
        // lets a pseudo-frame started inside the garbage run to completion
        bytes.extend([0u8; MAX_FRAME]);
        let (out, _) = decode(&bytes);
        prop_assert!(out.contains(&msg), "{:?}", out);
    }

    #[test]
    fn single_bit_flips_never_decode_wrong(msg in message(), bit in any::<usize>()) {
        let mut bytes = encode(&msg).unwrap();
        // the length byte is excluded: a shorter length frames different bytes
        let bits: Vec<usize> = (0..bytes.len() * 8).filter(|i| i / 8 != 1).collect();
        let i = bits[bit % bits.len()];
        bytes[i / 8] ^= 1 << (i % 8);
        let (out, _) = decode(&bytes);
        prop_assert!(out.is_empty(), "{:?}", out);
    }

    #[test]
    fn telemetry_is_lossless_to_a_hundredth(z in proptest::array::uniform3(-300.0f64..300.0), skin in -300.0f64..300.0) {
        let t = Telemetry::from_celsius(z, skin, 0.5, 3, 7);
        let bytes = encode(&Message::Telemetry(t)).unwrap();
        let (out, _) = decode(&bytes);
        let Some(Message::Telemetry(back)) = out.first() else { panic!("{out:?}") };
        for (a, b) in back.zone_temps().iter().zip(z) {
            prop_assert!((a - b).abs() <= 0.005 + 1e-9);
        }
        prop_assert!((back.skin_temp() - skin).abs() <= 0.005 + 1e-9);
    }
}

#[test]
fn crc_check_value() {
    assert_eq!(crc16(b"123456789"), 0x29B1);
}

#[test]
fn oversize_payload_is_refused() {
    assert!(frame(0x20, &[0; MAX_PAYLOAD]).is_ok());
    assert!(frame(0x20, &[0; MAX_PAYLOAD + 1]).is_err());
    assert!(encode(&Message::Auth { secret: vec![0; 33] }).is_err());
}

#[test]
fn wrong_shape_is_counted_not_delivered() {
    let mut d = Decoder::new();
    let bad = frame(0x02, &[1, 2]).unwrap();
    let good = encode(&Message::Ping).unwrap();
    let out = d.push(&[bad, good].concat());
    assert_eq!(out, vec![Message::Ping]);
    assert_eq!(d.stats().malformed, 1);
}

#[test]
fn bad_length_byte_skips_only_the_sync() {
    let mut bytes = vec![SYNC, 200];
    bytes.extend(encode(&Message::Pong).unwrap());
    assert_eq!(decode(&bytes).0, vec![Message::Pong]);
}
