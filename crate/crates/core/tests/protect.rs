use std::path::PathBuf;

use ctxauth_core::protect::*;
use ctxauth_core::simgen::{default_profile, generate_trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rsa::pkcs8::DecodePrivateKey;
use rsa::RsaPrivateKey;

fn server_key() -> RsaPrivateKey {
    RsaPrivateKey::from_pkcs8_pem(include_str!("data/server_key.pem")).unwrap()
}

fn keys(seed: u64) -> ClientKeys {
    ClientKeys::generate(&mut ChaCha20Rng::seed_from_u64(seed), server_key().to_public_key())
}

fn records() -> Vec<ContextRecord> {
    generate_trace(&default_profile(3, 1), 1, 600, 21).unwrap()
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Compares against a frozen file; set UPDATE_GOLDEN=1 to rewrite it.
fn golden(name: &str, actual: &str) {
    let path = data(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, want, "{name} drifted");
}

#[test]
fn seal_open_round_trip() {
    let sk = server_key();
    let k = keys(1);
    let p = k.protector().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for r in records().iter().step_by(10) {
        let s = p.protect_record(r).unwrap();
        let env = seal_envelope(&s, &sk.to_public_key(), &mut rng).unwrap();
        let parsed = Envelope::from_bytes(&env.to_bytes()).unwrap();
        let back = open_envelope(&parsed, &sk).unwrap();
        assert_eq!(back.to_text(), s.to_text());
        assert_eq!(back, s);
    }
}

#[test]
fn sealing_is_randomised() {
    let sk = server_key();
    let k = keys(1);
    let s = protect_record(&records()[5], &k).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let a = seal_envelope(&s, &sk.to_public_key(), &mut rng).unwrap();
    let b = seal_envelope(&s, &sk.to_public_key(), &mut rng).unwrap();
    assert_ne!(a.to_bytes(), b.to_bytes());
    assert_ne!(a.nonce, b.nonce);
}

#[test]
fn bit_flips_are_rejected() {
    let sk = server_key();
    let k = keys(1);
    let s = protect_record(&records()[7], &k).unwrap();
    let bytes = seal_envelope(&s, &sk.to_public_key(), &mut ChaCha20Rng::seed_from_u64(4)).unwrap().to_bytes();
    let body_start = 4 + 256;
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    // Every bit of nonce and tag, plus a sample across key and ciphertext.
    let mut positions: Vec<usize> = (body_start * 8..(body_start + NONCE_LEN) * 8).collect();
    positions.extend((bytes.len() - TAG_LEN) * 8..bytes.len() * 8);
    positions.extend((0..300).map(|_| rng.gen_range(32..bytes.len() * 8)));
    for bit in positions {
        let mut t = bytes.clone();
        t[bit / 8] ^= 1 << (bit % 8);
        let res = Envelope::from_bytes(&t).and_then(|e| open_envelope(&e, &sk));
        assert!(res.is_err(), "flip of bit {bit} accepted");
    }
}

#[test]
fn rejection_reasons_are_distinct() {
    let sk = server_key();
    let s = protect_record(&records()[0], &keys(1)).unwrap();
    let env = seal_envelope(&s, &sk.to_public_key(), &mut ChaCha20Rng::seed_from_u64(6)).unwrap();

    let mut bad_key = env.clone();
    bad_key.wrapped_key[10] ^= 1;
    assert_eq!(open_envelope(&bad_key, &sk), Err(EnvelopeError::Unwrap));

    let mut bad_ct = env.clone();
    bad_ct.ciphertext[0] ^= 1;
    assert_eq!(open_envelope(&bad_ct, &sk), Err(EnvelopeError::Integrity));

    let bytes = env.to_bytes();
    assert!(matches!(Envelope::from_bytes(&bytes[..200]), Err(EnvelopeError::Malformed(_))));
}

#[test]
fn serialized_sample_holds_no_raw_values() {
    let k = keys(9);
    let p = k.protector().unwrap();
    for r in records().iter().step_by(37) {
        let text = p.protect_record(r).unwrap().to_text();
        for field in CategoricalField::ALL {
            if field == CategoricalField::DayIndex {
                continue;
            }
            for v in r.categorical(field).unwrap_or_default() {
                if v.len() >= 4 {
                    assert!(!text.contains(v), "{} leaked {v:?}", field.name());
                }
            }
        }
        for x in [r.position.lat(), r.position.lon(), r.pressure, r.noise_level, r.mag_field_strength] {
            assert!(!text.contains(&x.to_string()), "numeric {x} leaked");
            assert!(!text.contains(&format!("{x:.4}")), "numeric {x} leaked");
        }
    }
}

#[test]
fn list_order_is_preserved() {
    let k = keys(2);
    let p = k.protector().unwrap();
    let r = records().into_iter().find(|r| r.nearby_wifi_macs.as_ref().is_some_and(|l| l.len() >= 3)).unwrap();
    let s = p.protect_record(&r).unwrap();
    let want: Vec<Digest> = r.nearby_wifi_macs.as_ref().unwrap().iter().map(|m| p.digest(m)).collect();
    assert_eq!(s.digests(CategoricalField::NearbyWifiMacs), want.as_slice());
}

#[test]
fn digests_depend_on_the_key() {
    let r = &records()[3];
    let a = protect_record(r, &keys(1)).unwrap();
    let b = protect_record(r, &keys(2)).unwrap();
    for f in CategoricalField::ALL {
        if a.digests(f).is_empty() {
            continue;
        }
        assert_ne!(a.digests(f), b.digests(f), "{}", f.name());
    }
    // Same key, same value: same digest.
    assert_eq!(a, protect_record(r, &keys(1)).unwrap());
}

#[test]
fn absent_modalities_get_a_sentinel_digest() {
    let k = keys(4);
    let mut r = records()[0].clone();
    r.wifi_ssid = None;
    r.bluetooth_macs = None;
    let s = protect_record(&r, &k).unwrap();
    let p = k.protector().unwrap();
    assert_eq!(s.digests(CategoricalField::WifiSsid), [p.digest(&absent_token(CategoricalField::WifiSsid))]);
    assert_eq!(s.digests(CategoricalField::BluetoothMacs).len(), 1);
    r.bluetooth_macs = Some(Vec::new());
    assert!(protect_record(&r, &k).unwrap().digests(CategoricalField::BluetoothMacs).is_empty());
}

#[test]
fn key_file_round_trip() {
    let k = keys(5);
    let text = k.to_toml().unwrap();
    let back = ClientKeys::from_toml(&text).unwrap();
    assert_eq!(back.to_toml().unwrap(), text);
    let r = &records()[2];
    assert_eq!(protect_record(r, &k).unwrap(), protect_record(r, &back).unwrap());
    assert!(ClientKeys::from_toml(&text.replace("salt = ", "salt = 9")).is_err());
}

#[test]
fn sample_text_golden() {
    let s = protect_record(&records()[42], &keys(11)).unwrap();
    let text = s.to_text();
    golden("sample_golden.txt", &text);
    assert_eq!(ProtectedSample::from_text(&text).unwrap(), s);
}

#[test]
fn envelope_golden() {
    let sk = server_key();
    let s = protect_record(&records()[42], &keys(11)).unwrap();
    let env = seal_envelope(&s, &sk.to_public_key(), &mut ChaCha20Rng::seed_from_u64(12)).unwrap();
    let hex: String = env.to_bytes().iter().map(|b| format!("{b:02x}")).collect();
    golden("envelope_golden.hex", &hex);
    let frozen = std::fs::read_to_string(data("envelope_golden.hex")).unwrap();
    let bytes: Vec<u8> = (0..frozen.len()).step_by(2).map(|i| u8::from_str_radix(&frozen[i..i + 2], 16).unwrap()).collect();
    assert_eq!(&bytes[..4], &256u32.to_be_bytes());
    assert_eq!(open_envelope(&Envelope::from_bytes(&bytes).unwrap(), &sk).unwrap(), s);
}

#[test]
fn malformed_sample_text_is_rejected() {
    let s = protect_record(&records()[1], &keys(3)).unwrap().to_text();
    assert!(ProtectedSample::from_text(&s.replace("v=1", "v=2")).is_err());
    assert!(ProtectedSample::from_text(&format!("{s};extra=1")).is_err());
    assert!(ProtectedSample::from_text(&s.replacen("wifi_ssid=", "wifi_ssid=AAAA,", 1)).is_err());
    assert!(ProtectedSample::from_text(&s[..s.len() / 2]).is_err());
}
