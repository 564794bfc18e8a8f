//! AES-256-GCM known-answer vectors from the GCM submission document
//! (test cases 13 to 16, 256-bit key).

use qpass_channel::aead::{aead_open, aead_seal};

struct Case {
    key: &'static str,
    iv: &'static str,
    plaintext: &'static str,
    aad: &'static str,
    ciphertext: &'static str,
    tag: &'static str,
}

const P15: &str = "d9313225f88406e5a55909c5aff5269a86a7a9531534f7da2e4c303d8a318a721c3c0c95956809532fcf0e2449a6b525b16aedf5aa0de657ba637b391aafd255";
const C15: &str = "522dc1f099567d07f47f37a32a84427d643a8cdcbfe5c0c97598a2bd2555d1aa8cb08e48590dbb3da7b08b1056828838c5f61e6393ba7a0abcc9f662898015ad";
const K15: &str = "feffe9928665731c6d6a8f9467308308feffe9928665731c6d6a8f9467308308";

const CASES: [Case; 4] = [
    Case {
        key: "0000000000000000000000000000000000000000000000000000000000000000",
        iv: "000000000000000000000000",
        plaintext: "",
        aad: "",
        ciphertext: "",
        tag: "530f8afbc74536b9a963b4f1c4cb738b",
    },
    Case {
        key: "0000000000000000000000000000000000000000000000000000000000000000",
        iv: "000000000000000000000000",
        plaintext: "00000000000000000000000000000000",
        aad: "",
        ciphertext: "cea7403d4d606b6e074ec5d3baf39d18",
        tag: "d0d1c8a799996bf0265b98b5d48ab919",
    },
    Case {
        key: K15,
        iv: "cafebabefacedbaddecaf888",
        plaintext: P15,
        aad: "",
        ciphertext: C15,
        tag: "b094dac5d93471bdec1a502270e3cc6c",
    },
    Case {
        key: K15,
        iv: "cafebabefacedbaddecaf888",
        plaintext: P15,
        aad: "feedfacedeadbeeffeedfacedeadbeefabaddad2",
        ciphertext: C15,
        tag: "76fc6ece0f4e1768cddf8853bb2d551b",
    },
];

fn unhex(s: &str) -> Vec<u8> {
    hex::decode(s).unwrap()
}

#[test]
fn gcm_known_answers() {
    for (i, case) in CASES.iter().enumerate() {
        let key: [u8; 32] = unhex(case.key).try_into().unwrap();
        let iv: [u8; 12] = unhex(case.iv).try_into().unwrap();
        let mut plaintext = unhex(case.plaintext);
        let mut expected = unhex(case.ciphertext);
        if i == 3 {
            // the last case uses a 60-byte message
            plaintext.truncate(60);
            expected.truncate(60);
        }
        expected.extend(unhex(case.tag));
        let aad = unhex(case.aad);
        let sealed = aead_seal(&key, &iv, &plaintext, &aad);
        assert_eq!(hex::encode(&sealed), hex::encode(&expected), "case {}", 13 + i);
        assert_eq!(aead_open(&key, &iv, &sealed, &aad).unwrap(), plaintext);
    }
}

#[test]
fn modified_tag_always_fails() {
    let key = [7u8; 32];
    let iv = [9u8; 12];
    let sealed = aead_seal(&key, &iv, b"hunter2", b"hdr");
    assert_eq!(aead_open(&key, &iv, &sealed, b"hdr").unwrap(), b"hunter2");
    for trial in 0..100 {
        let mut bad = sealed.clone();
        let pos = sealed.len() - 16 + trial % 16;
        bad[pos] ^= 1 << (trial % 8);
        assert!(aead_open(&key, &iv, &bad, b"hdr").is_err());
    }
    assert!(aead_open(&key, &iv, &sealed, b"hdR").is_err());
}
