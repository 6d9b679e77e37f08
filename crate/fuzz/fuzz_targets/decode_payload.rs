#![no_main]
use dagseg::model_io::{decode_payload, encode_payload};
use libfuzzer_sys::fuzz_target;

// Skips the checksum so mutations reach the payload decoder.
fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode_payload(data) {
        let again = decode_payload(&encode_payload(&model)).unwrap();
        assert_eq!(encode_payload(&again), encode_payload(&model));
        let _ = model.segment(&['a', 'b']);
    }
});
