#![no_main]
use dagseg::model_io::{decode_model, encode_model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode_model(data) {
        let bytes = encode_model(&model);
        let again = decode_model(&bytes).unwrap();
        assert_eq!(encode_model(&again), bytes);
    }
});
