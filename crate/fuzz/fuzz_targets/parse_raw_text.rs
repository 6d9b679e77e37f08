#![no_main]
use dagseg::corpus::parse_raw_text;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_raw_text(data);
});
