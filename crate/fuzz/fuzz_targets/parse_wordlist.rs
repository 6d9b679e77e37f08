#![no_main]
use dagseg::corpus::parse_wordlist;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(words) = parse_wordlist(data) {
        assert!(words.iter().all(|w| !w.is_empty()));
    }
});
