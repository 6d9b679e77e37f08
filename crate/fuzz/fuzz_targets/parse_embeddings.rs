#![no_main]
use dagseg::corpus::{parse_embeddings, EntryFlags, Vocabulary};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mut vocab = Vocabulary::new();
    for w in ["a", "b", "ab", "\u{4e2d}\u{56fd}"] {
        vocab.insert(w, EntryFlags::TRAIN).unwrap();
    }
    let _ = parse_embeddings(data, &vocab, 3);
});
