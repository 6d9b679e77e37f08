#![no_main]
use dagseg::corpus::{spans_to_tags, tags_to_spans, validate_spans, Tag};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let tags: Vec<Tag> = data.iter().map(|b| Tag::ALL[(b & 3) as usize]).collect();
    let spans = tags_to_spans(&tags);
    validate_spans(&spans, tags.len()).unwrap();
    let canonical = spans_to_tags(&spans, tags.len()).unwrap();
    assert_eq!(tags_to_spans(&canonical), spans);
});
