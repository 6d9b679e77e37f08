#![no_main]
use dagseg::corpus::{format_segmented, parse_corpus, spans_to_tags, tags_to_spans};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(sentences) = parse_corpus(data) else {
        return;
    };
    for s in &sentences {
        let spans = s.gold.as_ref().unwrap();
        let tags = spans_to_tags(spans, s.len()).unwrap();
        assert_eq!(&tags_to_spans(&tags), spans);
        let line = format_segmented(&s.chars, spans);
        let again = parse_corpus(line.as_bytes()).unwrap();
        if !s.is_empty() {
            assert_eq!(again[0].gold.as_ref(), Some(spans));
        }
    }
});
