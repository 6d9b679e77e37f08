#![no_main]
use dagseg::trainer::TrainConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = TrainConfig::parse(text) {
        let again = TrainConfig::parse(&config.serialize()).unwrap();
        assert_eq!(again, config);
    }
});
