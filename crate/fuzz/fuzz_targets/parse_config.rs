#![no_main]
use libfuzzer_sys::fuzz_target;

use hidden_rewards::output::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Validation runs on whatever the parser accepts, so it must not panic either.
        if let Ok(cfg) = parse_config(text) {
            let _ = cfg.validate();
            let _ = cfg.incentive_range();
            let _ = cfg.search_box();
        }
    }
});
