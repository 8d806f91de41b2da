#![no_main]
use libfuzzer_sys::fuzz_target;

use hidden_rewards::output::parse_t_list;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(list) = parse_t_list(text) {
            assert!(!list.is_empty());
            assert!(list.iter().all(|&t| t > 0));
        }
    }
});
