#![no_main]
use libfuzzer_sys::fuzz_target;

use hidden_rewards::output::parse_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(manifest) = parse_manifest(text) {
            let _ = manifest.config.validate();
            let model = manifest.model.model();
            let _ = model.validate(&manifest.config);
        }
    }
});
