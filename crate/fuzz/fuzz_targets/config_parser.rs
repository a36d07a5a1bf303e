#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = kdvb_cli::config::parse_config(s) {
            let _ = cfg.grid();
            let _ = cfg.inflate.n_list();
            assert_eq!(cfg.digest().len(), 64);
        }
    }
});
