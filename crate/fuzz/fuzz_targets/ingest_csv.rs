#![no_main]

use libfuzzer_sys::fuzz_target;
use pdmcount::io::{parse_count_csv, write_count_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(series) = parse_count_csv(data) else { return };
    // Anything accepted must survive a write/read round trip unchanged.
    let mut buf = Vec::new();
    write_count_csv(&series, &mut buf).expect("writing to memory");
    assert_eq!(parse_count_csv(buf.as_slice()).expect("re-reading"), series);
});
