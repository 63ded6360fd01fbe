#![no_main]

use libfuzzer_sys::fuzz_target;

// The CSV ingestion path must reject malformed input with an error, never a
// panic. Exercise a couple of label-column choices so both the
// missing-column and the cell-parsing paths get coverage.
fuzz_target!(|data: &[u8]| {
    let _ = damvi::dataset::parse_csv(data, "label", "1");
    let _ = damvi::dataset::parse_csv(data, "y", "positive");
});
