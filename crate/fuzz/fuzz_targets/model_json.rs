#![no_main]

use libfuzzer_sys::fuzz_target;

use damvi::vote::Ensemble;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Deserialization validates the format version, the tree structure,
        // and the weight simplex; any failure must be an Err.
        if let Ok(ensemble) = Ensemble::from_json_str(text) {
            // A model that parses must survive prediction on a zero vector
            // or report a dimension mismatch.
            let zeros = vec![0.0; 16];
            let _ = damvi::vote::predict_mv(&ensemble, &zeros);
        }
    }
});
