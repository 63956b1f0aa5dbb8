//! Tour of the on-disk formats: event text, PGM, the tensor container,
//! config files and dataset manifests.
//!
//! ```bash
//! cargo run -p evfuse --example file_formats
//! ```

use std::path::PathBuf;

use evfuse::io::{
    decode_evft, decode_pgm, emit_config, emit_manifest, encode_evft, encode_pgm,
    format_event_text, parse_config_str, parse_event_str, parse_manifest_str, DatasetManifest,
    ManifestFrame,
};
use evfuse::solver::SolverConfig;
use ndarray::{Array2, Array3};

fn main() -> evfuse::Result<()> {
    // Event text: `t x y p`, timestamps in seconds.
    let text = "0.000500 3 1 1\n0.001000 3 1 0\n";
    let stream = parse_event_str(text, Some((8, 8)))?;
    println!("parsed {} events; first at {} us", stream.len(), stream.events()[0].t);
    assert_eq!(format_event_text(&stream), text);

    // PGM round trip.
    let frame = Array2::from_shape_fn((4, 4), |(y, x)| ((y * 4 + x) as f64 * 17.0).min(255.0) / 255.0);
    let pgm = encode_pgm(frame.view())?;
    println!("PGM: {} header+payload bytes for a 4x4 frame", pgm.len());
    assert_eq!(decode_pgm(&pgm)?, frame);

    // Tensor container round trip.
    let tensor = Array3::from_shape_fn((2, 3, 3), |(t, y, x)| (t + y + x) as f64 * 0.125);
    let bytes = encode_evft(&tensor)?;
    println!("tensor container: {} bytes for 2x3x3 ({} header + payload)", bytes.len(), 18);
    assert_eq!(decode_evft(&bytes)?, tensor);

    // Config: missing keys default, out-of-range values warn.
    let loaded = parse_config_str("alpha = 50\nlambda_t = 0.25\n# lr0 stays default\n")?;
    println!("config: alpha = {}, lr0 = {}", loaded.config.alpha, loaded.config.lr0);
    for w in &loaded.warnings {
        println!("  warning: {w}");
    }
    assert_eq!(parse_config_str(&emit_config(&SolverConfig::default()))?.config, SolverConfig::default());

    // Dataset manifest.
    let manifest = DatasetManifest {
        sensor_width: 240,
        sensor_height: 180,
        event_file: PathBuf::from("events.txt"),
        frames: vec![
            ManifestFrame { timestamp_us: 0, path: PathBuf::from("frames/f0.pgm") },
            ManifestFrame { timestamp_us: 45_000, path: PathBuf::from("frames/f1.pgm") },
        ],
    };
    let text = emit_manifest(&manifest);
    println!("\nmanifest:\n{text}");
    assert_eq!(parse_manifest_str(&text)?, manifest);
    Ok(())
}
