//! Regenerates the preset configuration files shipped in presets/.
//!
//! Usage: cargo run -p ringcat-core --example gen_presets -- <output-dir>

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "presets".to_string());
    std::fs::create_dir_all(&dir).expect("create preset directory");
    for name in ["paper-s1", "paper-s2", "paper-s3"] {
        let cfg = ringcat_core::scenario::preset(name).expect("known preset");
        let path = std::path::Path::new(&dir).join(format!("{name}.json"));
        ringcat_core::io::write_json(&path, &cfg).expect("write preset");
        println!("wrote {}", path.display());
    }
}
