//! Renders the first-person screenshot at a layout's spawn pose and writes
//! it as PNG.
//!
//! ```text
//! cargo run --example screenshot -- out.png 2
//! ```
//!
//! Without a path the image goes to `$SARI_SIM_LOG_DIR/screenshot.png`, or to
//! the system temp directory.

use std::path::PathBuf;

use sari_sim::geometry::Vec3;
use sari_sim::observe::{render_screenshot, Screenshot};
use sari_sim::protocol::build;
use sari_sim::Engine;

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| {
        std::env::var_os(sari_sim::engine::LOG_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(std::env::temp_dir)
            .join("screenshot.png")
    });
    let layout: u32 = args.next().map(|s| s.parse().expect("layout")).unwrap_or(1);
    let mut engine = Engine::reference(layout, 0).expect("engine");
    // Look slightly down so shelves fill the view.
    engine.handle(&build::transform_agent(1, Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0)));
    let shot = render_screenshot(engine.world());

    // The same image travels over the wire as base64 PNG.
    let r = engine.handle(&build::simple(2, "RequestScreenshot"));
    let png = base64::Engine::decode(&base64::engine::general_purpose::STANDARD, r.payload["data"].as_str().unwrap())
        .expect("base64");
    let decoded = Screenshot::from_png(&png).expect("png");
    assert_eq!(decoded, shot);

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).expect("output dir");
    }
    std::fs::write(&out, shot.to_png()).expect("write png");
    println!(
        "{}x{} screenshot, {} foreground pixels -> {}",
        shot.width,
        shot.height,
        shot.foreground_count(),
        out.display()
    );
}
