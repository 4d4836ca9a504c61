//! Checkout mechanics without an avatar: the cart phase machine and the
//! scanner's distance/angle gate swept over barcode orientations.
//!
//! ```text
//! cargo run --example checkout_scan
//! ```

use sari_sim::checkout::{barcode_plane, scan_registers, Button, CartState};
use sari_sim::geometry::{Mat3, Vec3};
use sari_sim::Engine;

fn main() {
    let mut cart = CartState::default();
    println!("phase {:?}", cart.phase);
    println!("PAY   -> {:?}", cart.press(Button::Pay));
    println!("START -> {:?}", cart.press(Button::Start));
    cart.append("BIS-001".into(), 249);
    cart.append("SOD-004".into(), 150);
    println!("scanned 2 lines, total {} cents", cart.total_cents);
    println!("REMOVE_LAST -> {:?}, total {}", cart.press(Button::RemoveLast), cart.total_cents);
    println!("PAY   -> {:?}, phase {:?}", cart.press(Button::Pay), cart.phase);

    let engine = Engine::reference(1, 0).expect("engine");
    let w = engine.world();
    let fx = &w.scene.checkout;
    println!("\nscanner at {:?}, beam {:?}", fx.scanner_origin, fx.scanner_axis);
    println!("limits: {} m, {} deg", w.config.scan_max_distance, w.config.scan_max_angle_deg);
    let half = Vec3::new(0.05, 0.08, 0.03);
    println!("\n dist  angle  registers");
    for dist in [0.1, 0.2, 0.3, 0.35] {
        for angle in [0.0, 15.0, 29.0, 30.0, 31.0, 60.0] {
            let rot = Mat3::rot_y(fx.pose.yaw + angle);
            let offset = barcode_plane(Vec3::ZERO, &rot, half).center;
            let plane = barcode_plane(fx.scanner_origin + fx.scanner_axis.scale(dist) - offset, &rot, half);
            let hit = scan_registers(fx, &plane, &rot, &w.config);
            println!(" {dist:>4.2}  {angle:>5.1}  {}", hit.map(|t| format!("yes at {t:.3} m")).unwrap_or_else(|| "no".into()));
        }
    }
}
