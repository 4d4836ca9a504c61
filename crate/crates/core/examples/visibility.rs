//! Prints what the avatar sees from its spawn pose: visible instances with
//! bounding boxes, occlusion and the label fields legible at that distance.
//! Then it walks toward the nearest visible product and shows more detail
//! becoming legible.
//!
//! ```text
//! cargo run --example visibility -- 1 0
//! ```

use sari_sim::geometry::Vec3;
use sari_sim::observe::SemanticFrame;
use sari_sim::protocol::build;
use sari_sim::Engine;

fn show(frame: &SemanticFrame, limit: usize) {
    println!("{} visible instances", frame.entries.len());
    let mut entries: Vec<_> = frame.entries.iter().collect();
    entries.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    for e in entries.into_iter().take(limit) {
        let [y0, x0, y1, x1] = e.bbox;
        println!(
            "  #{:<3} {:<8} {:>5.2} m  box ({x0:>5.1},{y0:>5.1})-({x1:>5.1},{y1:>5.1})  occluded {:>3.0}%  name={:?} price={:?} exp={:?}",
            e.instance_id,
            e.sku,
            e.distance,
            e.occluded_fraction * 100.0,
            e.legible.name,
            e.legible.price_tag,
            e.legible.expiration,
        );
    }
}

fn frame(engine: &mut Engine, id: i64) -> SemanticFrame {
    let r = engine.handle(&build::simple(id, "GetSemanticFrame"));
    serde_json::from_value(r.payload).expect("semantic frame")
}

fn main() {
    let mut args = std::env::args().skip(1);
    let layout: u32 = args.next().map(|s| s.parse().expect("layout")).unwrap_or(1);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);
    let mut engine = Engine::reference(layout, seed).expect("engine");
    println!("-- from spawn");
    let f = frame(&mut engine, 1);
    show(&f, 8);

    // Walk toward the closest visible instance, stopping 0.8 m short.
    let Some(nearest) = f.entries.iter().min_by(|a, b| a.distance.total_cmp(&b.distance)) else {
        return;
    };
    let steps = ((nearest.distance - 0.8) / 0.1).floor().max(0.0) as i64;
    let target = engine.world().placement(nearest.instance_id).center;
    let eye = engine.world().camera_position();
    let yaw = (target.x - eye.x).atan2(target.z - eye.z).to_degrees() - engine.world().avatar.rotation.yaw;
    engine.handle(&build::transform_agent(2, Vec3::ZERO, Vec3::new(0.0, yaw, 0.0)));
    for i in 0..steps {
        engine.handle(&build::transform_agent(3 + i, Vec3::new(0.0, 0.0, 0.1), Vec3::ZERO));
    }
    println!("\n-- after {steps} steps toward #{}", nearest.instance_id);
    show(&frame(&mut engine, 1000), 5);
}
