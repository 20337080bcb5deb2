//! Simulator event throughput for one simulated second per configuration.
//!
//! `cargo run --release -p photosync-core --example throughput`

use std::time::Instant;

use photosync_core::sim::{run_sim_into, NullSink};
use photosync_core::{MemoryMode, Routing, SystemConfig};

fn main() {
    for r1 in [50e3, 440e3] {
        for (mode, routing) in [
            (MemoryMode::Off, Routing::Direct),
            (MemoryMode::Sync, Routing::Direct),
            (MemoryMode::Sync, Routing::Hom),
        ] {
            let mut c = SystemConfig::reference_defaults().with_r1(r1);
            c.sim.mode = mode;
            c.sim.routing = routing;
            let start = Instant::now();
            let s = run_sim_into(&c, 1, 1.0, &mut NullSink).expect("valid configuration");
            let dt = start.elapsed().as_secs_f64();
            println!(
                "r1 {r1:>8} {mode:?}/{routing:?}: {} events in {dt:.2} s, {:.2} M events/s",
                s.events,
                s.events as f64 / dt / 1e6
            );
        }
    }
}
