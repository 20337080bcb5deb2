use photosync::experiment::{measure_g2_after_memory, measure_source_g2};
use photosync_core::model::g2_after_memory;
use photosync_core::units::Picos;
use photosync_core::SystemConfig;

#[test]
fn simulated_source_g2_matches_configuration() {
    let cfg = SystemConfig::reference_defaults().with_r1(200e3);
    let g = measure_source_g2(&cfg, 5, 4.0).unwrap().estimate().unwrap();
    assert!(g.z_score(cfg.source.g2_source) < 3.0, "{g:?}");
    assert!(g.stderr < 0.05 * cfg.source.g2_source, "{g:?}");
}

#[test]
fn multi_pair_floor_sets_source_g2_at_high_rate() {
    // Once other pairs alone exceed the on-resonant background, g2 follows
    // 2·B·W/η_h with B the pair rate plus the off-resonant share.
    let cfg = SystemConfig::reference_defaults().with_r1(440e3);
    let (s, w) = (&cfg.source, cfg.sim.control_window.ps() as f64 * 1e-12);
    let background = s.g2_source * s.eta_h1 / (2.0 * w);
    assert!(s.r1 > (1.0 - s.rho) * background);
    let floor = 2.0 * (s.r1 + s.rho * background) * w / s.eta_h1;
    let g = measure_source_g2(&cfg, 5, 4.0).unwrap().estimate().unwrap();
    assert!(g.z_score(floor) < 3.0, "{g:?} vs {floor}");
}

#[test]
fn retrieved_g2_rises_with_storage_time() {
    let cfg = SystemConfig::reference_defaults().with_r1(440e3);
    let mut last = 0.0;
    for ns in [20, 150] {
        let (c, _) = measure_g2_after_memory(&cfg, Picos::from_ns(ns), 6, 4.0).unwrap();
        let g = c.estimate().unwrap();
        let model = g2_after_memory(ns as f64, &cfg.source, &cfg.memory).unwrap();
        assert!(g.z_score(model) < 3.0, "{ns} ns: {g:?} vs {model}");
        assert!(g.value > last);
        last = g.value;
    }
}
