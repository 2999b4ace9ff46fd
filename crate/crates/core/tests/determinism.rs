use muskat::config::SimConfig;
use muskat::diagnostics::write_csv;
use muskat::evolution::run;
use muskat::interface::{DomainSpec, PlaneKind};
use muskat::scenarios::{PlaneShape, ScenarioSpec};

fn csv_bytes(cfg: &SimConfig, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let out = pool.install(|| run(cfg)).unwrap();
    let mut buf = Vec::new();
    write_csv(&out.records, &mut buf).unwrap();
    buf
}

#[test]
fn half_plane_csv_independent_of_thread_count() {
    let cfg = SimConfig::new(
        ScenarioSpec::PeriodicTouchingBump { epsilon: Some(0.05), slope_target: None },
        DomainSpec::periodic(PlaneKind::HalfPlane, 1.0).unwrap(),
        128,
        0.01,
    );
    let one = csv_bytes(&cfg, 1);
    assert_eq!(one, csv_bytes(&cfg, 3));
    assert_eq!(one, csv_bytes(&cfg, 8));
}

#[test]
fn plane_csv_independent_of_thread_count() {
    let cfg = SimConfig::new(
        ScenarioSpec::PlaneGraph { shape: PlaneShape::Sine, amplitude: None, slope_target: Some(0.5), width: None },
        DomainSpec::periodic(PlaneKind::WholePlane, 1.0).unwrap(),
        64,
        0.01,
    );
    let one = csv_bytes(&cfg, 1);
    assert_eq!(one, csv_bytes(&cfg, 4));
}
