use muxfer::driver::*;
use muxfer::error::Error;

const TINY: &str = r#"
[channels]
pmu_n_min = 1
pmu_n_max = 1
muo_n_min = 5
muo_n_max = 8

[basis]
primitive_eta = 12
primitive_xi = 20
primitive_growth = 0.0
xi_margin = 0
contracted_eta = 8
contracted_xi = 10
product_pairs = 60

[grid]
rho_min = 0.5
rho_max = 1.0
ratio = 1.25
refine_passes = 0

[energies]
count = 0
"#;

fn tiny(dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(TINY).unwrap();
    cfg.cache.dir = Some(dir.to_path_buf());
    cfg
}

#[test]
fn toml_round_trip_is_idempotent() {
    for cfg in [RunConfig::default(), RunConfig::from_toml(TINY).unwrap()] {
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    for text in ["bogus = 1\n", "[basis]\nprimitive_zeta = 4\n", "[wrong]\nx = 1\n"] {
        match RunConfig::from_toml(text) {
            Err(Error::Config(_)) => {}
            other => panic!("{text:?} gave {other:?}"),
        }
    }
}

#[test]
fn invalid_settings_are_rejected() {
    let bad = [
        "[energies]\nmin_ev = 1.0\nmax_ev = 0.5\n",
        "[energies]\nmax_ev = 1100.0\n",
        "[basis]\nprimitive_eta = 2\n",
        "[channels]\npmu_n_min = 2\npmu_n_max = 2\n",
        "[propagation]\nscale = 0.0\n",
        "[tolerances]\nunitarity_ceiling = -1.0\n",
    ];
    for text in bad {
        assert!(RunConfig::from_toml(text).is_err(), "{text:?} accepted");
    }
    assert!(RunConfig::from_toml("[energies]\nmax_ev = 1000.0\n").is_ok());
}

#[test]
fn default_energy_grid() {
    let e = RunConfig::default().energies.values();
    assert_eq!(e.len(), 60);
    assert!((e[0] - 1e-3).abs() < 1e-15 && (e[59] / 1e3 - 1.0).abs() < 1e-12);
    let ratios: Vec<f64> = e.windows(2).map(|w| w[1] / w[0]).collect();
    assert!(ratios.iter().all(|r| (r / ratios[0] - 1.0).abs() < 1e-10));

    assert_eq!(EnergyGrid::parse("0.1, 10, 3").unwrap().values().len(), 3);
    assert_eq!(EnergyGrid::parse("1,1,1").unwrap().values(), vec![1.0]);
    assert!(EnergyGrid { count: 0, ..EnergyGrid::default() }.values().is_empty());
    for text in ["1,2", "a,2,3", "1,2,3,4", "1,2,-3"] {
        assert!(EnergyGrid::parse(text).is_err(), "{text}");
    }
}

#[test]
fn energy_ceiling_is_the_next_threshold() {
    let c = RunConfig::default().energy_ceiling_ev().unwrap();
    assert!(c > 1000.0 && c < 1100.0, "{c}");
}

#[test]
fn grid_key_tracks_what_the_grid_depends_on() {
    let cfg = RunConfig::from_toml(TINY).unwrap();
    let key = cfg.grid_key().unwrap();
    let mut other = cfg.clone();
    other.energies.count = 5;
    other.output.format = OutputFormat::Json;
    assert_eq!(other.grid_key().unwrap(), key);
    assert_ne!(other.hash().unwrap(), cfg.hash().unwrap());
    let mut other = cfg.clone();
    other.basis.contracted_xi += 1;
    assert_ne!(other.grid_key().unwrap(), key);
    let mut other = cfg.clone();
    other.grid.rho_max = 1.1;
    assert_ne!(other.grid_key().unwrap(), key);
}

#[test]
fn cache_store_load_verify_clear() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let cache = GridCache::for_config(&cfg);
    let key = cfg.grid_key().unwrap();
    assert!(cache.load(&key).unwrap().is_none());
    assert!(matches!(cache.verify(&cfg, 1e-12), Err(Error::Cache { .. })));

    let grid = cache.grid(&cfg).unwrap();
    assert!(cache.path_for(&key).exists());
    let loaded = cache.load(&key).unwrap().unwrap();
    assert_eq!(loaded.boundaries, grid.boundaries);
    assert_eq!(loaded.sectors.len(), grid.sectors.len());
    let report = cache.verify(&cfg, 1e-12).unwrap();
    assert!(!report.checked.is_empty() && report.max_deviation <= 1e-12);

    // corrupt one sector: verification names the key
    let mut broken = loaded.clone();
    for s in &mut broken.sectors {
        s.energies[0] *= 1.0 + 1e-6;
    }
    cache.store(&key, &broken).unwrap();
    match cache.verify(&cfg, 1e-12) {
        Err(Error::Cache { key: k, .. }) => assert_eq!(k, key),
        other => panic!("{other:?}"),
    }

    // an undecodable entry is rebuilt
    std::fs::write(cache.path_for(&key), b"garbage").unwrap();
    assert!(matches!(cache.load(&key), Err(Error::Cache { .. })));
    let rebuilt = cache.grid(&cfg).unwrap();
    assert_eq!(rebuilt.boundaries, grid.boundaries);

    let unrelated = dir.path().join("notes.txt");
    std::fs::write(&unrelated, "keep").unwrap();
    let removed = cache.clear().unwrap();
    assert_eq!(removed, vec![cache.path_for(&key)]);
    assert!(unrelated.exists());
    assert!(cache.clear().unwrap().is_empty());
}

#[test]
fn curves_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let first = cmd_curves(&cfg).unwrap();
    let second = cmd_curves(&cfg).unwrap();
    assert_eq!(first, second);
    let sys = cfg.system().unwrap();
    let table = parse_curves(&sys, &first).unwrap();
    assert_eq!(table.channels(), 27);
    assert!(table.rho.windows(2).all(|w| w[1] > w[0]));
    assert!(table.energies.iter().all(|e| e.windows(2).all(|w| w[0] <= w[1])));
}

#[test]
fn empty_scan_is_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let (result, text) = cmd_scan(&cfg, 1).unwrap();
    assert!(result.rows.is_empty());
    assert_eq!(result.failures(), 0);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("energy_ev,"));
    assert!(parse_scan_table(&text).unwrap().energy_ev.is_empty());
    // nothing was built
    assert!(std::fs::read_dir(dir.path()).map_or(true, |mut d| d.next().is_none()));
}

#[test]
fn scan_table_schema_errors_name_the_column() {
    match parse_scan_table("energy_ev,elastic\n1.0,0.5\n") {
        Err(Error::Schema(col)) => assert!(!col.is_empty() && col != "energy_ev"),
        other => panic!("{other:?}"),
    }
    let sys = RunConfig::default().system().unwrap();
    match parse_curves(&sys, "rho,e1\n1,2\n") {
        Err(Error::Schema(col)) => assert_eq!(col, "rho_amu"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sidecar_carries_hash_and_diagnostics() {
    let cfg = RunConfig::from_toml(TINY).unwrap();
    let (result, _) = cmd_scan(&RunConfig { cache: CacheConfig { dir: Some("/nonexistent".into()) }, ..cfg.clone() }, 1).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&sidecar(&cfg, Some(&result)).unwrap()).unwrap();
    assert_eq!(doc["config_hash"], cfg.hash().unwrap());
    assert_eq!(doc["diagnostics"]["rows"], 0);
}
