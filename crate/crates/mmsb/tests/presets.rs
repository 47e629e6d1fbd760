use mmsb::config::FileConfig;
use mmsb::error::Error;
use mmsb::presets::{run_experiment, Overrides, Preset, Setting};

#[test]
fn names_roundtrip() {
    for p in Preset::ALL {
        assert_eq!(p.name().parse::<Preset>().unwrap(), p);
    }
    assert!(matches!("clique".parse::<Preset>(), Err(Error::UnknownPreset(name)) if name == "clique"));
}

#[test]
fn defaults_and_overrides() {
    let s = Setting::new(Preset::HomogeneousBlock, &Overrides::default()).unwrap();
    assert_eq!((s.k, s.alpha0, s.p, s.q, s.grid.clone()), (3, 0.0, 0.6, 0.1, vec![1500]));
    let s = Setting::new(
        Preset::HomogeneousMmsb,
        &Overrides {
            n: Some(900),
            alpha0: Some(0.5),
            ..Overrides::default()
        },
    )
    .unwrap();
    assert_eq!((s.alpha0, s.grid.clone()), (0.5, vec![900]));
    let s = Setting::new(Preset::ScalingSweep, &Overrides::default()).unwrap();
    assert_eq!(s.grid, vec![360, 1440, 5760, 23040]);
    let s = Setting::new(Preset::PlantedClique, &Overrides::default()).unwrap();
    assert_eq!(s.clique, Some(317));
    assert!(!s.directed);
}

#[test]
fn invalid_overrides_are_rejected() {
    let bad = [
        (Preset::PlantedClique, Overrides { k: Some(3), ..Overrides::default() }),
        (Preset::ScalingSweep, Overrides { grid: Some(vec![]), ..Overrides::default() }),
        (Preset::PlantedClique, Overrides { clique: Some(5000), ..Overrides::default() }),
    ];
    for (p, o) in bad {
        let r = Setting::new(p, &o).and_then(|s| s.sample(s.grid[0], 0));
        assert!(r.is_err(), "{p:?} {o:?}");
    }
}

#[test]
fn planted_clique_nodes_are_recovered() {
    let o = Overrides {
        seeds: Some(2),
        ..Overrides::default()
    };
    let report = run_experiment(Preset::PlantedClique, &o, &FileConfig::default(), 4).unwrap();
    assert_eq!(report.runs.len(), 2);
    for run in &report.runs {
        assert!(run.error.is_none(), "{:?}", run.error);
        let recall = run.clique_recall.unwrap();
        assert!(recall >= 0.95, "recall {recall}");
    }
}

#[test]
fn block_report_serializes() {
    let o = Overrides {
        n: Some(600),
        seeds: Some(2),
        ..Overrides::default()
    };
    let report = run_experiment(Preset::HomogeneousBlock, &o, &FileConfig::default(), 0).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["points"][0]["n"], 600);
    assert_eq!(json["points"][0]["completed"], 2);
    let acc = json["runs"][0]["metrics"]["accuracy"].as_f64().unwrap();
    assert!(acc > 0.99, "{acc}");
}

#[test]
fn sampling_is_reproducible() {
    let s = Setting::new(Preset::HomogeneousMmsb, &Overrides { n: Some(300), ..Overrides::default() }).unwrap();
    let a = s.sample(300, 11).unwrap();
    let b = s.sample(300, 11).unwrap();
    assert_eq!(a.pi.matrix(), b.pi.matrix());
    assert_eq!(a.graph.edges().collect::<Vec<_>>(), b.graph.edges().collect::<Vec<_>>());
}
