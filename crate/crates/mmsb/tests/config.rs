use mmsb::config::{parse_threshold, FileConfig};
use mmsb_core::Threshold;

#[test]
fn thresholds_parse() {
    assert_eq!(parse_threshold("auto"), Ok(Threshold::Auto));
    assert_eq!(parse_threshold("AUTO"), Ok(Threshold::Auto));
    assert_eq!(parse_threshold("0.25"), Ok(Threshold::Fixed(0.25)));
    assert!(parse_threshold("-1").is_err());
    assert!(parse_threshold("nan").is_err());
    assert!(parse_threshold("often").is_err());
}

#[test]
fn toml_fields_reach_the_fit_config() {
    let c: FileConfig = toml::from_str(
        r#"
        k = 4
        alpha0 = 0.5
        seed = 9
        tau = 0.2
        xi = "auto"
        iterations = 40
        undirected = true
        fractions = [0.2, 0.2, 0.2, 0.2, 0.2]
        "#,
    )
    .unwrap();
    let cfg = c.to_fit_config().unwrap();
    assert_eq!((cfg.k, cfg.alpha0, cfg.seed), (4, 0.5, 9));
    assert_eq!(cfg.tau, Threshold::Fixed(0.2));
    assert_eq!(cfg.xi, Threshold::Auto);
    assert_eq!(cfg.iterations, Some(40));
    assert!(cfg.undirected);
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(toml::from_str::<FileConfig>("kk = 3").is_err());
    assert!(toml::from_str::<FileConfig>("tau = \"soon\"").is_err());
}

#[test]
fn overlay_prefers_the_second() {
    let file = FileConfig {
        k: Some(3),
        alpha0: Some(1.0),
        tau: Some(Threshold::Fixed(0.1)),
        ..FileConfig::default()
    };
    let cli = FileConfig {
        alpha0: Some(0.5),
        ..FileConfig::default()
    };
    let m = file.overlay(cli);
    assert_eq!((m.k, m.alpha0, m.tau), (Some(3), Some(0.5), Some(Threshold::Fixed(0.1))));
}

#[test]
fn missing_k_is_an_error() {
    assert!(FileConfig::default().to_fit_config().is_err());
}

#[test]
fn bad_values_fail_validation() {
    let c = FileConfig {
        k: Some(3),
        alpha0: Some(-1.0),
        ..FileConfig::default()
    };
    assert!(c.to_fit_config().is_err());
}
