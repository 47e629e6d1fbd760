use mmsb_core::{evaluate, MmsbError};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn truth() -> (DMatrix<f64>, DMatrix<f64>) {
    let pi = DMatrix::from_row_slice(3, 5, &[
        1.0, 0.0, 0.2, 0.0, 0.5, //
        0.0, 1.0, 0.3, 0.0, 0.5, //
        0.0, 0.0, 0.5, 1.0, 0.0,
    ]);
    let p = DMatrix::from_row_slice(3, 3, &[0.6, 0.1, 0.2, 0.1, 0.7, 0.1, 0.2, 0.1, 0.5]);
    (pi, p)
}

#[test]
fn exact_estimate_has_no_error() {
    let (pi, p) = truth();
    let m = evaluate(&pi, &p, Some((&pi.map(|v| (v > 0.3) as u8 as f64), 0.4)), &pi, &p).unwrap();
    assert_eq!(m.err_pi_l1, 0.0);
    assert_eq!(m.err_p, 0.0);
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.alignment.perm, vec![0, 1, 2]);
    let s = m.support.unwrap();
    assert_eq!((s.recall, s.rejection), (1.0, 1.0));
}

#[test]
fn scaled_row_shows_its_l1_excess() {
    let (pi, p) = truth();
    let mut est = pi.clone();
    // Row 2 sums to 1.5.
    est.row_mut(2).scale_mut(1.0 + 0.2 / 1.5);
    let m = evaluate(&est, &p, None, &pi, &p).unwrap();
    assert!((m.err_pi_l1 - 0.2).abs() < 1e-12);
    assert!((m.err_pi_l1_per_node - 0.04).abs() < 1e-12);
}

#[test]
fn shape_errors() {
    let (pi, p) = truth();
    let bad = DMatrix::zeros(2, 5);
    assert!(matches!(evaluate(&bad, &p, None, &pi, &p), Err(MmsbError::DimensionMismatch(_))));
    assert!(matches!(evaluate(&pi, &DMatrix::zeros(2, 2), None, &pi, &p), Err(MmsbError::DimensionMismatch(_))));
}

proptest! {
    #[test]
    fn metrics_ignore_label_order(perm_seed in 0usize..6, noise in prop::collection::vec(-0.05f64..0.05, 15)) {
        let (pi, p) = truth();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[perm_seed];
        let est = &pi + DMatrix::from_row_slice(3, 5, &noise);
        let p_est = p.map(|v| v + 0.01);
        let s = est.map(|v| (v > 0.3) as u8 as f64);
        let base = evaluate(&est, &p_est, Some((&s, 0.4)), &pi, &p).unwrap();
        let shuffled = evaluate(
            &est.select_rows(&perm),
            &p_est.select_rows(&perm).select_columns(&perm),
            Some((&s.select_rows(&perm), 0.4)),
            &pi,
            &p,
        )
        .unwrap();
        prop_assert_eq!(base.err_pi_l1, shuffled.err_pi_l1);
        prop_assert_eq!(base.err_p, shuffled.err_p);
        prop_assert_eq!(base.accuracy, shuffled.accuracy);
        prop_assert_eq!(base.support, shuffled.support);
    }
}
