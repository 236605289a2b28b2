use qcuts3d_web::{Layer, Session};

fn session() -> Session {
    Session::generate(24, 12, (3.0, 5.0), 0.02, 0.0, 5, false).unwrap()
}

#[test]
fn phantom_slices_have_rgba_layout() {
    let s = session();
    assert_eq!(s.size(), 24);
    let px = s.rgba_slice(Layer::Volume, 3).unwrap();
    assert_eq!(px.len(), 24 * 24 * 4);
    assert!(px.chunks(4).all(|p| p[3] == 255 && p[0] == p[1] && p[1] == p[2]));
    assert!(s.rgba_slice(Layer::Labels, 23).is_ok());
    assert!(s.rgba_slice(Layer::Volume, 24).is_err());
}

#[test]
fn mask_needs_segmentation() {
    let mut s = session();
    assert!(s.rgba_slice(Layer::Mask, 0).is_err());
    let report = s.segment(&[100, 200], 0.1).unwrap();
    let iou = report["iou"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&iou));
    assert_eq!(report["roc"].as_array().unwrap().len(), 257);
    let mask = s.rgba_slice(Layer::Mask, 12).unwrap();
    assert!(mask.chunks(4).all(|p| p[0] == 0 || p[0] == 255));
    assert!(s.rgba_slice(Layer::Saliency, 12).is_ok());
}

#[test]
fn gft_curve_covers_present_phases() {
    let s = Session::generate(24, 12, (3.0, 5.0), 0.0, 0.0, 6, true).unwrap();
    let curves = s.gft_curve(120, 0.1).unwrap();
    assert_eq!(curves.phases.len(), 4);
    for c in &curves.phases {
        assert!(c.mse.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.mse.last().unwrap().abs() < 1e-10);
    }
}

#[test]
fn bad_spec_is_rejected() {
    assert!(Session::generate(8, 3, (5.0, 8.0), 0.0, 0.0, 0, false).is_err());
}
