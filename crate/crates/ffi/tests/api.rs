use std::ffi::{CStr, CString};
use std::ptr;

use hloc_ffi::*;

fn last_error() -> String {
    let p = hloc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn field(dim: usize, l: f64, n: usize) -> *mut HlocField {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { hloc_field_new(dim, l, n, &mut f) }, HlocStatus::Ok);
    f
}

fn weight(dim: usize, l: f64, n: usize, json: &str) -> *mut HlocWeight {
    let mut w = ptr::null_mut();
    let s = CString::new(json).unwrap();
    assert_eq!(unsafe { hloc_weight_new(dim, l, n, s.as_ptr(), &mut w) }, HlocStatus::Ok);
    w
}

#[test]
fn field_roundtrip() {
    let f = field(1, 4.0, 33);
    unsafe {
        assert_eq!(hloc_field_len(f), 33);
        let vals: Vec<f64> = (0..33).map(|i| i as f64 * 0.5).collect();
        assert_eq!(hloc_field_set(f, vals.as_ptr(), vals.len()), HlocStatus::Ok);
        let mut back = vec![0.0; 33];
        assert_eq!(hloc_field_get(f, back.as_mut_ptr(), back.len()), HlocStatus::Ok);
        assert_eq!(back, vals);
        assert_eq!(hloc_field_get(f, back.as_mut_ptr(), 5), HlocStatus::LengthMismatch);
        assert!(last_error().contains("33"));
        hloc_field_free(f);
        hloc_field_free(ptr::null_mut());
        assert_eq!(hloc_field_len(ptr::null()), 0);
    }
}

#[test]
fn error_codes() {
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(hloc_field_new(1, 4.0, 32, &mut f), HlocStatus::InvalidGrid);
        assert!(f.is_null());
        assert_eq!(hloc_field_new(1, 4.0, 33, ptr::null_mut()), HlocStatus::NullPointer);
        let mut w = ptr::null_mut();
        let bad = CString::new(r#"{"family": "nope"}"#).unwrap();
        assert_eq!(hloc_weight_new(1, 4.0, 33, bad.as_ptr(), &mut w), HlocStatus::Config);
        let g = field(1, 4.0, 33);
        let nan = vec![f64::NAN; 33];
        assert_eq!(hloc_field_set(g, nan.as_ptr(), 33), HlocStatus::NonFinite);
        // zero values are not a weight
        assert_eq!(hloc_weight_from_field(g, &mut w), HlocStatus::NonPositiveWeight);
        let w2 = weight(1, 4.0, 65, r#"{"family": "constant"}"#);
        let mut out = 0.0;
        assert_eq!(hloc_lp_norm(g, w2, 2.0, &mut out), HlocStatus::GridMismatch);
        assert!(!last_error().is_empty());
        hloc_field_free(g);
        hloc_weight_free(w2);
    }
    // a successful call clears the message
    let g = field(1, 4.0, 33);
    assert!(hloc_last_error().is_null());
    unsafe { hloc_field_free(g) };
}

#[test]
fn norms_match_core() {
    use hloc::{make_weight, Grid, GridFunction, WeightFamily};
    let grid = Grid::new(1, 8.0, 129).unwrap();
    let core_f = GridFunction::sample(grid, |x| (-x[0] * x[0]).exp() * x[0]).unwrap();
    let core_w = make_weight(WeightFamily::Exponential { c: 1.0 }, grid).unwrap();

    let f = field(1, 8.0, 129);
    let w = weight(1, 8.0, 129, r#"{"family": "exponential", "c": 1.0}"#);
    unsafe {
        assert_eq!(hloc_field_set(f, core_f.values().as_ptr(), 129), HlocStatus::Ok);
        let mut v = 0.0;
        assert_eq!(hloc_lp_norm(f, w, 2.0, &mut v), HlocStatus::Ok);
        assert_eq!(v, hloc::lp_norm(&core_f, &core_w, 2.0).unwrap());
        assert_eq!(hloc_weak_l1_norm(f, w, &mut v), HlocStatus::Ok);
        assert_eq!(v, hloc::weak_l1_norm(&core_f, &core_w).unwrap());
        assert_eq!(hloc_ap_loc_constant(w, 1.0, 1.0, &mut v), HlocStatus::Ok);
        assert_eq!(v, hloc::ap_loc_constant(&core_w, 1.0, 1.0).unwrap());
        assert_eq!(hloc_h1_norm(f, w, 0.125, 2.0, &mut v), HlocStatus::Ok);
        let ladder = hloc::ScaleLadder::new(0.125, 2.0);
        assert_eq!(v, hloc::h1_norm(&core_f, &core_w, hloc::BumpSpec::default(), &ladder).unwrap());

        let mut g = ptr::null_mut();
        let mut buf = vec![0.0; 129];
        assert_eq!(hloc_riesz_transform(f, 1, &mut g), HlocStatus::Ok);
        hloc_field_get(g, buf.as_mut_ptr(), 129);
        assert_eq!(buf, hloc::riesz_transform(&core_f, 1).unwrap().values());
        hloc_field_free(g);
        assert_eq!(hloc_riesz_transform(f, 2, &mut g), HlocStatus::InvalidParameter);

        assert_eq!(hloc_local_maximal(f, &mut g), HlocStatus::Ok);
        hloc_field_get(g, buf.as_mut_ptr(), 129);
        assert_eq!(buf, hloc::local_hl_maximal(&core_f).values());
        hloc_field_free(g);

        assert_eq!(hloc_smooth_maximal(f, 0.125, 2.0, &mut g), HlocStatus::Ok);
        hloc_field_get(g, buf.as_mut_ptr(), 129);
        assert_eq!(buf, hloc::smooth_maximal(&core_f, hloc::BumpSpec::default(), &ladder).unwrap().values());
        hloc_field_free(g);

        let mut wf = ptr::null_mut();
        let ones = vec![1.0; 129];
        assert_eq!(hloc_field_set(f, ones.as_ptr(), 129), HlocStatus::Ok);
        assert_eq!(hloc_weight_from_field(f, &mut wf), HlocStatus::Ok);
        assert_eq!(hloc_ap_loc_constant(wf, 2.0, 1.0, &mut v), HlocStatus::Ok);
        assert_eq!(v, 1.0);
        hloc_weight_free(wf);
        hloc_field_free(f);
        hloc_weight_free(w);
    }
}

#[test]
fn runs_an_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "weight-duality", "grid": {"dim": 1, "L": 8.0, "N": 129}}"#).unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let mut passed = -1;
    unsafe {
        assert_eq!(hloc_run_experiment(path.as_ptr(), out.as_ptr(), &mut passed), HlocStatus::Ok);
    }
    assert_eq!(passed, 1);
    assert!(dir.path().join("out").join("report.json").exists());

    std::fs::write(&cfg, r#"{"experiment": "nope"}"#).unwrap();
    unsafe {
        assert_eq!(hloc_run_experiment(path.as_ptr(), out.as_ptr(), &mut passed), HlocStatus::UnknownExperiment);
    }
    assert!(last_error().contains("weight-duality"));
}
