use std::ffi::{CStr, CString};
use std::ptr;

use ggm_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn generate_sample_learn_round_trip() {
    unsafe {
        let spec = cstr(r#"{"family": "gaussian_walk", "n": 6, "start_time": 6}"#);
        let mut model: *mut GgmModel = ptr::null_mut();
        assert_eq!(ggm_model_generate(spec.as_ptr(), &mut model), GgmStatus::Ok);
        assert_eq!(ggm_model_dim(model), 6);

        let mut kappa = 0.0;
        assert_eq!(ggm_model_kappa(model, &mut kappa), GgmStatus::Ok);
        assert!(kappa > 0.0);

        let alg = cstr("greedy");
        let mut est: *mut GgmEstimate = ptr::null_mut();
        assert_eq!(ggm_learn_population(model, alg.as_ptr(), ptr::null(), &mut est), GgmStatus::Ok);
        assert_eq!(ggm_estimate_dim(est), 6);
        let k = ggm_estimate_edge_count(est);
        let mut edges = vec![0usize; 2 * k];
        assert_eq!(ggm_estimate_edges(est, edges.as_mut_ptr(), edges.len()), GgmStatus::Ok);
        let pairs: Vec<(usize, usize)> = edges.chunks(2).map(|c| (c[0], c[1])).collect();
        assert_eq!(pairs, (0..5).map(|i| (i, i + 1)).collect::<Vec<_>>());

        let mut err = f64::NAN;
        assert_eq!(ggm_structure_error(est, model, kappa, &mut err), GgmStatus::Ok);
        assert_eq!(err, 0.0);

        let mut samples: *mut GgmSamples = ptr::null_mut();
        assert_eq!(ggm_sample(model, 40, 3, &mut samples), GgmStatus::Ok);
        let (mut m, mut n) = (0, 0);
        assert_eq!(ggm_samples_shape(samples, &mut m, &mut n), GgmStatus::Ok);
        assert_eq!((m, n), (40, 6));
        let mut data = vec![0.0; m * n];
        assert_eq!(ggm_samples_data(samples, data.as_mut_ptr(), data.len()), GgmStatus::Ok);

        // Same data through the caller-owned path gives the same estimate.
        let mut copy: *mut GgmSamples = ptr::null_mut();
        assert_eq!(ggm_samples_from_data(m, n, data.as_ptr(), &mut copy), GgmStatus::Ok);
        let cfg = cstr(r#"{"nu": 0.01, "t_steps": 3}"#);
        let mut a: *mut GgmEstimate = ptr::null_mut();
        let mut b: *mut GgmEstimate = ptr::null_mut();
        assert_eq!(ggm_learn_samples(samples, alg.as_ptr(), cfg.as_ptr(), &mut a), GgmStatus::Ok);
        assert_eq!(ggm_learn_samples(copy, alg.as_ptr(), cfg.as_ptr(), &mut b), GgmStatus::Ok);
        let mut pa = vec![0.0; 36];
        let mut pb = vec![0.0; 36];
        ggm_estimate_precision(a, pa.as_mut_ptr(), 36);
        ggm_estimate_precision(b, pb.as_mut_ptr(), 36);
        assert_eq!(pa, pb);

        for e in [est, a, b] {
            ggm_estimate_free(e);
        }
        ggm_samples_free(samples);
        ggm_samples_free(copy);
        ggm_model_free(model);
    }
}

#[test]
fn json_round_trip() {
    unsafe {
        let theta = [2.0, -0.5, 0.0, -0.5, 2.0, -0.5, 0.0, -0.5, 2.0];
        let mut model: *mut GgmModel = ptr::null_mut();
        assert_eq!(ggm_model_from_precision(3, theta.as_ptr(), &mut model), GgmStatus::Ok);
        let mut text: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(ggm_model_to_json(model, &mut text), GgmStatus::Ok);
        let mut back: *mut GgmModel = ptr::null_mut();
        assert_eq!(ggm_model_from_json(text, &mut back), GgmStatus::Ok);
        let mut got = [0.0; 9];
        assert_eq!(ggm_model_precision(back, got.as_mut_ptr(), 9), GgmStatus::Ok);
        assert_eq!(got, theta);
        ggm_string_free(text);
        ggm_model_free(model);
        ggm_model_free(back);
    }
}

#[test]
fn errors_set_message() {
    unsafe {
        let alg = cstr("lasso");
        let mut est: *mut GgmEstimate = ptr::null_mut();
        let theta = [1.0];
        let mut model: *mut GgmModel = ptr::null_mut();
        ggm_model_from_precision(1, theta.as_ptr(), &mut model);
        assert_eq!(ggm_learn_population(model, alg.as_ptr(), ptr::null(), &mut est), GgmStatus::Validation);
        let msg = CStr::from_ptr(ggm_last_error()).to_string_lossy().into_owned();
        assert!(!msg.is_empty());
        assert!(est.is_null());
        ggm_model_free(model);
        assert_eq!(ggm_model_dim(ptr::null()), 0);
        ggm_model_free(ptr::null_mut());
        let v = CStr::from_ptr(ggm_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_lists_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ggm.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("GGM_STATUS_NUMERICAL = 3"));
}
