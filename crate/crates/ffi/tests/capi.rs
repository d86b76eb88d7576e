use std::ffi::{CStr, CString};
use std::ptr;

use nashcost_ffi::*;

fn last_error() -> String {
    let p = nc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn synthesize_read_back_and_free() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(nc_model_new_default(&mut model), NcStatus::Ok);
        assert_eq!(nc_check_assumptions(model), NcStatus::Ok);

        let x0 = [-0.04, 0.175];
        let mut sol = ptr::null_mut();
        assert_eq!(nc_synthesize(model, x0.as_ptr(), 2, &mut sol), NcStatus::Ok);

        let mut costs = [0.0; 2];
        assert_eq!(nc_solution_costs(sol, costs.as_mut_ptr()), NcStatus::Ok);
        assert!(costs.iter().all(|&v| v > 0.0 && v.is_finite()));

        assert_eq!(nc_solution_gain_len(sol, 1), 2);
        let mut k1 = [0.0; 2];
        assert_eq!(nc_solution_gain(sol, 1, k1.as_mut_ptr(), 2), NcStatus::Ok);
        assert_eq!(
            nc_solution_gain(sol, 3, k1.as_mut_ptr(), 2),
            NcStatus::InvalidArgument
        );
        assert!(last_error().contains("player"));
        assert_eq!(
            nc_solution_gain(sol, 2, k1.as_mut_ptr(), 1),
            NcStatus::InvalidArgument
        );
        assert!(nc_solution_spectral_radius(sol) < 1.0);

        let mut valid = false;
        assert_eq!(
            nc_solution_verify(model, sol, 1e-8, &mut valid),
            NcStatus::Ok
        );
        assert!(valid);

        let json = nc_solution_to_json(sol);
        assert!(!json.is_null());
        let mut back = ptr::null_mut();
        assert_eq!(nc_solution_from_json(json, &mut back), NcStatus::Ok);
        let mut costs2 = [0.0; 2];
        nc_solution_costs(back, costs2.as_mut_ptr());
        assert_eq!(costs, costs2);

        nc_string_free(json);
        nc_solution_free(back);
        nc_solution_free(sol);
        nc_model_free(model);
    }
}

#[test]
fn stale_solution_is_refused() {
    unsafe {
        let mut a = ptr::null_mut();
        nc_model_new_default(&mut a);
        let params = CString::new(r#"{"alpha2": 0.25}"#).unwrap();
        let mut b = ptr::null_mut();
        assert_eq!(nc_model_from_json(params.as_ptr(), &mut b), NcStatus::Ok);

        let ha = nc_model_hash(a);
        let hb = nc_model_hash(b);
        assert_ne!(CStr::from_ptr(ha), CStr::from_ptr(hb));
        nc_string_free(ha);
        nc_string_free(hb);

        let mut sol = ptr::null_mut();
        assert_eq!(
            nc_synthesize(a, [-0.04, 0.175].as_ptr(), 2, &mut sol),
            NcStatus::Ok
        );
        let mut valid = true;
        assert_eq!(
            nc_solution_verify(b, sol, 1e-8, &mut valid),
            NcStatus::StaleSolution
        );
        assert!(last_error().contains("model"));

        nc_solution_free(sol);
        nc_model_free(a);
        nc_model_free(b);
    }
}

#[test]
fn bad_arguments_map_to_codes() {
    unsafe {
        assert_eq!(nc_model_new_default(ptr::null_mut()), NcStatus::NullPointer);
        let mut m = ptr::null_mut();
        let bad = CString::new("{not json").unwrap();
        assert_eq!(nc_model_from_json(bad.as_ptr(), &mut m), NcStatus::Parse);
        let unknown = CString::new(r#"{"alpha9": 1}"#).unwrap();
        assert_eq!(
            nc_model_from_json(unknown.as_ptr(), &mut m),
            NcStatus::Parse
        );
        let neg = CString::new(r#"{"rho2": -1}"#).unwrap();
        assert_eq!(
            nc_model_from_json(neg.as_ptr(), &mut m),
            NcStatus::InvalidArgument
        );
        assert!(last_error().contains("rho2"));

        // everything zero: no control authority, open loop has a unit root
        let dead = CString::new(r#"{"alpha1": 0, "alpha2": 0, "beta2": 0}"#).unwrap();
        assert_eq!(nc_model_from_json(dead.as_ptr(), &mut m), NcStatus::Ok);
        assert_eq!(nc_check_assumptions(m), NcStatus::Assumption);
        let mut sol = ptr::null_mut();
        assert_eq!(
            nc_synthesize(m, [0.1, 0.1].as_ptr(), 2, &mut sol),
            NcStatus::Assumption
        );
        assert!(sol.is_null());
        nc_model_free(m);

        let mut m = ptr::null_mut();
        nc_model_new_default(&mut m);
        assert_eq!(
            nc_synthesize(m, [0.1].as_ptr(), 1, &mut sol),
            NcStatus::InvalidArgument
        );
        assert_eq!(nc_check_assumptions(ptr::null()), NcStatus::NullPointer);
        assert!(nc_model_hash(ptr::null()).is_null());
        assert!(nc_solution_spectral_radius(ptr::null()).is_nan());
        nc_model_free(m);
        nc_model_free(ptr::null_mut());
        nc_solution_free(ptr::null_mut());
        nc_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/nashcost.h");
    for name in [
        "nc_model_new_default",
        "nc_model_from_json",
        "nc_model_free",
        "nc_synthesize",
        "nc_solution_costs",
        "nc_solution_gain",
        "nc_solution_verify",
        "nc_solution_to_json",
        "nc_solution_from_json",
        "nc_solution_free",
        "nc_last_error_message",
        "nc_string_free",
        "NC_STATUS_STALE_SOLUTION",
        "typedef struct NcModel NcModel",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
