use std::ffi::{CStr, CString};
use std::ptr;

use causal_neco_ffi::*;

fn simulated(n: usize) -> Vec<f64> {
    // X2 <- 0.8 X1 with deterministic pseudo-noise
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let x1 = next();
        let x2 = 0.8 * x1 + 0.3 * next();
        v.push(x1);
        v.push(x2);
    }
    v
}

fn last_error() -> String {
    let p = neco_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn panel_discover_fit_forecast() {
    let data = simulated(500);
    unsafe {
        let mut panel = ptr::null_mut();
        assert_eq!(neco_panel_from_matrix(data.as_ptr(), 500, 2, &mut panel), NecoStatus::Ok);
        assert_eq!(neco_panel_n_obs(panel), 500);
        assert_eq!(neco_panel_n_instruments(panel), 2);

        let mut graph = ptr::null_mut();
        assert_eq!(neco_discover(panel, 0.01, &mut graph), NecoStatus::Ok);
        assert_eq!(neco_graph_n_edges(graph), 1);
        let json = neco_graph_to_json(graph);
        assert!(!json.is_null());
        let mut copy = ptr::null_mut();
        assert_eq!(neco_graph_from_json(json, &mut copy), NecoStatus::Ok);
        assert_eq!(neco_graph_n_edges(copy), 1);
        neco_string_free(json);
        neco_graph_free(copy);

        let mut model = ptr::null_mut();
        assert_eq!(neco_fit(panel, graph, 1, &mut model), NecoStatus::Ok);
        // an undirected edge has two consistent orientations
        assert_eq!(neco_model_n_members(model), 2);
        let mut market = f64::NAN;
        let mut per_node = [0.0; 2];
        assert_eq!(neco_model_necof(model, &mut market, per_node.as_mut_ptr(), 2), NecoStatus::Ok);
        assert!(market > 0.0 && market < 1.0);

        let mut var = [0.0; 2];
        assert_eq!(neco_forecast_var(panel, model, 0.05, var.as_mut_ptr(), 2), NecoStatus::Ok);
        assert!(var.iter().all(|v| *v < 0.0));
        let mut vc = [0.0; 2];
        assert_eq!(neco_varcovar_var(panel, 0.05, vc.as_mut_ptr(), 2), NecoStatus::Ok);
        assert!(vc.iter().all(|v| *v < 0.0));

        let model_json = neco_model_to_json(model);
        assert!(CStr::from_ptr(model_json).to_str().unwrap().contains("\"B\""));
        neco_string_free(model_json);

        neco_model_free(model);
        neco_graph_free(graph);
        neco_panel_free(panel);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        assert_eq!(neco_discover(ptr::null(), 0.01, ptr::null_mut()), NecoStatus::NullPointer);
        assert!(last_error().contains("panel"));

        let data = simulated(50);
        let mut panel = ptr::null_mut();
        assert_eq!(neco_panel_from_matrix(data.as_ptr(), 50, 2, &mut panel), NecoStatus::Ok);
        let mut out = [0.0; 1];
        assert_eq!(neco_varcovar_var(panel, 0.05, out.as_mut_ptr(), 1), NecoStatus::InvalidArgument);
        assert!(last_error().contains("buffer"));
        let mut two = [0.0; 2];
        assert_eq!(neco_varcovar_var(panel, 0.0, two.as_mut_ptr(), 2), NecoStatus::InvalidArgument);
        neco_panel_free(panel);

        let path = CString::new("/nonexistent/panel.csv").unwrap();
        let mut p = ptr::null_mut();
        assert_ne!(neco_panel_from_csv(path.as_ptr(), false, &mut p), NecoStatus::Ok);
        assert!(p.is_null());
    }
}

#[test]
fn backtest_statistics() {
    // 250 days, 6 hits at alpha 0.01: closed-form LR 3.5553547710617437, p 0.0594
    let mut hits = vec![0u8; 250];
    for i in [10, 50, 90, 130, 170, 210] {
        hits[i] = 1;
    }
    let mut r = NecoTestResult::default();
    unsafe {
        assert_eq!(neco_kupiec(hits.as_ptr(), hits.len(), 0.01, &mut r), NecoStatus::Ok);
    }
    assert!((r.statistic - 3.5553547710617437).abs() < 1e-9);
    assert!((r.pvalue - 0.059353618972289114).abs() < 1e-6);
    assert!(r.accept);

    unsafe {
        assert_eq!(neco_christoffersen(hits.as_ptr(), hits.len(), 0.01, &mut r), NecoStatus::Ok);
    }
    assert!(r.statistic >= 0.0 && (0.0..=1.0).contains(&r.pvalue));

    let zeros = [0u8; 100];
    let var = vec![-0.02; 100];
    unsafe {
        assert_eq!(neco_dq(zeros.as_ptr(), var.as_ptr(), 100, 0.05, 4, &mut r), NecoStatus::Ok);
    }
    assert!(r.degenerate && r.accept);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/causal_neco.h")).unwrap();
    for sym in [
        "neco_last_error_message",
        "neco_panel_from_csv",
        "neco_panel_free",
        "neco_discover",
        "neco_fit",
        "neco_forecast_var",
        "neco_kupiec",
        "neco_dq",
        "NECO_STATUS_NULL_POINTER",
        "typedef struct NecoPanel NecoPanel",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(neco_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
