use std::ffi::{c_char, CStr, CString};
use std::ptr;

use covmag_ffi::*;

const ZERO_SIGNAL: &str = r#"
[run]
seed = 11
block_size = 100
bootstrap_resamples = 50

[experiment]
protocol = "phase-cycle"

[experiment.params]
shots_per_cycle = 2000

[experiment.params.source]
kind = "none"

[experiment.params.sense]
kind = "hahn"
tau = 1e-6
n_pulses = 1

[experiment.params.readout]
alpha0 = 0.6
alpha1 = 0.12
sigma0_sq = 0.6
sigma1_sq = 0.12
p_nv_minus = 1.0
mode = "scc"
t_r = 1e-3
"#;

fn last_error() -> String {
    let mut needed = 0usize;
    unsafe {
        covmag_last_error_message(ptr::null_mut(), 0, &mut needed);
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(covmag_last_error_message(buf.as_mut_ptr(), buf.len(), &mut needed), CovmagStatus::Ok);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

/// Reads a string through the two-call sizing protocol.
fn read_string(f: impl Fn(*mut c_char, usize, *mut usize) -> CovmagStatus) -> String {
    let mut needed = 0usize;
    assert_eq!(f(ptr::null_mut(), 0, &mut needed), CovmagStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(f(buf.as_mut_ptr(), buf.len(), &mut needed), CovmagStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned() }
}

fn parse(text: &str) -> *mut CovmagConfig {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { covmag_config_parse(text.as_ptr(), false, &mut cfg) };
    assert_eq!(status, CovmagStatus::Ok, "{}", last_error());
    cfg
}

fn summary_of(cfg: *const CovmagConfig) -> String {
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(covmag_run(cfg, &mut run), CovmagStatus::Ok, "{}", last_error());
        let doc = read_string(|b, c, n| covmag_run_summary_json(run, b, c, n));
        covmag_run_free(run);
        doc
    }
}

#[test]
fn config_run_and_summary() {
    let cfg = parse(ZERO_SIGNAL);
    let id = read_string(|b, c, n| unsafe { covmag_config_protocol(cfg, b, c, n) });
    assert_eq!(id, "phase-cycle");

    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(covmag_run(cfg, &mut run), CovmagStatus::Ok);
        let mut passed = false;
        assert_eq!(covmag_run_checks_passed(run, &mut passed), CovmagStatus::Ok);
        assert!(passed);
        let doc: serde_json::Value =
            serde_json::from_str(&read_string(|b, c, n| covmag_run_summary_json(run, b, c, n))).unwrap();
        assert_eq!(doc["protocol"], "phase-cycle");
        assert_eq!(doc["config"]["run"]["seed"], 11);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(covmag_run_write(run, path.as_ptr(), CovmagFormat::Json), CovmagStatus::Ok);
        for f in ["summary.json", "sweep.json", "shots.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        covmag_run_free(run);
        covmag_config_free(cfg);
    }
}

#[test]
fn seed_override_is_deterministic() {
    let a = parse(ZERO_SIGNAL);
    let b = parse(ZERO_SIGNAL);
    unsafe {
        assert_eq!(covmag_config_set_seed(a, 99), CovmagStatus::Ok);
        assert_eq!(covmag_config_set_seed(b, 99), CovmagStatus::Ok);
    }
    let (sa, sb) = (summary_of(a), summary_of(b));
    assert_eq!(sa, sb);
    unsafe { covmag_config_set_seed(b, 100) };
    assert_ne!(summary_of(b), sa);
    unsafe {
        covmag_config_free(a);
        covmag_config_free(b);
    }
}

#[test]
fn config_errors_carry_field_path() {
    let bad = ZERO_SIGNAL.replace("shots_per_cycle = 2000", "shots_per_cycle = 2000\nshots = 3");
    let text = CString::new(bad).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { covmag_config_parse(text.as_ptr(), false, &mut cfg) };
    assert_eq!(status, CovmagStatus::Config);
    assert!(cfg.is_null());
    let msg = last_error();
    assert!(msg.contains("experiment.params") && msg.contains("shots"), "{msg}");

    let missing = CString::new("/nonexistent/covmag.toml").unwrap();
    assert_ne!(unsafe { covmag_config_load(missing.as_ptr(), &mut cfg) }, CovmagStatus::Ok);
    assert!(!last_error().is_empty());
}

#[test]
fn null_and_invalid_arguments() {
    let mut cfg = ptr::null_mut();
    let mut x = 0.0;
    unsafe {
        assert_eq!(covmag_config_parse(ptr::null(), false, &mut cfg), CovmagStatus::NullArgument);
        assert_eq!(covmag_run(ptr::null(), &mut ptr::null_mut()), CovmagStatus::NullArgument);
        assert_eq!(covmag_snr_gain(30.0, 0.0, true, ptr::null_mut()), CovmagStatus::NullArgument);
        let bytes = [0xffu8, 0xfe, 0];
        assert_eq!(covmag_config_parse(bytes.as_ptr() as *const c_char, false, &mut cfg), CovmagStatus::InvalidUtf8);
        assert_eq!(covmag_snr_gain(-1.0, 0.0, true, &mut x), CovmagStatus::Domain);
        assert_eq!(covmag_correlated_sin_moment(-0.5, &mut x), CovmagStatus::Domain);
        covmag_config_free(ptr::null_mut());
        covmag_run_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    let mut x = 0.0;
    unsafe {
        assert_eq!(covmag_correlated_sin_moment(-1.0, &mut x), CovmagStatus::Domain);
        assert!(!last_error().is_empty());
        assert_eq!(covmag_correlated_sin_moment(0.5, &mut x), CovmagStatus::Ok);
    }
    assert_eq!(last_error(), "");
}

#[test]
fn calculators_match_library() {
    let (mut gain, mut moment, mut sigma_b) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(covmag_snr_gain(30.0, 0.0, false, &mut gain), CovmagStatus::Ok);
        assert_eq!(covmag_correlated_sin_moment(0.1, &mut moment), CovmagStatus::Ok);
        assert_eq!(covmag_sensitivity_min(25e-6, 2e-6, 300e-9, 100.0, 100e-6, 35.0, &mut sigma_b), CovmagStatus::Ok);
        let mut infeasible = 0.0;
        assert_eq!(
            covmag_sensitivity_min(25e-6, 2e-6, 300e-9, 1e-3, 100e-6, 35.0, &mut infeasible),
            CovmagStatus::Domain
        );
    }
    assert!((gain - 30.0 * 2f64.sqrt()).abs() < 1e-9);
    assert!((moment - (-0.2f64).exp() * 0.2f64.sinh()).abs() < 1e-14);
    assert!(sigma_b > 0.0 && sigma_b < 1e-6);
}

#[test]
fn selftest_and_version() {
    let mut failures = u32::MAX;
    assert_eq!(unsafe { covmag_selftest(&mut failures) }, CovmagStatus::Ok);
    assert_eq!(failures, 0);
    let v = unsafe { CStr::from_ptr(covmag_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/covmag.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 14);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct CovmagConfig CovmagConfig;"));
    assert!(header.contains("COVMAG_STATUS_BUFFER_TOO_SMALL = 7"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"covmag.h\"\nint main(void) { size_t n = 0; CovmagStatus s = covmag_last_error_message(0, 0, &n); return s == COVMAG_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = std::process::Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I", include])
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not available, skipping"),
        }
    }
}
