use std::fs;
use std::path::Path;
use std::process::Command;

use nonlocal_fem::cli::*;
use nonlocal_fem::mesh::build_structured_quad_mesh;
use nonlocal_fem::Error;

const BIN: &str = env!("CARGO_BIN_EXE_nonlocal-fem");

fn case1(m: usize) -> String {
    format!("[problem]\nkind = \"case1\"\ntau = 0.002\nhorizon = 0.2\n\n[mesh]\nparent_elements = {m}\n")
}

fn run_bin(dir: &Path, config: &str, extra: &[&str]) -> (i32, String) {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    let out = Command::new(BIN)
        .args(["run", path.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .args(extra)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn unknown_key_is_named_in_the_error() {
    let err = RunConfig::parse("[problem]\nkind = \"case1\"\ntua = 0.1\n").unwrap_err();
    assert!(matches!(err, Error::Config(_) | Error::Parse { .. }), "{err:?}");
    assert!(err.to_string().contains("tua"), "{err}");
    assert_eq!(exit_code(&err), 1);
}

#[test]
fn malformed_toml_is_a_config_error() {
    let err = RunConfig::parse("[problem\nkind = 3").unwrap_err();
    assert_eq!(exit_code(&err), 1);
}

#[test]
fn inapplicable_key_is_rejected() {
    let cfg = RunConfig::parse(&format!("{}radius = 0.1\n", case1(8).replace("[mesh]\n", "").replace("parent_elements = 8\n", ""))).unwrap();
    let err = resolve(&cfg, &Overrides::default()).unwrap_err();
    assert!(err.to_string().contains("radius"), "{err}");
}

#[test]
fn out_of_range_order_is_rejected() {
    let cfg = RunConfig::parse("[problem]\nkind = \"case2\"\nalpha = 1.5\n").unwrap();
    let err = resolve(&cfg, &Overrides::default()).unwrap_err();
    assert!(err.to_string().contains("alpha"), "{err}");
    assert_eq!(exit_code(&err), 1);
}

#[test]
fn exit_codes_follow_the_error_class() {
    let at = |inner: Error| Error::AtGaussPoint { element: 3, gauss: 1, source: Box::new(inner) };
    assert_eq!(exit_code(&Error::Numeric("singular".into())), 2);
    assert_eq!(exit_code(&Error::Domain { dx: 0.0, dy: 0.0 }), 2);
    assert_eq!(exit_code(&at(Error::Bridging { x: 2.0, y: 2.0, nearest: 0 })), 3);
    assert_eq!(exit_code(&at(Error::Alignment { element: 4 })), 3);
    assert_eq!(exit_code(&Error::Io("disk".into())), 1);
    assert_eq!(exit_code(&Error::Config("x".into())), 1);
}

#[test]
fn child_mesh_target_parses() {
    assert_eq!(parse_child_mesh_target("12:3").unwrap(), (12, 3));
    assert!(parse_child_mesh_target("12").is_err());
    assert!(parse_child_mesh_target("a:b").is_err());
}

#[test]
fn binary_reports_config_errors_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run_bin(dir.path(), "[problem]\nkind = \"case2\"\nalpha = 1.5\n", &[]);
    assert_eq!(code, 1);
    assert!(stderr.contains("alpha"), "{stderr}");
    let (code, _) = run_bin(dir.path(), "[problem]\nkind = \"case1\"\nbogus = 1\n", &[]);
    assert_eq!(code, 1);
}

#[test]
fn binary_run_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run_bin(dir.path(), &case1(6), &["--workers", "1", "--dump-child-mesh", "5:2"]);
    assert_eq!(code, 0, "{stderr}");
    let out = dir.path().join("out");
    for f in ["field.csv", "field.vtk", "report.csv", "manifest.toml", "child_mesh_5_2.vtk"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let first = fs::read(out.join("report.csv")).unwrap();
    let field = fs::read(out.join("field.csv")).unwrap();
    let (code, _) = run_bin(dir.path(), &case1(6), &["--workers", "1"]);
    assert_eq!(code, 0);
    assert_eq!(first, fs::read(out.join("report.csv")).unwrap());
    assert_eq!(field, fs::read(out.join("field.csv")).unwrap());
}

#[test]
fn bad_child_mesh_target_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run_bin(dir.path(), &case1(4), &["--dump-child-mesh", "999:0"]);
    assert_eq!(code, 1);
}

#[test]
fn exports_match_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(&case1(2)).unwrap();
    let overrides = Overrides { out: Some(dir.path().to_path_buf()), ..Overrides::default() };
    cmd_run(&cfg, &overrides).unwrap();
    let csv = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let rows = parse_field_csv(&csv).unwrap();
    assert_eq!(rows.len(), 9);
    let vtk = fs::read_to_string(dir.path().join("field.vtk")).unwrap();
    assert!(vtk.contains("POINTS 9 double"), "{vtk}");
    assert!(vtk.contains("CELLS 4 20"));
    assert!(vtk.contains("VECTORS displacement double"));
}

#[test]
fn csv_round_trips_bit_exactly() {
    let mesh = build_structured_quad_mesh(1.0, 1.0, 3, 3, 2).unwrap();
    let u: Vec<[f64; 2]> = (0..mesh.nodes.len()).map(|i| [(i as f64 * 0.7).sin() / 3.0, 1e-17 * i as f64 - 0.1]).collect();
    let rows = parse_field_csv(&field_csv(&mesh, &u)).unwrap();
    assert_eq!(rows.len(), mesh.nodes.len());
    for ((row, n), v) in rows.iter().zip(&mesh.nodes).zip(&u) {
        assert_eq!(row[0].to_bits(), n.coords[0].to_bits());
        assert_eq!(row[1].to_bits(), n.coords[1].to_bits());
        assert_eq!(row[2].to_bits(), v[0].to_bits());
        assert_eq!(row[3].to_bits(), v[1].to_bits());
    }
}

#[test]
fn manifest_resolves_to_itself() {
    for text in [case1(8), "[problem]\nkind = \"annulus\"\nalpha = 0.7\n".to_string(), "[problem]\nkind = \"inclusion\"\n".to_string()] {
        let r = resolve(&RunConfig::parse(&text).unwrap(), &Overrides::default()).unwrap();
        let again = resolve(&RunConfig::parse(&r.manifest.to_toml()).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(r.manifest, again.manifest);
        assert_eq!(r.plan, again.plan);
    }
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap();
        resolve(&cfg, &Overrides::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 8);
}

#[test]
fn small_child_sweep_marks_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{}\n[sweep]\nkind = \"child_resolution\"\nvalues = [1, 2]\n", case1(4));
    let overrides = Overrides { out: Some(dir.path().to_path_buf()), ..Overrides::default() };
    cmd_sweep(&RunConfig::parse(&text).unwrap(), &overrides).unwrap();
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 3, "{report}");
    assert!(lines[0].starts_with("level,") && lines[0].ends_with(",converged"));
    assert!(lines[1].ends_with("false"));
}

#[test]
fn sweep_without_section_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let overrides = Overrides { out: Some(dir.path().to_path_buf()), ..Overrides::default() };
    let err = cmd_sweep(&RunConfig::parse(&case1(4)).unwrap(), &overrides).unwrap_err();
    assert_eq!(exit_code(&err), 1);
}

#[test]
fn case1_at_sixteen_elements_is_accurate() {
    let r = resolve(&RunConfig::parse(&case1(16)).unwrap(), &Overrides::default()).unwrap();
    let solved = execute(&r).unwrap();
    let er = solved.error_percent.unwrap();
    assert!((er - 0.28).abs() <= 1.5, "{er}");
    assert_eq!(solved.displacements.len(), 17 * 17);
}
