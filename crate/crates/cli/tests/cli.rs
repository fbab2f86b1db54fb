use std::path::Path;
use std::process::Command;

use xnorsim::archsim::{audit, parse_csv, CSV_HEADER, COMPARISON_CSV_HEADER};

const BIN: &str = env!("CARGO_BIN_EXE_xnorsim");

fn run(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).current_dir(dir).env_remove("XNORSIM_CONFIG_DIR").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn simulate_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&["simulate", "--config", "OXBNN_50", "--model", "resnet18"], dir.path());
    assert_eq!(code, 0, "{err}");
    let rows = parse_csv(&out).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].config.as_str(), rows[0].workload.as_str()), ("OXBNN_50", "ResNet18"));
}

#[test]
fn custom_config_file_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("custom.cfg"), "[accelerator]\nbase = \"OXBNN_5\"\nname = \"mine\"\nxpe_count = 40\n").unwrap();
    let (code, out, err) =
        run(&["simulate", "--config", "custom.cfg", "--model", "vgg-small", "--trace", "out.trace"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert_eq!(parse_csv(&out).unwrap()[0].config, "mine");
    let trace = std::fs::read_to_string(dir.path().join("out.trace")).unwrap();
    let stamps: Vec<u64> =
        trace.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(' ').next().unwrap().parse().unwrap()).collect();
    assert!(stamps.len() > 100);
    assert!(stamps.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn config_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = dir.path().join("cfgs");
    std::fs::create_dir(&cfgs).unwrap();
    std::fs::write(cfgs.join("small.toml"), "[accelerator]\nname = \"small\"\nxpe_count = 8\n").unwrap();
    let out = Command::new(BIN)
        .args(["simulate", "--config", "small", "--model", "vgg-small"])
        .current_dir(dir.path())
        .env("XNORSIM_CONFIG_DIR", &cfgs)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("\nsmall,VGG-small,"));
}

#[test]
fn manifest_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = "command = \"simulate\"\nconfigs = [\"OXBNN_5\", \"LIGHTBULB\"]\nmodels = [\"all\"]\nseed = 7\n\n[outputs]\ncsv = \"out.csv\"\n";
    std::fs::write(dir.path().join("run.toml"), manifest).unwrap();
    let (code, _, err) = run(&["run", "--manifest", "run.toml"], dir.path());
    assert_eq!(code, 0, "{err}");
    let first = std::fs::read(dir.path().join("out.csv")).unwrap();
    assert_eq!(run(&["run", "--manifest", "run.toml"], dir.path()).0, 0);
    assert_eq!(std::fs::read(dir.path().join("out.csv")).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert_eq!(text.lines().count(), 1 + 2 * 4);
}

#[test]
fn identical_configs_compare_as_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) =
        run(&["compare", "--configs", "LIGHTBULB,LIGHTBULB", "--models", "vgg-small,resnet18", "--csv", "c.csv"], dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(COMPARISON_CSV_HEADER));
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!((f[3], f[4]), ("1e0", "1e0"), "{l}");
    }
}

#[test]
fn comparison_matrix_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text, err) = run(
        &["compare", "--configs", "OXBNN_5,ROBIN_EO,ROBIN_PO,LIGHTBULB", "--models", "all", "--csv", "m.csv"],
        dir.path(),
    );
    assert_eq!(code, 0, "{err}");
    assert_eq!(text.matches(" vs ").count(), 3);
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let per_model = csv.lines().skip(1).filter(|l| !l.contains(",gmean,")).count();
    assert_eq!(per_model, 3 * 4);
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 5));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["simulate", "--config", "nope", "--model", "all"], d).0, 2);
    assert_eq!(run(&["simulate", "--config", "OXBNN_5", "--model", "nope"], d).0, 2);
    assert_eq!(run(&["simulate", "--config", "OXBNN_5", "--set", "accelerator.xpe_count=0"], d).0, 2);
    assert_eq!(run(&["compare", "--configs", "OXBNN_5"], d).0, 2);
    assert_eq!(run(&["link-budget", "--dr", "-1"], d).0, 2);
    assert_eq!(run(&["run", "--manifest", "missing.toml"], d).0, 2);
    assert_eq!(run(&["verify", "--instances", "3", "--inject-fault", "0"], d).0, 1);
    assert_eq!(run(&["--help"], d).0, 0);
}

#[test]
fn trace_needs_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["simulate", "--config", "OXBNN_5,LIGHTBULB", "--model", "vgg-small", "--trace", "t"], dir.path());
    assert_eq!(code, 2, "{err}");
}

#[test]
fn library_trace_matches_cli_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) =
        run(&["simulate", "--config", "ROBIN_PO", "--model", "shufflenet_v2", "--trace", "t.trace", "--csv", "t.csv"], dir.path());
    assert_eq!(code, 0, "{err}");
    let model = xnorsim::workloads::builtin_model("ShuffleNet_V2").unwrap();
    let config = xnorsim::archsim::AcceleratorConfig::builtin("ROBIN_PO").unwrap();
    let out = xnorsim::archsim::simulate_network(&model.tasks(), &config, xnorsim::archsim::SimOptions { record_trace: true })
        .unwrap();
    let events = out.trace.unwrap();
    assert!(audit(&events).is_clean());
    assert_eq!(std::fs::read_to_string(dir.path().join("t.trace")).unwrap(), xnorsim::archsim::format_trace(&events));
}
