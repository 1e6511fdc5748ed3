use std::fs;

use robust_collab::cli::{
    parse_and_dispatch, InstanceArtifact, RunArtifact, SweepArtifact, VerifyArtifact,
    VerifyOutcome, CSV_SCHEMA_LINE, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE,
};
use robust_collab::conflict::{ConsistencyGraph, EdgeBasis};
use robust_collab::Instance;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("robust-collab").chain(args.iter().copied());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = parse_and_dispatch(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn verify_balls_in_bins_passes_and_round_trips() {
    let (code, out, _) = invoke(&[
        "verify",
        "--check",
        "balls-in-bins",
        "--n",
        "50",
        "--delta",
        "0.1",
        "--trials",
        "1000",
        "--seed",
        "7",
    ]);
    assert_eq!(code, EXIT_OK);
    let artifact: VerifyArtifact = serde_json::from_str(&out).unwrap();
    assert_eq!(artifact.config.seed, Some(7));
    assert_eq!(artifact.config.n, 50);
    match &artifact.result {
        VerifyOutcome::Trial(r) => {
            assert_eq!(r.check, "balls-in-bins");
            assert_eq!(r.trials, 1000);
            assert!(r.passed);
        }
        other => panic!("unexpected outcome {other:?}"),
    }
    assert_eq!(serde_json::to_string_pretty(&artifact).unwrap() + "\n", out);
}

#[test]
fn failing_check_exits_one() {
    let (code, out, err) = invoke(&[
        "verify",
        "--check",
        "balls-in-bins",
        "--n",
        "50",
        "--trials",
        "200",
        "--budget-scale",
        "0.1",
        "--seed",
        "7",
    ]);
    assert_eq!(code, EXIT_CHECK_FAILED);
    assert!(err.starts_with("FAIL"));
    let artifact: VerifyArtifact = serde_json::from_str(&out).unwrap();
    assert!(!artifact.result.passed());
}

#[test]
fn run_lower_bound_instance() {
    let args = [
        "run",
        "--generator",
        "lower-bound",
        "--n",
        "10",
        "--d",
        "4",
        "--eps",
        "0.25",
        "--eta",
        "0.2",
        "--seed",
        "1",
    ];
    let (code, out, _) = invoke(&args);
    assert_eq!(code, EXIT_OK);
    let artifact: RunArtifact = serde_json::from_str(&out).unwrap();
    assert_eq!(artifact.result.run.outputs.len(), 10);
    assert_eq!(
        artifact.result.run.ledger.per_oracle.iter().sum::<u64>(),
        artifact.result.run.ledger.total
    );
    assert_eq!(artifact.config.eps, 0.25);
    assert_eq!(serde_json::to_string_pretty(&artifact).unwrap() + "\n", out);

    let (_, again, _) = invoke(&args);
    assert_eq!(out, again);
}

#[test]
fn identical_argv_gives_identical_bytes_for_every_subcommand() {
    let cases: [&[&str]; 5] = [
        &[
            "run",
            "--class",
            "threshold",
            "--d",
            "12",
            "--n",
            "10",
            "--eta",
            "0.1",
            "--seed",
            "4",
        ],
        &[
            "baseline", "--class", "powerset", "--d", "5", "--n", "6", "--seed", "4",
        ],
        &[
            "verify",
            "--check",
            "candidate-lemma",
            "--n",
            "10",
            "--eta",
            "0.1",
            "--trials",
            "40",
            "--seed",
            "4",
        ],
        &["sweep", "--grid", "n=2,4", "--trials", "5", "--seed", "4"],
        &[
            "instance",
            "--generator",
            "impossibility",
            "--n",
            "3",
            "--case",
            "1",
        ],
    ];
    for args in cases {
        let (c1, a, _) = invoke(args);
        let (c2, b, _) = invoke(args);
        assert_eq!((c1, c2), (EXIT_OK, EXIT_OK), "{args:?}");
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn jobs_flag_does_not_change_results() {
    let base = [
        "verify",
        "--check",
        "test-lemma",
        "--trials",
        "100",
        "--seed",
        "9",
    ];
    let (_, one, _) = invoke(&[&base[..], &["--jobs", "1"]].concat());
    let (_, four, _) = invoke(&[&base[..], &["--jobs", "4"]].concat());
    let strip = |s: &str| {
        let mut a: VerifyArtifact = serde_json::from_str(s).unwrap();
        a.config.jobs = None;
        a
    };
    assert_eq!(strip(&one), strip(&four));
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let (code, out, _) = invoke(&[
        "sweep",
        "--grid",
        "n=2,3,4",
        "--eta",
        "0",
        "--trials",
        "5",
        "--seed",
        "3",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_SCHEMA_LINE);
    assert!(lines[1].starts_with("# config={"));
    assert!(lines[2].starts_with("n,d,eta,"));
    assert_eq!(lines.len(), 3 + 3);
    let artifact: SweepArtifact = serde_json::from_str(&out).unwrap();
    let dims: Vec<(usize, usize)> = artifact.result.iter().map(|e| (e.n, e.d)).collect();
    assert_eq!(dims, vec![(2, 2), (3, 3), (4, 4)]);
    assert_eq!(serde_json::to_string_pretty(&artifact).unwrap() + "\n", out);
}

#[test]
fn sweep_grid_crosses_axes() {
    let (code, out, _) = invoke(&[
        "sweep",
        "--grid",
        "n=10",
        "--grid",
        "eta=0,0.1",
        "--grid",
        "d=3",
        "--trials",
        "3",
        "--seed",
        "1",
    ]);
    assert_eq!(code, EXIT_OK);
    let artifact: SweepArtifact = serde_json::from_str(&out).unwrap();
    let points: Vec<(usize, usize, f64)> =
        artifact.result.iter().map(|e| (e.n, e.d, e.eta)).collect();
    assert_eq!(points, vec![(10, 3, 0.0), (10, 3, 0.1)]);
}

#[test]
fn usage_errors_name_the_flag() {
    let cases: [(&[&str], &str); 9] = [
        (
            &["verify", "--check", "pac", "--eps", "0", "--seed", "1"],
            "--eps",
        ),
        (
            &["verify", "--check", "pac", "--delta", "1.5", "--seed", "1"],
            "--delta",
        ),
        (&["run", "--eta", "-0.1"], "--eta"),
        (&["run", "--n", "0"], "--n"),
        (&["run", "--bogus", "1"], "--bogus"),
        (&["verify", "--check", "pac"], "--seed"),
        (&["sweep", "--seed", "1"], "--grid"),
        (&["sweep", "--grid", "k=1", "--seed", "1"], "--grid"),
        (&["run", "--family", "gaussian"], "--family"),
    ];
    for (args, flag) in cases {
        let (code, _, err) = invoke(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(err.contains(flag), "{args:?}: {err}");
    }
}

#[test]
fn library_parameter_errors_are_usage_errors() {
    let (code, _, err) = invoke(&[
        "verify",
        "--check",
        "candidate-lemma",
        "--n",
        "5",
        "--adversaries",
        "1",
        "--seed",
        "1",
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--adversaries"), "{err}");
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(
        &path,
        "check = \"test-lemma\"\ntrials = 30\nseed = 5\neps = 0.2\nc_test = 6.0\n",
    )
    .unwrap();
    let (code, out, _) = invoke(&[
        "verify",
        "--config",
        path.to_str().unwrap(),
        "--trials",
        "20",
    ]);
    assert_eq!(code, EXIT_OK);
    let artifact: VerifyArtifact = serde_json::from_str(&out).unwrap();
    assert_eq!(artifact.config.trials, 20);
    assert_eq!(artifact.config.seed, Some(5));
    assert_eq!(artifact.config.eps, 0.2);
    assert_eq!(artifact.config.constants.c_test, 6.0);
    assert_eq!(artifact.config.delta, 0.1);

    fs::write(&path, "unknown_key = 1\n").unwrap();
    let (code, _, err) = invoke(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--config"));
}

#[test]
fn instance_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let edges = dir.path().join("graph.txt");
    let (code, _, _) = invoke(&[
        "instance",
        "--class",
        "threshold",
        "--d",
        "9",
        "--n",
        "10",
        "--eta",
        "0.1",
        "--seed",
        "2",
        "--json",
        path.to_str().unwrap(),
        "--edges",
        edges.to_str().unwrap(),
        "--per-user",
        "6",
    ]);
    assert_eq!(code, EXIT_OK);
    let written = fs::read_to_string(&path).unwrap();
    let artifact: InstanceArtifact = serde_json::from_str(&written).unwrap();
    assert_eq!(artifact.result.oracles.len(), 10);
    assert_eq!(
        artifact
            .result
            .evaluation
            .truthful_mask
            .iter()
            .filter(|&&t| !t)
            .count(),
        1
    );
    Instance::new(artifact.result.clone()).unwrap();

    let graph = ConsistencyGraph::parse_edge_list(
        10,
        EdgeBasis::OracleChecked,
        &fs::read_to_string(&edges).unwrap(),
    )
    .unwrap();
    assert_eq!(graph.n(), 10);

    let (code, reloaded, _) = invoke(&[
        "instance",
        "--instance",
        path.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert_eq!(code, EXIT_OK);
    let again: InstanceArtifact = serde_json::from_str(&reloaded).unwrap();
    assert_eq!(again.result, artifact.result);

    let bare = dir.path().join("bare.json");
    fs::write(
        &bare,
        Instance::new(artifact.result.clone())
            .unwrap()
            .to_json()
            .unwrap(),
    )
    .unwrap();
    let (code, out, _) = invoke(&["run", "--instance", bare.to_str().unwrap(), "--seed", "2"]);
    assert_eq!(code, EXIT_OK);
    let run: RunArtifact = serde_json::from_str(&out).unwrap();
    assert_eq!(run.config.eta, 0.1);

    fs::write(&bare, "{\"not\": \"an instance\"}").unwrap();
    let (code, _, err) = invoke(&["run", "--instance", bare.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--instance"));
}

#[test]
fn run_csv_has_summary_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let (code, _, _) = invoke(&[
        "run",
        "--generator",
        "impossibility",
        "--n",
        "4",
        "--seed",
        "0",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_SCHEMA_LINE);
    assert_eq!(
        lines[2],
        "n,d,eps,delta,eta,total_samples,rounds,success_flags"
    );
    let fields: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(fields.len(), 8);
    assert_eq!(fields[0], "4");
    assert_eq!(fields[7].len(), 4);
    assert_eq!(fields[7].chars().filter(|&c| c == '-').count(), 1);
}

#[test]
fn impossibility_and_lower_bound_checks_dispatch() {
    let (code, out, _) = invoke(&[
        "verify",
        "--check",
        "centralized-impossibility",
        "--n",
        "4",
        "--seed",
        "0",
    ]);
    assert_eq!(code, EXIT_OK);
    let artifact: VerifyArtifact = serde_json::from_str(&out).unwrap();
    assert!(matches!(artifact.result, VerifyOutcome::Impossibility(ref v) if v.rows.len() == 4));

    let (code, out, _) = invoke(&[
        "verify",
        "--check",
        "lower-bound",
        "--n",
        "10",
        "--d",
        "4",
        "--eta",
        "0.2",
        "--trials",
        "5",
        "--seed",
        "0",
    ]);
    assert_eq!(code, EXIT_OK);
    let artifact: VerifyArtifact = serde_json::from_str(&out).unwrap();
    assert!(matches!(artifact.result, VerifyOutcome::LowerBound(_)));
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verify"));
}
