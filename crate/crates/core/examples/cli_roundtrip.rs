//! Drives the `hsc` command set in-process: generate, cluster, evaluate, plot.

use hyperbolic_spectral::cli::run;

fn hsc(args: &[&str]) -> i32 {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("hsc").chain(args.iter().copied()), &mut out, &mut err);
    print!("{}", String::from_utf8_lossy(&out));
    eprint!("{}", String::from_utf8_lossy(&err));
    code
}

fn main() {
    let dir = std::env::temp_dir().join("hsc_cli_roundtrip");
    let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
    let (data, labels, report, truth, svg) = (p("blobs.csv"), p("labels.csv"), p("report.json"), p("truth.csv"), p("plot.svg"));

    assert_eq!(hsc(&["generate", "blobs", "--output", &data, "--n-per-cluster", "60"]), 0);
    let code = hsc(&[
        "cluster", "--input", &data, "--algo", "hsca", "--kernel", "gaussian", "--k", "3", "--sigma", "5",
        "--labels-out", &labels, "--report-out", &report,
    ]);
    println!("cluster exit code {code}, report at {report}");

    // ground truth as a labels file, for evaluate
    let text = std::fs::read_to_string(&data).expect("written above");
    let mut t = String::from("label\n");
    for line in text.lines().skip(1) {
        t += line.rsplit(',').next().unwrap_or("");
        t.push('\n');
    }
    std::fs::write(&truth, t).expect("writable temp dir");
    hsc(&["evaluate", "--points", &data, "--labels", &labels, "--truth", &truth, "--space", "hyperbolic"]);
    hsc(&["plot", "--points", &data, "--labels", &labels, "--output", &svg]);
    println!("plot at {svg}");
    println!("k larger than N exits with {}", hsc(&["cluster", "--input", &data, "--algo", "hsca", "--kernel", "gaussian", "--k", "1000"]));
}
