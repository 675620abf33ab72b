//! Drive the command-line front end in-process: generate, solve with two
//! modes and merge the CSV rows into one table.

pub fn run_example() -> String {
    let dir = tempfile::tempdir().expect("temp dir");
    let inst = dir.path().join("g1.txt");
    let inst = inst.to_str().expect("UTF-8 path");
    let call = |args: &[&str]| {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = spcap::cli::run(std::iter::once("spcap").chain(args.iter().copied()), &mut out, &mut err);
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
        String::from_utf8(out).expect("UTF-8")
    };
    call(&["generate", "--terminals", "6", "--bases", "3", "--levels", "2", "--seed", "4", "--out", inst]);
    let mut paths = Vec::new();
    for mode in ["oracle", "hybrid"] {
        let csv = call(&["solve", inst, "--mode", mode, "--loops", "3", "--out", "csv", "--deterministic", "--id", mode]);
        let path = dir.path().join(format!("{mode}.csv"));
        std::fs::write(&path, csv).expect("write report");
        paths.push(path.to_string_lossy().into_owned());
    }
    let mut args = vec!["report"];
    args.extend(paths.iter().map(String::as_str));
    call(&args)
}

#[allow(dead_code)]
fn main() {
    print!("{}", run_example());
}
