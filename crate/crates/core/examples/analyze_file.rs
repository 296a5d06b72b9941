//! The full pipeline on a problem file, rendered as the text report.
//! Pass a path, or run without arguments to use `problems/dubins.json`.

use std::path::PathBuf;

use extremal_integrals::cli::{run_analyze, Flags, Format, ProblemFile};

fn main() {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems/dubins.json")
    });
    let file = ProblemFile::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let report = run_analyze(&file, &Flags::default()).unwrap();
    print!("{}", report.render(Format::Text));
    std::process::exit(report.exit_code());
}
