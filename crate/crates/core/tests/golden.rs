//! Deterministic table columns must stay byte-identical to the checked-in
//! CSV files. Regenerate with `lognsum tables --table NAME --no-mc --format csv`.

use clap::Parser;
use lognsum::cli::{execute, render, Cli, Format};
use lognsum::tables::TABLE_NAMES;

#[test]
fn deterministic_tables_match_golden_files() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("golden");
    for name in TABLE_NAMES {
        let cli = Cli::try_parse_from(["lognsum", "tables", "--table", name, "--no-mc", "--format", "csv"]).unwrap();
        let got = render(&execute(&cli).unwrap(), Format::Csv);
        let want = std::fs::read_to_string(dir.join(format!("{name}.csv"))).unwrap();
        assert_eq!(got, want, "table {name}");
    }
}
