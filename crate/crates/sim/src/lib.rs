//! Experiment runner for `tetrys-core`: sweep specs, parallel execution,
//! CSV results and mean ± standard deviation summaries.

pub mod spec;
pub mod stats;
pub mod sweep;

pub use spec::{SpecError, SweepSpec};
pub use stats::{render_table, summarize_csv, GroupSummary};
pub use sweep::{run_sweep, write_outputs, ResultRow, RunOptions, SweepOutput};

use std::path::Path;

/// Load a spec from a file path, or by builtin name when no such file exists.
pub fn load_spec(arg: &str) -> anyhow::Result<SweepSpec> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
        return SweepSpec::parse(&text, stem).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()));
    }
    SweepSpec::builtin(arg).map_err(|e| match e {
        SpecError::UnknownBuiltin(_) => anyhow::anyhow!(
            "`{arg}` is neither a spec file nor a builtin (builtins: {})",
            spec::builtin_names().join(", ")
        ),
        other => other.into(),
    })
}
