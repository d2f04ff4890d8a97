//! `xemo train`: the multi-run protocol for one scheme.

use std::path::Path;

use anyhow::{Context, Result};
use xemo_core::eval::ResultsTable;
use xemo_core::train::{mid2e_protocol, run_protocol, ProtocolResult, RunResult, Scheme};

use crate::config::Loaded;
use crate::workspace::{protocol_data, write_if_changed, Layout, Tables};

fn write_run(dir: &Path, r: &RunResult) -> Result<()> {
    write_if_changed(&dir.join(format!("run{:02}.json", r.run)), serde_json::to_string_pretty(r)? + "\n")?;
    Ok(())
}

pub fn run(loaded: &Loaded, scheme: Scheme) -> Result<()> {
    let layout = Layout::new(loaded);
    let tables = Tables::load(loaded)?;
    let runs_dir = layout.results().join(scheme.key());
    std::fs::create_dir_all(&runs_dir)?;

    let result: ProtocolResult = if scheme == Scheme::Mid2E {
        let c = &loaded.cfg;
        let res = mid2e_protocol(tables.midlevel()?, tables.emotion()?, c.runs, c.seed, c.test_ratio)?;
        for r in &res.runs {
            write_run(&runs_dir, r)?;
        }
        res
    } else {
        let data = protocol_data(&layout, loaded, &tables, scheme)?;
        let mut cfg = loaded.protocol();
        cfg.checkpoint_dir = Some(layout.checkpoints());
        cfg.log_dir = Some(layout.checkpoints());
        let on_run = |r: &RunResult| {
            // partial results survive a later failing run
            if let Err(e) = write_run(&runs_dir, r) {
                eprintln!("warning: could not persist run {}: {e:#}", r.run);
            }
            eprintln!("{} run {} finished: mean r {:.3}", scheme.label(), r.run, r.row().average());
        };
        run_protocol(scheme, &data, &cfg, &on_run).with_context(|| format!("training {}", scheme.label()))?
    };

    let table = ResultsTable::new(loaded.provenance(), vec![result.mean.clone()])?;
    let csv = table.to_csv()?;
    write_if_changed(&layout.results().join(format!("{}.csv", scheme.key())), &csv)?;
    write_if_changed(&layout.results().join(format!("{}.json", scheme.key())), table.to_json()? + "\n")?;
    print!("{csv}");
    Ok(())
}
