//! Run a shrunken copy of an experiment protocol in-process and summarize its table.
//! The `bkernn experiment` command does the same and also writes CSVs and a manifest.

use bkernn::experiments::{ExperimentName, ExperimentParams};

fn main() -> bkernn::Result<()> {
    let params = ExperimentParams::defaults(ExperimentName::Exp3, 0.25, Some(3))?;
    let out = params.run(0, 1)?;
    let t = out.table("results").expect("exp3 writes a results table");
    println!("{} rows, columns {:?}", t.rows.len(), t.headers);
    for (col, legend) in &out.legends {
        println!("{col}: {legend}");
    }
    let r2 = t.column("test_r2").unwrap();
    let (mech, pen) = (t.column("mechanism").unwrap(), t.column("penalty").unwrap());
    for m in 0..3 {
        let means: Vec<String> = (0..5)
            .map(|p| {
                let v: Vec<f64> = t
                    .rows
                    .iter()
                    .filter(|r| r[mech] == m as f64 && r[pen] == p as f64)
                    .map(|r| r[r2])
                    .collect();
                format!("{:.3}", v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        println!("mechanism {m}: mean test R² by penalty {}", means.join(" "));
    }
    println!("largest objective rise {:.1e}", out.max_objective_rise());
    Ok(())
}
