//! Multi-run experiments: the planted-transform benchmark and result grids.

use std::collections::BTreeMap;
use std::path::Path;

use manifold_icp::baseline::{EvalRow, EVAL_CSV_SCHEMA_VERSION};
use manifold_icp::experiments::{
    median, run_arm_transfer, run_planar_transfer, run_toy, ArmTransferConfig, SubsetSelection, ToyConfig, ToyOutcome,
    TrainingKind, Variant,
};
use manifold_icp::FitConfig;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::files;
use crate::{Ctx, KindArg, SubsetArg, SweepArgs, SweepExperiment, ToyBenchArgs, VariantArg};

/// Published values for the 100-sample planted-transform benchmark.
const REFERENCE_TOY_RMSE: f64 = 0.042;
const REFERENCE_TOY_ITERATIONS: usize = 22;

#[derive(Serialize)]
struct ToySummary {
    runs: usize,
    median_rmse: f64,
    median_iterations: f64,
    converged: usize,
    reference_rmse: f64,
    reference_iterations: usize,
}

pub fn toy_bench(a: &ToyBenchArgs, ctx: &Ctx) -> CliResult<()> {
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let base = ToyConfig {
        model: a.model.clone(),
        samples: a.samples,
        heldout: a.heldout,
        singular_subset: a.singular_subset,
        subset_selection: match a.subset_selection {
            SubsetArg::Paired => SubsetSelection::Paired,
            SubsetArg::Independent => SubsetSelection::Independent,
        },
        seed: a.flags.seed,
        fit: a.flags.config(),
    };
    let outcomes: Vec<ToyOutcome> = (0..a.reps)
        .into_par_iter()
        .map(|i| {
            run_toy(&ToyConfig {
                seed: a.flags.seed + i,
                ..base.clone()
            })
        })
        .collect::<Result<_, _>>()?;

    for o in &outcomes {
        println!(
            "seed {:>4}  rmse {:.4}  iterations {:>3}  converged {}",
            o.seed, o.eval.rmse, o.iterations, o.converged
        );
    }
    let summary = ToySummary {
        runs: outcomes.len(),
        median_rmse: median(&mut outcomes.iter().map(|o| o.eval.rmse).collect::<Vec<_>>()),
        median_iterations: median(&mut outcomes.iter().map(|o| o.iterations as f64).collect::<Vec<_>>()),
        converged: outcomes.iter().filter(|o| o.converged).count(),
        reference_rmse: REFERENCE_TOY_RMSE,
        reference_iterations: REFERENCE_TOY_ITERATIONS,
    };
    println!(
        "median rmse {:.4} (reference {REFERENCE_TOY_RMSE}), median iterations {} (reference {REFERENCE_TOY_ITERATIONS}), converged {}/{}",
        summary.median_rmse, summary.median_iterations, summary.converged, summary.runs
    );
    let out = ctx.output(&a.out, "toy_bench.json");
    let doc = json!({ "config": base, "summary": summary, "runs": outcomes });
    files::write_json(&out, &crate::provenance::attach(doc, &ctx.provenance))
}

#[derive(Clone, Copy)]
struct Cell {
    variant: Variant,
    samples: usize,
    seed: u64,
}

impl Cell {
    fn dir_name(&self) -> String {
        format!("{}-n{}-s{}", self.variant.name().replace('+', "_"), self.samples, self.seed)
    }
}

/// Per-eval-set scores of one cell.
struct CellResult {
    iterations: usize,
    scores: Vec<(String, f64)>,
    doc: serde_json::Value,
}

fn run_cell(a: &SweepArgs, cell: Cell) -> CliResult<CellResult> {
    let kind = match a.kind {
        KindArg::Trajectory => TrainingKind::Trajectory,
        KindArg::Random => TrainingKind::Random,
    };
    let base = FitConfig::default();
    match a.experiment {
        SweepExperiment::Planar => {
            let (outcome, transform, _) = run_planar_transfer(cell.variant, kind, cell.samples, cell.seed, &base)?;
            let transform: serde_json::Value = serde_json::from_str(&transform.to_json()).expect("transform JSON is valid");
            Ok(CellResult {
                iterations: outcome.iterations,
                scores: outcome.eval.iter().map(|e| (e.id.clone(), e.report.rmse)).collect(),
                doc: json!({ "outcome": outcome, "transform": transform }),
            })
        }
        SweepExperiment::Arm => {
            let cfg = ArmTransferConfig {
                kind,
                samples: cell.samples,
                baseline_samples: a.baseline_samples,
                fit: cell.variant.config(&base, cell.seed),
                ..ArmTransferConfig::default()
            };
            let outcome = run_arm_transfer(&cfg, cell.seed)?;
            Ok(CellResult {
                iterations: outcome.iterations,
                scores: outcome.eval.iter().map(|e| (e.id.clone(), e.transferred.rmse)).collect(),
                doc: json!({ "outcome": outcome }),
            })
        }
    }
}

pub fn sweep(a: &SweepArgs, ctx: &Ctx) -> CliResult<()> {
    if a.seeds == 0 || a.variants.is_empty() || a.weight_exps.is_empty() || a.sample_counts.is_empty() {
        return Err(CliError::Usage("sweep needs at least one variant, weight exponent, sample count and seed".into()));
    }
    let mut cells = Vec::new();
    for &v in &a.variants {
        for &w in &a.weight_exps {
            for &samples in &a.sample_counts {
                for seed in a.seed..a.seed + a.seeds {
                    let variant = Variant {
                        use_pt: v == VariantArg::Pt,
                        weight_exponent: w,
                    };
                    cells.push(Cell { variant, samples, seed });
                }
            }
        }
    }
    let root = ctx.out_dir.join("sweep");
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|&cell| {
            let r = run_cell(a, cell)?;
            let path = root.join(cell.dir_name()).join("cell.json");
            files::write_json(&path, &crate::provenance::attach(r.doc.clone(), &ctx.provenance))?;
            Ok(r)
        })
        .collect::<CliResult<_>>()?;

    // Medians over seeds, keyed so the table order is fixed.
    let mut groups: BTreeMap<(String, String, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (cell, r) in cells.iter().zip(&results) {
        for (id, score) in &r.scores {
            let entry = groups.entry((id.clone(), cell.variant.name(), cell.samples)).or_default();
            entry.0.push(*score);
            entry.1.push(r.iterations as f64);
        }
    }
    let rows: Vec<EvalRow> = groups
        .into_iter()
        .map(|((experiment, variant, samples), (mut scores, mut iters))| EvalRow {
            experiment,
            variant,
            samples,
            rmse: median(&mut scores),
            iterations: Some(median(&mut iters).round() as usize),
        })
        .collect();
    let table = root.join("results.csv");
    write_rows(&table, &rows, &ctx.provenance.to_line())?;
    for r in &rows {
        println!("{:<10} {:<10} {:>5} {:.6}", r.experiment, r.variant, r.samples, r.rmse);
    }
    println!("{}", json!({ "cells": cells.len(), "table": table }));
    Ok(())
}

fn write_rows(path: &Path, rows: &[EvalRow], provenance: &str) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))?).expect("CSV is UTF-8");
    files::write(path, &format!("# schema {EVAL_CSV_SCHEMA_VERSION}; provenance {provenance}\n{body}"))
}
