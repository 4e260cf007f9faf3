//! `simulate`: generate a linear-model world, export it as standard
//! corpus files, and benchmark concept recovery through the production
//! pipeline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use neurolabel_core::projection::Pipeline;
use neurolabel_core::simulator::{
    concept_recovery_benchmark, export_world, generate_world, BenchmarkRow, WorldConfig,
};

use crate::output::{cell, cell_opt, OutDir, RunSummary, Timings};
use crate::{CliError, RunOutcome};

use super::Context;

fn default_gammas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

fn default_pipelines() -> Vec<Pipeline> {
    Pipeline::ALL.to_vec()
}

fn default_top_n() -> usize {
    3
}

/// World recipe plus the benchmark cells to run on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub world: WorldConfig,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_pipelines")]
    pub pipelines: Vec<Pipeline>,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
}

#[derive(Serialize)]
struct Details {
    config: SimulateConfig,
    samples: usize,
    vocabulary: usize,
    benchmark: Vec<BenchmarkRow>,
}

pub const BENCHMARK_CSV_HEADER: [&str; 6] = [
    "pipeline",
    "gamma",
    "neurons",
    "labeled",
    "accuracy",
    "nuisance_rate",
];

pub fn benchmark_csv_rows(rows: &[BenchmarkRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.pipeline.tag().to_string(),
                cell_opt(r.gamma),
                r.neurons.to_string(),
                r.labeled.to_string(),
                cell(r.accuracy),
                cell(r.nuisance_rate),
            ]
        })
        .collect()
}

pub fn run(ctx: &Context, config_path: &Path) -> Result<RunOutcome, CliError> {
    let mut timings = Timings::new();
    timings.start("load");
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    let mut config: SimulateConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    if let Some(seed) = ctx.seed_override {
        config.world.seed = seed;
    }
    for g in &config.gammas {
        if !(0.0..=1.0).contains(g) {
            return Err(CliError::Config(format!("gamma {g} outside [0, 1]")));
        }
    }

    timings.start("generate");
    let world = generate_world(&config.world).map_err(neurolabel_core::Error::from)?;

    timings.start("export");
    let out = OutDir::create(&ctx.out)?;
    export_world(&world, &ctx.out, &config.gammas, &config.pipelines)
        .map_err(neurolabel_core::Error::from)?;

    timings.start("benchmark");
    let benchmark =
        concept_recovery_benchmark(&world, &config.gammas, &config.pipelines, config.top_n)
            .map_err(neurolabel_core::Error::from)?;

    timings.start("write");
    out.write_json("benchmark.json", &benchmark)?;
    if ctx.format.wants_csv() {
        out.write_csv(
            "benchmark.csv",
            &BENCHMARK_CSV_HEADER,
            &benchmark_csv_rows(&benchmark),
        )?;
    }
    let details = Details {
        samples: world.embeddings.rows(),
        vocabulary: world.vocabulary.len(),
        benchmark,
        config,
    };
    out.write_json(
        "run_simulate.json",
        &RunSummary::new("simulate", Some(details.config.world.seed), &details),
    )?;
    timings.write(&out, "simulate")?;
    Ok(RunOutcome::Clean)
}
