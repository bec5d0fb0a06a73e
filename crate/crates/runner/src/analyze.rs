//! Post-hoc analysis over one or more finished runs. Every suite writes
//! plain CSV (plus an SVG rendering where a picture helps) into the output
//! directory and refuses to pool runs whose physics or operator settings
//! differ, as witnessed by the config hash in each run's metadata.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walker::analysis::DifficultyCategory;
use walker::eval::{evaluate_with, EvalJob};
use walker::poet::representative;
use walker::rng::{derive_rng, derive_seed, STREAM_SUITE};
use walker::{
    generate_robustness_suite, local_generalisation_suite, mann_whitney_u, static_env,
    bonferroni, EnvParams, Genotype, QdGrid,
};

use crate::checkpoint::{load_checkpoint, ConditionState, CHECKPOINT_FILE};
use crate::experiment::{read_meta, RunMeta, BEST_GENOTYPE_FILE};
use crate::runlog::{read_log, GenerationRecord, LogRecord, RUN_LOG_FILE};
use crate::svg::{self, condition_color, Series};

/// Master seed of the shared benchmark suites. Fixed so every invocation
/// scores runs against the same environments.
pub const SUITE_SEED: u64 = 88;

/// Variants sampled per mutation count in the local suite.
const LOCAL_VARIANTS: u64 = 5;
/// How many times a base environment is mutated in the local suite.
const LOCAL_MUTATION_COUNTS: [u32; 4] = [1, 2, 4, 8];

/// The available analysis suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    /// Score each run's best genotype on a fixed 50-environment benchmark
    /// and compare conditions with rank statistics.
    Robustness,
    /// Score each run's final representatives on mutated copies of their
    /// own training environments.
    Local,
    /// Tabulate per-generation population diversity.
    Diversity,
    /// Rebuild morphology feature maps and grid coverage from run logs.
    Maps,
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("no run directories given")]
    NoRuns,
    #[error("runs {first} and {other} differ in physics/operator config; refusing to pool them")]
    ConfigMismatch { first: String, other: String },
    #[error("run {dir}: {problem}")]
    BadRun { dir: String, problem: String },
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

/// One run directory, loaded and validated.
pub struct LoadedRun {
    pub dir: PathBuf,
    /// Stable per-invocation label used in file names.
    pub label: String,
    pub meta: RunMeta,
    pub records: Vec<LogRecord>,
}

impl LoadedRun {
    fn generations(&self) -> impl Iterator<Item = &GenerationRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Generation(g) => Some(g),
            _ => None,
        })
    }

    fn csv_key(&self) -> String {
        format!(
            "{},{},{}",
            self.label,
            self.meta.condition.name(),
            self.meta.master_seed
        )
    }
}

/// Loads every run and checks they may be pooled.
pub fn load_runs(dirs: &[PathBuf]) -> Result<Vec<LoadedRun>, AnalyzeError> {
    if dirs.is_empty() {
        return Err(AnalyzeError::NoRuns);
    }
    let mut runs = Vec::with_capacity(dirs.len());
    for (i, dir) in dirs.iter().enumerate() {
        let bad = |problem: String| AnalyzeError::BadRun {
            dir: dir.display().to_string(),
            problem,
        };
        let meta = read_meta(dir).map_err(|e| bad(e.to_string()))?;
        let records = read_log(&dir.join(RUN_LOG_FILE)).map_err(|e| bad(e.to_string()))?;
        runs.push(LoadedRun {
            dir: dir.clone(),
            label: format!("run{i:02}"),
            meta,
            records,
        });
    }
    for run in &runs[1..] {
        if run.meta.config_hash != runs[0].meta.config_hash {
            return Err(AnalyzeError::ConfigMismatch {
                first: runs[0].dir.display().to_string(),
                other: run.dir.display().to_string(),
            });
        }
    }
    Ok(runs)
}

/// Runs one suite over the given run directories, writing its outputs into
/// `out`. Returns the files written.
pub fn analyze(dirs: &[PathBuf], suite: Suite, out: &Path) -> Result<Vec<PathBuf>, AnalyzeError> {
    let runs = load_runs(dirs)?;
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();

    // Every invocation records which label maps to which directory.
    let mut index = String::from("run,dir,condition,seed,config_hash\n");
    for run in &runs {
        index += &format!(
            "{},{},{},{},{}\n",
            run.label,
            run.dir.display(),
            run.meta.condition.name(),
            run.meta.master_seed,
            run.meta.config_hash
        );
    }
    write_file(out, "runs.csv", &index, &mut written)?;

    match suite {
        Suite::Diversity => diversity_suite(&runs, out, &mut written)?,
        Suite::Maps => maps_suite(&runs, out, &mut written)?,
        Suite::Robustness => robustness_suite(&runs, out, &mut written)?,
        Suite::Local => local_suite(&runs, out, &mut written)?,
    }
    Ok(written)
}

fn diversity_suite(
    runs: &[LoadedRun],
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<(), AnalyzeError> {
    let mut main = String::from("run,condition,seed,generation,evaluations,pair_id,diversity,best,mean\n");
    let mut all = String::from(
        "run,condition,seed,generation,evaluations,pair_id,flat_lineage,created_at,diversity,best,mean\n",
    );
    let mut series = Vec::new();
    for run in runs {
        let mut points = Vec::new();
        for rec in run.generations() {
            for pair in &rec.pairs {
                if pair.flat_lineage {
                    main += &format!(
                        "{},{},{},{},{},{},{}\n",
                        run.csv_key(),
                        rec.generation,
                        rec.evaluations,
                        pair.pair_id,
                        pair.diversity,
                        pair.best,
                        pair.mean
                    );
                    points.push((rec.generation as f64, pair.diversity));
                }
                all += &format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    run.csv_key(),
                    rec.generation,
                    rec.evaluations,
                    pair.pair_id,
                    pair.flat_lineage,
                    pair.created_at,
                    pair.diversity,
                    pair.best,
                    pair.mean
                );
            }
        }
        series.push(Series {
            label: format!("{} ({})", run.label, run.meta.condition.name()),
            color: condition_color(run.meta.condition.name()).to_string(),
            points,
        });
    }
    write_file(out, "diversity.csv", &main, written)?;
    write_file(out, "diversity_all_pairs.csv", &all, written)?;
    let chart = svg::line_chart(
        "flat-lineage population diversity",
        "generation",
        "mean pairwise morphology distance",
        &series,
    );
    write_file(out, "diversity.svg", &chart, written)?;
    Ok(())
}

fn maps_suite(
    runs: &[LoadedRun],
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<(), AnalyzeError> {
    let mut summary =
        String::from("run,condition,seed,cells_occupied,coverage,best_fitness,qd_score\n");
    for run in runs {
        let mut grid = QdGrid::reachable();
        let mut first_seen: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for rec in run.generations() {
            for pair in &rec.pairs {
                for &(length, width, fitness) in &pair.points {
                    first_seen.entry(grid.cell_index((length, width))).or_insert(rec.generation);
                    grid.record_point((length, width), fitness);
                }
            }
        }

        let mut map =
            String::from("cell_x,cell_y,length_lo,width_lo,first_seen_generation,best_fitness\n");
        let mut qd_score = 0.0;
        for (cell, best) in grid.cells() {
            let (length_lo, width_lo) = grid.cell_origin(cell);
            map += &format!(
                "{},{},{},{},{},{}\n",
                cell.0, cell.1, length_lo, width_lo, first_seen[&cell], best
            );
            qd_score += best;
        }
        write_file(out, &format!("feature_map_{}.csv", run.label), &map, written)?;
        write_file(
            out,
            &format!("feature_map_{}.svg", run.label),
            &svg::heatmap(
                &format!("{} ({}) best fitness per cell", run.label, run.meta.condition.name()),
                &grid,
            ),
            written,
        )?;
        summary += &format!(
            "{},{},{},{},{}\n",
            run.csv_key(),
            grid.cells().count(),
            grid.coverage(),
            grid.best().unwrap_or(f64::NAN),
            qd_score
        );
    }
    write_file(out, "qd_summary.csv", &summary, written)?;
    Ok(())
}

fn robustness_suite(
    runs: &[LoadedRun],
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<(), AnalyzeError> {
    let suite = generate_robustness_suite(&mut derive_rng(SUITE_SEED, &[STREAM_SUITE]));
    let mut rows = String::from("run,condition,seed,category,env_index,score\n");
    // Per-run mean score per category, grouped by condition for the stats.
    let mut samples: BTreeMap<(&str, String), Vec<f64>> = BTreeMap::new();

    for run in runs {
        let genotype = load_best_genotype(run)?;
        let mut per_category: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let engine = &run.meta.config.engine;
        for (i, (category, env)) in suite.iter().enumerate() {
            let score = evaluate_with(engine, &EvalJob {
                genotype: genotype.clone(),
                env: *env,
                base_seed: derive_seed(SUITE_SEED, &[STREAM_SUITE, 1, i as u64]),
            });
            rows += &format!(
                "{},{},{},{}\n",
                run.csv_key(),
                category.name(),
                i,
                score
            );
            per_category.entry(category.name()).or_default().push(score);
        }
        for (category, scores) in per_category {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            samples
                .entry((category, run.meta.condition.name().to_string()))
                .or_default()
                .push(mean);
        }
    }
    write_file(out, "robustness.csv", &rows, written)?;

    // One two-sided rank test per (category, condition pair), Bonferroni
    // corrected across the whole table.
    let mut conditions: Vec<String> = runs
        .iter()
        .map(|r| r.meta.condition.name().to_string())
        .collect();
    conditions.sort();
    conditions.dedup();

    let mut table: Vec<(String, String, String, usize, usize, f64, f64)> = Vec::new();
    for category in DifficultyCategory::ALL {
        for a in 0..conditions.len() {
            for b in a + 1..conditions.len() {
                let empty = Vec::new();
                let sa = samples
                    .get(&(category.name(), conditions[a].clone()))
                    .unwrap_or(&empty);
                let sb = samples
                    .get(&(category.name(), conditions[b].clone()))
                    .unwrap_or(&empty);
                if sa.is_empty() || sb.is_empty() {
                    continue;
                }
                let (u, p) = mann_whitney_u(sa, sb);
                table.push((
                    category.name().to_string(),
                    conditions[a].clone(),
                    conditions[b].clone(),
                    sa.len(),
                    sb.len(),
                    u,
                    p,
                ));
            }
        }
    }
    let adjusted = bonferroni(
        &table.iter().map(|row| row.6).collect::<Vec<f64>>(),
        table.len().max(1),
    );
    let mut stats =
        String::from("category,condition_a,condition_b,n_a,n_b,u,p_raw,p_adjusted\n");
    for (row, p_adj) in table.iter().zip(adjusted) {
        stats += &format!(
            "{},{},{},{},{},{},{},{}\n",
            row.0, row.1, row.2, row.3, row.4, row.5, row.6, p_adj
        );
    }
    write_file(out, "robustness_stats.csv", &stats, written)?;
    Ok(())
}

fn local_suite(
    runs: &[LoadedRun],
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<(), AnalyzeError> {
    let mut rows = String::from("run,condition,seed,pair_id,n_mutations,variant,score\n");
    for run in runs {
        let seed = run.meta.master_seed;
        let engine = &run.meta.config.engine;
        for (pair_id, env, rep) in final_representatives(run)? {
            let mut score_on = |env: EnvParams, n: u32, variant: u64| {
                let score = evaluate_with(engine, &EvalJob {
                    genotype: rep.clone(),
                    env,
                    base_seed: derive_seed(
                        SUITE_SEED,
                        &[STREAM_SUITE, 3, seed, pair_id, n as u64, variant],
                    ),
                });
                rows += &format!("{},{},{},{},{}\n", run.csv_key(), pair_id, n, variant, score);
            };
            // Variant 0 at zero mutations is the training environment
            // itself, the baseline the mutated scores are read against.
            score_on(env, 0, 0);
            for n in LOCAL_MUTATION_COUNTS {
                for variant in 0..LOCAL_VARIANTS {
                    let mut rng = derive_rng(
                        SUITE_SEED,
                        &[STREAM_SUITE, 2, seed, pair_id, n as u64, variant],
                    );
                    score_on(local_generalisation_suite(&env, &mut rng, n), n, variant);
                }
            }
        }
    }
    write_file(out, "local_generalisation.csv", &rows, written)?;
    Ok(())
}

/// The final `(pair id, environment, representative)` triples of a run,
/// read from its checkpoint. Pairs that never finished an evaluation are
/// skipped.
fn final_representatives(
    run: &LoadedRun,
) -> Result<Vec<(u64, EnvParams, Genotype)>, AnalyzeError> {
    let ck = load_checkpoint(&run.dir.join(CHECKPOINT_FILE)).map_err(|e| AnalyzeError::BadRun {
        dir: run.dir.display().to_string(),
        problem: e.to_string(),
    })?;
    // Highest stored fitness, ties to the earliest position, matching how
    // representatives are chosen during the run.
    fn best_in(pop: &[Genotype]) -> Option<&Genotype> {
        let mut best: Option<&Genotype> = None;
        for g in pop.iter().filter(|g| g.fitness.is_some()) {
            if best.map_or(true, |b| g.fitness.unwrap() > b.fitness.unwrap()) {
                best = Some(g);
            }
        }
        best
    }
    Ok(match &ck.state {
        ConditionState::Static { population } => best_in(population)
            .map(|g| (0, static_env(), g.clone()))
            .into_iter()
            .collect(),
        ConditionState::Rri { population, schedule } => {
            // Stored fitness comes from the last committed generation.
            let env = *schedule.current(ck.generation.saturating_sub(1));
            best_in(population)
                .map(|g| (0, env, g.clone()))
                .into_iter()
                .collect()
        }
        ConditionState::Poet(poet) => poet
            .pairs
            .iter()
            .filter(|p| p.population.iter().any(|g| g.fitness.is_some()))
            .map(|p| (p.id, p.env, representative(p).clone()))
            .collect(),
    })
}

fn load_best_genotype(run: &LoadedRun) -> Result<Genotype, AnalyzeError> {
    let path = run.dir.join(BEST_GENOTYPE_FILE);
    let bad = |problem: String| AnalyzeError::BadRun {
        dir: run.dir.display().to_string(),
        problem,
    };
    let bytes = std::fs::read(&path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    Genotype::from_bytes(&bytes).map_err(|e| bad(e.to_string()))
}

fn write_file(
    out: &Path,
    name: &str,
    body: &str,
    written: &mut Vec<PathBuf>,
) -> io::Result<()> {
    let path = out.join(name);
    std::fs::write(&path, body)?;
    written.push(path);
    Ok(())
}
