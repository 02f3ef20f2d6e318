//! The `mak` command line: `ecle`, `sample`, `bench` and `inspect`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mak_core::contrastive::{DEFAULT_BATCH_SIZE, DEFAULT_REPEATS, DEFAULT_TEMPERATURE};
use mak_core::diagnostics::COMPARED_STRATEGIES;
use mak_core::prototypes::{DEFAULT_CLUSTERS, DEFAULT_MAX_ITERS};
use mak_core::selection::{DEFAULT_ALPHA, DEFAULT_CANDIDATE_FACTOR};
use mak_core::{
    compare_strategies, ecle, generate_mixture, pca_2d, phi_metric, DatasetRole, Distance, EcleOptions,
    EmbeddingSet, Group, GroupPartition, LossTable, MixtureSpec, NegativeBank, Scoring, SelectionConfig,
    Strategy, ViewLossInputs, CANONICAL_BUDGET,
};
use serde::{Deserialize, Serialize};

use crate::emb::{load_embeddings, save_embeddings};
use crate::error::{Error, Result};
use crate::loss::{load_loss_table, save_loss_table};
use crate::manifest::{write_json, RunManifest};
use crate::report::{comparison_table, ComparisonFile, LossSettings, ResultFile, RunConfig, FORMAT_VERSION};

#[derive(Debug, Parser)]
#[command(name = "mak", version, about = "Model-aware K-center selection over pre-computed embeddings")]
pub struct Cli {
    /// Worker threads; defaults to every available core. Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-sample ECLE from augmented-view embeddings.
    Ecle(EcleArgs),
    /// Select a budget of pool samples.
    Sample(SampleArgs),
    /// Run every strategy on a synthetic long-tail scene.
    Bench(BenchArgs),
    /// Summarize an embedding, loss, result or manifest file.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct EcleArgs {
    /// MAK-EMB file of `n·M·2` view rows ordered by sample, repeat, view.
    #[arg(long)]
    pub views: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    /// Batch size for in-batch negatives.
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// Shared negative bank; replaces in-batch negatives.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed_rng: u64,
    /// Store the per-repeat losses as well.
    #[arg(long)]
    pub keep_raw: bool,
    /// Average over both views as anchor.
    #[arg(long)]
    pub symmetric: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub seed: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    /// MAK-LOSS table for the pool.
    #[arg(long, conflicts_with = "compute_ecle")]
    pub losses: Option<PathBuf>,
    /// Compute ECLE from `--pool-views` instead of reading `--losses`.
    #[arg(long, requires = "pool_views")]
    pub compute_ecle: bool,
    /// View embeddings of the pool (`n·M·2` rows), for `--compute-ecle`.
    #[arg(long)]
    pub pool_views: Option<PathBuf>,
    /// JSON file whose keys mirror the flags below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub candidate_factor: Option<f64>,
    #[arg(long)]
    pub kmeans_k: Option<usize>,
    #[arg(long)]
    pub kmeans_max_iters: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// mak, random, kcenter, or ablation:<terms> with terms joined by '+'.
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub seed_rng: Option<u64>,
    /// cosine or euclidean.
    #[arg(long)]
    pub distance: Option<Distance>,
    /// Measure proximity against every seed row instead of prototypes.
    #[arg(long)]
    pub no_prototypes: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also write the seed prototypes as a MAK-EMB file.
    #[arg(long)]
    pub prototypes_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Use the built-in reference scene.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub canonical: bool,
    /// Mixture spec JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// JSON file whose keys mirror the flags below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub candidate_factor: Option<f64>,
    #[arg(long)]
    pub kmeans_k: Option<usize>,
    /// Overrides the scene seed; selection uses the same seed.
    #[arg(long)]
    pub seed_rng: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the generated seed, pool and loss files.
    #[arg(long)]
    pub export: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
    /// Loss table to pair with an embedding file for the φ table.
    #[arg(long)]
    pub losses: Option<PathBuf>,
    /// Seed embeddings whose labels define the Many/Medium/Few groups.
    #[arg(long)]
    pub seed: Option<PathBuf>,
}

/// Keys accepted by `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    budget: Option<usize>,
    alpha: Option<f64>,
    candidate_factor: Option<f64>,
    kmeans_k: Option<usize>,
    kmeans_max_iters: Option<usize>,
    repeats: Option<usize>,
    temperature: Option<f64>,
    batch_size: Option<usize>,
    strategy: Option<Strategy>,
    seed_rng: Option<u64>,
    distance: Option<Distance>,
    use_prototypes: Option<bool>,
}

fn read_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let bytes = fs::read(path).map_err(|e| Error::read(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Ecle(a) => cmd_ecle(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}

fn manifest_path(out: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    })
}

/// Arranges a views file as `samples × repeats × 2` rows.
fn view_inputs(
    path: &Path,
    views: &EmbeddingSet,
    repeats: usize,
    negatives: NegativeBank,
    temperature: f64,
    expected_samples: Option<usize>,
) -> Result<ViewLossInputs> {
    if repeats == 0 {
        return Err(Error::Usage("--repeats must be at least 1".into()));
    }
    let per_sample = 2 * repeats;
    if !views.n().is_multiple_of(per_sample) {
        return Err(Error::parse(
            path,
            format!("{} view rows do not split into {per_sample} per sample", views.n()),
        ));
    }
    let samples = views.n() / per_sample;
    if let Some(n) = expected_samples {
        if n != samples {
            return Err(Error::parse(
                path,
                format!("views cover {samples} samples, the pool has {n}"),
            ));
        }
    }
    ViewLossInputs::new(samples, repeats, views.dim(), views.data().to_vec(), negatives, temperature)
        .map_err(|e| Error::invalid(path, e))
}

#[derive(Serialize)]
struct EcleConfig {
    repeats: usize,
    temperature: f64,
    batch_size: usize,
    negatives: &'static str,
    seed_rng: u64,
    keep_raw: bool,
    symmetric: bool,
}

fn cmd_ecle(a: EcleArgs) -> Result<()> {
    let mut manifest = RunManifest::new("ecle");
    manifest.set_config(&EcleConfig {
        repeats: a.repeats,
        temperature: a.temperature,
        batch_size: a.batch_size,
        negatives: if a.negatives.is_some() { "shared" } else { "in_batch" },
        seed_rng: a.seed_rng,
        keep_raw: a.keep_raw,
        symmetric: a.symmetric,
    })?;
    let views = manifest.time("load", || load_embeddings(&a.views, DatasetRole::Pool))?;
    manifest.add_input("views", &a.views)?;
    if a.repeats == 0 || views.n() % (2 * a.repeats) != 0 {
        return Err(Error::parse(
            &a.views,
            format!("{} view rows do not split into {} per sample", views.n(), 2 * a.repeats.max(1)),
        ));
    }
    let samples = views.n() / (2 * a.repeats);
    let bank = match &a.negatives {
        Some(path) => {
            let set = load_embeddings(path, DatasetRole::Pool)?;
            if set.dim() != views.dim() {
                return Err(Error::parse(
                    path,
                    format!("negatives have dimension {}, views have {}", set.dim(), views.dim()),
                ));
            }
            manifest.add_input("negatives", path)?;
            NegativeBank::Shared {
                vectors: set.data().to_vec(),
            }
        }
        None => NegativeBank::in_batch(samples, a.repeats, a.batch_size, a.seed_rng)?,
    };
    let inputs = view_inputs(&a.views, &views, a.repeats, bank, a.temperature, None)?;
    let options = EcleOptions {
        keep_raw: a.keep_raw,
        symmetric: a.symmetric,
    };
    let table = manifest.time("ecle", || ecle(&inputs, options))?;
    save_loss_table(&table, &a.out)?;
    manifest.add_output(&a.out);
    let mpath = manifest_path(&a.out, a.manifest);
    manifest.add_output(&mpath);
    manifest.write(&mpath)
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let file = read_config(a.config.as_deref())?;
    let budget = a
        .budget
        .or(file.budget)
        .ok_or_else(|| Error::Usage("--budget is required (flag or config)".into()))?;
    let cfg = SelectionConfig {
        budget,
        alpha: a.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
        candidate_factor: a
            .candidate_factor
            .or(file.candidate_factor)
            .unwrap_or(DEFAULT_CANDIDATE_FACTOR),
        kmeans_k: a.kmeans_k.or(file.kmeans_k).unwrap_or(DEFAULT_CLUSTERS),
        kmeans_max_iters: a.kmeans_max_iters.or(file.kmeans_max_iters).unwrap_or(DEFAULT_MAX_ITERS),
        distance: a.distance.or(file.distance).unwrap_or_default(),
        rng_seed: a.seed_rng.or(file.seed_rng).unwrap_or(0),
        use_prototypes: if a.no_prototypes {
            false
        } else {
            file.use_prototypes.unwrap_or(true)
        },
    };
    let loss = LossSettings {
        repeats: a.repeats.or(file.repeats).unwrap_or(DEFAULT_REPEATS),
        temperature: a.temperature.or(file.temperature).unwrap_or(DEFAULT_TEMPERATURE),
        batch_size: a.batch_size.or(file.batch_size).unwrap_or(DEFAULT_BATCH_SIZE),
        computed: a.compute_ecle,
    };
    let strategy = a.strategy.or(file.strategy).unwrap_or(Strategy::MAK);
    let config = RunConfig {
        strategy,
        selection: cfg.clone(),
        loss: loss.clone(),
    };
    if !a.compute_ecle && a.losses.is_none() {
        return Err(Error::Usage("pass --losses or --compute-ecle".into()));
    }

    let mut manifest = RunManifest::new("sample");
    manifest.set_config(&config)?;
    let (seed, pool) = manifest.time("load", || -> Result<_> {
        let seed = load_embeddings(&a.seed, DatasetRole::Seed)?;
        let pool = load_embeddings(&a.pool, DatasetRole::Pool)?;
        Ok((seed, pool))
    })?;
    manifest.add_input("seed", &a.seed)?;
    manifest.add_input("pool", &a.pool)?;
    // labels are for evaluation only
    let seed = seed.without_labels();
    let pool = pool.without_labels();

    let table = if let Some(path) = &a.losses {
        manifest.add_input("losses", path)?;
        manifest.time("load_losses", || load_loss_table(path))?
    } else {
        let path = a.pool_views.as_ref().expect("clap enforces --pool-views");
        let views = load_embeddings(path, DatasetRole::Pool)?;
        manifest.add_input("pool_views", path)?;
        let bank = NegativeBank::in_batch(pool.n(), loss.repeats.max(1), loss.batch_size, cfg.rng_seed)?;
        let inputs = view_inputs(path, &views, loss.repeats, bank, loss.temperature, Some(pool.n()))?;
        manifest.time("ecle", || ecle(&inputs, EcleOptions::default()))?
    };
    if table.len() != pool.n() {
        return Err(Error::Core(mak_core::Error::LengthMismatch {
            what: "loss table",
            expected: pool.n(),
            found: table.len(),
        }));
    }

    let scoring = manifest.time("score", || Scoring::prepare(&seed, &pool, &table, &cfg))?;
    let res = manifest.time("select", || scoring.select(strategy))?;
    write_json(&a.out, &ResultFile::new(config, &res))?;
    manifest.add_output(&a.out);
    if let Some(path) = &a.prototypes_out {
        match scoring.prototypes() {
            Some(p) => save_embeddings(&p.centers, path)?,
            None => return Err(Error::Usage("--prototypes-out needs prototypes enabled".into())),
        }
        manifest.add_output(path);
    }
    let mpath = manifest_path(&a.out, a.manifest);
    manifest.add_output(&mpath);
    manifest.write(&mpath)
}

#[derive(Serialize)]
struct BenchConfig<'a> {
    spec: &'a MixtureSpec,
    selection: &'a SelectionConfig,
    strategies: Vec<String>,
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let file = read_config(a.config.as_deref())?;
    let mut manifest = RunManifest::new("bench");
    let mut spec = match &a.spec {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| Error::read(path, e))?;
            manifest.add_input("spec", path)?;
            serde_json::from_slice(&bytes).map_err(|e| Error::parse(path, e.to_string()))?
        }
        None => MixtureSpec::canonical(),
    };
    if let Some(s) = a.seed_rng.or(file.seed_rng) {
        spec.rng_seed = s;
    }
    let cfg = SelectionConfig {
        budget: a.budget.or(file.budget).unwrap_or(CANONICAL_BUDGET),
        alpha: a.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
        candidate_factor: a
            .candidate_factor
            .or(file.candidate_factor)
            .unwrap_or(DEFAULT_CANDIDATE_FACTOR),
        kmeans_k: a.kmeans_k.or(file.kmeans_k).unwrap_or(DEFAULT_CLUSTERS),
        kmeans_max_iters: file.kmeans_max_iters.unwrap_or(DEFAULT_MAX_ITERS),
        distance: file.distance.unwrap_or_default(),
        rng_seed: spec.rng_seed,
        use_prototypes: file.use_prototypes.unwrap_or(true),
    };
    manifest.set_config(&BenchConfig {
        spec: &spec,
        selection: &cfg,
        strategies: COMPARED_STRATEGIES.iter().map(|s| s.to_string()).collect(),
    })?;

    let mix = manifest.time("generate", || generate_mixture(&spec))?;
    let cmp = manifest.time("compare", || compare_strategies(&mix, &cfg))?;
    let scatter = manifest.time("project", || pca_2d(&mix.pool));

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::write(&a.out_dir, e))?;
    let json_path = a.out_dir.join("comparison.json");
    write_json(
        &json_path,
        &ComparisonFile {
            format_version: FORMAT_VERSION,
            spec: spec.clone(),
            comparison: cmp.clone(),
        },
    )?;
    manifest.add_output(&json_path);

    let table = comparison_table(&cmp);
    let txt_path = a.out_dir.join("comparison.txt");
    fs::write(&txt_path, &table).map_err(|e| Error::write(&txt_path, e))?;
    manifest.add_output(&txt_path);

    let csv_path = a.out_dir.join("scatter.csv");
    fs::write(&csv_path, scatter_csv(mix.pool_labels(), &scatter, &cmp))
        .map_err(|e| Error::write(&csv_path, e))?;
    manifest.add_output(&csv_path);

    if a.export {
        for (name, set) in [("seed.emb", &mix.seed), ("pool.emb", &mix.pool)] {
            let path = a.out_dir.join(name);
            save_embeddings(set, &path)?;
            manifest.add_output(&path);
        }
        let path = a.out_dir.join("pool.loss");
        save_loss_table(&mix.losses, &path)?;
        manifest.add_output(&path);
    }
    let mpath = a.out_dir.join("manifest.json");
    manifest.add_output(&mpath);
    manifest.write(&mpath)?;
    print!("{table}");
    Ok(())
}

fn scatter_csv(labels: &[i64], points: &[[f64; 2]], cmp: &mak_core::Comparison) -> String {
    let mut out = String::from("index,label,x,y");
    let mut marks = Vec::new();
    for row in &cmp.rows {
        out.push(',');
        out.push_str(&row.strategy.to_string());
        let mut m = vec![false; points.len()];
        row.selected.iter().for_each(|&j| m[j] = true);
        marks.push(m);
    }
    out.push('\n');
    for (i, p) in points.iter().enumerate() {
        out.push_str(&format!("{i},{},{},{}", labels[i], p[0], p[1]));
        for m in &marks {
            out.push_str(if m[i] { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

fn summary(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        n += 1;
    }
    (lo, hi, sum / n.max(1) as f64)
}

fn print_groups(labels: &[i64], partition: &GroupPartition) {
    let mut counts = [0usize; 4];
    for &l in labels {
        let k = partition
            .group_of(l)
            .map_or(3, |g| Group::ALL.iter().position(|&x| x == g).unwrap());
        counts[k] += 1;
    }
    let n = labels.len() as f64;
    for (k, g) in Group::ALL.iter().enumerate() {
        println!("  {:<8}{:.4}", g.name(), counts[k] as f64 / n);
    }
    if counts[3] > 0 {
        println!("  {:<8}{:.4}", "other", counts[3] as f64 / n);
    }
}

fn inspect_embeddings(a: &InspectArgs) -> Result<()> {
    let set = load_embeddings(&a.path, DatasetRole::Pool)?;
    println!("embeddings  n={} d={}", set.n(), set.dim());
    let norms = summary(set.rows().map(|r| r.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt()));
    println!("norm        min={:.6} max={:.6} mean={:.6}", norms.0, norms.1, norms.2);
    let vals = summary(set.data().iter().map(|&v| v as f64));
    println!("value       min={:.6} max={:.6} mean={:.6}", vals.0, vals.1, vals.2);
    let Some(labels) = set.labels() else {
        return Ok(());
    };
    let partition = match &a.seed {
        Some(p) => {
            let seed = load_embeddings(p, DatasetRole::Seed)?;
            let l = seed.labels().ok_or(Error::Core(mak_core::Error::MissingLabels("--seed")))?;
            GroupPartition::from_seed_labels(l)
        }
        None => GroupPartition::from_seed_labels(labels),
    };
    println!("classes     {}", labels.iter().collect::<std::collections::BTreeSet<_>>().len());
    println!("group shares");
    print_groups(labels, &partition);
    if let Some(path) = &a.losses {
        let table = load_loss_table(path)?;
        let phi = phi_metric(&table, labels, &partition, 0.10)?;
        println!("phi (top 10% by loss)");
        for (g, v) in phi {
            println!("  {:<8}{v:.4}", g.name());
        }
    }
    Ok(())
}

fn inspect_losses(table: &LossTable) {
    println!("losses      n={} repeats={} raw={}", table.len(), table.repeats(), table.raw().is_some());
    let e = summary(table.ecle().iter().map(|&v| v as f64));
    println!("ecle        min={:.6} max={:.6} mean={:.6}", e.0, e.1, e.2);
}

fn inspect_json(path: &Path, bytes: &[u8]) -> Result<()> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::parse(path, format!("not a MAK file or JSON: {e}")))?;
    let parse = |e: serde_json::Error| Error::parse(path, e.to_string());
    if value.get("objective_terms").is_some() {
        let r: ResultFile = serde_json::from_value(value).map_err(parse)?;
        println!("result      strategy={} selected={}", r.config.strategy, r.selected.len());
        let o = &r.objective_terms;
        println!("objective   tailness={} proximity={} coverage_radius={} value={}", o.tailness, o.proximity, o.coverage_radius, o.value);
        if !o.proximity_defined {
            println!("            proximity undefined for an empty selection");
        }
        for w in &r.warnings {
            println!("warning     {w:?}");
        }
    } else if value.get("comparison").is_some() {
        let c: ComparisonFile = serde_json::from_value(value).map_err(parse)?;
        print!("{}", comparison_table(&c.comparison));
    } else if value.get("command").is_some() {
        let m: RunManifest = serde_json::from_value(value).map_err(parse)?;
        println!("manifest    command={} inputs={} outputs={}", m.command, m.inputs.len(), m.outputs.len());
        for i in &m.inputs {
            println!("  {} {} {}", i.role, i.sha256, i.path);
        }
    } else {
        return Err(Error::parse(path, "unrecognized JSON document"));
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let bytes = fs::read(&a.path).map_err(|e| Error::read(&a.path, e))?;
    if bytes.starts_with(crate::emb::MAGIC) || a.path.extension().is_some_and(|e| e == "csv") {
        inspect_embeddings(&a)
    } else if bytes.starts_with(crate::loss::MAGIC) {
        inspect_losses(&crate::loss::decode(&bytes, &a.path)?);
        Ok(())
    } else {
        inspect_json(&a.path, &bytes)
    }
}
