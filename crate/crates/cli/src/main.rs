use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use choiceprobe::audit::audit;
use choiceprobe::calibration::calibrate;
use choiceprobe::probes::perturb_with_pool;
use choiceprobe::runner::{self, measure, render_instance, sample_for_inspection, ExperimentConfig, MeasureInput};
use choiceprobe::scoring::{read_dump, write_dump, FileScorer};
use choiceprobe::simtext::DEFAULT_DIMENSION;
use choiceprobe::{
    load_benchmark, read_canonical, write_canonical, Benchmark, EmbeddingProvider, InstanceSet, ProbeKind, ProbeSpec,
    Sampling, Scorer, ScorerSpec,
};

#[derive(Parser)]
#[command(name = "choiceprobe", version, about = "Confusion probes for multiple-choice scorers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a benchmark's public files to the canonical JSON-lines format.
    Ingest {
        #[arg(long)]
        benchmark: Benchmark,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Field override, `logical=actual`; repeatable.
        #[arg(long = "field", value_parser = parse_pair)]
        fields: Vec<(String, String)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a probe to a canonical file.
    Perturb {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        probe: ProbeArgs,
        /// Perturb a seeded subsample of this many instances.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a canonical file and write a confidence dump.
    Score {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute metrics from origins, perturbed instances and their dumps.
    Measure {
        /// Canonical file with the origins.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        perturbed: PathBuf,
        /// Dump for the origins.
        #[arg(long)]
        pre: PathBuf,
        /// Dump for the perturbed instances.
        #[arg(long)]
        post: PathBuf,
        /// Wrong-Question runs: dump for the matching No-Question instances.
        #[arg(long)]
        no_question: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn and evaluate a MaxProb threshold.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label balance, and with a scorer, length and overlap statistics.
    Audit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scorer: Option<String>,
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        endpoint: Option<String>,
        /// CSV output; JSON goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a multi-trial experiment.
    Run(RunArgs),
    /// Print a seeded sample of instances for manual checking.
    Sample {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = runner::DEFAULT_INSPECTION_SIZE)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct ProbeArgs {
    #[arg(long)]
    probe: Option<ProbeKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sampling: Option<Sampling>,
    #[arg(long)]
    disjoint: bool,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ScorerArgs {
    /// uniform, oracle, lexical, noisy, file or remote.
    #[arg(long)]
    scorer: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    concentration: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file mirroring the experiment config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<Benchmark>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeArgs,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .ok_or_else(|| format!("expected `key=value`, got `{s}`"))
}

impl ProbeArgs {
    fn spec(&self, seed: u64) -> Result<ProbeSpec> {
        let kind = self.probe.context("--probe is required")?;
        let spec = ProbeSpec {
            kind,
            n: self.n,
            sampling: match (kind, self.sampling) {
                (ProbeKind::ChoiceParalysis, None) => Some(Sampling::Random),
                (_, s) => s,
            },
            disjoint_prompt: self.disjoint,
            seed,
        };
        spec.validate(None)?;
        Ok(spec)
    }

    fn embedder(&self, spec: &ProbeSpec) -> Result<Option<EmbeddingProvider>> {
        if spec.sampling != Some(Sampling::Heuristic) {
            return Ok(None);
        }
        Ok(Some(match &self.embeddings {
            Some(p) => EmbeddingProvider::load(p)?,
            None => EmbeddingProvider::hashed_bow(DEFAULT_DIMENSION)?,
        }))
    }
}

fn scorer_spec(
    kind: &str,
    endpoint: Option<&str>,
    dump: Option<&Path>,
    epsilon: Option<f64>,
    concentration: Option<f64>,
    batch_size: Option<usize>,
    seed: u64,
) -> Result<ScorerSpec> {
    Ok(match kind.to_ascii_lowercase().as_str() {
        "uniform" => ScorerSpec::Uniform,
        "oracle" => ScorerSpec::Oracle { epsilon: epsilon.unwrap_or(0.1) },
        "lexical" => ScorerSpec::Lexical,
        "noisy" => ScorerSpec::Noisy { seed, concentration: concentration.unwrap_or(1.0) },
        "file" => ScorerSpec::File { path: dump.context("--dump is required for the file scorer")?.to_path_buf() },
        "remote" => ScorerSpec::Remote {
            endpoint: endpoint.context("--endpoint is required for the remote scorer")?.to_string(),
            batch_size: batch_size.unwrap_or(32),
            timeout_secs: 60.0,
            max_in_flight: 2,
        },
        other => bail!("unknown scorer `{other}`"),
    })
}

impl ScorerArgs {
    fn spec(&self, seed: u64) -> Result<Option<ScorerSpec>> {
        self.scorer
            .as_deref()
            .map(|k| {
                scorer_spec(
                    k,
                    self.endpoint.as_deref(),
                    self.dump.as_deref(),
                    self.epsilon,
                    self.concentration,
                    self.batch_size,
                    seed,
                )
            })
            .transpose()
    }
}

fn write_or_print(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<InstanceSet> {
    read_canonical(path).with_context(|| format!("reading {}", path.display()))
}

fn run_config(args: RunArgs) -> Result<ExperimentConfig> {
    let mut base = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<serde_json::Value>(&text)?
        }
        None => serde_json::json!({}),
    };
    let obj = base.as_object_mut().context("config must be a JSON object")?;
    let probe = if args.probe.probe.is_some() {
        Some(serde_json::to_value(args.probe.spec(0)?)?)
    } else {
        obj_probe_overrides(obj.get("probe"), &args.probe)?
    };
    let overrides = [
        ("benchmark", args.benchmark.map(serde_json::to_value).transpose()?),
        ("data", args.data.as_ref().map(serde_json::to_value).transpose()?),
        ("labels", args.labels.as_ref().map(serde_json::to_value).transpose()?),
        ("trials", args.trials.map(Into::into)),
        ("subsample", args.subsample.map(Into::into)),
        ("master_seed", args.seed.map(Into::into)),
        ("output_dir", args.out.as_ref().map(serde_json::to_value).transpose()?),
        ("embeddings", args.probe.embeddings.as_ref().map(serde_json::to_value).transpose()?),
        ("probe", probe),
        ("scorer", args.scorer.spec(args.seed.unwrap_or(0))?.map(serde_json::to_value).transpose()?),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            obj.insert(key.to_string(), v);
        }
    }
    let config: ExperimentConfig = serde_json::from_value(base).context("incomplete experiment config (see --help)")?;
    Ok(config)
}

/// Applies `--n`, `--sampling` and `--disjoint` to a probe taken from the file.
fn obj_probe_overrides(probe: Option<&serde_json::Value>, args: &ProbeArgs) -> Result<Option<serde_json::Value>> {
    let Some(probe) = probe else { return Ok(None) };
    let mut spec: ProbeSpec = serde_json::from_value(probe.clone())?;
    if let Some(n) = args.n {
        spec.n = Some(n);
    }
    if let Some(s) = args.sampling {
        spec.sampling = Some(s);
    }
    if args.disjoint {
        spec.disjoint_prompt = true;
    }
    Ok(Some(serde_json::to_value(spec)?))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest { benchmark, data, labels, fields, out } => {
            let map = (!fields.is_empty()).then(|| fields.into_iter().collect());
            let set = load_benchmark(benchmark, &data, labels.as_deref(), map.as_ref())?;
            write_canonical(&set, &out)?;
            eprintln!("{} instances -> {}", set.len(), out.display());
        }
        Command::Perturb { data, probe, subsample, seed, out } => {
            let set = read(&data)?;
            let spec = probe.spec(seed)?;
            let embedder = probe.embedder(&spec)?;
            let origins = match subsample {
                Some(k) => runner::sample_positions(set.len(), k, seed)?
                    .into_iter()
                    .map(|i| set.instances[i].clone())
                    .collect(),
                None => set.instances.clone(),
            };
            let perturbed = perturb_with_pool(&origins, &set, &spec, embedder.as_ref())?;
            write_canonical(&perturbed, &out)?;
            eprintln!("{} perturbed instances -> {}", perturbed.len(), out.display());
        }
        Command::Score { data, scorer, out } => {
            let set = read(&data)?;
            let spec = scorer.spec(0)?.context("--scorer is required")?;
            let sets = spec.build()?.score(&set.instances)?;
            write_dump(&out, &sets)?;
            eprintln!("{} confidence sets -> {}", sets.len(), out.display());
        }
        Command::Measure { data, perturbed, pre, post, no_question, out } => {
            let origins = read(&data)?;
            let perturbed = read(&perturbed)?;
            let pre = FileScorer::open(&pre)?.score(&origins.instances)?;
            let post = FileScorer::open(&post)?.score(&perturbed.instances)?;
            let nq = match &no_question {
                Some(p) => {
                    // the No-Question ids mirror the Wrong-Question ones
                    let records = read_dump(p)?;
                    let spec = |inst: &choiceprobe::Instance| {
                        let l = inst.probe.as_ref().expect("measured instances carry lineage");
                        ProbeSpec::no_question(l.seed).perturbed_id(&l.origin)
                    };
                    let scorer = FileScorer::from_records(records);
                    let sets = perturbed
                        .instances
                        .iter()
                        .map(|i| {
                            let mut twin = i.clone();
                            twin.id = spec(i);
                            twin
                        })
                        .collect::<Vec<_>>();
                    Some(scorer.score(&sets)?)
                }
                None => None,
            };
            let metrics = measure(&MeasureInput {
                origins: &origins.instances,
                pre: &pre,
                perturbed: &perturbed.instances,
                post: &post,
                no_question: nq.as_deref(),
            })?;
            let mut value = serde_json::to_value(&metrics)?;
            value["scalars"] = serde_json::to_value(metrics.scalars())?;
            write_or_print(&value, out.as_deref())?;
        }
        Command::Calibrate { data, probe, scorer, seed, out } => {
            let set = read(&data)?;
            let spec = probe.spec(seed)?;
            let embedder = probe.embedder(&spec)?;
            let scorer = scorer.spec(seed)?.context("--scorer is required")?.build()?;
            let report = calibrate(&set, &spec, scorer.as_ref(), embedder.as_ref(), seed)?;
            write_or_print(&serde_json::to_value(&report)?, out.as_deref())?;
        }
        Command::Audit { data, scorer, dump, endpoint, out } => {
            let set = read(&data)?;
            let sets = match scorer {
                Some(k) => {
                    let spec = scorer_spec(&k, endpoint.as_deref(), dump.as_deref(), None, None, None, 0)?;
                    Some(spec.build()?.score(&set.instances)?)
                }
                None => None,
            };
            let report = audit(&set, sets.as_deref())?;
            if let Some(p) = &out {
                report.write_csv(p)?;
            }
            write_or_print(&serde_json::to_value(&report)?, None)?;
        }
        Command::Run(args) => {
            let config = run_config(args)?;
            let report = runner::run(&config)?;
            let summary: BTreeMap<_, _> =
                report.aggregate.iter().map(|(k, a)| (k.clone(), (a.mean, a.stderr))).collect();
            write_or_print(&serde_json::to_value(summary)?, None)?;
            eprintln!(
                "{}/{} trials completed -> {}",
                report.completed_trials,
                config.trials,
                config.output_dir.join("report.json").display()
            );
            if report.partial {
                std::process::exit(2);
            }
        }
        Command::Sample { data, k, seed } => {
            let set = read(&data)?;
            for inst in sample_for_inspection(&set.instances, k, seed)? {
                println!("{}", render_instance(inst));
            }
        }
    }
    Ok(())
}
