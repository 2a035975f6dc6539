use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use base64::Engine;
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use logofuse_core::features::save_blocks;
use logofuse_core::pipeline::{extract_manifest, ExtractConfig};
use logofuse_core::preprocess::{content_bounds, fill_text_region_with, RasterImage, TextMask, DEFAULT_TOLERANCE};
use logofuse_core::store::{
    generate_synthetic_corpus, load_manifest, save_manifest, split_train_test, validate_manifest, SyntheticSpec,
};
use logofuse_core::taxonomy::parse_code;
use logofuse_core::{CharacteristicKind, FeatureBlock, QueryWeights, Taxonomy};
use logofuse_server::snapshot::{BuildOptions, LpInputs, Snapshot, INDEX_META};
use logofuse_server::wire::{ClassifyRequest, EvaluateRequest, Method, Query, SearchRequest};
use logofuse_server::{ops, router, AppState};

#[derive(Parser)]
#[command(name = "logofuse", version, about = "Logo classification and weighted similarity search")]
struct Cli {
    /// Data root that relative paths resolve against.
    #[arg(long, env = "LOGOFUSE_DATA", default_value = ".", global = true)]
    data: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the label taxonomy.
    Taxonomy {
        #[command(subcommand)]
        command: TaxonomyCommand,
    },
    /// Crop the uniform border and fill a text mask.
    Preprocess {
        input: PathBuf,
        #[arg(long)]
        crop: bool,
        #[arg(long)]
        fill_mask: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a manifest and optionally write its valid records.
    Ingest {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a synthetic logo corpus.
    Synth {
        /// JSON corpus spec; overrides the flags below.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        logos: usize,
        #[arg(long, default_value_t = 5)]
        groups: usize,
        #[arg(long, default_value_t = 10)]
        per_group: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reassign train and test splits.
    Split {
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output manifest; the input is rewritten when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract baseline features into one embedding store per kind.
    Extract {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        extract: ExtractArgs,
    },
    /// Build an index directory.
    Index {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory of stores written by `extract`; extracts when omitted.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Additional embedding stores, such as neural codes.
        #[arg(long, num_args = 1..)]
        embeddings: Vec<PathBuf>,
        /// Kinds to train label powerset models for.
        #[arg(long, value_delimiter = ',')]
        train_lp: Vec<String>,
        #[arg(long, value_enum, default_value = "fused")]
        lp_inputs: LpInputsArg,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        extract: ExtractArgs,
    },
    /// Weighted kNN search; the query is a logo id or an image path.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, default_value_t = 9)]
        k: usize,
        query: String,
    },
    /// Suggest labels for a logo id or an image path.
    Classify {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        kind: Vec<String>,
        #[arg(long, value_enum, default_value = "knn")]
        method: MethodArg,
        #[arg(long, default_value_t = 9)]
        k: usize,
        #[arg(long, default_value_t = ops::DEFAULT_FLOOR)]
        floor: f64,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        preset: Option<String>,
        query: String,
    },
    /// Score a prediction CSV (logo-id,label-id,score) and print JSON metrics.
    Evaluate {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Truth CSV (logo-id,label-id); the index annotations otherwise.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Near-duplicate groups (JSON) for NAR on the index.
        #[arg(long)]
        groups: Option<PathBuf>,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Directory of built UI assets.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TaxonomyCommand {
    /// Show how Vienna codes are grouped.
    Explain { codes: Vec<String> },
    /// List a label space, or all of them.
    Labels {
        #[arg(long)]
        kind: Option<String>,
    },
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: u8,
    /// Blocks to compute.
    #[arg(long, value_delimiter = ',', default_value = "color,shape,text,generic")]
    kinds: Vec<String>,
    /// Feed the generic block the text-free image.
    #[arg(long)]
    generic_text_free: bool,
}

impl ExtractArgs {
    fn config(&self) -> Result<ExtractConfig> {
        Ok(ExtractConfig {
            tolerance: self.tolerance,
            kinds: parse_kinds(&self.kinds)?,
            generic_text_free: self.generic_text_free,
            ..ExtractConfig::default()
        })
    }
}

#[derive(Args)]
struct WeightArgs {
    /// Raw weights, e.g. `color=0.3,shape=0.7`.
    #[arg(long, conflicts_with = "preset")]
    weights: Option<String>,
    /// Named preset, e.g. `color30-shape70`.
    #[arg(long)]
    preset: Option<String>,
}

impl WeightArgs {
    fn raw(&self) -> Result<Option<BTreeMap<String, f64>>> {
        self.weights.as_deref().map(raw_weights).transpose()
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Knn,
    Brknn,
    Lp,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum LpInputsArg {
    Fused,
    Own,
}

fn parse_kinds(names: &[String]) -> Result<Vec<CharacteristicKind>> {
    Ok(names.iter().map(|k| k.parse()).collect::<Result<_, _>>()?)
}

fn raw_weights(spec: &str) -> Result<BTreeMap<String, f64>> {
    let w = QueryWeights::parse(spec)?;
    Ok(w.as_map().iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

/// Prints pretty JSON; a closed pipe (`| head`) is not an error.
fn print_json(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

/// A logo id, or an image file sent as an upload.
fn parse_query(text: &str, data: &Path) -> Result<Query> {
    if let Ok(id) = text.parse() {
        return Ok(Query::Id(id));
    }
    let bytes = fs::read(data.join(text)).with_context(|| format!("reading query image {text}"))?;
    Ok(Query::Image(base64::engine::general_purpose::STANDARD.encode(bytes)))
}

fn load_snapshot(dir: &Path) -> Result<Snapshot> {
    Snapshot::load(dir, Taxonomy::embedded()).with_context(|| format!("loading index {}", dir.display()))
}

fn groups_file(path: &Path) -> Result<Vec<Vec<u64>>> {
    let value: serde_json::Value = serde_json::from_slice(&fs::read(path)?)?;
    let groups = match value {
        serde_json::Value::Object(mut o) => o.remove("groups").context("no \"groups\" field")?,
        other => other,
    };
    Ok(serde_json::from_value(groups)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();
    let data = cli.data.as_path();
    let at = |p: &Path| data.join(p);

    match cli.command {
        Command::Taxonomy { command } => match command {
            TaxonomyCommand::Explain { codes } => {
                for text in codes {
                    println!("{}", Taxonomy::embedded().explain(&parse_code(&text)?));
                }
            }
            TaxonomyCommand::Labels { kind } => print_json(&ops::labels(kind.as_deref(), Taxonomy::embedded())?)?,
        },
        Command::Preprocess {
            input,
            crop,
            fill_mask,
            tolerance,
            out,
        } => {
            let mut img = RasterImage::load(at(&input))?;
            let mut mask = fill_mask.map(|p| TextMask::load(at(&p))).transpose()?;
            if crop {
                if let Some(rect) = content_bounds(&img, tolerance) {
                    img = img.crop(rect);
                    mask = mask.map(|m| m.crop(rect));
                }
            }
            if let Some(m) = &mask {
                let (filled, mode) = fill_text_region_with(&img, m, tolerance)?;
                info!("text fill: {mode:?}");
                img = filled;
            }
            img.save(at(&out))?;
        }
        Command::Ingest { manifest, out } => {
            let report = validate_manifest(&fs::read_to_string(at(&manifest))?);
            print_json(&report)?;
            let (m, _) = load_manifest(at(&manifest))?;
            if let Some(out) = out {
                save_manifest(&m, at(&out))?;
            }
        }
        Command::Synth {
            spec,
            logos,
            groups,
            per_group,
            seed,
            out,
        } => {
            let spec: SyntheticSpec = match spec {
                Some(p) => serde_json::from_slice(&fs::read(at(&p))?)?,
                None => SyntheticSpec::new(logos, seed).with_groups(groups, per_group),
            };
            let corpus = generate_synthetic_corpus(&spec, at(&out))?;
            eprintln!("wrote {} logos to {}", corpus.colors.len(), at(&out).display());
        }
        Command::Split {
            manifest,
            ratio,
            seed,
            out,
        } => {
            let (m, _) = load_manifest(at(&manifest))?;
            let split = split_train_test(&m, ratio, seed)?;
            save_manifest(&split, at(out.as_ref().unwrap_or(&manifest)))?;
        }
        Command::Extract { manifest, out, extract } => {
            let (m, _) = load_manifest(at(&manifest))?;
            let features = extract_manifest(&m, &extract.config()?)?;
            let dir = at(&out);
            fs::create_dir_all(&dir)?;
            for kind in extract.config()?.kinds {
                let blocks: Vec<(u64, &FeatureBlock)> =
                    features.iter().filter_map(|(id, f)| f.get(kind).map(|b| (*id, b))).collect();
                save_blocks(dir.join(format!("{kind}.ncf")), kind, true, blocks)?;
            }
            eprintln!("extracted {} logos into {}", features.len(), dir.display());
        }
        Command::Index {
            manifest,
            out,
            features,
            embeddings,
            train_lp,
            lp_inputs,
            trees,
            seed,
            extract,
        } => {
            let mut opts = BuildOptions::new(at(&manifest));
            opts.features = features.map(|p| at(&p));
            opts.embeddings = embeddings.iter().map(|p| at(p)).collect();
            opts.extract = extract.config()?;
            opts.train_lp = parse_kinds(&train_lp)?;
            opts.lp_inputs = match lp_inputs {
                LpInputsArg::Fused => LpInputs::Fused,
                LpInputsArg::Own => LpInputs::Own,
            };
            opts.trees = trees;
            if let Some(s) = seed {
                opts.seed = s;
            }
            let (mut snapshot, report) = Snapshot::build(&opts, Taxonomy::embedded())?;
            snapshot.save(&at(&out))?;
            print_json(&report)?;
        }
        Command::Search {
            index,
            weights,
            k,
            query,
        } => {
            let snap = load_snapshot(&at(&index))?;
            let req = SearchRequest {
                query: parse_query(&query, data)?,
                weights: weights.raw()?,
                preset: match (&weights.weights, &weights.preset) {
                    (None, None) => Some("color30-shape70".into()),
                    (_, p) => p.clone(),
                },
                k: Some(k),
                method: None,
            };
            print_json(&ops::search(&snap, &req, Taxonomy::embedded())?)?;
        }
        Command::Classify {
            index,
            kind,
            method,
            k,
            floor,
            weights,
            preset,
            query,
        } => {
            let snap = load_snapshot(&at(&index))?;
            let req = ClassifyRequest {
                query: parse_query(&query, data)?,
                kinds: kind,
                method: match method {
                    MethodArg::Knn => Method::Knn,
                    MethodArg::Brknn => Method::Brknn,
                    MethodArg::Lp => Method::Lp,
                },
                k: Some(k),
                weights: weights.as_deref().map(raw_weights).transpose()?,
                preset,
                floor: Some(floor),
            };
            print_json(&ops::classify(&snap, &req, Taxonomy::embedded())?)?;
        }
        Command::Evaluate {
            kind,
            predictions,
            truth,
            index,
            groups,
            weights,
        } => {
            if predictions.is_none() && groups.is_none() {
                bail!("give --predictions, --groups or both");
            }
            let snap = index.map(|p| load_snapshot(&at(&p))).transpose()?;
            let req = EvaluateRequest {
                kind,
                predictions: predictions.map(|p| fs::read_to_string(at(&p))).transpose()?.unwrap_or_default(),
                truth: truth.map(|p| fs::read_to_string(at(&p))).transpose()?,
                groups: groups.map(|p| groups_file(&at(&p))).transpose()?,
                weights: weights.raw()?,
                preset: weights.preset.clone(),
            };
            print_json(&ops::evaluate(snap.as_ref(), &req)?)?;
        }
        Command::Serve { port, host, index, ui } => {
            let mut state = AppState::new(data);
            if let Some(dir) = index.map(|p| at(&p)) {
                if dir.join(INDEX_META).is_file() {
                    let snap = load_snapshot(&dir)?;
                    info!("loaded {} logos from {}", snap.index.len(), dir.display());
                    state = state.with_snapshot(snap);
                } else {
                    info!("{} holds no index yet; POST /index/build to create one", dir.display());
                }
            }
            let ui = ui.map(|p| at(&p));
            let app = router(Arc::new(state), ui.as_deref());
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            tokio::runtime::Runtime::new()?.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                info!("listening on http://{addr}");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
    }
    Ok(())
}
