//! `geowl`: batch front end for refinement, comparison, reconstruction,
//! counterexample search and grouping analysis.
//!
//! Machine-readable results go to stdout (or `--out`) as JSON; a one-line
//! human summary goes to stderr.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use geowl::geometry::{congruent, xyz, PointCloud, Tolerance, MAX_EXHAUSTIVE_NODES};
use geowl::grouping::{analyze_all_roots, analyze_root, GroupingReport, DEFAULT_BUDGET};
use geowl::reconstruct::{reconstruct, select_root, trick_statistics};
use geowl::refinement::{refine_to_stable, RefinementTranscript, Variant};
use geowl::search::{run_search, SearchConfig};

#[derive(Parser)]
#[command(name = "geowl", version, about = "Geometric WL refinement on 3D point clouds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Tick size used to quantize distances.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Keep input coordinates as given instead of scaling to unit diameter.
    #[arg(long)]
    raw: bool,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Refine a cloud to a stable coloring and write the transcript.
    Refine {
        cloud: PathBuf,
        #[arg(long, default_value = "3fwl")]
        variant: Variant,
        #[command(flatten)]
        common: Common,
    },
    /// Compare two clouds under each variant and the congruence oracle.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Repeatable; defaults to all four variants.
        #[arg(long = "variant")]
        variants: Vec<Variant>,
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild a cloud from a (3,FWL) transcript.
    Reconstruct {
        transcript: PathBuf,
        /// Write the reconstructed cloud as XYZ here; otherwise it is
        /// embedded in the JSON result.
        #[arg(long)]
        xyz: Option<PathBuf>,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a counterexample campaign.
    Search {
        /// JSON file with the SearchConfig schema. Without it, an exchange
        /// campaign over n = 5..=8 is run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Repeatable; overrides the config's variants.
        #[arg(long = "variant")]
        variants: Vec<Variant>,
        #[arg(long)]
        seed: Option<u64>,
        /// Candidate budget; overrides the config.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        eps: Option<f64>,
        /// Write the report here instead of stdout; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Edge-equality analysis of (3,WL) neighbor rows.
    Grouping {
        cloud: PathBuf,
        /// `best`, `all`, or a final color id.
        #[arg(long, default_value = "best")]
        root: String,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Refuse clouds larger than this.
        #[arg(long, default_value_t = 16)]
        max_n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Turn-over and common-edge statistics of a (3,FWL) refinement.
    Tricks {
        cloud: PathBuf,
        /// Only the root class reconstruction would use.
        #[arg(long)]
        best_root: bool,
        #[command(flatten)]
        common: Common,
    },
}

/// A failed run: exit code plus an optional JSON body for stdout.
struct Failure {
    code: u8,
    message: String,
    body: Option<Value>,
}

impl Failure {
    fn parse(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
            body: None,
        }
    }

    fn engine(message: impl ToString) -> Self {
        Failure {
            code: 3,
            message: message.to_string(),
            body: None,
        }
    }
}

type Outcome = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn load_cloud(path: &Path, common: &Common) -> Result<(PointCloud, Tolerance), Failure> {
    let tol = Tolerance::new(common.eps).map_err(Failure::parse)?;
    let (cloud, _) = xyz::parse(&read_text(path)?).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    let cloud = if common.raw { cloud } else { cloud.normalized() };
    cloud
        .validate(tol)
        .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    Ok((cloud, tol))
}

fn emit(out: Option<&Path>, value: &impl Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(Failure::engine)?;
    match out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Failure::engine(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn refine(path: &Path, variant: Variant, common: &Common) -> Result<RefinementTranscript, Failure> {
    let (cloud, tol) = load_cloud(path, common)?;
    refine_to_stable(&cloud, variant, tol).map_err(Failure::engine)
}

fn digest(t: &RefinementTranscript) -> Value {
    let f = t.fingerprint();
    json!({
        "variant": f.variant,
        "n": f.n,
        "rounds": f.rounds,
        "classes": f.histogram.len(),
        "derivation": f.derivation,
    })
}

fn cmd_refine(cloud: &Path, variant: Variant, common: &Common) -> Outcome {
    let t = refine(cloud, variant, common)?;
    eprintln!(
        "{variant}: n={} rounds={} classes={} {}",
        t.n(),
        t.rounds(),
        t.fingerprint().histogram.len(),
        &t.fingerprint().derivation[..16]
    );
    match &common.out {
        Some(p) => {
            fs::write(p, t.to_json()).map_err(|e| Failure::engine(format!("{}: {e}", p.display())))?;
            emit(None, &digest(&t))
        }
        None => {
            println!("{}", t.to_json());
            Ok(())
        }
    }
}

fn cmd_compare(a: &Path, b: &Path, variants: &[Variant], common: &Common) -> Outcome {
    let (ca, tol) = load_cloud(a, common)?;
    let (cb, _) = load_cloud(b, common)?;
    if ca.len() != cb.len() {
        let body = json!({ "error": "SizeMismatch", "n_a": ca.len(), "n_b": cb.len() });
        return Err(Failure {
            code: 4,
            message: format!("clouds have {} and {} points", ca.len(), cb.len()),
            body: Some(body),
        });
    }
    let variants = if variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        variants.to_vec()
    };
    let mut equal = BTreeMap::new();
    for &v in &variants {
        let fa = refine_to_stable(&ca, v, tol).map_err(Failure::engine)?;
        let fb = refine_to_stable(&cb, v, tol).map_err(Failure::engine)?;
        equal.insert(v, fa.fingerprint() == fb.fingerprint());
    }
    let oracle = if ca.len() > MAX_EXHAUSTIVE_NODES {
        "skipped"
    } else if congruent(&ca, &cb, tol).map_err(Failure::engine)?.is_some() {
        "congruent"
    } else {
        "non-congruent"
    };
    let fooled: Vec<Variant> = if oracle == "non-congruent" {
        equal.iter().filter(|&(_, &e)| e).map(|(&v, _)| v).collect()
    } else {
        Vec::new()
    };
    eprintln!(
        "oracle {oracle}; equal under {:?}",
        equal.iter().filter(|e| *e.1).map(|e| e.0.name()).collect::<Vec<_>>()
    );
    emit(
        common.out.as_deref(),
        &json!({
            "n": ca.len(),
            "fingerprints_equal": equal,
            "oracle": oracle,
            "counterexample": !fooled.is_empty(),
            "counterexample_for": fooled,
        }),
    )
}

fn cmd_reconstruct(path: &Path, xyz_out: Option<&Path>, out: Option<&Path>) -> Outcome {
    let t = RefinementTranscript::from_json(&read_text(path)?).map_err(Failure::parse)?;
    let r = match reconstruct(&t) {
        Ok(r) => r,
        Err(e) => {
            return Err(Failure {
                code: 5,
                message: e.to_string(),
                body: Some(json!({ "error": e.name(), "message": e.to_string() })),
            })
        }
    };
    let text = xyz::format(&r.cloud, &format!("reconstructed from {}", path.display()));
    eprintln!(
        "reconstructed {} points via {:?}, fingerprint match {:?}",
        r.cloud.len(),
        r.certificate.path,
        r.certificate.fingerprint_match
    );
    let mut body = json!({ "certificate": r.certificate });
    match xyz_out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::engine(format!("{}: {e}", p.display())))?,
        None => body["xyz"] = Value::String(text),
    }
    emit(out, &body)
}

struct SearchArgs<'a> {
    config: Option<&'a Path>,
    variants: &'a [Variant],
    seed: Option<u64>,
    budget: Option<u64>,
    eps: Option<f64>,
    out: Option<&'a Path>,
}

fn cmd_search(args: SearchArgs) -> Outcome {
    let mut cfg = match args.config {
        Some(p) => serde_json::from_str::<SearchConfig>(&read_text(p)?)
            .map_err(|e| Failure::parse(format!("{}: {e}", p.display())))?,
        None => SearchConfig::exchange(vec![Variant::WL2], 5, 8, 100_000),
    };
    if !args.variants.is_empty() {
        cfg.variants = args.variants.to_vec();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
        cfg.family.seed = s;
    }
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    if let Some(e) = args.eps {
        cfg.epsilon = e;
    }
    if let Some(o) = args.out {
        cfg.out = Some(o.display().to_string());
    }
    let report = run_search(&cfg).map_err(Failure::engine)?;
    let s = &report.summary;
    eprintln!(
        "{} sources, {} candidates, {} evaluated, counterexamples {:?}, budget exhausted: {}, {} ms",
        s.sources,
        s.candidates,
        s.evaluated,
        s.counterexamples
            .iter()
            .map(|(v, k)| format!("{v}={k}"))
            .collect::<Vec<_>>(),
        s.budget_exhausted,
        report.elapsed_ms
    );
    emit(cfg.out.as_deref().map(Path::new), &report)?;
    if cfg.trials > 0 && report.completed_trials() == 0 && s.budget_exhausted {
        return Err(Failure::engine("budget exhausted before any trial completed"));
    }
    Ok(())
}

fn cmd_grouping(path: &Path, root: &str, budget: u64, max_n: usize, common: &Common) -> Outcome {
    let (cloud, tol) = load_cloud(path, common)?;
    if cloud.len() > max_n {
        return Err(Failure {
            code: 4,
            message: format!("{} points exceed the cap of {max_n}", cloud.len()),
            body: Some(json!({ "error": "TooLarge", "n": cloud.len(), "max_n": max_n })),
        });
    }
    let t = refine_to_stable(&cloud, Variant::WL3, tol).map_err(Failure::engine)?;
    let reports: Vec<GroupingReport> = match root {
        "all" => analyze_all_roots(&t, Some(&cloud), budget).map_err(Failure::engine)?,
        "best" => {
            let color = select_root(&t).map_err(Failure::engine)?.color;
            vec![analyze_root(&t, color, Some(&cloud), budget).map_err(Failure::engine)?]
        }
        id => {
            let color = id
                .parse()
                .map_err(|_| Failure::parse(format!("bad root selector {id:?}")))?;
            vec![analyze_root(&t, color, Some(&cloud), budget).map_err(Failure::engine)?]
        }
    };
    for r in &reports {
        eprintln!(
            "root {:?}: {} feasible groupings, {} with new tetrahedra ({} realizable), {:?}",
            r.root.signature,
            r.stats.feasible_groupings,
            r.groupings_with_new_tetrahedra,
            r.realizable_findings,
            r.stats.status
        );
    }
    emit(
        common.out.as_deref(),
        &json!({
            "n": cloud.len(),
            "scope": "per-root local comparison; consistency across roots is not checked",
            "reports": reports,
        }),
    )
}

fn cmd_tricks(path: &Path, best_root: bool, common: &Common) -> Outcome {
    let (cloud, tol) = load_cloud(path, common)?;
    let t = refine_to_stable(&cloud, Variant::FWL3, tol).map_err(Failure::engine)?;
    let stats = trick_statistics(&t, !best_root).map_err(Failure::engine)?;
    eprintln!(
        "{} roots, {} externals, cases {:?}, {} turn-overs",
        stats.roots, stats.externals, stats.case_histogram, stats.turnovers
    );
    emit(common.out.as_deref(), &stats)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Refine { cloud, variant, common } => cmd_refine(cloud, *variant, common),
        Cmd::Compare { a, b, variants, common } => cmd_compare(a, b, variants, common),
        Cmd::Reconstruct { transcript, xyz, out } => cmd_reconstruct(transcript, xyz.as_deref(), out.as_deref()),
        Cmd::Search {
            config,
            variants,
            seed,
            budget,
            eps,
            out,
        } => cmd_search(SearchArgs {
            config: config.as_deref(),
            variants,
            seed: *seed,
            budget: *budget,
            eps: *eps,
            out: out.as_deref(),
        }),
        Cmd::Grouping {
            cloud,
            root,
            budget,
            max_n,
            common,
        } => cmd_grouping(cloud, root, *budget, *max_n, common),
        Cmd::Tricks {
            cloud,
            best_root,
            common,
        } => cmd_tricks(cloud, *best_root, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(body) = f.body {
                println!("{}", serde_json::to_string_pretty(&body).unwrap_or_default());
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
