//! `lodkit` experiment driver.
//!
//! Exit codes: 0 success, 1 validation failure (bad arguments or a failed
//! check), 2 data error (missing or unreadable inputs).

mod output;
mod store;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lodkit::experiment::{
    higher_sizes, oracle_report, patch_datasets, run_stack, run_two_layer, table2_report, trend_checks, DataSource,
    StackConfig, TwoLayerConfig, DEFAULT_SYNTHETIC_STRENGTH,
};
use lodkit::ingestion::{default_patch_locations, find_mnist_images, parse_patch_list, read_idx_file, Quantization};
use lodkit::training::TrainConfig;
use lodkit::ModelKind;

use store::RunManifest;

pub enum Failure {
    Validation(String),
    Data(String),
}

impl Failure {
    fn data(e: lodkit::Error) -> Self {
        Failure::Data(e.to_string())
    }

    fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
        move |e| Failure::Data(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Data(m) => f.write_str(m),
        }
    }
}

fn invalid(e: lodkit::Error) -> Failure {
    Failure::Validation(e.to_string())
}

#[derive(Parser)]
#[command(name = "lodkit", version, about = "LOD and two-layer generative model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scores of the two example assignments of six states to three.
    Table2,
    /// Exhaustive search over all 729 deterministic assignments.
    Oracle,
    /// Train and score SL/IL/CI/ICI models on every patch set.
    TwoLayer(TwoLayerArgs),
    /// Stack higher SL models on lower models saved by `two-layer`.
    Stack(StackArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DataArg {
    /// MNIST if the images are found, synthetic otherwise.
    Auto,
    Mnist,
    Synthetic,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Dirichlet concentration of random initial tables.
    #[arg(long, default_value_t = 1.0)]
    init_concentration: f64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            restarts: self.restarts,
            seed: self.seed,
            init_concentration: self.init_concentration,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct TwoLayerArgs {
    #[arg(long, value_enum, default_value = "auto")]
    data: DataArg,
    /// Directory holding train-images-idx3-ubyte[.gz].
    #[arg(long, env = "LODKIT_DATA_DIR", default_value = "data/mnist")]
    mnist_dir: PathBuf,
    #[arg(long, default_value = "sl,il,ci,ici")]
    models: String,
    /// Latent sizes, as `a..b`, `a..=b` or a comma list.
    #[arg(long, default_value = "1..6")]
    ny: String,
    /// Patch top-left corners `row,col;row,col;...` (2x2, three levels).
    #[arg(long)]
    patches: Option<String>,
    /// Correlation strength of the synthetic fallback data.
    #[arg(long, default_value_t = DEFAULT_SYNTHETIC_STRENGTH)]
    strength: f64,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value = "out/two-layer")]
    out: PathBuf,
}

#[derive(Args)]
struct StackArgs {
    /// Output directory of a `two-layer` run.
    #[arg(long, default_value = "out/two-layer")]
    from: PathBuf,
    /// Lower sizes to stack on.
    #[arg(long, default_value = "3..6")]
    ny: String,
    /// Random bijection candidates per SL lower model.
    #[arg(long, default_value_t = 20)]
    candidates: usize,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value = "out/stack")]
    out: PathBuf,
}

fn parse_sizes(s: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Validation(format!("bad size list {s:?}; use a..b, a..=b or a,b,c"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let sizes: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        (num(a)?..=num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if sizes.is_empty() {
        return Err(bad());
    }
    Ok(sizes)
}

fn parse_kinds(s: &str) -> Result<Vec<ModelKind>, Failure> {
    s.split(',').map(|t| t.trim().parse().map_err(invalid)).collect()
}

fn cmd_table2() -> Result<(), Failure> {
    let checks = table2_report().map_err(invalid)?;
    let mut ok = true;
    for c in &checks {
        println!(
            "{} {:<7} = {:.6} (expected {} ± {})",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.expected,
            c.tolerance
        );
        ok &= c.passed();
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Validation("table 2 values out of tolerance".into()))
    }
}

fn show_partitions(parts: &[Vec<Vec<usize>>]) -> String {
    parts
        .iter()
        .map(|p| {
            p.iter()
                .map(|b| {
                    format!(
                        "{{{}}}",
                        b.iter().map(|x| format!("x{}", x + 1)).collect::<Vec<_>>().join(",")
                    )
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn cmd_oracle() -> Result<(), Failure> {
    let r = oracle_report().map_err(invalid)?;
    println!("assignments: {}", r.assignments);
    println!("min LOD {:.6}: {}", r.min_lod, show_partitions(&r.min_lod_partitions));
    println!("max MI  {:.6}: {}", r.max_mi, show_partitions(&r.max_mi_partitions));
    let lod_ok = r.lod_matches() && (r.min_lod - 0.0137).abs() <= 5e-4;
    let mi_ok = r.mi_matches() && (r.max_mi - 1.0986).abs() <= 1e-3;
    println!(
        "{} best-LOD assignment is {{x1,x2}} {{x3,x4}} {{x5,x6}}",
        if lod_ok { "PASS" } else { "FAIL" }
    );
    println!(
        "{} best-MI assignment is {{x1,x6}} {{x2,x5}} {{x3,x4}}",
        if mi_ok { "PASS" } else { "FAIL" }
    );
    if lod_ok && mi_ok {
        Ok(())
    } else {
        Err(Failure::Validation(
            "oracle optimum differs from the example assignments".into(),
        ))
    }
}

fn cmd_two_layer(a: &TwoLayerArgs) -> Result<(), Failure> {
    let patches = match &a.patches {
        Some(s) => parse_patch_list(s).map_err(invalid)?,
        None => default_patch_locations(),
    };
    let mnist = find_mnist_images(&a.mnist_dir);
    let (data, images, description) = match (a.data, mnist) {
        (DataArg::Mnist | DataArg::Auto, Some(p)) => {
            let im = read_idx_file(&p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            (DataSource::Mnist, Some(im), format!("mnist:{}", p.display()))
        }
        (DataArg::Mnist, None) => {
            return Err(Failure::Data(format!(
                "no MNIST training images in {}; download train-images-idx3-ubyte.gz from \
                 https://storage.googleapis.com/cvdf-datasets/mnist/ into that directory, \
                 set LODKIT_DATA_DIR, or use --data synthetic",
                a.mnist_dir.display()
            )))
        }
        (DataArg::Auto | DataArg::Synthetic, _) => {
            if matches!(a.data, DataArg::Auto) {
                eprintln!(
                    "note: no MNIST images in {}, using synthetic data",
                    a.mnist_dir.display()
                );
            }
            (
                DataSource::Synthetic { strength: a.strength },
                None,
                "synthetic".to_string(),
            )
        }
    };
    let config = TwoLayerConfig {
        kinds: parse_kinds(&a.models)?,
        sizes: parse_sizes(&a.ny)?,
        patches,
        quantization: Quantization::EqualWidth,
        data,
        train: a.train.config(),
    };
    config.validate().map_err(invalid)?;
    let fp = store::fingerprint(&config);
    let datasets = patch_datasets(&config, images.as_ref()).map_err(Failure::data)?;
    drop(images);
    eprintln!(
        "training {} models ({} patch sets x {} kinds x {} sizes, {} restarts) [{fp}]",
        config.patches.len() * config.kinds.len() * config.sizes.len(),
        config.patches.len(),
        config.kinds.len(),
        config.sizes.len(),
        config.train.restarts
    );
    let res = run_two_layer(&config, &datasets).map_err(Failure::data)?;

    std::fs::create_dir_all(&a.out).map_err(Failure::io(&a.out))?;
    output::write_raw(&a.out.join("two_layer_raw.csv"), &res.rows, &fp)?;
    output::write_adjusted(&a.out.join("two_layer_adjusted.csv"), &res.adjusted, &fp)?;
    output::write_summary(&a.out.join("two_layer_summary.csv"), &res.summary, &fp)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        fingerprint: fp.clone(),
        data_description: description,
        config,
    };
    store::save_run(&a.out, &manifest, &datasets, &res.models)?;

    for t in trend_checks(&res.summary) {
        println!("{} {}: {}", if t.passed { "OK  " } else { "WARN" }, t.name, t.detail);
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_stack(a: &StackArgs) -> Result<(), Failure> {
    let manifest = store::load_manifest(&a.from)?;
    let sizes = parse_sizes(&a.ny)?;
    if let Some(s) = sizes.iter().find(|&&s| higher_sizes(s).is_empty()) {
        return Err(Failure::Validation(format!(
            "N_y={s} leaves no higher size 2..=2^(N_y-2)"
        )));
    }
    let n_patches = manifest.config.patches.len();
    let wanted: Vec<(ModelKind, usize, usize)> = ModelKind::ALL
        .iter()
        .flat_map(|&k| sizes.iter().flat_map(move |&s| (0..n_patches).map(move |n| (k, s, n))))
        .collect();
    let datasets = store::load_datasets(&a.from, n_patches)?;
    let lowers = store::load_lowers(&a.from, &wanted)?;
    let config = StackConfig {
        sizes,
        candidates: a.candidates,
        train: a.train.config(),
    };
    #[derive(serde::Serialize)]
    struct Provenance<'a> {
        lower_fingerprint: &'a str,
        stack: &'a StackConfig,
    }
    let fp = store::fingerprint(&Provenance {
        lower_fingerprint: &manifest.fingerprint,
        stack: &config,
    });
    eprintln!("stacking on {} lower models [{fp}]", lowers.len());
    let res = run_stack(&config, &lowers, &datasets).map_err(Failure::data)?;

    std::fs::create_dir_all(&a.out).map_err(Failure::io(&a.out))?;
    output::write_stack(&a.out.join("stack.csv"), &res.rows, &fp)?;
    output::write_correlations(&a.out.join("correlations.csv"), &res.correlations, &fp)?;
    output::write_bijections(&a.out.join("bijections.csv"), &res.bijections, &fp)?;
    let sidecar = serde_json::json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "fingerprint": fp,
        "lower_run": manifest,
        "stack": config,
    });
    let p = a.out.join("stack.json");
    std::fs::write(&p, serde_json::to_string_pretty(&sidecar).expect("json")).map_err(Failure::io(&p))?;

    println!("{:<5} {:<6} {:>8} {:>10} {:>5}", "model", "score", "r", "p", "n");
    for c in &res.correlations {
        match c.result {
            Some(r) => println!(
                "{:<5} {:<6} {:>8.3} {:>10.4} {:>5}",
                c.kind.as_str(),
                c.score.as_str(),
                r.r,
                r.p_value,
                r.n
            ),
            None => println!(
                "{:<5} {:<6} {:>8} {:>10} {:>5}",
                c.kind.as_str(),
                c.score.as_str(),
                "-",
                "-",
                "-"
            ),
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Table2 => cmd_table2(),
        Command::Oracle => cmd_oracle(),
        Command::TwoLayer(a) => cmd_two_layer(a),
        Command::Stack(a) => cmd_stack(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
