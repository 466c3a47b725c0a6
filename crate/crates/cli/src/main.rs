use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nesy_rpm::bundle::{
    load_autoencoder, load_image_encoder, load_rule_bundle, save_autoencoder, save_image_encoder, save_rule_bundle,
    stage_dir, train_ae_stage, train_img_stage, train_rules_stage, Stage,
};
use nesy_rpm::config::RunConfig;
use nesy_rpm::dataset::{default_split, generate_shards, Dataset, SHARD_NAMES};
use nesy_rpm::fsio::write_atomic;
use nesy_rpm::model::{Configuration, Problem};
use nesy_rpm::renderer::{render_panel, render_problem_sheet};
use nesy_rpm::solver::{
    accuracy_table, evaluate, solve, EvalReport, Models, SolveMode, ACCURACY_CSV_HEADER, NET_CSV_HEADER,
};

const ARTIFACT_ENV: &str = "RPM_ARTIFACTS";

#[derive(Parser, Debug)]
#[command(
    name = "nesy-rpm",
    version,
    about = "Generate, train on, render and solve progressive-matrix puzzles"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the run configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `tau`.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Overrides `latent_dim`.
    #[arg(long, global = true)]
    latent_dim: Option<usize>,
    /// Overrides `raster_size`.
    #[arg(long, global = true)]
    raster_size: Option<usize>,
    /// Artifact root; defaults to $RPM_ARTIFACTS, then ./artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate train/val/test shards for one configuration.
    Gen {
        #[arg(value_parser = parse_config)]
        configuration: Configuration,
        /// Total problems across the three shards.
        #[arg(default_value_t = 10000)]
        count: usize,
        /// Explicit shard sizes `train,val,test` instead of a 60/20/20 split.
        #[arg(long, value_parser = parse_split)]
        split: Option<[usize; 3]>,
    },
    /// Train the autoencoder, the rule nets or the image encoder.
    Train {
        stage: TrainStage,
        #[arg(value_parser = parse_config)]
        configuration: Configuration,
        /// Directory holding `<configuration>/train.jsonl` and `val.jsonl`; defaults to the artifact root.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Print the chosen option of each problem.
    Solve {
        dataset: PathBuf,
        #[arg(long, default_value = "c")]
        mode: ModeArg,
        /// Model root; defaults to the artifact root.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Accuracy, rule-net F1 and rule-inference counts, as text and CSV.
    Eval {
        dataset: PathBuf,
        /// One or more of a, b, c.
        #[arg(long, value_delimiter = ',', default_value = "c")]
        mode: Vec<ModeArg>,
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Write PGM images of problems: 16 panels and one sheet each.
    Render {
        dataset: PathBuf,
        /// Problem indices `start..end` (end exclusive) or a single index.
        #[arg(long, default_value = "0..1", value_parser = parse_range)]
        range: (usize, usize),
    },
    /// Collect every stored evaluation into one accuracy table.
    Report,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrainStage {
    Ae,
    Rules,
    Img,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    A,
    B,
    C,
}

impl From<ModeArg> for SolveMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::A => SolveMode::ImageNeural,
            ModeArg::B => SolveMode::ImageSymbolic,
            ModeArg::C => SolveMode::SymbolicNeural,
        }
    }
}

fn parse_config(s: &str) -> Result<Configuration, String> {
    s.parse().map_err(|e: nesy_rpm::Error| e.to_string())
}

fn parse_split(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad shard size '{x}'")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|_| "expected three sizes: train,val,test".to_string())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad index '{x}'"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if a >= b {
                return Err(format!("empty range {s}"));
            }
            Ok((a, b))
        }
        None => {
            let i = num(s)?;
            Ok((i, i + 1))
        }
    }
}

struct Ctx {
    rc: RunConfig,
    root: PathBuf,
}

impl Ctx {
    fn new(g: &Global) -> Result<Self> {
        let mut rc = match &g.config {
            Some(p) => RunConfig::read(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(s) = g.seed {
            rc.seed = s;
        }
        if let Some(t) = g.tau {
            rc.set("tau", &t.to_string())?;
        }
        if let Some(l) = g.latent_dim {
            rc.latent_dim = l;
        }
        if let Some(r) = g.raster_size {
            rc.set("raster_size", &r.to_string())?;
        }
        let root = g
            .out
            .clone()
            .or_else(|| std::env::var_os(ARTIFACT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("artifacts"));
        Ok(Ctx { rc, root })
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn load_models(root: &Path, config: Configuration, mode: SolveMode) -> Result<Models> {
    let mut m = Models::default();
    if mode != SolveMode::ImageNeural {
        m.autoencoder = Some(load_autoencoder(&stage_dir(root, config, Stage::Autoencoder))?);
    }
    if mode != SolveMode::ImageSymbolic {
        m.rules = Some(load_rule_bundle(&stage_dir(root, config, Stage::Rules))?);
    }
    if mode != SolveMode::SymbolicNeural {
        m.image = Some(load_image_encoder(&stage_dir(root, config, Stage::Image))?);
    }
    Ok(m)
}

fn cmd_gen(ctx: &Ctx, config: Configuration, count: usize, split: Option<[usize; 3]>) -> Result<()> {
    let sizes = split.unwrap_or_else(|| default_split(count));
    let shards = generate_shards(config, ctx.rc.seed, sizes)?;
    let dir = ctx.root.join(config.name());
    for (name, shard) in SHARD_NAMES.iter().zip(&shards) {
        let path = dir.join(format!("{name}.jsonl"));
        shard.write(&path)?;
        println!("{}: {} problems", path.display(), shard.problems.len());
    }
    Ok(())
}

fn cmd_train(ctx: &Ctx, stage: TrainStage, config: Configuration, data: Option<&Path>) -> Result<()> {
    let data = data.unwrap_or(&ctx.root).join(config.name());
    let train = read_dataset(&data.join("train.jsonl"))?;
    let val = read_dataset(&data.join("val.jsonl"))?;
    let rc = &ctx.rc;
    let t = Instant::now();
    match stage {
        TrainStage::Ae => {
            let (ae, rep) = train_ae_stage(&train, &val, rc)?;
            save_autoencoder(&stage_dir(&ctx.root, config, Stage::Autoencoder), &ae, &rep, rc.seed)?;
            println!(
                "autoencoder {config}: latent {} held-out block accuracy {:.4}, panel accuracy {:.4}, {} epochs",
                ae.latent_dim,
                rep.heldout.block_accuracy,
                rep.heldout.panel_accuracy,
                rep.history.epochs.len()
            );
        }
        TrainStage::Rules => {
            let ae = load_autoencoder(&stage_dir(&ctx.root, config, Stage::Autoencoder))?;
            let (bundle, reports) = train_rules_stage(&train, &val, &ae, rc)?;
            save_rule_bundle(&stage_dir(&ctx.root, config, Stage::Rules), &bundle, &reports, rc.seed)?;
            println!("{:<34} {:>7} {:>8} {:>10}", "net", "classes", "F1", "hidden");
            for r in &reports {
                println!(
                    "{:<34} {:>7} {:>8.4} {:>10}",
                    r.key.to_string(),
                    r.class_count,
                    r.f1,
                    format!("{:?}", r.hidden)
                );
            }
            let good = reports.iter().filter(|r| r.f1 >= 0.9).count();
            println!("{good}/{} nets with F1 >= 0.90", reports.len());
        }
        TrainStage::Img => {
            let ae = load_autoencoder(&stage_dir(&ctx.root, config, Stage::Autoencoder))?;
            let (enc, rep) = train_img_stage(&train, &val, &ae, rc)?;
            save_image_encoder(&stage_dir(&ctx.root, config, Stage::Image), &enc, &rep, rc.seed)?;
            println!(
                "image encoder {config} ({}): alignment MSE {:.5} vs latent scale {:.5}, nearest-neighbour probe {:.3}",
                enc.arch(),
                rep.alignment_mse,
                rep.latent_scale,
                rep.nearest_neighbor
            );
        }
    }
    eprintln!("trained in {:.1?}", t.elapsed());
    Ok(())
}

fn models_root<'a>(ctx: &'a Ctx, models: &'a Option<PathBuf>) -> &'a Path {
    models.as_deref().unwrap_or(&ctx.root)
}

fn cmd_solve(ctx: &Ctx, dataset: &Path, mode: SolveMode, models: &Path) -> Result<()> {
    let d = read_dataset(dataset)?;
    let m = load_models(models, d.config(), mode)?;
    let scfg = ctx.rc.search_config()?;
    println!("index answer chosen flags");
    for (i, p) in d.problems.iter().enumerate() {
        let s = solve(p, mode, &m, &scfg)?;
        let flag = if s.empty_rule_set { "empty-rule-set" } else { "-" };
        println!("{i} {} {} {flag}", p.answer, s.answer);
    }
    Ok(())
}

fn cmd_eval(ctx: &Ctx, dataset: &Path, modes: &[SolveMode], models: &Path) -> Result<()> {
    let d = read_dataset(dataset)?;
    let scfg = ctx.rc.search_config()?;
    let dir = ctx.root.join(d.config().name()).join("reports");
    let mut reports = Vec::new();
    for &mode in modes {
        let m = load_models(models, d.config(), mode)?;
        let r = evaluate(&d.problems, mode, &m, &scfg)?;
        let stem = format!("eval-{}", mode.letter().to_lowercase());
        write_atomic(&dir.join(format!("{stem}.txt")), r.to_text().as_bytes())?;
        let mut csv = format!("{ACCURACY_CSV_HEADER}\n{}\n", r.accuracy_csv_row());
        write_atomic(&dir.join(format!("{stem}.csv")), csv.as_bytes())?;
        csv = format!("{NET_CSV_HEADER}\n");
        for row in r.net_csv_rows() {
            csv += &row;
            csv.push('\n');
        }
        write_atomic(&dir.join(format!("{stem}-nets.csv")), csv.as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.json")), &serde_json::to_vec_pretty(&r)?)?;
        println!("{}", r.to_text());
        reports.push(r);
    }
    print!("{}", accuracy_table(&reports));
    Ok(())
}

fn cmd_render(ctx: &Ctx, dataset: &Path, (start, end): (usize, usize)) -> Result<()> {
    let d = read_dataset(dataset)?;
    if end > d.problems.len() {
        bail!(
            "range {start}..{end} exceeds the {} problems in {}",
            d.problems.len(),
            dataset.display()
        );
    }
    let size = ctx.rc.raster_size;
    let base = ctx.root.join("render").join(d.config().name());
    for i in start..end {
        let p: &Problem = &d.problems[i];
        let dir = base.join(format!("p{:05}", d.header.first_index as usize + i));
        for (k, panel) in p.panels().enumerate() {
            let name = if k < 8 {
                format!("matrix{k}.pgm")
            } else {
                format!("option{}.pgm", k - 8)
            };
            write_atomic(&dir.join(name), &render_panel(panel, d.config(), size)?.to_pgm())?;
        }
        write_atomic(&dir.join("sheet.pgm"), &render_problem_sheet(p, size)?.to_pgm())?;
    }
    println!("rendered {} problems to {}", end - start, base.display());
    Ok(())
}

fn cmd_report(ctx: &Ctx) -> Result<()> {
    let mut reports: Vec<EvalReport> = Vec::new();
    for config in Configuration::ALL {
        let dir = ctx.root.join(config.name()).join("reports");
        for mode in SolveMode::ALL {
            let path = dir.join(format!("eval-{}.json", mode.letter().to_lowercase()));
            if path.exists() {
                reports.push(serde_json::from_slice(&std::fs::read(&path)?)?);
            }
        }
    }
    if reports.is_empty() {
        bail!("no evaluations under {}; run `eval` first", ctx.root.display());
    }
    let table = accuracy_table(&reports);
    let mut csv = format!("{ACCURACY_CSV_HEADER}\n");
    for r in &reports {
        csv += &r.accuracy_csv_row();
        csv.push('\n');
    }
    write_atomic(&ctx.root.join("report.txt"), table.as_bytes())?;
    write_atomic(&ctx.root.join("report.csv"), csv.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli.global)?;
    match cli.command {
        Command::Gen {
            configuration,
            count,
            split,
        } => cmd_gen(&ctx, configuration, count, split),
        Command::Train {
            stage,
            configuration,
            data,
        } => cmd_train(&ctx, stage, configuration, data.as_deref()),
        Command::Solve { dataset, mode, models } => cmd_solve(&ctx, &dataset, mode.into(), models_root(&ctx, &models)),
        Command::Eval { dataset, mode, models } => {
            let modes: Vec<SolveMode> = mode.into_iter().map(Into::into).collect();
            cmd_eval(&ctx, &dataset, &modes, models_root(&ctx, &models))
        }
        Command::Render { dataset, range } => cmd_render(&ctx, &dataset, range),
        Command::Report => cmd_report(&ctx),
    }
}

fn is_usage_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<nesy_rpm::Error>(),
            Some(nesy_rpm::Error::ConfigMismatch { .. })
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
