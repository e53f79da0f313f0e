use std::path::Path;

use decompkan::data::Split;
use decompkan::eval::{
    ablation_sweep, ablation_table, activity_table, evaluate, grid_table, metrics_table, multi_seed, seeds_table, synth_experiment,
    tuning_grid, winrate_table, GridSettings, RunSpec, SynthSettings, Variant, ABLATION_SEED,
};
use decompkan::inspect::{export_curves, layer_activity, top_edges, Branch, ExportFormat};
use decompkan::model::{count_params, load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use decompkan::nn::Parameters;
use decompkan::numcore::Rng;
use decompkan::train::fit_from;
use decompkan::verify::{gradient_suite, SuiteOptions, GRADCHECK_TOL};
use serde_json::json;

use crate::args::{
    AblateArgs, BranchArg, Cli, Command, EvalArgs, FormatArg, GradcheckArgs, GridArgs, InspectArgs, ParamsArgs, RunArgs, SeedsArgs,
    SplitArg, SynthArgs, TrainArgs,
};
use crate::config::{load_data, reload, resolve, sha256_hex, Resolved};
use crate::error::{CliError, CliResult};
use crate::output::{out_root, read_manifest, RunDir, RunManifest};

pub fn run(cli: Cli) -> CliResult<()> {
    let root = out_root(cli.out_dir.as_deref());
    match cli.command {
        Command::Train(a) => train(&root, a),
        Command::Eval(a) => eval(&root, a),
        Command::Seeds(a) => seeds(&root, a),
        Command::Grid(a) => grid(&root, a),
        Command::Ablate(a) => ablate(&root, a),
        Command::Synth(a) => synth(&root, a),
        Command::Inspect(a) => inspect(&root, a),
        Command::Gradcheck(a) => gradcheck(&root, a),
        Command::Params(a) => params(&root, a),
    }
}

fn resolve_args(run: &RunArgs) -> CliResult<Resolved> {
    resolve(run.config.as_deref(), &run.flags())
}

/// Manifest of a command that trains on resolved data.
fn training_manifest(command: &str, r: &Resolved) -> RunManifest {
    let mut m = RunManifest::new(command).with_file(r.file.as_ref());
    m.model = Some(r.spec.model.clone());
    m.train = Some(r.spec.train.clone());
    m.data = Some(r.data.clone());
    m.seeds = vec![r.spec.train.seed];
    m
}

fn finish(dir: &RunDir) -> CliResult<()> {
    println!("wrote {}", dir.path.display());
    Ok(())
}

fn train(root: &Path, a: TrainArgs) -> CliResult<()> {
    let r = resolve_args(&a.run)?;
    let mut m = training_manifest("train", &r).with_settings(json!({ "dataset": r.spec.dataset }));
    let dir = RunDir::create(root, &mut m)?;
    let RunSpec { model, train, .. } = &r.spec;
    println!("{} H={}: {} ({} parameters)", r.spec.dataset, model.horizon, model.describe(), count_params(model));
    let init = ModelParams::init(model, &Rng::new(train.seed));
    let (params, record) = fit_from(model, init, &r.dataset, train, &mut |e| {
        eprintln!("epoch {:>3}  train {:.5}  val {:.5}  lr {:.2e}", e.epoch, e.train_loss, e.val_mse, e.lr);
    })?;
    let val = evaluate(&params, &r.spec, &r.dataset, Split::Val)?;
    let test = evaluate(&params, &r.spec, &r.dataset, Split::Test)?;
    save_checkpoint(dir.file("checkpoint.bin"), model, &params)?;
    dir.write_json("record.json", &record)?;
    dir.write("epochs.csv", record.to_csv())?;
    let reports = [val, test];
    dir.write_json("metrics.json", &reports)?;
    let table = metrics_table(&reports);
    dir.write("metrics.md", table.to_markdown())?;
    print!("{}", table.to_markdown());
    println!("best epoch {} of {}", record.best_epoch, record.stopped_epoch);
    finish(&dir)
}

fn eval(root: &Path, a: EvalArgs) -> CliResult<()> {
    let bytes = std::fs::read(&a.checkpoint).map_err(|e| CliError::Data(format!("cannot read {}: {e}", a.checkpoint.display())))?;
    let (model, params) = load_checkpoint(&a.checkpoint)?;
    let sibling = a.checkpoint.with_file_name("manifest.json");
    let trained = if sibling.exists() { Some(read_manifest(&sibling)?) } else { None };
    let (data, ds) = if a.data.is_empty() {
        let data = trained
            .as_ref()
            .and_then(|m| m.data.clone())
            .ok_or_else(|| CliError::Config("no manifest.json next to the checkpoint; give --data or --synthetic".into()))?;
        let ds = reload(&data)?;
        (data, ds)
    } else {
        let d = load_data(&a.data.overrides())?;
        (d.data, d.dataset)
    };
    if ds.channels() != model.channels {
        return Err(CliError::Data(format!("data has {} channels, checkpoint expects {}", ds.channels(), model.channels)));
    }
    let spec = RunSpec {
        dataset: data.dataset(),
        model,
        train: trained.and_then(|m| m.train).unwrap_or_default(),
    };
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    };
    let mut m = RunManifest::new("eval").with_settings(json!({
        "checkpoint": a.checkpoint,
        "checkpoint_sha256": sha256_hex(&bytes),
        "split": split,
    }));
    m.model = Some(spec.model.clone());
    m.train = Some(spec.train.clone());
    m.data = Some(data);
    m.seeds = vec![spec.train.seed];
    let dir = RunDir::create(root, &mut m)?;
    let report = evaluate(&params, &spec, &ds, split)?;
    dir.write_json("metrics.json", &report)?;
    let table = metrics_table(std::slice::from_ref(&report));
    dir.write("metrics.md", table.to_markdown())?;
    print!("{}", table.to_markdown());
    finish(&dir)
}

fn seeds(root: &Path, a: SeedsArgs) -> CliResult<()> {
    let r = resolve_args(&a.run)?;
    let base = r.spec.train.seed;
    let seeds = a.seeds.clone().unwrap_or_else(|| (0..a.n as u64).map(|i| base + i).collect());
    let mut m = training_manifest("seeds", &r).with_settings(json!({ "jobs": a.jobs }));
    m.seeds = seeds.clone();
    let dir = RunDir::create(root, &mut m)?;
    let summary = multi_seed(&r.spec, &r.dataset, &seeds, a.jobs)?;
    for report in &summary.reports {
        dir.write_json(&format!("seed_{}/metrics.json", report.seed), report)?;
    }
    dir.write_json("summary.json", &summary)?;
    let table = seeds_table(std::slice::from_ref(&summary));
    dir.write("seeds.md", table.to_markdown())?;
    dir.write("seeds.csv", table.to_csv())?;
    print!("{}", table.to_markdown());
    for f in &summary.failed {
        eprintln!("warning: seed {} failed: {}", f.seed, f.error);
    }
    finish(&dir)
}

fn grid(root: &Path, a: GridArgs) -> CliResult<()> {
    let r = resolve_args(&a.run)?;
    let settings = GridSettings {
        lrs: a.lrs,
        lookbacks: a.lookbacks,
        horizon: r.spec.model.horizon,
        jobs: a.jobs,
    };
    let mut m = training_manifest("grid", &r).with_settings(&settings);
    let dir = RunDir::create(root, &mut m)?;
    let result = tuning_grid(&r.spec, &r.dataset, &settings)?;
    dir.write_json("grid.json", &result)?;
    let table = grid_table(&result);
    dir.write("grid.md", table.to_markdown())?;
    dir.write("grid.csv", table.to_csv())?;
    print!("{}", table.to_markdown());
    let best = result.best_cell();
    println!(
        "selected lr {:e}, bidirectional {}, lookback {}",
        best.lr,
        if best.bidirectional { "on" } else { "off" },
        best.lookback
    );
    finish(&dir)
}

fn ablate(root: &Path, a: AblateArgs) -> CliResult<()> {
    let mut r = resolve_args(&a.run)?;
    let file_seed = r.file.as_ref().and_then(|f| f.config.train.seed);
    let seed = a.run.train.seed.or(file_seed).unwrap_or(ABLATION_SEED);
    r.spec.train.seed = seed;
    let variants = match &a.variants {
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<Variant>, _>>()?,
        None => Variant::all(),
    };
    let names: Vec<&str> = variants.iter().map(Variant::name).collect();
    let mut m = training_manifest("ablate", &r).with_settings(json!({ "variants": names, "jobs": a.jobs }));
    let dir = RunDir::create(root, &mut m)?;
    let result = ablation_sweep(&r.spec, &r.dataset, &variants, seed, a.jobs)?;
    dir.write_json("ablation.json", &result)?;
    let table = ablation_table(&result);
    dir.write("ablation.md", table.to_markdown())?;
    dir.write("ablation.csv", table.to_csv())?;
    print!("{}", table.to_markdown());
    finish(&dir)
}

fn synth(root: &Path, a: SynthArgs) -> CliResult<()> {
    let mut s = SynthSettings {
        jobs: a.jobs,
        ..SynthSettings::default()
    };
    macro_rules! set {
        ($($arg:ident => $($field:ident).+),* $(,)?) => {
            $( if let Some(v) = a.$arg.clone() { s.$($field).+ = v; } )*
        };
    }
    set!(trials => trials, seed => seed, lookback => lookback, horizon => horizon, length => length,
        kan_hidden => kan_hidden, noise => noise_std, lr => train.lr, epochs => train.max_epochs, ks => ks);
    if let Some(b) = a.max_batches {
        s.train.max_batches_per_epoch = Some(b);
    }
    if let Some(e) = a.epochs {
        s.train.patience = s.train.patience.max(e);
    }
    s.train.validate()?;
    let mut m = RunManifest::new("synth").with_settings(json!({ "step": a.step, "settings": &s }));
    m.train = Some(s.train.clone());
    m.seeds = (0..s.trials as u64).map(|t| s.seed + t).collect();
    let dir = RunDir::create(root, &mut m)?;
    let results = synth_experiment(a.step, &s)?;
    dir.write_json("winrate.json", &results)?;
    let table = winrate_table(&results);
    dir.write("winrate.md", table.to_markdown())?;
    dir.write("winrate.csv", table.to_csv())?;
    print!("{}", table.to_markdown());
    finish(&dir)
}

fn inspect(root: &Path, a: InspectArgs) -> CliResult<()> {
    let bytes = std::fs::read(&a.checkpoint).map_err(|e| CliError::Data(format!("cannot read {}: {e}", a.checkpoint.display())))?;
    let (model, params) = load_checkpoint(&a.checkpoint)?;
    if a.top == 0 {
        return Err(CliError::Config("--top must be positive".into()));
    }
    let branches: &[Branch] = match a.branch {
        BranchArg::Trend => &[Branch::Trend],
        BranchArg::Residual => &[Branch::Residual],
        BranchArg::Both => &[Branch::Trend, Branch::Residual],
    };
    let mut curves = Vec::new();
    for &b in branches {
        match top_edges(&params, &model, b, a.layer, a.top) {
            Ok(c) => curves.extend(c),
            // with both branches requested, one may legitimately lack KAN layers
            Err(e) if branches.len() > 1 => eprintln!("skipping {b}: {e}"),
            Err(e) => return Err(e.into()),
        }
    }
    if curves.is_empty() {
        return Err(CliError::Config("the checkpoint has no KAN layers to inspect".into()));
    }
    let format_name = format!("{:?}", a.format).to_ascii_lowercase();
    let branch_name = format!("{:?}", a.branch).to_ascii_lowercase();
    let mut m = RunManifest::new("inspect").with_settings(json!({
        "checkpoint": a.checkpoint,
        "checkpoint_sha256": sha256_hex(&bytes),
        "top": a.top,
        "branch": branch_name,
        "layer": a.layer,
        "format": format_name,
    }));
    m.model = Some(model.clone());
    let dir = RunDir::create(root, &mut m)?;
    if matches!(a.format, FormatArg::Svg | FormatArg::Both) {
        export_curves(&curves, ExportFormat::Svg, &dir.file("edges.svg"))?;
    }
    if matches!(a.format, FormatArg::Csv | FormatArg::Both) {
        export_curves(&curves, ExportFormat::Csv, &dir.file("edges.csv"))?;
    }
    for c in &curves {
        println!("{} layer {} edge {:>4} → {:<3} range {:.4}", c.branch, c.layer, c.input, c.output, c.activation_range);
    }
    let activity = layer_activity(&params, &model);
    dir.write_json("activity.json", &activity)?;
    let table = activity_table(&activity);
    dir.write("activity.md", table.to_markdown())?;
    dir.write("activity.csv", table.to_csv())?;
    print!("{}", table.to_markdown());
    finish(&dir)
}

fn gradcheck(root: &Path, a: GradcheckArgs) -> CliResult<()> {
    let opts = SuiteOptions {
        configs: a.configs,
        seed: a.seed,
        inject_fault: a.inject_fault,
    };
    if opts.configs == 0 {
        return Err(CliError::Config("--configs must be positive".into()));
    }
    let mut m = RunManifest::new("gradcheck").with_settings(json!({
        "configs": opts.configs,
        "seed": opts.seed,
        "inject_fault": opts.inject_fault,
        "tolerance": GRADCHECK_TOL,
    }));
    m.seeds = vec![opts.seed];
    let dir = RunDir::create(root, &mut m)?;
    let suite = gradient_suite(&opts);
    let mut csv = String::from("component,block,checked,max_rel_err,analytic,numeric\n");
    for c in &suite.components {
        println!("{:<9} max rel err {:.3e}", c.component, c.report.max_rel_err());
        // one line per parameter block, worst over the configurations
        let mut blocks: Vec<(String, usize, f64)> = Vec::new();
        for e in &c.report.entries {
            csv.push_str(&format!(
                "{},{},{},{:.6e},{:.6e},{:.6e}\n",
                c.component, e.name, e.checked, e.max_rel_err, e.analytic, e.numeric
            ));
            let block = e.name.split_once('/').map_or(e.name.as_str(), |(_, b)| b);
            match blocks.iter_mut().find(|b| b.0 == block) {
                Some(b) => {
                    b.1 += e.checked;
                    b.2 = b.2.max(e.max_rel_err);
                }
                None => blocks.push((block.to_string(), e.checked, e.max_rel_err)),
            }
        }
        for (name, checked, err) in blocks {
            println!("  {name:<40} {checked:>7} checked  {err:.3e}");
        }
    }
    dir.write("gradcheck.csv", csv)?;
    if !suite.passes() {
        let (component, e) = suite.worst().expect("a failing suite has entries");
        return Err(CliError::Check(format!(
            "{component} {}: relative error {:.3e} ≥ {GRADCHECK_TOL:e} (analytic {:.6e}, numeric {:.6e}); report in {}",
            e.name,
            e.max_rel_err,
            e.analytic,
            e.numeric,
            dir.path.display()
        )));
    }
    println!("all gradients agree within {GRADCHECK_TOL:e}");
    finish(&dir)
}

fn params(root: &Path, a: ParamsArgs) -> CliResult<()> {
    let config = ModelConfig::new(a.lookback, a.horizon, a.channels);
    config.validate()?;
    let closed = count_params(&config);
    let enumerated = ModelParams::zeros(&config).num_params();
    let mut m = RunManifest::new("params").with_settings(json!({
        "lookback": a.lookback,
        "horizon": a.horizon,
        "channels": a.channels,
    }));
    m.model = Some(config);
    let dir = RunDir::create(root, &mut m)?;
    dir.write_json(
        "params.json",
        &json!({ "closed_form": closed, "enumerated": enumerated, "millions": format!("{:.2}", closed as f64 / 1e6) }),
    )?;
    println!("L={} H={} C={}", a.lookback, a.horizon, a.channels);
    println!("closed form  {closed} ({:.2}M)", closed as f64 / 1e6);
    println!("enumerated   {enumerated}");
    if closed != enumerated {
        return Err(CliError::Check(format!("closed-form count {closed} differs from enumerated {enumerated}")));
    }
    finish(&dir)
}
