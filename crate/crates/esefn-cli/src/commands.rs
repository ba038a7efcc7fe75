//! The four subcommands: train, ablate, sweep, gradcheck.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use esefn::{
    check_model_gradients, train, EseFn, EseFnConfig, Error, LossWeights, MultiModalFeature,
    Result,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{DataArgs, LossArgs, OptimArgs};
use crate::variants::{build_variant, reported_accuracy, VariantId};

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Input(format!("cannot create output dir {}: {e}", dir.display())))
}

fn fmt_acc(acc: Option<f64>) -> String {
    match acc {
        Some(a) => format!("{a:.4}"),
        None => "-".to_string(),
    }
}

#[derive(Debug, Args)]
#[command(group = crate::args::source_group())]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,

    /// Shared projection width of the fusion network
    #[arg(long, default_value_t = 16)]
    pub d: usize,

    #[command(flatten)]
    pub optim: OptimArgs,

    #[command(flatten)]
    pub loss: LossArgs,

    /// Seed for data generation, splitting, initialization, and shuffling
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Output directory for report.csv and model.ckpt
    #[arg(long, default_value = "esefn-out")]
    pub out: PathBuf,
}

pub fn cmd_train(cmd: &TrainCmd) -> Result<()> {
    let loaded = cmd.data.load(cmd.seed)?;
    let weights = cmd.loss.weights()?;
    let optim = cmd.optim.config(cmd.seed);

    let mut rng = ChaCha8Rng::seed_from_u64(cmd.seed);
    let config = EseFnConfig::new(loaded.dim_r, loaded.dim_s, cmd.d, loaded.classes);
    let model = EseFn::new(&config, &mut rng)?;

    let report = train(&model, &loaded.split, &optim, &weights)?;

    ensure_out_dir(&cmd.out)?;
    let report_path = cmd.out.join("report.csv");
    fs::write(&report_path, report.to_csv())?;
    let ckpt_path = cmd.out.join("model.ckpt");
    model.save(&ckpt_path)?;

    let acc = &report.final_test;
    println!(
        "test accuracy: rgb {}, skeleton {}, fused {}",
        fmt_acc(acc.rgb),
        fmt_acc(acc.skeleton),
        fmt_acc(acc.fused)
    );
    println!("report: {}", report_path.display());
    println!("checkpoint: {}", ckpt_path.display());
    Ok(())
}

#[derive(Debug, Args)]
#[command(group = crate::args::source_group())]
pub struct AblateCmd {
    #[command(flatten)]
    pub data: DataArgs,

    /// Shared projection width of the fusion models
    #[arg(long, default_value_t = 16)]
    pub d: usize,

    #[command(flatten)]
    pub optim: OptimArgs,

    #[command(flatten)]
    pub loss: LossArgs,

    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Variants to train (comma separated, e.g. B1,B3,B7), or "all"
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub variants: Vec<String>,

    /// Output directory for ablation.csv
    #[arg(long, default_value = "esefn-out")]
    pub out: PathBuf,
}

pub const ABLATION_CSV_HEADER: &str =
    "variant,rgb,skeleton,mnet,cnet,ml,expansion,accuracy";

fn parse_variants(specs: &[String]) -> Result<Vec<VariantId>> {
    let mut wanted = Vec::new();
    for spec in specs {
        if spec.eq_ignore_ascii_case("all") {
            wanted.extend(VariantId::ALL);
        } else {
            let id: VariantId = spec
                .parse()
                .map_err(|e: String| Error::Input(e))?;
            wanted.push(id);
        }
    }
    // table row order, duplicates dropped
    let mut ordered: Vec<VariantId> = VariantId::ALL
        .into_iter()
        .filter(|v| wanted.contains(v))
        .collect();
    if ordered.is_empty() {
        return Err(Error::Input("no variants selected".to_string()));
    }
    ordered.dedup();
    Ok(ordered)
}

pub fn cmd_ablate(cmd: &AblateCmd) -> Result<()> {
    let ids = parse_variants(&cmd.variants)?;
    let loaded = cmd.data.load(cmd.seed)?;
    let weights = cmd.loss.weights()?;
    let optim = cmd.optim.config(cmd.seed);

    let mark = |b: bool| if b { "x" } else { "." };
    let mut csv = String::from(ABLATION_CSV_HEADER);
    csv.push('\n');
    println!("variant  rgb skel mnet cnet  ml  exp  accuracy");
    for id in ids {
        let vm = build_variant(
            id,
            loaded.dim_r,
            loaded.dim_s,
            cmd.d,
            loaded.classes,
            cmd.seed,
            weights,
        )?;
        let report = train(vm.model.as_ref(), &loaded.split, &optim, &vm.weights)?;
        let accuracy = reported_accuracy(&vm.variant, &report.final_test)
            .ok_or_else(|| Error::Usage(format!("variant {id} reported no accuracy")))?;
        let v = &vm.variant;
        println!(
            "{:<7}  {:^3} {:^4} {:^4} {:^4} {:^3} {:^4} {:.4}",
            id.to_string(),
            mark(v.uses_rgb),
            mark(v.uses_skeleton),
            mark(v.uses_mnet),
            mark(v.uses_cnet),
            mark(v.uses_ml),
            mark(v.uses_expansion),
            accuracy
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            id,
            v.uses_rgb,
            v.uses_skeleton,
            v.uses_mnet,
            v.uses_cnet,
            v.uses_ml,
            v.uses_expansion,
            accuracy
        ));
    }

    ensure_out_dir(&cmd.out)?;
    let path = cmd.out.join("ablation.csv");
    fs::write(&path, csv)?;
    println!("table: {}", path.display());
    Ok(())
}

#[derive(Debug, Args)]
#[command(group = crate::args::source_group())]
pub struct SweepCmd {
    #[command(flatten)]
    pub data: DataArgs,

    /// Shared projection width of the fusion network
    #[arg(long, default_value_t = 16)]
    pub d: usize,

    #[command(flatten)]
    pub optim: OptimArgs,

    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Grid of fused-head weights
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 0.7, 0.9])]
    pub alphas: Vec<f64>,

    /// Grid of consistency-term weights
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.3, 0.6, 0.9])]
    pub betas: Vec<f64>,

    /// Output directory for sweep.csv
    #[arg(long, default_value = "esefn-out")]
    pub out: PathBuf,
}

pub const SWEEP_CSV_HEADER: &str = "alpha,beta,status,accuracy";

pub fn cmd_sweep(cmd: &SweepCmd) -> Result<()> {
    let loaded = cmd.data.load(cmd.seed)?;
    let optim = cmd.optim.config(cmd.seed);
    let config = EseFnConfig::new(loaded.dim_r, loaded.dim_s, cmd.d, loaded.classes);

    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    println!("alpha  beta   status   accuracy");
    for &alpha in &cmd.alphas {
        for &beta in &cmd.betas {
            match LossWeights::new(alpha, beta) {
                Err(_) => {
                    // invalid pairs are part of the grid report, not errors
                    println!("{alpha:<6} {beta:<6} skipped  -");
                    csv.push_str(&format!("{alpha},{beta},skipped,\n"));
                }
                Ok(weights) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cmd.seed);
                    let model = EseFn::new(&config, &mut rng)?;
                    let report = train(&model, &loaded.split, &optim, &weights)?;
                    let accuracy = report.final_test.fused.ok_or_else(|| {
                        Error::Input("sweep needs a non-empty test split".to_string())
                    })?;
                    println!("{alpha:<6} {beta:<6} ok       {accuracy:.4}");
                    csv.push_str(&format!("{alpha},{beta},ok,{accuracy}\n"));
                }
            }
        }
    }

    ensure_out_dir(&cmd.out)?;
    let path = cmd.out.join("sweep.csv");
    fs::write(&path, csv)?;
    println!("grid: {}", path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct GradcheckCmd {
    /// Shared projection width of the checked model
    #[arg(long, default_value_t = 16)]
    pub d: usize,

    /// Class count of the checked model
    #[arg(long, default_value_t = 4)]
    pub classes: usize,

    /// Batch size of the checked objective
    #[arg(long, default_value_t = 4)]
    pub batch: usize,

    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Finite-difference step
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,

    /// Maximum allowed guarded relative error per parameter group
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,

    #[command(flatten)]
    pub loss: LossArgs,
}

pub fn cmd_gradcheck(cmd: &GradcheckCmd) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(cmd.seed);
    let (dim_r, dim_s) = (6, 5);
    let model = EseFn::new(
        &EseFnConfig::new(dim_r, dim_s, cmd.d, cmd.classes),
        &mut rng,
    )?;
    let batch: Vec<MultiModalFeature> = (0..cmd.batch.max(1))
        .map(|i| MultiModalFeature {
            sample_id: i as u64,
            label: i % cmd.classes,
            f_r: (0..dim_r).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            f_s: (0..dim_s).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect();

    let checks = check_model_gradients(&model, &batch, &cmd.loss.weights()?, cmd.eps)?;
    let mut all_ok = true;
    for check in &checks {
        let ok = check.passes(cmd.tolerance);
        all_ok &= ok;
        println!(
            "{:<22} max rel err {:.3e}  {}",
            check.name,
            check.max_err,
            if ok { "ok" } else { "FAIL" }
        );
    }
    println!(
        "gradcheck: {} groups, tolerance {:.1e}: {}",
        checks.len(),
        cmd.tolerance,
        if all_ok { "PASS" } else { "FAIL" }
    );
    Ok(all_ok)
}
