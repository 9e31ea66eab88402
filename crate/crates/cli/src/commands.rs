use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use sketchkit::calibration::{build_hessian, synth_calibration, CalibrationSet, HessianFactor};
use sketchkit::delta::compare_sweep;
use sketchkit::finetune::{train, OptimState, Optimizer, TrainTask};
use sketchkit::learner::{compression_ratio, count_trainable_params, llama2_7b_shapes, LLAMA2_7B_PARAMS};
use sketchkit::numerics::{load_mat1, save_mat1, Dtype};
use sketchkit::parallel::with_threads;
use sketchkit::runtime::{load_skt1, save_skt1, serialized_len};
use sketchkit::theory::{fold_sweep, synthesize_powerlaw};
use sketchkit::{sketch_matrix, Matrix, Rng, SketchConfig, SketchedMatrix};

use crate::manifest::RunManifest;
use crate::parse::CalibSource;
use crate::{
    AnalyzeArgs, Command, Distribution, DtypeArg, FinetuneArgs, GenArgs, InfoArgs, LearnArgs, OptArg, Preset,
    ReconstructArgs, SketchArgs, TheoryArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Sketch(a) => {
            let threads = a.learn.threads.threads;
            with_threads(threads, || sketch(a))?
        }
        Command::Reconstruct(a) => {
            let threads = a.threads.threads;
            with_threads(threads, || reconstruct(a))?
        }
        Command::Info(a) => info(a),
        Command::Finetune(a) => {
            let threads = a.threads.threads;
            with_threads(threads, || finetune(a))?
        }
        Command::AnalyzeDelta(a) => {
            let threads = a.learn.threads.threads;
            with_threads(threads, || analyze(a))?
        }
        Command::Theory(a) => {
            let threads = a.threads.threads;
            with_threads(threads, || theory(a))?
        }
    }
}

fn dtype(d: DtypeArg) -> Dtype {
    match d {
        DtypeArg::F64 => Dtype::F64,
        DtypeArg::F32 => Dtype::F32,
    }
}

fn load_matrix(flag: &str, path: &Path) -> Result<Matrix> {
    load_mat1(path).with_context(|| format!("--{flag} {}", path.display()))
}

fn load_model(flag: &str, path: &Path) -> Result<SketchedMatrix> {
    load_skt1(path).with_context(|| format!("--{flag} {}", path.display()))
}

/// `1234567` → `1,234,567`
fn grouped(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn write_text(flag: &str, path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("--{flag} {}: cannot write", path.display()))
}

fn gen(a: GenArgs) -> Result<()> {
    let mut rng = Rng::new(a.seed);
    let (rows, cols) = (a.shape.rows, a.shape.cols);
    let m = match a.dist {
        Distribution::Gaussian => rng.gaussian_matrix(rows, cols),
        Distribution::PowerlawSpectrum => {
            ensure!(
                a.eta.is_finite() && a.eta >= 0.0,
                "--eta must be finite and >= 0, got {}",
                a.eta
            );
            synthesize_powerlaw(rows, cols, a.eta, &mut rng)
        }
    };
    save_mat1(&a.out, &m, dtype(a.dtype)).with_context(|| format!("--out {}", a.out.display()))?;
    let dist = match a.dist {
        Distribution::Gaussian => "gaussian",
        Distribution::PowerlawSpectrum => "powerlaw-spectrum",
    };
    RunManifest::new("gen")
        .flag("shape", a.shape)
        .flag("dist", dist)
        .flag("eta", a.eta)
        .flag("dtype", format!("{:?}", a.dtype).to_lowercase())
        .flag("out", a.out.display())
        .seed(a.seed)
        .write_sidecar(&a.out)?;
    println!("wrote {} {} matrix to {}", a.shape, dist, a.out.display());
    Ok(())
}

fn calibration(learn: &LearnArgs, cols: usize, manifest: RunManifest) -> Result<(HessianFactor, RunManifest)> {
    let (cal, manifest) = match &learn.calib {
        CalibSource::File(path) => {
            let x = load_matrix("calib", path)?;
            ensure!(
                x.rows() == cols,
                "--calib {}: calibration has {} feature rows but the weights have {} columns",
                path.display(),
                x.rows(),
                cols
            );
            (CalibrationSet::new(x)?, manifest.input(path)?)
        }
        CalibSource::Synth { dist, samples, seed } => {
            let mut rng = Rng::new(seed.unwrap_or(learn.seed));
            (synth_calibration(cols, *samples, &mut rng, *dist), manifest)
        }
    };
    let hf = build_hessian(&cal, learn.damp).context("--calib: building the Hessian")?;
    Ok((hf, manifest))
}

fn learn_flags(m: RunManifest, learn: &LearnArgs) -> RunManifest {
    m.flag("calib", &learn.calib)
        .flag("block", learn.block)
        .flag("s", learn.exponent_s)
        .flag("damp", learn.damp)
        .flag("threads", learn.threads.threads)
        .seed(learn.seed)
}

fn sketch(a: SketchArgs) -> Result<()> {
    let w = load_matrix("input", &a.input)?;
    let manifest = RunManifest::new("sketch").input(&a.input)?;
    let manifest = learn_flags(manifest, &a.learn)
        .flag("input", a.input.display())
        .flag("bits", a.bits)
        .flag("gpr", a.gpr)
        .flag("output", a.output.display());
    let (hf, manifest) = calibration(&a.learn, w.cols(), manifest)?;
    let cfg = SketchConfig {
        bits: a.bits,
        gpr: a.gpr,
        block_b: a.learn.block,
        exponent_s: a.learn.exponent_s,
        damp: a.learn.damp,
        seed: a.learn.seed,
        ..SketchConfig::default()
    };
    let sm = sketch_matrix(&w, &hf, &cfg).context("sketching")?.rounded_to_f32();
    save_skt1(&a.output, &sm).with_context(|| format!("--output {}", a.output.display()))?;
    manifest.write_sidecar(&a.output)?;
    println!(
        "sketched {}x{} with bits={} gpr={}: {} trainable params, {} bytes -> {}",
        sm.rows(),
        sm.cols(),
        sm.bits(),
        sm.gpr(),
        sm.trainable_params(),
        serialized_len(sm.rows(), sm.cols(), sm.gpr(), sm.bits()),
        a.output.display()
    );
    Ok(())
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let sm = load_model("model", &a.model)?;
    let w = sm.reconstruct();
    save_mat1(&a.output, &w, dtype(a.dtype)).with_context(|| format!("--output {}", a.output.display()))?;
    RunManifest::new("reconstruct")
        .input(&a.model)?
        .flag("model", a.model.display())
        .flag("dtype", format!("{:?}", a.dtype).to_lowercase())
        .flag("output", a.output.display())
        .write_sidecar(&a.output)?;
    println!("reconstructed {}x{} -> {}", w.rows(), w.cols(), a.output.display());
    Ok(())
}

fn info(a: InfoArgs) -> Result<()> {
    if let Some(Preset::Llama2_7b) = a.preset {
        let (gpr, bits) = (
            a.gpr.expect("clap requires --gpr"),
            a.bits.expect("clap requires --bits"),
        );
        ensure!(gpr >= 1, "--gpr must be >= 1");
        let shapes = llama2_7b_shapes();
        let n = count_trainable_params(&shapes, gpr, bits);
        println!("preset: llama2-7b ({} linear layers)", shapes.len());
        println!("bits: {bits} (k = {})", 1u32 << bits);
        println!("gpr: {gpr}");
        println!("trainable params: {}", grouped(n));
        println!("dense params: {}", grouped(LLAMA2_7B_PARAMS));
        println!("compression vs dense: {:.1}x", compression_ratio(LLAMA2_7B_PARAMS, n));
        return Ok(());
    }
    let mut shapes = Vec::new();
    let (mut dense, mut bytes, mut trainable) = (0u64, 0u64, 0u64);
    for path in &a.model {
        let sm = load_model("model", path)?;
        let len = serialized_len(sm.rows(), sm.cols(), sm.gpr(), sm.bits()) as u64;
        println!(
            "{}: shape {}x{}, bits {} (k = {}), gpr {}, trainable params {}, {} bytes",
            path.display(),
            sm.rows(),
            sm.cols(),
            sm.bits(),
            sm.k(),
            sm.gpr(),
            grouped(sm.trainable_params() as u64),
            grouped(len)
        );
        shapes.push((sm.rows(), sm.cols()));
        dense += (sm.rows() * sm.cols()) as u64;
        bytes += len;
        trainable += sm.trainable_params() as u64;
    }
    println!("trainable params: {}", grouped(trainable));
    println!("dense params: {}", grouped(dense));
    println!("parameter compression: {:.1}x", compression_ratio(dense, trainable));
    println!(
        "storage compression vs float16 dense: {:.2}x",
        (2 * dense) as f64 / bytes as f64
    );
    Ok(())
}

fn finetune(a: FinetuneArgs) -> Result<()> {
    let sm = load_model("model", &a.model)?;
    let teacher = load_matrix("teacher", &a.teacher)?;
    let inputs = load_matrix("inputs", &a.inputs)?;
    ensure!(
        teacher.shape() == sm.shape(),
        "--teacher {}: shape {}x{} differs from the model's {}x{}",
        a.teacher.display(),
        teacher.rows(),
        teacher.cols(),
        sm.rows(),
        sm.cols()
    );
    ensure!(
        inputs.rows() == sm.cols(),
        "--inputs {}: expected {} rows, found {}",
        a.inputs.display(),
        sm.cols(),
        inputs.rows()
    );
    let task = TrainTask::new(teacher, inputs)?;
    let optimizer = match a.opt {
        OptArg::Sgd => Optimizer::Sgd,
        OptArg::Adam => Optimizer::adam(),
    };
    let mut opt = OptimState::new(a.lr, optimizer, &sm).context("--lr")?;
    let out = train(&sm, &task, &mut opt, a.steps).context("training")?;
    let model = out.model.rounded_to_f32();
    save_skt1(&a.out, &model).with_context(|| format!("--out {}", a.out.display()))?;

    let mut manifest = RunManifest::new("finetune")
        .input(&a.model)?
        .input(&a.teacher)?
        .input(&a.inputs)?
        .flag("model", a.model.display())
        .flag("teacher", a.teacher.display())
        .flag("inputs", a.inputs.display())
        .flag("steps", a.steps)
        .flag("lr", a.lr)
        .flag("opt", format!("{:?}", a.opt).to_lowercase())
        .flag("out", a.out.display())
        .flag("threads", a.threads.threads);
    if let Some(trace) = &a.trace {
        manifest = manifest.flag("trace", trace.display());
    }
    manifest.write_sidecar(&a.out)?;
    if let Some(trace) = &a.trace {
        let mut csv = manifest.render();
        csv.push_str("step,loss\n");
        for (step, loss) in out.losses.iter().enumerate() {
            csv.push_str(&format!("{step},{loss}\n"));
        }
        csv.push_str(&format!("{},{}\n", out.losses.len(), out.final_loss));
        write_text("trace", trace, &csv)?;
    }
    println!(
        "trained {} steps: loss {} -> {}",
        a.steps,
        out.losses.first().copied().unwrap_or(out.final_loss),
        out.final_loss
    );
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let w = load_matrix("base", &a.base)?;
    let wp = load_matrix("tuned", &a.tuned)?;
    ensure!(
        w.shape() == wp.shape(),
        "--tuned {}: shape {}x{} differs from --base {}x{}",
        a.tuned.display(),
        wp.rows(),
        wp.cols(),
        w.rows(),
        w.cols()
    );
    let ratios = a.ratios.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    let manifest = RunManifest::new("analyze-delta").input(&a.base)?.input(&a.tuned)?;
    let manifest = learn_flags(manifest, &a.learn)
        .flag("base", a.base.display())
        .flag("tuned", a.tuned.display())
        .flag("ratios", &ratios)
        .flag("out", a.out.display());
    let (hf, manifest) = calibration(&a.learn, w.cols(), manifest)?;
    let base = SketchConfig {
        block_b: a.learn.block,
        exponent_s: a.learn.exponent_s,
        damp: a.learn.damp,
        seed: a.learn.seed,
        ..SketchConfig::default()
    };
    let id = a
        .tuned
        .file_stem()
        .map_or_else(|| "delta".to_string(), |s| s.to_string_lossy().into_owned());
    let report = compare_sweep(&w, &wp, &hf, &a.ratios, &base, &id).context("--ratios")?;
    let mut csv = manifest.render().into_bytes();
    report.write_csv(&mut csv)?;
    fs::File::create(&a.out)
        .and_then(|mut f| f.write_all(&csv))
        .with_context(|| format!("--out {}: cannot write", a.out.display()))?;
    for ((r, l), s) in report
        .compression_ratios
        .iter()
        .zip(&report.lowrank_err)
        .zip(&report.sketch_err)
    {
        println!("ratio {r}: lowrank {l:.6}, sketch {s:.6}");
    }
    Ok(())
}

fn theory(a: TheoryArgs) -> Result<()> {
    if a.alpha == 0 || !a.n.is_multiple_of(a.alpha) {
        bail!("--alpha {} must be >= 1 and divide --n {}", a.alpha, a.n);
    }
    if a.n < 2 * a.alpha {
        bail!("--n {} leaves no low-rank budget at --alpha {}", a.n, a.alpha);
    }
    ensure!(a.trials >= 1, "--trials must be >= 1");
    let stats = fold_sweep(a.n, a.alpha, &a.eta_grid.values, a.trials, a.seed)?;
    let manifest = RunManifest::new("theory")
        .flag("n", a.n)
        .flag("alpha", a.alpha)
        .flag("eta-grid", &a.eta_grid)
        .flag("trials", a.trials)
        .flag("out", a.out.display())
        .flag("threads", a.threads.threads)
        .seed(a.seed);
    let mut csv = manifest.render();
    csv.push_str("eta,lowrank_exact,sketch_closed_form,sketch_empirical_mean,sketch_empirical_std\n");
    for s in &stats {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            s.eta, s.lowrank_exact, s.sketch_closed_form, s.sketch_mean, s.sketch_std
        ));
    }
    write_text("out", &a.out, &csv)?;
    println!("wrote {} rows to {}", stats.len(), a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::grouped;

    #[test]
    fn thousands_separators() {
        assert_eq!(grouped(0), "0");
        assert_eq!(grouped(999), "999");
        assert_eq!(grouped(1000), "1,000");
        assert_eq!(grouped(87_031_808), "87,031,808");
    }
}
