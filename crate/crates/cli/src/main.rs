mod presets;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acmhd_fuse::codegen::{
    generate, generate_planar_managed_traced, lines_block_for, planar_min_smem, render_source, schedule, KernelIR,
    LinesVars, Method, OptionSet,
};
use acmhd_fuse::equations::PhysParams;
use acmhd_fuse::fr::{ElementConfig, Precision, StateField};
use acmhd_fuse::sim::{execute, verify_with, KernelParams, SimGrid, Verdict, VerifyConfig};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Elements in the paper-scale benchmark.
const PAPER_ELEMENTS: usize = 1024 * 32;

#[derive(Parser)]
#[command(name = "acmhd-fuse", version, about = "Generate, verify and sweep fused flux-divergence kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the kernel source, its IR and a generation log.
    Generate(GenerateArgs),
    /// Run a kernel on seeded inputs and compare against the reference.
    Verify(VerifyArgs),
    /// Sweep one configuration axis and emit a row per configuration.
    Sweep(SweepArgs),
    /// Static metrics and simulated traffic of one kernel.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Planar,
    PlanarManaged,
    Lines,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
pub struct KernelArgs {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=6))]
    p: Option<u64>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(3..=3))]
    d: u64,
    #[arg(long)]
    precision: Option<Precision>,
    #[arg(long)]
    block: Option<usize>,
    /// Bytes, or KiB with a suffix such as `93.75KiB`.
    #[arg(long, value_parser = parse_smem)]
    smem: Option<usize>,
    #[arg(long)]
    vars: Option<LinesVars>,
    /// Comma list of optimisations; without it the default option case applies.
    #[arg(long)]
    opts: Option<String>,
    #[arg(long)]
    fuse_source: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Elements per random field.
    #[arg(long, default_value_t = 256)]
    elements: usize,
    /// Use the full benchmark element count.
    #[arg(long)]
    paper_scale: bool,
    /// Skip the vortex fixture.
    #[arg(long)]
    no_tgv: bool,
}

impl RunArgs {
    fn n_elem(&self) -> usize {
        if self.paper_scale {
            PAPER_ELEMENTS
        } else {
            self.elements
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Verify a previously generated IR file instead.
    #[arg(long)]
    ir: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Directory for the JSON verdict.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    axis: sweep::Axis,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// File to write instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    ir: Option<PathBuf>,
    /// List the presets instead.
    #[arg(long)]
    presets: bool,
    #[arg(long, default_value_t = 256)]
    elements: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn parse_smem(s: &str) -> Result<usize, String> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let (num, scale) = if let Some(n) = lower.strip_suffix("kib") {
        (n.trim(), 1024.0)
    } else if let Some(n) = lower.strip_suffix('b') {
        (n.trim(), 1.0)
    } else {
        (lower.as_str(), 1.0)
    };
    let x: f64 = num.parse().map_err(|_| format!("`{s}` is not a byte count"))?;
    let bytes = x * scale;
    if !(bytes >= 0.0) || bytes.fract() != 0.0 {
        return Err(format!("`{s}` is not a whole number of bytes"));
    }
    Ok(bytes as usize)
}

/// A fully resolved kernel request.
#[derive(Debug, Clone, Copy)]
pub struct Resolved {
    pub cfg: ElementConfig,
    pub method: Method,
    pub opts: OptionSet,
}

impl KernelArgs {
    pub fn resolve(&self) -> Result<Resolved> {
        let preset = match &self.preset {
            Some(name) => Some(presets::find(name).with_context(|| format!("unknown preset `{name}`"))?),
            None => None,
        };
        let p = match (self.p, preset) {
            (Some(p), _) => p as usize,
            (None, Some(pr)) => pr.p,
            (None, None) => bail!("--p is required without --preset"),
        };
        let precision = self.precision.or(preset.map(|pr| pr.precision)).unwrap_or(Precision::Fp32);
        let vars = self.vars.or(match preset.map(|pr| pr.method) {
            Some(Method::Lines { vars }) => Some(vars),
            _ => None,
        });
        let kind = match (self.method, preset) {
            (Some(m), _) => m,
            (None, Some(pr)) => match pr.method {
                Method::PlanarUnmanaged => MethodArg::Planar,
                Method::PlanarManaged { .. } => MethodArg::PlanarManaged,
                Method::Lines { .. } => MethodArg::Lines,
            },
            (None, None) if vars.is_some() => MethodArg::Lines,
            (None, None) => MethodArg::Planar,
        };
        let vars = vars.unwrap_or(LinesVars::V25);
        let block = match (self.block, preset) {
            (Some(b), _) => b,
            (None, Some(pr)) => pr.block_threads,
            (None, None) if kind == MethodArg::Lines => lines_block_for(p, vars, precision, 256)
                .with_context(|| format!("no lines-{vars} block fits for p = {p}"))?,
            (None, None) => 128,
        };
        let cfg = ElementConfig::new(p, 256, block, precision);
        let method = match kind {
            MethodArg::Planar => Method::PlanarUnmanaged,
            MethodArg::PlanarManaged => {
                let smem = self.smem.or(preset.and_then(|pr| pr.smem_bytes())).unwrap_or_else(|| planar_min_smem(&cfg));
                Method::PlanarManaged { smem_bytes: smem }
            }
            MethodArg::Lines => Method::Lines { vars },
        };
        if let (Some(s), Method::Lines { .. } | Method::PlanarUnmanaged) = (self.smem, method) {
            // these methods size shared memory themselves; a mismatch is an error
            let ir = generate(&cfg, method, &OptionSet::none())?;
            if ir.meta.shared_bytes != s {
                bail!("{method} with this block needs {} bytes of shared memory, not {s}", ir.meta.shared_bytes);
            }
        }
        let mut opts = match &self.opts {
            Some(list) => OptionSet::parse_list(list)?,
            None => OptionSet::default(),
        };
        opts.fuse_source |= self.fuse_source;
        Ok(Resolved { cfg, method, opts })
    }
}

fn load_ir(path: &Path) -> Result<KernelIR> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(KernelIR::from_json(&text)?)
}

fn cmd_generate(a: &GenerateArgs) -> Result<ExitCode> {
    let r = a.kernel.resolve()?;
    let (ir, log) = match r.method {
        Method::PlanarManaged { smem_bytes } => {
            r.opts.validate()?;
            let (ir, trace) = generate_planar_managed_traced(&r.cfg, &r.opts, smem_bytes)?;
            (schedule(ir, &r.opts), trace)
        }
        method => {
            let ir = generate(&r.cfg, method, &r.opts)?;
            let log = serde_json::to_string(&ir.metrics())? + "\n";
            (ir, log)
        }
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stem = a.out.join(&ir.meta.name);
    let files = [("cu", render_source(&ir)), ("ir.json", ir.to_json()), ("log", log)];
    for (ext, text) in &files {
        let path = stem.with_extension(ext);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    println!(
        "{}: p = {}, {}, block {}, shared {} bytes, options [{}]",
        ir.meta.method,
        ir.meta.cfg.p,
        ir.meta.cfg.precision,
        ir.meta.cfg.block_threads,
        ir.meta.shared_bytes,
        ir.meta.opts.to_list()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify_config(run: &RunArgs, trials: usize, seed: u64) -> Result<VerifyConfig> {
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    Ok(VerifyConfig { trials, seed, n_elem: run.n_elem(), phys: PhysParams::default(), include_tgv: !run.no_tgv })
}

fn print_verdict(ir: &KernelIR, v: &Verdict) {
    println!(
        "{} {} p = {} {}: {}",
        ir.meta.name,
        ir.meta.method,
        ir.meta.cfg.p,
        ir.meta.cfg.precision,
        if v.pass { "PASS" } else { "FAIL" }
    );
    println!("  max relative error {:.3e} (tolerance {:.0e})", v.max_rel_error, v.tolerance);
    println!("  race flags {}", v.race_count);
    if let Some(e) = &v.error {
        println!("  error: {e}");
    }
    if let Some(r) = &v.report {
        println!("  modeled I/O ratio vs un-fused {:.3}", r.io_ratio);
        println!(
            "  global words read {} (distinct {}), written {}; shared transactions {} ({} from conflicts)",
            r.global_read_words,
            r.global_read_distinct_words,
            r.global_write_words,
            r.shared_transactions,
            r.bank_conflict_extra_transactions
        );
        println!("  modeled cycles {} ({:.3}x vs un-fused)", r.modeled_cycles, r.modeled_speedup_vs_unfused);
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<ExitCode> {
    let ir = match &a.ir {
        Some(path) => load_ir(path)?,
        None => {
            let r = a.kernel.resolve()?;
            generate(&r.cfg, r.method, &r.opts)?
        }
    };
    let v = verify_with(&ir, &verify_config(&a.run, a.trials, a.kernel.seed)?);
    match a.format {
        Some(Format::Json) => println!("{}", serde_json::to_string_pretty(&v)?),
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.serialize(sweep::row(&ir, "verify", "-", &v))?;
            w.flush()?;
        }
        None => print_verdict(&ir, &v),
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.verdict.json", ir.meta.name));
        fs::write(&path, serde_json::to_string_pretty(&v)?)?;
    }
    Ok(if v.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_sweep(a: &SweepArgs) -> Result<ExitCode> {
    let base = a.kernel.resolve()?;
    let vc = verify_config(&a.run, a.trials, a.kernel.seed)?;
    let rows = sweep::run(a.axis, &base, &vc, a.kernel.block)?;
    let text = match a.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r)?;
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
    };
    match &a.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct KernelReport {
    name: String,
    method: String,
    p: usize,
    precision: Precision,
    block_threads: usize,
    shared_bytes: usize,
    options: String,
    metrics: acmhd_fuse::codegen::IrMetrics,
    n_elem: usize,
    sim: acmhd_fuse::sim::SimReport,
}

fn cmd_report(a: &ReportArgs) -> Result<ExitCode> {
    if a.presets {
        match a.format {
            Format::Json => println!("{}", serde_json::to_string_pretty(&presets::PRESETS)?),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(std::io::stdout());
                w.write_record(["name", "method", "p", "precision", "block_threads", "smem_bytes"])?;
                for p in presets::PRESETS {
                    let cfg = ElementConfig::new(p.p, 256, p.block_threads, p.precision);
                    let smem = generate(&cfg, p.method, &OptionSet::default())?.meta.shared_bytes;
                    w.write_record([
                        p.name.to_string(),
                        p.method.to_string(),
                        p.p.to_string(),
                        p.precision.to_string(),
                        p.block_threads.to_string(),
                        smem.to_string(),
                    ])?;
                }
                w.flush()?;
            }
        }
        return Ok(ExitCode::SUCCESS);
    }
    let ir = match &a.ir {
        Some(path) => load_ir(path)?,
        None => {
            let r = a.kernel.resolve()?;
            generate(&r.cfg, r.method, &r.opts)?
        }
    };
    let u = StateField::random(ir.meta.cfg.p, 3, a.elements, a.kernel.seed);
    let (_, sim) = execute(&ir, &u, &SimGrid::for_kernel(&ir, a.elements), &KernelParams::default())?;
    let rep = KernelReport {
        name: ir.meta.name.clone(),
        method: ir.meta.method.to_string(),
        p: ir.meta.cfg.p,
        precision: ir.meta.cfg.precision,
        block_threads: ir.meta.cfg.block_threads,
        shared_bytes: ir.meta.shared_bytes,
        options: ir.meta.opts.to_list(),
        metrics: ir.metrics(),
        n_elem: a.elements,
        sim,
    };
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&rep)?),
        Format::Csv => {
            let m = &rep.metrics;
            let s = &rep.sim;
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record([
                "name", "method", "p", "precision", "block_threads", "shared_bytes", "instructions",
                "register_pressure", "global_read_words", "global_write_words", "shared_transactions",
                "bank_conflict_extra", "modeled_cycles", "io_ratio",
            ])?;
            w.write_record([
                rep.name.clone(),
                rep.method.clone(),
                rep.p.to_string(),
                rep.precision.to_string(),
                rep.block_threads.to_string(),
                rep.shared_bytes.to_string(),
                m.instructions.to_string(),
                m.register_pressure.to_string(),
                s.global_read_words.to_string(),
                s.global_write_words.to_string(),
                s.shared_transactions.to_string(),
                s.bank_conflict_extra_transactions.to_string(),
                s.modeled_cycles.to_string(),
                format!("{:.6}", s.io_ratio),
            ])?;
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smem_units() {
        assert_eq!(parse_smem("96000"), Ok(96_000));
        assert_eq!(parse_smem("93.75KiB"), Ok(96_000));
        assert_eq!(parse_smem("93.75 kib"), Ok(96_000));
        assert_eq!(parse_smem("96KiB"), Ok(98_304));
        assert!(parse_smem("1.1").is_err());
        assert!(parse_smem("lots").is_err());
    }
}
