//! The `dmd` command-line tool.
//!
//! Exit codes: 0 on success (or model/trace equality), 1 when `verify` finds
//! a divergence, 2 on any usage or input error. Relative output paths, and
//! the default trace file name, are placed under `$DMD_OUT_DIR` when set.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dmd::{
    self, bounds_for, comparison_kernels, fit_exponent, load_staircase, theorem1_check, ColdPolicy, CostModel,
    DmdReport, TABLE_EXPONENTS,
};
use crate::kernels::{self, io as trace_io, random_trace, KernelConfig, KernelKind, MemoryTrace, TraceSemantics};
use crate::numfmt::sig6;
use crate::rmm_model::{compute_rmm_rdd, verify_model};
use crate::stackdist::{analyze_kernel, reuse_histogram, reuse_histogram_naive, ReuseDistribution};

pub const OUT_DIR_ENV: &str = "DMD_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "dmd", version, about = "Data movement distance of matrix-multiplication kernels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a kernel trace and write it to a file.
    Trace(TraceArgs),
    /// Reuse-distance distribution of a kernel or a trace file.
    Rdd(RddArgs),
    /// Closed-form RMM distribution.
    Model(ModelArgs),
    /// Compare the RMM model against trace analysis.
    Verify(VerifyArgs),
    /// DMD report for one kernel.
    Dmd(DmdArgs),
    /// DMD over a range of sizes, with a power-law fit.
    Sweep(SweepArgs),
    /// All six kernels at one size, ranked by DMD.
    Compare(CompareArgs),
    /// Staircase latency curve against a fitted sqrt curve.
    Latency(LatencyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: Option<KernelKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub tile: Option<usize>,
    /// Use the memory-managed variant of rmm or strassen.
    #[arg(long)]
    pub managed: bool,
    /// Comma-separated: acc=reg|mem, add=row|col, base=abc|cab.
    #[arg(long, default_value = "default", value_parser = parse_semantics)]
    pub semantics: TraceSemantics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostKind {
    Sqrt,
    Staircase,
}

#[derive(Debug, Clone, Args)]
pub struct CostArgs {
    #[arg(long, value_enum, default_value = "sqrt")]
    pub cost: CostKind,
    /// JSON list of {capacity, latency} levels.
    #[arg(long)]
    pub cost_file: Option<PathBuf>,
    #[arg(long, default_value = "exclude")]
    pub cold: ColdPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Generate a random trace of this length instead of a kernel.
    #[arg(long, conflicts_with = "kernel")]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 64, requires = "random")]
    pub alphabet: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RddArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Read the trace from a file instead of generating it.
    #[arg(long, conflicts_with = "kernel")]
    pub trace: Option<PathBuf>,
    /// Use the quadratic reference analysis.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub out: DataFormat,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub save_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub out: DataFormat,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct DmdArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub cost: CostArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub out: ReportFormat,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub save_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: KernelKind,
    #[arg(long)]
    pub managed: bool,
    /// `lo..hi` (powers of two in between) or a comma-separated list.
    #[arg(long, value_parser = parse_sizes)]
    pub n: Sizes,
    /// Fixed tile edge; defaults to about sqrt(n) per size.
    #[arg(long)]
    pub tile: Option<usize>,
    #[command(flatten)]
    pub cost: CostArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub tile: Option<usize>,
    #[command(flatten)]
    pub cost: CostArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    #[arg(long)]
    pub cost_file: PathBuf,
    #[arg(long, default_value_t = 1 << 24)]
    pub max_pos: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write a gnuplot script drawing the CSV.
    #[arg(long, requires = "output")]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sizes(pub Vec<usize>);

fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    s.parse().map_err(|e: kernels::KernelError| e.to_string())
}

fn parse_semantics(s: &str) -> Result<TraceSemantics, String> {
    s.parse().map_err(|e: kernels::KernelError| e.to_string())
}

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    let bad = || format!("bad size list '{s}' (expected lo..hi or a,b,c)");
    let sizes = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        std::iter::successors(Some(lo), |&x| Some(x * 2)).take_while(|&x| x <= hi).collect()
    } else {
        s.split(',').map(|p| p.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>()?
    };
    Ok(Sizes(sizes))
}

enum CliError {
    Usage(String),
    Failed(String),
}

type CliResult = Result<i32, CliError>;

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn failed(msg: impl std::fmt::Display) -> CliError {
    CliError::Failed(msg.to_string())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return if code == 0 { 0 } else { 2 };
        }
    };
    let result = match cli.command {
        Command::Trace(a) => cmd_trace(a, out),
        Command::Rdd(a) => cmd_rdd(a, out),
        Command::Model(a) => cmd_model(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Dmd(a) => cmd_dmd(a, out),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Latency(a) => cmd_latency(a, out),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "usage error: {m}");
            2
        }
        Err(CliError::Failed(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
    }
}

fn out_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(p) => {
            let p = out_path(p);
            std::fs::write(&p, text).map_err(|e| failed(format!("{}: {e}", p.display())))
        }
        None => out.write_all(text.as_bytes()).map_err(failed),
    }
}

fn write_trace(trace: &MemoryTrace, path: &Path) -> Result<PathBuf, CliError> {
    let p = out_path(path);
    trace_io::save(trace, &p).map_err(|e| failed(format!("{}: {e}", p.display())))?;
    Ok(p)
}

impl KernelArgs {
    fn config(&self) -> Result<KernelConfig, CliError> {
        let mut kind = self.kernel.ok_or_else(|| usage("--kernel is required"))?;
        let n = self.n.ok_or_else(|| usage("--n is required"))?;
        if self.managed {
            kind = kind.managed().ok_or_else(|| usage(format!("--managed does not apply to {kind}")))?;
        }
        if self.tile.is_some() && kind != KernelKind::Tiled {
            return Err(usage(format!("--tile does not apply to {kind}")));
        }
        let cfg = KernelConfig { kind, n, tile: self.tile, semantics: self.semantics };
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

impl CostArgs {
    fn model(&self) -> Result<CostModel, CliError> {
        match (self.cost, &self.cost_file) {
            (CostKind::Sqrt, None) => Ok(CostModel::GeometricSqrt),
            (CostKind::Sqrt, Some(_)) => Err(usage("--cost-file needs --cost staircase")),
            (CostKind::Staircase, None) => Err(usage("--cost staircase needs --cost-file")),
            (CostKind::Staircase, Some(p)) => load_staircase(p).map_err(usage),
        }
    }
}

fn cmd_trace(a: TraceArgs, out: &mut dyn Write) -> CliResult {
    let (trace, name) = match a.random {
        Some(len) => (random_trace(len, a.alphabet, a.seed), format!("random_{len}_{}_{}.trace", a.alphabet, a.seed)),
        None => {
            let cfg = a.kernel.config()?;
            let tile = cfg.tile.map(|d| format!("_d{d}")).unwrap_or_default();
            (cfg.trace().map_err(usage)?, format!("{}_n{}{tile}.trace", cfg.kind, cfg.n))
        }
    };
    let path = write_trace(&trace, a.output.as_deref().unwrap_or(Path::new(&name)))?;
    let fp = kernels::footprint(&trace);
    let mut s = String::new();
    let _ = writeln!(s, "wrote {}", path.display());
    let _ = writeln!(s, "events {}", trace.len());
    let _ = writeln!(s, "footprint {}", fp.peak_live);
    let _ = writeln!(s, "temporaries {}", fp.temp_ids);
    emit(&s, None, out)?;
    Ok(0)
}

fn cmd_rdd(a: RddArgs, out: &mut dyn Write) -> CliResult {
    let dist = match &a.trace {
        Some(p) => {
            if a.save_trace.is_some() {
                return Err(usage("--save-trace needs a kernel, not --trace"));
            }
            let trace = trace_io::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            histogram(&trace, a.oracle)
        }
        None => {
            let cfg = a.kernel.config()?;
            if a.oracle || a.save_trace.is_some() {
                let trace = cfg.trace().map_err(usage)?;
                if let Some(p) = &a.save_trace {
                    write_trace(&trace, p)?;
                }
                histogram(&trace, a.oracle)
            } else {
                analyze_kernel(&cfg).map_err(usage)?.distribution()
            }
        }
    };
    emit(&format_dist(&dist, a.out), a.output.as_deref(), out)?;
    Ok(0)
}

fn histogram(trace: &MemoryTrace, oracle: bool) -> ReuseDistribution {
    if oracle {
        reuse_histogram_naive(trace)
    } else {
        reuse_histogram(trace)
    }
}

fn format_dist(d: &ReuseDistribution, f: DataFormat) -> String {
    match f {
        DataFormat::Csv => d.to_csv(),
        DataFormat::Json => d.to_json() + "\n",
    }
}

fn check_model_n(n: usize) -> Result<(), CliError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(usage(format!("--n {n} is not a power of two")));
    }
    Ok(())
}

fn cmd_model(a: ModelArgs, out: &mut dyn Write) -> CliResult {
    check_model_n(a.n)?;
    let dist = compute_rmm_rdd(a.n).map_err(failed)?;
    emit(&format_dist(&dist, a.out), a.output.as_deref(), out)?;
    Ok(0)
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> CliResult {
    check_model_n(a.n)?;
    let report = verify_model(a.n).map_err(failed)?;
    emit(&report.to_string(), None, out)?;
    Ok(if report.equal { 0 } else { 1 })
}

fn cmd_dmd(a: DmdArgs, out: &mut dyn Write) -> CliResult {
    let cfg = a.kernel.config()?;
    let cost = a.cost.model()?;
    let report = match &a.save_trace {
        None => dmd::report(&cfg, &cost, a.cost.cold).map_err(failed)?,
        Some(p) => {
            let trace = cfg.trace().map_err(usage)?;
            write_trace(&trace, p)?;
            let fp = kernels::footprint(&trace);
            let mut r = DmdReport::from_distribution(&reuse_histogram(&trace), fp.peak_live, cost, a.cost.cold)
                .map_err(failed)?;
            r.kernel = Some(cfg);
            r.n = cfg.n;
            if let Some(b) = bounds_for(cfg.kind, cfg.n, cfg.tile) {
                r.bound_low = b.low;
                r.bound_high = Some(b.high);
            }
            r
        }
    };
    let text = match a.out {
        ReportFormat::Text => report.to_string() + "\n",
        ReportFormat::Json => report.to_json() + "\n",
    };
    emit(&text, a.output.as_deref(), out)?;
    Ok(0)
}

fn table_exponent(kind: KernelKind) -> f64 {
    TABLE_EXPONENTS.iter().find(|e| e.0 == kind).map_or(f64::NAN, |e| e.1)
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut kind = a.kernel;
    if a.managed {
        kind = kind.managed().ok_or_else(|| usage(format!("--managed does not apply to {kind}")))?;
    }
    let sizes = a.n.0;
    let (lo, hi) = (sizes.iter().min().copied().unwrap_or(0), sizes.iter().max().copied().unwrap_or(0));
    let mut distinct = sizes.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 || hi < 8 * lo {
        return Err(usage(format!("sweep needs at least 4 sizes spanning 3 octaves, got {sizes:?}")));
    }
    if a.tile.is_some() && kind != KernelKind::Tiled {
        return Err(usage(format!("--tile does not apply to {kind}")));
    }
    for &n in &sizes {
        let mut cfg = KernelConfig::new(kind, n);
        if kind == KernelKind::Tiled {
            cfg.tile = Some(a.tile.unwrap_or_else(|| dmd::tile_for(n)));
        }
        cfg.validate().map_err(usage)?;
    }
    let cost = a.cost.model()?;
    let table = dmd::sweep(&[kind], &sizes, a.tile, &cost, a.cost.cold, |r| {
        let _ = writeln!(err, "{} n={} dmd={}", r.kernel, r.n, sig6(r.dmd));
    })
    .map_err(failed)?;
    let fit = fit_exponent(&table.samples(kind)).map_err(failed)?;
    let summary = format!(
        "fit exponent {} coefficient {} residual {} (table exponent {})\n",
        sig6(fit.exponent),
        sig6(fit.coefficient),
        sig6(fit.residual),
        sig6(table_exponent(kind))
    );
    match &a.output {
        Some(p) => {
            emit(&table.to_csv(), Some(p), out)?;
            emit(&summary, None, out)?;
        }
        None => emit(&format!("{}# {summary}", table.to_csv()), None, out)?,
    }
    Ok(0)
}

fn cmd_compare(a: CompareArgs, out: &mut dyn Write) -> CliResult {
    check_model_n(a.n)?;
    let cost = a.cost.model()?;
    let mut configs = comparison_kernels(a.n);
    if let Some(d) = a.tile {
        for c in configs.iter_mut().filter(|c| c.kind == KernelKind::Tiled) {
            c.tile = Some(d);
        }
    }
    for c in &configs {
        c.validate().map_err(usage)?;
    }
    let mut reports =
        configs.iter().map(|c| dmd::report(c, &cost, a.cost.cold)).collect::<Result<Vec<_>, _>>().map_err(failed)?;
    reports.sort_by(|x, y| y.dmd_value.total_cmp(&x.dmd_value));

    let mut s = String::new();
    let _ = writeln!(s, "n={} cost={} cold={:?}", a.n, cost.name(), a.cost.cold);
    let _ = writeln!(s, "{:<4} {:<17} {:>12} {:>9}  prediction", "rank", "kernel", "dmd", "exponent");
    for (rank, r) in reports.iter().enumerate() {
        let k = r.kernel.expect("kernel report");
        let name = match k.tile {
            Some(d) => format!("{}(d={d})", k.kind),
            None => k.kind.to_string(),
        };
        let prediction = match (r.bound_low, r.bound_high) {
            (Some(lo), Some(hi)) if lo == hi => format!("formula {} (ratio {})", sig6(hi), sig6(r.dmd_value / hi)),
            (Some(lo), Some(hi)) => format!("[{}, {}] (ratio to low {})", sig6(lo), sig6(hi), sig6(r.dmd_value / lo)),
            (None, Some(hi)) => format!("<= {} (ratio {})", sig6(hi), sig6(r.dmd_value / hi)),
            _ => String::new(),
        };
        let t1 = if theorem1_check(r).pass { "" } else { "  R-bound VIOLATED" };
        let _ = writeln!(
            s,
            "{:<4} {:<17} {:>12} {:>9}  {prediction}{t1}",
            rank + 1,
            name,
            sig6(r.dmd_value),
            sig6(table_exponent(k.kind))
        );
    }
    emit(&s, a.output.as_deref(), out)?;
    Ok(0)
}

fn cmd_latency(a: LatencyArgs, out: &mut dyn Write) -> CliResult {
    if a.max_pos == 0 {
        return Err(usage("--max-pos must be positive"));
    }
    let cost = load_staircase(&a.cost_file).map_err(usage)?;
    let fit = dmd::fit_sqrt_scale(&cost, a.max_pos);
    emit(&dmd::plot_csv(&cost, a.max_pos), a.output.as_deref(), out)?;
    if let (Some(g), Some(csv)) = (&a.gnuplot, &a.output) {
        let png = csv.with_extension("png");
        let script = dmd::gnuplot_script(&csv.display().to_string(), &png.display().to_string());
        emit(&script, Some(g), out)?;
    }
    if a.output.is_some() {
        let s =
            format!("scale {} max_over {} max_under {}\n", sig6(fit.scale), sig6(fit.max_over), sig6(fit.max_under));
        emit(&s, None, out)?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("dmd").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_sizes("16..256").unwrap().0, vec![16, 32, 64, 128, 256]);
        assert_eq!(parse_sizes("2,4,8").unwrap().0, vec![2, 4, 8]);
        assert!(parse_sizes("8..4").is_err());
        assert!(parse_sizes("x").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["model", "--n", "6"]).0, 2);
        assert_eq!(run_args(&["rdd", "--kernel", "tiled", "--n", "8", "--tile", "16"]).0, 2);
        assert_eq!(run_args(&["dmd", "--kernel", "naive", "--n", "4", "--managed"]).0, 2);
        assert_eq!(run_args(&["dmd", "--kernel", "rmm", "--n", "4", "--cost", "staircase"]).0, 2);
        assert_eq!(run_args(&["sweep", "--kernel", "naive", "--n", "4..16"]).0, 2);
        assert_eq!(run_args(&["frobnicate"]).0, 2);
        assert_eq!(run_args(&["--help"]).0, 0);
    }

    #[test]
    fn verify_and_model() {
        let (code, out, _) = run_args(&["verify", "--n", "2"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("equal"));
        let (code, out, _) = run_args(&["model", "--n", "2"]);
        assert_eq!(code, 0);
        let (_, rdd, _) = run_args(&["rdd", "--kernel", "rmm", "--n", "2"]);
        assert_eq!(out, rdd);
    }
}
