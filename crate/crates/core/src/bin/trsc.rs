use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trsc::config::load_config;
use trsc::cost::{sweep, SWEEP_HEADER};
use trsc::workload::{compare_baselines, load_trace, rows_to_csv, synth_workload};
use trsc::{
    compress, encode_sn, encode_un, mul_reference, BinaryOperand, DistributionSpec, Error,
    MacConfig, MacEngine, Term, Workload,
};

#[derive(Parser)]
#[command(name = "trsc", version, about = "TR-assisted stochastic-computing MAC simulator")]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthetic workloads
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Write the primary output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Engine {
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    parallelism: Option<u32>,
    #[arg(long)]
    seed_compressed: bool,
    #[arg(long)]
    signed: bool,
    /// Write the cost ledger as CSV
    #[arg(long)]
    ledger_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the SN (or UN) of a value, index 0 leftmost
    Encode {
        #[arg(long)]
        width: u32,
        #[arg(long)]
        value: u32,
        #[arg(long)]
        unary: bool,
    },
    /// Pseudo-fractal compression of a value
    Compress {
        #[arg(long)]
        width: u32,
        #[arg(long)]
        value: u32,
        #[arg(long)]
        parallelism: u32,
    },
    /// Multiply one pair, or every pair of a trace
    Mul {
        #[command(flatten)]
        engine: Engine,
        #[arg(long, required_unless_present = "trace")]
        a: Option<u32>,
        #[arg(long, required_unless_present = "trace")]
        b: Option<u32>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Dot product of a trace or an inline list like 21:19,13:15,3:7:-1
    Dot {
        #[command(flatten)]
        engine: Engine,
        #[arg(long, conflicts_with = "pairs")]
        trace: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<String>,
    },
    /// TR-assisted layouts against the APC baseline
    Compare {
        #[command(flatten)]
        engine: Engine,
        #[arg(long, conflicts_with = "pairs")]
        trace: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<String>,
    },
    /// Sweep widths and parallelisms over a workload
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "8")]
        widths: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        parallelisms: Vec<u32>,
        /// Trace CSV, or network[:count] / uniform[:count]
        #[arg(long, default_value = "network:2000")]
        workload: String,
        #[arg(long)]
        seed_compressed: bool,
    },
    /// Render a sweep results file sorted by (n, P)
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Exact vs stochastic MACs on a small MLP
    Mlp,
}

enum Failure {
    Config(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::BadParallelism(_)
            | Error::WidthOutOfRange(_)
            | Error::SegExpOutOfRange { .. } => Failure::Config(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn base_config(cli: &Cli) -> Res<MacConfig> {
    match &cli.config {
        Some(p) => load_config(p).map_err(|e| match e {
            Error::Io(m) => Failure::Config(format!("{}: {m}", p.display())),
            e => Failure::Config(e.to_string()),
        }),
        None => Ok(MacConfig::default()),
    }
}

fn engine_config(cli: &Cli, e: &Engine) -> Res<MacConfig> {
    let mut cfg = base_config(cli)?;
    if let Some(w) = e.width {
        cfg.width = w;
    }
    if let Some(p) = e.parallelism {
        if !(p >= 2 && p.is_power_of_two()) {
            return Err(Error::BadParallelism(p).into());
        }
        cfg.seg_exp = p.trailing_zeros();
    }
    cfg.seed_compressed |= e.seed_compressed;
    cfg.signed |= e.signed;
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cli: &Cli, text: &str) -> Res<()> {
    match &cli.out {
        Some(p) => write_file(p, text),
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(text.as_bytes()).map_err(|e| Failure::Input(e.to_string()))
        }
    }
}

fn write_file(p: &Path, text: &str) -> Res<()> {
    std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
}

fn parse_pairs(s: &str) -> Res<Vec<Term>> {
    s.split(',')
        .map(|item| {
            let f: Vec<&str> = item.trim().split(':').collect();
            let num = |x: &str| {
                x.parse::<i64>().map_err(|_| Failure::Input(format!("bad pair '{item}'")))
            };
            match f.as_slice() {
                [a, b] => Ok(Term::new(num(a)? as u32, num(b)? as u32)),
                [a, b, s] => Ok(Term::signed(num(a)? as u32, num(b)? as u32, num(s)? as i8)),
                _ => Err(Failure::Input(format!("bad pair '{item}'"))),
            }
        })
        .collect()
}

fn terms_from(trace: &Option<PathBuf>, pairs: &Option<String>, width: u32) -> Res<Vec<Term>> {
    match (trace, pairs) {
        (Some(t), _) => Ok(load_trace(t, width)?),
        (None, Some(p)) => parse_pairs(p),
        (None, None) => Err(Failure::Input("give --trace or --pairs".into())),
    }
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Encode { width, value, unary } => {
            let b = BinaryOperand::new(*value, *width)?;
            let bits = if *unary { encode_un(b).bits } else { encode_sn(b).bits };
            emit(cli, &format!("{bits}\n"))
        }
        Cmd::Compress { width, value, parallelism } => {
            if !(*parallelism >= 2 && parallelism.is_power_of_two()) {
                return Err(Error::BadParallelism(*parallelism).into());
            }
            let s = parallelism.trailing_zeros();
            let c = compress(BinaryOperand::new(*value, *width)?, s)?;
            let ratio = trsc::pfc::compression_ratio(*width, s)?;
            emit(
                cli,
                &format!(
                    "seed,low_bits,stored_len,ratio\n{},{},{},{:.4}\n",
                    c.seed,
                    c.low_bits,
                    c.stored_len(),
                    ratio
                ),
            )
        }
        Cmd::Mul { engine, a, b, trace } => {
            let cfg = engine_config(cli, engine)?;
            let terms = match trace {
                Some(t) => load_trace(t, cfg.width)?,
                None => vec![Term::new(a.unwrap_or(0), b.unwrap_or(0))],
            };
            let compressed = cfg.seed_compressed;
            let mut e = MacEngine::new(cfg.clone())?;
            let mut out = String::from("a,b,count,reference,cycles,energy_pj\n");
            let mut total = trsc::CostLedger::new();
            for t in &terms {
                let (x, y) = (BinaryOperand::new(t.a, cfg.width)?, BinaryOperand::new(t.b, cfg.width)?);
                let r = if compressed { e.multiply_seed_compressed(x, y)? } else { e.multiply(x, y)? };
                let want = mul_reference(x, y)?;
                out.push_str(&format!(
                    "{},{},{},{},{},{:.4}\n",
                    t.a,
                    t.b,
                    r.count,
                    want,
                    r.ledger.cycles(),
                    r.ledger.energy_pj()
                ));
                total.merge(&r.ledger);
            }
            if let Some(p) = &engine.ledger_out {
                write_file(p, &total.to_csv())?;
            }
            emit(cli, &out)
        }
        Cmd::Dot { engine, trace, pairs } => {
            let cfg = engine_config(cli, engine)?;
            let terms = terms_from(trace, pairs, cfg.width)?;
            let r = MacEngine::new(cfg)?.dot_product(&terms)?;
            if let Some(p) = &engine.ledger_out {
                write_file(p, &r.ledger.to_csv())?;
            }
            emit(
                cli,
                &format!(
                    "value,positive,negative,segments,rounds,cycles,energy_pj\n{},{},{},{},{},{},{:.4}\n",
                    r.value,
                    r.positive,
                    r.negative,
                    r.segments_emitted,
                    r.rounds,
                    r.ledger.cycles(),
                    r.ledger.energy_pj()
                ),
            )
        }
        Cmd::Compare { engine, trace, pairs } => {
            let cfg = engine_config(cli, engine)?;
            let terms = terms_from(trace, pairs, cfg.width)?;
            emit(cli, &rows_to_csv(&compare_baselines(&terms, &cfg)?))
        }
        Cmd::Sweep { widths, parallelisms, workload, seed_compressed } => {
            let mut cfg = base_config(cli)?;
            cfg.seed_compressed |= *seed_compressed;
            let w = build_workload(workload, cli.seed)?;
            let r = sweep(widths, parallelisms, &w, &cfg)?;
            for d in &r.diagnostics {
                eprintln!("note: {d}");
            }
            emit(cli, &r.to_csv())
        }
        Cmd::Report { input, format } => emit(cli, &report(input, *format)?),
        Cmd::Mlp => {
            let cfg = base_config(cli)?;
            let r = trsc::mlp::mlp_check(cli.seed, &cfg)?;
            emit(
                cli,
                &format!(
                    "samples,float_accuracy,exact_accuracy,sc_accuracy,drop\n{},{:.4},{:.4},{:.4},{:.4}\n",
                    r.samples,
                    r.float_accuracy,
                    r.exact_accuracy,
                    r.sc_accuracy,
                    r.drop()
                ),
            )
        }
    }
}

fn build_workload(spec: &str, seed: u64) -> Res<Workload> {
    let (kind, count) = match spec.split_once(':') {
        Some((k, c)) => {
            let n = c.parse().map_err(|_| Failure::Config(format!("bad workload count '{c}'")))?;
            (k, n)
        }
        None => (spec, 2000),
    };
    let dist = match kind {
        "network" => DistributionSpec::network(8)?,
        "uniform" => DistributionSpec::uniform(8)?,
        path => {
            let terms = load_trace(Path::new(path), 8)?;
            let id = Path::new(path).file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned());
            return Ok(Workload::new(id, 8, terms));
        }
    };
    Ok(Workload::new(kind, 8, synth_workload(&dist, count, seed)?))
}

fn report(input: &Path, format: Format) -> Res<String> {
    let mut rdr = csv::Reader::from_path(input).map_err(|e| Failure::Input(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Failure::Input(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let want: Vec<&str> = SWEEP_HEADER.split(',').collect();
    if header != want {
        return Err(Failure::Input(format!(
            "columns {} do not match {SWEEP_HEADER}",
            header.join(",")
        )));
    }
    let mut rows: Vec<(u32, u32, Vec<String>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Failure::Input(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let n = rec[0].parse().map_err(|_| Failure::Input(format!("line {line}: bad n")))?;
        let p = rec[1].parse().map_err(|_| Failure::Input(format!("line {line}: bad P")))?;
        rows.push((n, p, rec.iter().map(String::from).collect()));
    }
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(SWEEP_HEADER);
            out.push('\n');
            for r in &rows {
                out.push_str(&r.2.join(","));
                out.push('\n');
            }
        }
        Format::Text => {
            let mut widths: Vec<usize> = want.iter().map(|h| h.len()).collect();
            for r in &rows {
                for (w, c) in widths.iter_mut().zip(&r.2) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cells: Vec<&str>| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            out.push_str(&line(want.clone()));
            out.push('\n');
            for r in &rows {
                out.push_str(&line(r.2.iter().map(String::as_str).collect()));
                out.push('\n');
            }
        }
    }
    Ok(out)
}
