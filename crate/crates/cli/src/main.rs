use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cyclegaps::constellation::{parse_list, DEFAULT_CLOSURE_BUDGET};
use cyclegaps::estimator::{compute_hl_constants, hl_interval_estimate, DEFAULT_HL_BOUND};
use cyclegaps::gapcycle::{uniformity_statistic, CycleBuilder, DEFAULT_MAX_STAGE};
use cyclegaps::recurrence::{run_to, Mode, RecurrenceOptions, DEFAULT_EXACT_CAP};
use cyclegaps::report::{emit_svg, run_compare, write_records, write_table, CompareConfig};
use cyclegaps::sieve::{
    first_occurrence, interval_counts, match_constellations, write_ledger, CheckpointPolicy,
    SieveConfig, DEFAULT_SEGMENT_BYTES,
};
use cyclegaps::{Constellation, ErrorKind};

#[derive(Parser)]
#[command(
    name = "cyclegaps",
    version,
    about = "Constellations among primes via the cycle of gaps"
)]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Table format (default: csv for `compare`, tsv otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads for segment sieving.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Csv,
}

impl Format {
    fn delimiter(self) -> u8 {
        match self {
            Format::Tsv => b'\t',
            Format::Csv => b',',
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Density,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the cycle of gaps G(p#).
    Cycle {
        prime: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_STAGE)]
        max_stage: u64,
    },
    /// Count constellations in G(p#) by direct scan.
    ExactCount {
        prime: u64,
        #[arg(required = true)]
        constellations: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_STAGE)]
        max_stage: u64,
    },
    /// Run the counting recurrence stage by stage.
    Recurrence {
        constellation: String,
        /// Last stage prime.
        #[arg(long, value_parser = parse_count)]
        to: u64,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        /// Initialization stage (default: smallest valid one).
        #[arg(long)]
        init: Option<u64>,
        /// Emit every closure node, not just the constellation itself.
        #[arg(long)]
        all_nodes: bool,
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        exact_cap: u64,
        #[arg(long, default_value_t = DEFAULT_CLOSURE_BUDGET)]
        closure_budget: u64,
    },
    /// Count real copies over [q, q²] with the segmented sieve.
    SieveCount {
        #[command(flatten)]
        sieve: SieveArgs,
        /// Also dump the binary match ledger here.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Smallest first prime of a copy of the constellation.
    First {
        constellation: String,
        #[arg(long, value_parser = parse_count)]
        limit: u64,
    },
    /// Hardy–Littlewood constants, optionally an interval estimate.
    Hl {
        #[arg(long, value_parser = parse_count, default_value_t = DEFAULT_HL_BOUND)]
        bound: u64,
        #[arg(long, requires = "q")]
        constellation: Option<String>,
        #[arg(long, requires = "constellation")]
        q: Option<u64>,
    },
    /// Estimates versus sieve counts for every checkpoint.
    Compare {
        #[command(flatten)]
        sieve: SieveArgs,
        /// Also render the error curves as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CLOSURE_BUDGET)]
        closure_budget: u64,
    },
    /// Chi-squared bin occupancy of a constellation's copies in G(p#).
    DiagnoseUniformity {
        prime: u64,
        constellation: String,
        #[arg(long, default_value_t = 16)]
        bins: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_STAGE)]
        max_stage: u64,
    },
}

#[derive(clap::Args)]
struct SieveArgs {
    /// Sieve upper bound; accepts 1e9 style.
    #[arg(long, value_parser = parse_count)]
    limit: u64,
    /// A file with one constellation per line, or an inline list separated by `;` or spaces.
    #[arg(long)]
    constellations: String,
    #[arg(long, default_value_t = DEFAULT_SEGMENT_BYTES)]
    segment_size: usize,
    /// `auto` or a file of checkpoint primes.
    #[arg(long, default_value = "auto")]
    checkpoints: String,
}

impl SieveArgs {
    fn config(&self, threads: usize) -> Result<SieveConfig> {
        let mut cfg = SieveConfig::new(self.limit, constellation_list(&self.constellations)?);
        cfg.segment_size = self.segment_size;
        cfg.threads = threads;
        cfg.checkpoints = if self.checkpoints == "auto" {
            CheckpointPolicy::Auto
        } else {
            let text = fs::read_to_string(&self.checkpoints)
                .with_context(|| format!("reading checkpoints from {}", self.checkpoints))?;
            let qs = text
                .split_whitespace()
                .map(parse_count)
                .collect::<Result<Vec<_>, _>>()
                .map_err(cyclegaps::Error::Config)?;
            CheckpointPolicy::Explicit(qs)
        };
        Ok(cfg)
    }
}

/// Integers, optionally in `1e9` / `1.2E7` notation.
fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x < 0.0 || x.fract() != 0.0 || x > u64::MAX as f64 {
        return Err(format!("`{s}` is not a non-negative integer"));
    }
    Ok(x as u64)
}

fn constellation(text: &str) -> Result<Constellation> {
    Ok(Constellation::parse(text)?)
}

fn constellation_list(arg: &str) -> Result<Vec<Constellation>> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return Ok(parse_list(&text)?);
    }
    arg.split(|c: char| c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(constellation)
        .collect()
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    let table_fmt = cli.format.unwrap_or(Format::Tsv);
    let delim = table_fmt.delimiter();
    match cli.command {
        Command::Cycle { prime, max_stage } => {
            let cycle = CycleBuilder::with_max_stage(max_stage).build(prime)?;
            let mut w = output(&cli.out)?;
            w.write_all(cycle.dump().as_bytes())?;
            w.flush()?;
        }
        Command::ExactCount {
            prime,
            constellations,
            max_stage,
        } => {
            let cycle = CycleBuilder::with_max_stage(max_stage).build(prime)?;
            let list = constellations
                .iter()
                .map(|t| constellation(t))
                .collect::<Result<Vec<_>>>()?;
            let rows = list.iter().map(|s| {
                [
                    prime.to_string(),
                    s.to_string(),
                    cycle.scan_count(s).to_string(),
                ]
            });
            write_records(
                output(&cli.out)?,
                delim,
                &["stage_prime", "constellation", "count"],
                rows,
            )?;
        }
        Command::Recurrence {
            constellation: text,
            to,
            mode,
            init,
            all_nodes,
            exact_cap,
            closure_budget,
        } => {
            let opts = RecurrenceOptions {
                mode: match mode {
                    ModeArg::Exact => Mode::Exact,
                    ModeArg::Density => Mode::Density,
                },
                init_stage: init,
                exact_cap,
                closure_budget,
                builder: CycleBuilder::default(),
            };
            let traj = run_to(&constellation(&text)?, to, &opts)?;
            let rows = traj
                .rows(all_nodes)
                .into_iter()
                .map(|(p, node, v)| [p.to_string(), node.to_string(), v.to_string()]);
            write_records(
                output(&cli.out)?,
                delim,
                &["stage_prime", "node", "count_or_density"],
                rows,
            )?;
        }
        Command::SieveCount { sieve, ledger } => {
            let cfg = sieve.config(cli.threads)?;
            let checkpoints = cfg.checkpoint_primes()?;
            let found = match_constellations(&cfg)?;
            if let Some(path) = ledger {
                let f =
                    File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_ledger(&found, BufWriter::new(f))?;
            }
            let table = interval_counts(&found, &checkpoints)?;
            let mut rows = Vec::new();
            for (ci, s) in table.constellations.iter().enumerate() {
                for (qi, &q) in table.checkpoints.iter().enumerate() {
                    rows.push([
                        q.to_string(),
                        (q * q).to_string(),
                        s.to_string(),
                        table.counts[ci][qi].to_string(),
                    ]);
                }
            }
            write_records(
                output(&cli.out)?,
                delim,
                &["q", "q_squared", "constellation", "count"],
                rows,
            )?;
        }
        Command::First {
            constellation: text,
            limit,
        } => {
            let s = constellation(&text)?;
            let found = first_occurrence(&s, limit)?;
            let mut w = output(&cli.out)?;
            match found {
                Some(p) => writeln!(w, "{}\t{p}", s.compact())?,
                None => writeln!(w, "{}\tnot-found", s.compact())?,
            }
            w.flush()?;
        }
        Command::Hl {
            bound,
            constellation: text,
            q,
        } => {
            let k = compute_hl_constants(bound)?;
            let mut rows = vec![
                ["c2".to_string(), k.c2.to_string()],
                ["c4".to_string(), k.c4.to_string()],
                [
                    "truncation_bound".to_string(),
                    k.truncation_bound.to_string(),
                ],
                ["tail_tolerance".to_string(), k.tail_tolerance.to_string()],
            ];
            if let (Some(text), Some(q)) = (text, q) {
                let s = constellation(&text)?;
                rows.push([
                    format!("hl_interval {} q={q}", s.compact()),
                    hl_interval_estimate(&s, q, &k)?.to_string(),
                ]);
            }
            write_records(output(&cli.out)?, delim, &["name", "value"], rows)?;
        }
        Command::Compare {
            sieve,
            svg,
            closure_budget,
        } => {
            let mut cfg = CompareConfig::new(sieve.limit, Vec::new());
            cfg.sieve = sieve.config(cli.threads)?;
            cfg.closure_budget = closure_budget;
            let report = run_compare(&cfg)?;
            let delim = cli.format.unwrap_or(Format::Csv).delimiter();
            write_table(&report, output(&cli.out)?, delim)?;
            if let Some(path) = svg {
                emit_svg(&report, &path)?;
            }
        }
        Command::DiagnoseUniformity {
            prime,
            constellation: text,
            bins,
            max_stage,
        } => {
            let cycle = CycleBuilder::with_max_stage(max_stage).build(prime)?;
            let s = constellation(&text)?;
            let offsets: Vec<u64> = cycle.positions_of(&s).iter().map(|p| p.offset).collect();
            let stat = uniformity_statistic(&offsets, cycle.primorial(), bins)?;
            let rows = [[
                prime.to_string(),
                s.to_string(),
                stat.copies.to_string(),
                stat.bins.to_string(),
                stat.statistic.to_string(),
                stat.dof.to_string(),
            ]];
            write_records(
                output(&cli.out)?,
                delim,
                &[
                    "stage_prime",
                    "constellation",
                    "copies",
                    "bins",
                    "chi_squared",
                    "dof",
                ],
                rows,
            )?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<cyclegaps::Error>() {
            return match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Capacity => 3,
                ErrorKind::Io => 4,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 4;
        }
    }
    2
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        let io =
            c.downcast_ref::<io::Error>()
                .or_else(|| match c.downcast_ref::<cyclegaps::Error>() {
                    Some(cyclegaps::Error::Io(e)) => Some(e),
                    _ => None,
                });
        io.is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 1 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {}", anyhow!(e));
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
