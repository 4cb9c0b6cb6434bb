use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twolevel_lsh::io::{export_highlight, save_xyz, SearchPoint};
use twolevel_lsh::synth::{generate, Family};
use twolevel_lsh::{BoxMode, HashIndex};
use twolevel_lsh_bench::memory::write_memory;
use twolevel_lsh_bench::studies::{write_scale, write_sweep, StudyOptions};
use twolevel_lsh_bench::{
    memory_report, parse_k_list, parse_list, reduct_rows, run_bench, scale_study, sweep_p_avg, write_records,
    write_reduct, BenchConfig, BenchError, Input, Structure,
};

#[derive(Parser)]
#[command(name = "bench", about = "Benchmarks for the two-level LSH point index")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time kNN and radius queries on each input and structure.
    Run {
        /// Point-cloud files or synthetic:<family>:<m>[:<seed>] specs, comma separated.
        #[arg(long, required = true)]
        input: String,
        #[arg(long, default_value = "2llsh,kdtree,octree")]
        structures: String,
        #[arg(long, default_value = "1..5")]
        k: String,
        #[arg(long, default_value = "2,4,6,8,10")]
        r: String,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        p_avg: Option<u32>,
        #[arg(long)]
        layer: Option<u32>,
        /// Offset queries by up to this much per axis.
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write Reduct rows here.
        #[arg(long)]
        reduct_out: Option<PathBuf>,
    },
    /// Query time against p_avg on one model.
    SweepPavg {
        #[arg(long)]
        input: String,
        #[arg(long, default_value = "5,10,15,20,30,39,48,60,80,100,150,200")]
        p_avg: String,
        #[arg(long, default_value = "1..5")]
        k: String,
        #[arg(long, default_value = "2,4,6,8,10")]
        r: String,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean query time against cloud size.
    Scale {
        #[arg(long, default_value = "box")]
        family: String,
        #[arg(long, default_value = "1000,5000,10000,100000,200000")]
        m: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 4.0)]
        r: f64,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pointer memory of each structure at the given sizes.
    Memory {
        #[arg(long, default_value = "5000,10000,100000,200000,2500000")]
        m: String,
        #[arg(long, default_value = "kdtree,octree,2llsh")]
        structures: String,
        #[arg(long)]
        p_avg: Option<u32>,
        #[arg(long)]
        layer: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Colored PLY of one query's neighbors.
    Highlight {
        #[arg(long)]
        input: String,
        #[arg(long)]
        q_index: u32,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 4.0)]
        r: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic cloud as XYZ.
    Synth {
        #[arg(long)]
        family: String,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, BenchError> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run {
            input,
            structures,
            k,
            r,
            queries,
            seed,
            p_avg,
            layer,
            jitter,
            out,
            reduct_out,
        } => {
            let config = BenchConfig {
                inputs: parse_list::<String>(&input)?
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_, _>>()?,
                structures: parse_list(&structures)?,
                query_count: queries,
                k_list: parse_k_list(&k)?,
                r_list: parse_list(&r)?,
                p_avg_override: p_avg,
                layer_override: layer,
                seed,
                jitter,
            };
            let records = run_bench(&config)?;
            write_records(&records, output(&out)?)?;
            if let Some(path) = reduct_out {
                write_reduct(&reduct_rows(&records), File::create(path)?)?;
            }
        }
        Command::SweepPavg {
            input,
            p_avg,
            k,
            r,
            queries,
            seed,
            repeats,
            out,
        } => {
            let model = input.parse::<Input>()?.load()?;
            let opts = StudyOptions { queries, seed, repeats };
            let rows = sweep_p_avg(&model, &parse_list(&p_avg)?, &parse_k_list(&k)?, &parse_list(&r)?, opts)?;
            write_sweep(&rows, output(&out)?)?;
        }
        Command::Scale {
            family,
            m,
            k,
            r,
            queries,
            seed,
            repeats,
            out,
        } => {
            let family: Family = family.parse()?;
            let opts = StudyOptions { queries, seed, repeats };
            let rows = scale_study(family, &parse_list(&m)?, k, r, opts)?;
            write_scale(&rows, output(&out)?)?;
        }
        Command::Memory {
            m,
            structures,
            p_avg,
            layer,
            out,
        } => {
            let structures: Vec<Structure> = parse_list(&structures)?;
            write_memory(
                &memory_report(&parse_list(&m)?, &structures, p_avg, layer),
                output(&out)?,
            )?;
        }
        Command::Highlight {
            input,
            q_index,
            k,
            r,
            out,
        } => {
            let model = input.parse::<Input>()?.load()?;
            let Some(&q) = model.cloud.get(q_index) else {
                return Err(BenchError::Argument(format!(
                    "q-index {q_index} out of range for {} points",
                    model.cloud.len()
                )));
            };
            let index = HashIndex::build(model.cloud.clone(), BoxMode::Obb, None)?;
            let knn = index.knn(&q, k)?;
            let rn = index.radius(&q, r)?;
            export_highlight(&model.cloud, SearchPoint::Cloud(q_index), &knn, &rn, &out)?;
        }
        Command::Synth { family, m, seed, out } => {
            save_xyz(&generate(family.parse()?, m, seed)?, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::from(match e {
                BenchError::ChecksumMismatch { .. } => 2,
                BenchError::Input(twolevel_lsh::Error::Write { .. }) | BenchError::Output(_) | BenchError::Csv(_) => 1,
                BenchError::Input(_) | BenchError::Argument(_) => 3,
            })
        }
    }
}
