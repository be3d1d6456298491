mod cache;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pcanon_core::lightleaves::{GramOptions, GramStore, LightLeaves, RexPolicy};
use pcanon_core::pcanon::{compute_pcan_multi, is_prime, tilting_weights, verify_properties, PCanOptions, WordChoice};
use pcanon_core::{build_system, CoxeterSystem, Hecke, SystemConfig};
use serde_json::json;

use cache::DiskStore;

#[derive(Parser)]
#[command(name = "pcanon", version, about = "p-canonical bases of Hecke algebras")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute p-canonical basis tables.
    Compute(ComputeArgs),
    /// Print the local intersection form of a word at an element.
    Form(FormArgs),
    /// Print a Kazhdan-Lusztig basis element in the standard basis.
    Kl(KlArgs),
    /// Weights mu with T(mu) appearing in T(lambda) for affine A1.
    TiltingA1(TiltingArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// Named type, e.g. B2, G2, C3, D4, A1~.
    #[arg(long = "type", conflicts_with = "config")]
    ty: Option<String>,
    /// JSON realization file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SystemArgs {
    fn load(&self) -> Result<CoxeterSystem> {
        let cfg = match (&self.ty, &self.config) {
            (Some(name), _) => SystemConfig::Named { named: name.clone() },
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            (None, None) => bail!("one of --type or --config is required"),
        };
        Ok(build_system(&cfg)?)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Characteristic; repeat for several. 0 gives the KL basis.
    #[arg(long = "prime", required = true)]
    primes: Vec<u64>,
    #[arg(long, default_value_t = 4)]
    max_length: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Gram cache location; PCANON_CACHE is used when absent.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
    /// Cross-check against the nil Hecke formula and run the property suite.
    #[arg(long)]
    verify: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Use the lexicographically largest reduced word of each element.
    #[arg(long)]
    alternative_words: bool,
    #[arg(long)]
    rev_lex: bool,
}

#[derive(Args)]
struct FormArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    word: String,
    #[arg(long)]
    at: String,
    #[arg(long = "prime", default_values_t = [2, 3])]
    primes: Vec<u64>,
    /// Also print the full polynomial pairing.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct KlArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    element: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct TiltingArgs {
    #[arg(long)]
    prime: u64,
    #[arg(long)]
    lambda: u64,
}

fn cache_dir(args: &ComputeArgs) -> Option<PathBuf> {
    if args.no_cache {
        return None;
    }
    args.cache_dir.clone().or_else(|| std::env::var_os("PCANON_CACHE").map(PathBuf::from))
}

fn check_primes(primes: &[u64]) -> Result<()> {
    for (i, &p) in primes.iter().enumerate() {
        if p != 0 && !is_prime(p) {
            bail!("{p} is not a prime");
        }
        if primes[..i].contains(&p) {
            bail!("prime {p} given twice");
        }
    }
    Ok(())
}

fn compute(args: &ComputeArgs) -> Result<bool> {
    check_primes(&args.primes)?;
    if let Some(n) = args.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let sys = Arc::new(args.system.load()?);
    let hecke = Hecke::new(sys.clone());
    let store: Option<Arc<dyn GramStore>> = match cache_dir(args) {
        Some(dir) => Some(Arc::new(DiskStore::open(dir.clone()).with_context(|| format!("cache {}", dir.display()))?)),
        None => None,
    };
    let opts = PCanOptions {
        maxlen: args.max_length,
        word_choice: if args.alternative_words { WordChoice::Alternative } else { WordChoice::ShortLex },
        rex_policy: if args.rev_lex { RexPolicy::RevLex } else { RexPolicy::Lex },
        verify_nil_hecke: args.verify,
        store,
        ..Default::default()
    };
    let tables = compute_pcan_multi(&hecke, &args.primes, &opts)?;

    let mut ok = true;
    if args.verify {
        for t in &tables {
            let report = verify_properties(&hecke, t)?;
            for v in report.violations() {
                eprintln!("p={}: {v}", t.prime);
                ok = false;
            }
            if t.provenance.nil_hecke_mismatches > 0 {
                eprintln!("p={}: {} nil Hecke mismatches", t.prime, t.provenance.nil_hecke_mismatches);
                ok = false;
            }
        }
    }

    match args.format {
        Format::Json => {
            let mut out: Vec<_> = tables.iter().map(|t| t.to_json(&sys)).collect();
            let value = if out.len() == 1 { out.pop().unwrap() } else { out.into() };
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Format::Text => {
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    println!();
                }
                println!("# {} p={} max-length={}", sys.name(), t.prime, t.maxlen);
                print!("{}", t.to_text(&hecke));
            }
        }
    }
    Ok(ok)
}

fn form(args: &FormArgs) -> Result<()> {
    check_primes(&args.primes)?;
    let sys = args.system.load()?;
    let word = sys.parse_word(&args.word)?;
    let x = sys.parse_elem(&args.at)?;
    let ll = LightLeaves::new(&sys, RexPolicy::Lex);
    let primes: Vec<u64> = args.primes.iter().copied().filter(|&p| p != 0).collect();
    let fam = ll.gram(&word, &x, &GramOptions { primes, exact: args.exact, ..Default::default() })?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&fam.to_json(&sys))?),
        Format::Text => {
            println!("word {} at {}", sys.format_word(&word), sys.format_word(x.word()));
            for b in &fam.blocks {
                println!("degree {}:", b.degree);
                for row in &b.matrix {
                    println!("  {}", row.iter().map(i64::to_string).collect::<Vec<_>>().join(" "));
                }
            }
            println!("rank over Q: {}", fam.rank_q);
            for (p, r) in &fam.ranks_p {
                println!("rank over F_{p}: {r}");
            }
            if let Some(pairing) = &fam.pairing {
                println!("pairing:");
                for row in pairing {
                    println!("  {}", row.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(", "));
                }
            }
        }
    }
    Ok(())
}

fn kl(args: &KlArgs) -> Result<()> {
    let sys = Arc::new(args.system.load()?);
    let hecke = Hecke::new(sys.clone());
    let x = sys.parse_elem(&args.element)?;
    let b = hecke.kl_basis(&x);
    match args.format {
        Format::Json => {
            let coeffs: serde_json::Map<_, _> =
                b.iter().map(|(y, c)| (sys.format_word(y.word()), serde_json::to_value(c).unwrap())).collect();
            println!("{}", serde_json::to_string_pretty(&json!({"element": args.element, "std": coeffs}))?);
        }
        Format::Text => println!("kl_{{{}}} = {}", sys.format_word(x.word()), hecke.format(&b, "H")),
    }
    Ok(())
}

fn tilting(args: &TiltingArgs) -> Result<()> {
    if !is_prime(args.prime) {
        bail!("{} is not a prime", args.prime);
    }
    let ws = tilting_weights(args.lambda, args.prime);
    println!("{}", ws.iter().map(u64::to_string).collect::<Vec<_>>().join(" "));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Compute(a) => compute(a),
        Cmd::Form(a) => form(a).map(|_| true),
        Cmd::Kl(a) => kl(a).map(|_| true),
        Cmd::TiltingA1(a) => tilting(a).map(|_| true),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
