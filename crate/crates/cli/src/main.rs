use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rankone_cli::config::{parse_raw, RawConfig, RawConstruction, RawOutput};
use rankone_cli::{run, write_outputs, CliError, Params, RunConfig};

/// Rank-one cutting-and-stacking experiments.
///
/// Flags override the matching `params` entries of the config file.
#[derive(Debug, Parser)]
#[command(name = "rankone", version)]
struct Args {
    /// heights, classify, labels, correlate, weak-limit, similarity,
    /// disjointness, cascade, mobius-sum, telescope or factor
    command: Option<String>,

    /// JSON config file, `-` for stdin.
    #[arg(long)]
    config: Option<PathBuf>,

    /// chacon, odometer2, odometer3, flat3 or class4 (replaces the config construction).
    #[arg(long)]
    preset: Option<String>,

    /// Directory for CSV files and report.txt.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Reference stage j.
    #[arg(long)]
    j: Option<usize>,
    /// Tower depth K.
    #[arg(long = "K")]
    depth: Option<usize>,
    /// Fit window Z.
    #[arg(long = "Z")]
    window: Option<usize>,
    /// Shift n.
    #[arg(long, allow_negative_numbers = true)]
    n: Option<i64>,
    /// Sum length N.
    #[arg(long = "N")]
    big_n: Option<u64>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    d: Option<u64>,
    /// Stage offset m (cascade: number of levels).
    #[arg(long)]
    m: Option<usize>,
    /// Telescoping depth M.
    #[arg(long = "M")]
    unfold: Option<u32>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Orbit start level.
    #[arg(long)]
    start: Option<usize>,
    /// Spacer and cut bound for classification.
    #[arg(long)]
    bound: Option<u64>,
    /// Number of fitted sequence terms.
    #[arg(long)]
    count: Option<usize>,
    /// base, all or class0.
    #[arg(long)]
    observable: Option<String>,
    #[arg(long)]
    support_tol: Option<f64>,
    #[arg(long)]
    coeff_tol: Option<f64>,
    #[arg(long)]
    stability_tol: Option<f64>,
    #[arg(long)]
    residual_tol: Option<f64>,
}

impl Args {
    fn params(&self) -> Params {
        Params {
            j: self.j,
            depth: self.depth,
            window: self.window,
            n: self.n,
            big_n: self.big_n,
            p: self.p,
            q: self.q,
            d: self.d,
            m: self.m,
            unfold: self.unfold,
            horizon: self.horizon,
            seed: self.seed,
            start: self.start,
            bound: self.bound,
            count: self.count,
            observable: self.observable.clone(),
            support_tol: self.support_tol,
            coeff_tol: self.coeff_tol,
            stability_tol: self.stability_tol,
            residual_tol: self.residual_tol,
            ..Params::default()
        }
    }
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let mut raw = match &args.config {
        Some(path) => {
            let text = if path.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| CliError::config(format!("stdin: {e}")))?;
                s
            } else {
                std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
            };
            parse_raw(&text)?
        }
        None => RawConfig {
            construction: RawConstruction::default(),
            command: String::new(),
            params: Params::default(),
            output: RawOutput::default(),
        },
    };
    if let Some(cmd) = &args.command {
        raw.command = cmd.clone();
    }
    if let Some(preset) = &args.preset {
        raw.construction = RawConstruction {
            preset: Some(preset.clone()),
            ..RawConstruction::default()
        };
    }
    if raw.command.is_empty() {
        return Err(CliError::config("command: missing (positional argument or `command` key)"));
    }
    if raw.construction == RawConstruction::default() {
        return Err(CliError::config("construction: missing (use --preset or --config)"));
    }
    raw.params.overlay(&args.params());
    if let Some(dir) = &args.out_dir {
        raw.output.dir = Some(dir.clone());
    }
    RunConfig::from_raw(raw)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = load(&args).and_then(|cfg| {
        let out = run(&cfg)?;
        if let Some(dir) = &cfg.out_dir {
            write_outputs(&out, dir)?;
        }
        Ok((cfg, out))
    });
    match result {
        Ok((cfg, out)) => {
            // a closed pipe downstream is not an error worth reporting
            let mut stdout = std::io::stdout().lock();
            let _ = (|| -> std::io::Result<()> {
                stdout.write_all(out.report.as_bytes())?;
                if cfg.out_dir.is_none() {
                    for (name, body) in &out.files {
                        write!(stdout, "\n# {name}\n{body}")?;
                    }
                }
                stdout.flush()
            })();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rankone: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
