//! `snum`: build operators, compute s-numbers, run width oracles and verify
//! the claimed inequalities from the command line.
//!
//! Exit codes: 0 success or verification pass, 1 verification failure,
//! 2 usage, configuration, parse or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use snum_core::config::{load_config, Config};
use snum_core::operators::{build, TaggedMatrix, TypeConstants};
use snum_core::oracle::{approx_oracle, gelfand_oracle, kolmogorov_oracle, pi2_lower_oracle, OracleConfig};
use snum_core::sequences::{convex_minorant, minorant_rows, DecaySequence, TypeExponents, Variant};
use snum_core::snumbers::{snumber_report, Scale};
use snum_core::verify::{self, emit_report, ClaimForm, Report, ReportPaths, VerifyOptions};
use snum_core::{Error, Result};

#[derive(Parser)]
#[command(name = "snum", version, about = "Operators with prescribed s-number decay and checks of their bounds")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Construction {
    #[arg(long, value_enum)]
    theorem: Theorem,
    /// geometric:<r>, power:<s> or file:<path>.
    #[arg(long)]
    alpha: String,
    #[arg(long, default_value_t = 3)]
    blocks: usize,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long = "C1", default_value_t = 1.0)]
    c1: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    Controlled,
    Twosum,
    Nocotype,
    Type,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyTarget {
    Controlled,
    Twosum,
    Nocotype,
    Type,
    PropOptimal,
    PropSecond,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Gelfand,
    Kolmogorov,
    Approx,
    Pi2,
}

#[derive(Subcommand)]
enum Command {
    /// Convex minorant table as CSV (k, alpha_k, beta_k, floor_k).
    Minorant {
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block index plan, thresholds and diagonal tables as JSON.
    Plan {
        #[command(flatten)]
        construction: Construction,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serialised block operator.
    Build {
        #[command(flatten)]
        construction: Construction,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One s-scale of a matrix file as CSV.
    Snumbers {
        #[arg(long)]
        matrix: PathBuf,
        /// a, c, d, t, x, y, h, pi2_gelfand, pitr_gelfand or schatten_q_approx.
        #[arg(long)]
        scale: String,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Width oracles and the π₂ lower bound on a matrix file.
    Oracle {
        #[arg(value_enum)]
        kind: OracleKind,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check a construction's claimed bounds; exit 0 iff every check passes.
    Verify {
        #[arg(long, value_enum)]
        theorem: VerifyTarget,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        /// Summing exponent of the twosum check.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long = "C1", default_value_t = 1.0)]
        c1: f64,
        #[arg(long)]
        m_max: Option<usize>,
        /// auto, convex or general.
        #[arg(long, default_value = "auto")]
        form: String,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 500)]
        k_max: usize,
        /// Largest matrix dimension of the strict-gap trials.
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0.1)]
        gap_min: f64,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

impl Theorem {
    fn variant(self) -> Variant {
        match self {
            Theorem::Controlled => Variant::Controlled,
            Theorem::Twosum => Variant::Twosum,
            Theorem::Nocotype => Variant::Nocotype,
            Theorem::Type => Variant::Type,
        }
    }
}

fn exponents(t: Option<f64>, r: Option<f64>) -> Result<Option<TypeExponents>> {
    match (t, r) {
        (Some(t), Some(r)) => TypeExponents::new(t, r).map(Some),
        (None, None) => Ok(None),
        _ => Err(Error::InvalidInput("--t and --r must be given together".into())),
    }
}

struct Ctx {
    config: Config,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config.output_dir.join(p)
        }
    }

    fn emit(&self, out: Option<&Path>, text: &str) -> Result<()> {
        match out {
            None => {
                print!("{text}");
                Ok(())
            }
            Some(p) => {
                let p = self.path(p);
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
                }
                std::fs::write(&p, text).map_err(|e| Error::Io { path: p.clone(), source: e })
            }
        }
    }

    fn oracle_cfg(&self, restarts: usize, tol: Option<f64>) -> OracleConfig {
        OracleConfig {
            restarts,
            seed: self.config.seed,
            tol: tol.unwrap_or(OracleConfig::default().tol),
            dim_cap: self.config.cap_width_oracle,
            ..OracleConfig::default()
        }
    }

    fn build(&self, c: &Construction) -> Result<snum_core::operators::BlockOperator> {
        let seq = DecaySequence::parse_spec(&c.alpha)?;
        let ex = exponents(c.t, c.r)?;
        let tc = TypeConstants::new(c.c, c.c1)?;
        build(&seq, c.theorem.variant(), c.blocks, ex, tc, 0)
    }
}

fn json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

/// Returns whether the command's checks passed.
fn run(cli: Cli) -> Result<bool> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let ctx = Ctx { config };
    match cli.command {
        Command::Minorant { alpha, horizon, out } => {
            let seq = DecaySequence::parse_spec(&alpha)?;
            let beta = convex_minorant(&seq, horizon)?;
            let mut csv = String::from("k,alpha_k,beta_k,floor_k\n");
            for r in minorant_rows(&seq, &beta) {
                csv.push_str(&format!("{},{:e},{:e},{:e}\n", r.k, r.alpha_k, r.beta_k, r.floor_k));
            }
            eprintln!("chord horizon {}", beta.chord_horizon);
            ctx.emit(out.as_deref(), &csv)?;
        }
        Command::Plan { construction, out } => {
            let op = ctx.build(&construction)?;
            let doc = op.document();
            let v = serde_json::json!({
                "sequence": doc.sequence,
                "plan": op.plan,
                "minorant_horizon": doc.minorant_horizon,
                "chord_horizon": doc.chord_horizon,
            });
            ctx.emit(out.as_deref(), &json(&v))?;
        }
        Command::Build { construction, out } => {
            let op = ctx.build(&construction)?;
            ctx.emit(out.as_deref(), &json(&op.document()))?;
        }
        Command::Snumbers { matrix, scale, t, r, restarts, out } => {
            let m = TaggedMatrix::from_file(&matrix)?;
            let scale: Scale = scale.parse()?;
            let report = snumber_report(&m, scale, exponents(t, r)?, &ctx.oracle_cfg(restarts, None))?;
            ctx.emit(out.as_deref(), &report.to_csv())?;
        }
        Command::Oracle { kind, matrix, m, restarts, tol, json: out } => {
            let mat = TaggedMatrix::from_file(&matrix)?;
            let cfg = ctx.oracle_cfg(restarts, tol);
            let text = match kind {
                OracleKind::Gelfand => json(&gelfand_oracle(&mat, m, &cfg)?),
                OracleKind::Kolmogorov => json(&kolmogorov_oracle(&mat, m, &cfg)?),
                OracleKind::Approx => json(&approx_oracle(&mat, m, &cfg)?),
                OracleKind::Pi2 => json(&pi2_lower_oracle(&mat, mat.cols(), restarts, cfg.seed)?),
            };
            ctx.emit(out.as_deref(), &text)?;
        }
        Command::Verify {
            theorem,
            alpha,
            blocks,
            t,
            r,
            p,
            c,
            c1,
            m_max,
            form,
            epsilon,
            k_max,
            n,
            trials,
            gap_min,
            restarts,
            report,
            csv,
            plot,
        } => {
            let opts = VerifyOptions {
                tolerance: ctx.config.tolerance,
                constants: ctx.config.constants()?,
                type_constants: TypeConstants::new(c, c1)?,
                form: form.parse::<ClaimForm>()?,
                seed: ctx.config.seed,
                config: Some(serde_json::to_value(&ctx.config).expect("config serialises")),
            };
            let paths = ReportPaths {
                json: report.map(|p| ctx.path(&p)),
                csv: csv.map(|p| ctx.path(&p)),
                plot: plot.map(|p| ctx.path(&p)),
            };
            let seq = || -> Result<DecaySequence> {
                let spec = alpha
                    .as_deref()
                    .ok_or_else(|| Error::InvalidInput("--alpha is required for this check".into()))?;
                DecaySequence::parse_spec(spec)
            };
            let pass = match theorem {
                VerifyTarget::Controlled => finish(verify::verify_controlled(&seq()?, blocks, m_max, &opts)?, &paths)?,
                VerifyTarget::Twosum => finish(verify::verify_twosum(&seq()?, blocks, m_max, p, &opts)?, &paths)?,
                VerifyTarget::Nocotype => finish(verify::verify_nocotype(&seq()?, blocks, m_max, &opts)?, &paths)?,
                VerifyTarget::Type => {
                    let ex = exponents(t, r)?
                        .ok_or_else(|| Error::InvalidInput("type checks need --t and --r".into()))?;
                    finish(verify::verify_type(&seq()?, blocks, m_max, ex.t, ex.r, &opts)?, &paths)?
                }
                VerifyTarget::PropOptimal => {
                    finish(verify::verify_prop_optimal(&seq()?, blocks, k_max, epsilon, &opts)?, &paths)?
                }
                VerifyTarget::PropSecond => {
                    let cfg = ctx.oracle_cfg(restarts, None);
                    finish(verify::verify_prop_second(n, trials, gap_min, &cfg, &opts)?, &paths)?
                }
            };
            return Ok(pass);
        }
    }
    Ok(true)
}

fn finish<R: Report>(report: R, paths: &ReportPaths) -> Result<bool> {
    emit_report(&report, paths)?;
    let pass = report.overall_pass();
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
