use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "lerwlab", version, about = "Loop-erased random walk estimators in Z^3")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Escape probability Es(r): LERW and an independent SRW from the origin do not meet
    Es {
        #[command(flatten)]
        radius: RadiusArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Es(m, n): only the erased path after its last visit to B(m) must be missed
    EsAnnulus {
        /// m = 2^m-exp
        #[arg(long)]
        m_exp: f64,
        /// n = 2^n-exp
        #[arg(long)]
        n_exp: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// One-point function: probability that x_n lies on the LERW in B(2^n)
    OnePoint {
        #[command(flatten)]
        radius: RadiusArgs,
        /// Point in the open unit ball, "x,y,z"
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        x: [f64; 3],
        /// Exact Green's function times a sampled non-intersection probability
        #[arg(long)]
        factored: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Moments and quantiles of the LERW length
    Length {
        #[command(flatten)]
        radius: RadiusArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// b_n = Es(2^n) / Es(2^(n-1)) from independent runs
    Bn {
        #[command(flatten)]
        radius: RadiusArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit the escape exponent to a series of Es results
    AlphaFit {
        /// Es results (csv or json output of `es` or `scaling-table`)
        #[arg(long = "in", required = true)]
        input: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Es, b_n and length with normalized columns for n-min..=n-max
    ScalingTable {
        #[arg(long)]
        n_min: u32,
        #[arg(long)]
        n_max: u32,
        /// Exponent for the normalized columns (fitted from the table when absent)
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a validation suite; exits with 2 when a check fails
    Validate {
        #[arg(long, value_enum, default_value_t = Suite::Oracle)]
        suite: Suite,
        /// Result files to compare (compare suite)
        #[arg(long = "in")]
        input: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Debug, Clone, Copy)]
#[group(required = true, multiple = false)]
pub struct RadiusArgs {
    /// Radius 2^radius-exp
    #[arg(long)]
    pub radius_exp: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
}

impl RadiusArgs {
    pub fn radius(&self) -> f64 {
        match (self.radius_exp, self.radius) {
            (Some(e), _) => 2f64.powf(e),
            (None, Some(r)) => r,
            (None, None) => unreachable!("clap requires one of the radius flags"),
        }
    }

    /// The level `n` of a dyadic radius `2^n`.
    pub fn level(&self) -> Result<u32, String> {
        let e = match (self.radius_exp, self.radius) {
            (Some(e), _) => e,
            (None, Some(r)) => r.log2(),
            (None, None) => unreachable!("clap requires one of the radius flags"),
        };
        if e >= 0.0 && (e - e.round()).abs() < 1e-9 && e < 64.0 {
            Ok(e.round() as u32)
        } else {
            Err(format!("radius must be 2^n with integer n >= 0, got 2^{e}"))
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 uses every core); results do not depend on it
    #[arg(long, default_value_t = 0)]
    pub workers: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (stdout when absent); a manifest is written next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file with long flag names as keys; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Largest domain the exact oracle may solve (overrides LERWLAB_CAP_SITES)
    #[arg(long)]
    pub cap_sites: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    TsvPlot,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Oracle,
    Mc,
    Compare,
}

pub fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut p = [0.0; 3];
    for (slot, part) in p.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|e| format!("{part:?}: {e}"))?;
    }
    Ok(p)
}
