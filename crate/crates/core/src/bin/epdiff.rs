use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, ValueEnum};

use epdiff::harness::{self, Command, Settings};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Run,
    Conserve,
    Convergence,
    Reversibility,
    Bench,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Run => Command::Run,
            Cmd::Conserve => Command::Conserve,
            Cmd::Convergence => Command::Convergence,
            Cmd::Reversibility => Command::Reversibility,
            Cmd::Bench => Command::Bench,
        }
    }
}

/// Experiments with energy-conserving EPDiff schemes on a periodic square.
#[derive(Debug, Parser)]
#[command(name = "epdiff", version)]
#[command(group(ArgGroup::new("step").args(["dt", "dt_dx2", "dt_dx_ratio"])))]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// scheme1, scheme1-fixed=N, scheme2, scheme3 or rk4; comma-separated for several.
    #[arg(long)]
    scheme: Option<String>,
    /// KxJ, or N for a square grid.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated square grid sizes (convergence, bench).
    #[arg(long)]
    grids: Option<String>,
    /// Reference grid size for convergence.
    #[arg(long)]
    reference: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_over_sigma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// dt = dx².
    #[arg(long)]
    dt_dx2: bool,
    /// dt = R · dx.
    #[arg(long, value_name = "R")]
    dt_dx_ratio: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// sine, plate, parallel or star.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gaussian_cross_section: bool,
    #[arg(long)]
    corrector_rtol: Option<f64>,
    #[arg(long)]
    corrector_max_iter: Option<usize>,
    /// key = value file; flags given here win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a velocity snapshot every N steps (0 = none).
    #[arg(long, value_name = "N")]
    snapshot_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Paper-scale grids instead of desk-scale defaults.
    #[arg(long)]
    full_scale: bool,
    /// Timed steps per repetition (bench).
    #[arg(long)]
    steps: Option<usize>,
    /// restart or negate-swap.
    #[arg(long)]
    reversal: Option<String>,
}

impl Cli {
    fn settings(&self) -> epdiff::Result<Settings> {
        let mut s = Settings::new();
        let text = [
            ("scheme", self.scheme.clone()),
            ("grid", self.grid.clone()),
            ("grids", self.grids.clone()),
            ("profile", self.profile.clone()),
            ("reversal", self.reversal.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in text {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        let reals = [
            ("alpha", self.alpha),
            ("alpha_over_sigma", self.alpha_over_sigma),
            ("dt", self.dt),
            ("dt_dx_ratio", self.dt_dx_ratio),
            ("t_final", self.t_final),
            ("sigma", self.sigma),
            ("corrector_rtol", self.corrector_rtol),
        ];
        for (k, v) in reals {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        let counts = [
            ("reference", self.reference),
            ("corrector_max_iter", self.corrector_max_iter),
            ("snapshot_every", self.snapshot_every),
            ("steps", self.steps),
        ];
        for (k, v) in counts {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        if let Some(seed) = self.seed {
            s.set("seed", seed)?;
        }
        for (k, on) in [
            ("dt_dx2", self.dt_dx2),
            ("gaussian_cross_section", self.gaussian_cross_section),
            ("full_scale", self.full_scale),
        ] {
            if on {
                s.set(k, true)?;
            }
        }
        Ok(s)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = cli
        .settings()
        .and_then(|flags| harness::load(cli.command.into(), cli.config.as_deref(), &flags));
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("epdiff: {e}");
            return ExitCode::from(harness::EXIT_CONFIG as u8);
        }
    };
    match harness::execute(&cfg) {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            for f in &report.failures {
                eprintln!("epdiff: failed: {f}");
            }
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(harness::EXIT_NUMERICAL as u8)
            }
        }
        Err(e) => {
            eprintln!("epdiff: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
