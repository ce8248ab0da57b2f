use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use eit_afem::experiments::{
    compare_runs, forward_voltages, output, reconstruct, synthesize, Preset, RefinementMode, RunConfig, StopReason,
    SyntheticData,
};

#[derive(Parser)]
#[command(name = "eit-afem", version, about = "Adaptive FEM reconstruction for electrical impedance tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem for a phantom and print the electrode voltages as JSON.
    Forward {
        #[command(flatten)]
        run: RunArgs,
        /// Write the voltages here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate noisy synthetic data.
    Synth {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the adaptive (or uniform) reconstruction.
    Reconstruct {
        #[command(flatten)]
        run: RunArgs,
        /// Data file from `synth`; synthesized from the configuration when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare error-vs-d.o.f. curves of two reconstruction output directories.
    Compare { first: PathBuf, second: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Adaptive,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    TwoDisks,
    GaussianBumps,
    HighContrast,
    FourDisks,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::TwoDisks => Preset::TwoDisks,
            PresetArg::GaussianBumps => Preset::GaussianBumps,
            PresetArg::HighContrast => Preset::HighContrast,
            PresetArg::FourDisks => Preset::FourDisks,
        }
    }
}

/// Overrides applied on top of the configuration file (or the defaults).
#[derive(Args)]
struct RunArgs {
    /// JSON or TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Phantom preset; also sets c0 and c1.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long)]
    n0: Option<usize>,
    /// Number of refinement loops K.
    #[arg(long)]
    refinements: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    alpha_tilde: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    electrodes: Option<usize>,
    #[arg(long)]
    electrode_length: Option<f64>,
    #[arg(long)]
    impedance: Option<f64>,
    #[arg(long)]
    patterns: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    data_refinements: Option<usize>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    write_fields: bool,
    #[arg(long)]
    write_vtk: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.preset {
            let p = Preset::from(p);
            c.phantom = p.phantom();
            (c.c0, c.c1) = p.bounds();
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        set!(n0 => n0, refinements => refinements, theta => theta, q => q, epsilon => epsilon,
             alpha_tilde => alpha_tilde, c0 => c0, c1 => c1, electrodes => electrodes,
             electrode_length => electrode_length, impedance => impedance, patterns => patterns,
             noise => noise_level, data_refinements => data_refinements);
        if let Some(m) = self.max_outer {
            c.optimizer.max_outer = m;
        }
        if let Some(m) = self.mode {
            c.mode = match m {
                ModeArg::Adaptive => RefinementMode::Adaptive,
                ModeArg::Uniform => RefinementMode::Uniform,
            };
        }
        c.write_fields |= self.write_fields;
        c.write_vtk |= self.write_vtk;
        c.validate()?;
        Ok(c)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Forward { run, out } => {
            let c = run.config()?;
            let voltages = forward_voltages(&c.data_mesh()?, &c.phantom, &c.currents()?, c.solver)?;
            let text = serde_json::to_string_pretty(&voltages)?;
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => println!("{text}"),
            }
        }
        Command::Synth { run, seed, out } => {
            let mut c = run.config()?;
            c.seed = seed;
            let data = synthesize(&c)?;
            fs::write(&out, serde_json::to_string_pretty(&data)?).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} patterns ({} data d.o.f.) to {}", data.noisy.len(), data.data_dofs, out.display());
        }
        Command::Reconstruct { run, data, seed, out } => {
            let mut c = run.config()?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if out.is_some() {
                c.output_dir = out;
            }
            let data = match data {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    Some(serde_json::from_str::<SyntheticData>(&text)?)
                }
                None => None,
            };
            let (_, run) = reconstruct(&c, data)?;
            print!("{}", output::records_to_csv(&run.records));
            if let StopReason::Failed(msg) = &run.stop {
                bail!("reconstruction stopped early: {msg}");
            }
        }
        Command::Compare { first, second } => {
            let a = output::read_records(&first.join("records.csv"))?;
            let b = output::read_records(&second.join("records.csv"))?;
            let Some(cmp) = compare_runs(&a, &b) else {
                bail!("the runs have no comparable records");
            };
            println!("dofs,l1_first,l1_second,l1_ratio,l2_first,l2_second");
            println!(
                "{:.0},{:e},{:e},{:.4},{:e},{:e}",
                cmp.dofs,
                cmp.l1_first,
                cmp.l1_second,
                cmp.l1_ratio(),
                cmp.l2_first,
                cmp.l2_second
            );
        }
    }
    Ok(())
}
