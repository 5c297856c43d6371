use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use cartogram::commands::{cmd_animate, cmd_cartogram, cmd_metrics, cmd_sweep_bdv, exit_code, CommandOutput, FrameHint, OutputFormat, RunConfig};
use cartogram::io::Coloring;
use cartogram::temporal::Strategy;
use cartogram::{Error, Exec};
use clap::{Args, Parser, Subcommand};

/// Contiguous cartograms from integral images.
#[derive(Parser, Debug)]
#[command(name = "cartogram", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deform a map until region areas match the statistic.
    Cartogram(Flags),
    /// Cartograms for every time step of a series.
    Animate(Flags),
    /// Repeat the static run over background density multipliers.
    SweepBdv(Flags),
    /// Score an existing cartogram file against its original map.
    Metrics(Flags),
}

/// Every flag overrides the matching field of the `--config` file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// GeoJSON FeatureCollection of Polygon/MultiPolygon regions.
    #[arg(long)]
    map: Option<PathBuf>,
    /// CSV statistics joined by region id.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Statistic property in the GeoJSON, or value column in the CSV.
    #[arg(long)]
    key: Option<String>,
    #[arg(long)]
    id_column: Option<String>,
    /// Time column of a long-format CSV.
    #[arg(long)]
    time_column: Option<String>,
    /// Texture side is 2^k pixels.
    #[arg(long)]
    texture_k: Option<u32>,
    /// Fraction of the domain spanned by the map's larger side.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    bdv_multiplier: Option<f64>,
    #[arg(long, visible_alias = "iterations")]
    max_iter: Option<usize>,
    /// Stop once the maximum cartographic error drops below this.
    #[arg(long)]
    threshold: Option<f64>,
    /// Stop after this many iterations without improvement.
    #[arg(long)]
    stagnation: Option<usize>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    /// Area fraction at the smallest total statistic.
    #[arg(long)]
    amin: Option<f64>,
    /// Area fraction at the largest total statistic.
    #[arg(long)]
    amax: Option<f64>,
    /// Time steps `t0:t1` whose range defines the schedule.
    #[arg(long, value_parser = parse_window)]
    window: Option<(usize, usize)>,
    #[arg(long)]
    frames_per_step: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Exit with status 3 when a run does not converge.
    #[arg(long)]
    strict: bool,
    /// Runs are always deterministic; accepted for scripts that pass it.
    #[arg(long)]
    seedless: bool,
    /// SVG fill: shape_distortion, cartographic_error or none.
    #[arg(long, value_parser = parse_coloring)]
    coloring: Option<Coloring>,
    /// Maximum edge length before deformation, in pixels.
    #[arg(long)]
    densify_pixels: Option<f64>,
    /// Write label, density, integral-image and field dumps.
    #[arg(long)]
    dump_textures: bool,
    /// Write interpolated in-between frames.
    #[arg(long)]
    tweens: bool,
    /// Comma-separated multipliers for sweep-bdv.
    #[arg(long, value_delimiter = ',')]
    multipliers: Option<Vec<f64>>,
    /// Cartogram GeoJSON scored by `metrics`.
    #[arg(long)]
    carto: Option<PathBuf>,
    /// Frame of the --carto file: auto, source or texture.
    #[arg(long, value_parser = parse_frame)]
    carto_frame: Option<FrameHint>,
    #[arg(long)]
    watchdog_ceiling: Option<f64>,
    /// sequential or parallel.
    #[arg(long, value_parser = parse_exec)]
    exec: Option<Exec>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_coloring(s: &str) -> Result<Coloring, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_frame(s: &str) -> Result<FrameHint, String> {
    match s {
        "auto" => Ok(FrameHint::Auto),
        "source" => Ok(FrameHint::Source),
        "texture" => Ok(FrameHint::Texture),
        _ => Err(format!("unknown frame {s:?}")),
    }
}

fn parse_exec(s: &str) -> Result<Exec, String> {
    match s {
        "sequential" => Ok(Exec::Sequential),
        "parallel" => Ok(Exec::Parallel),
        _ => Err(format!("unknown execution mode {s:?}")),
    }
}

fn parse_window(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("window must look like t0:t1")?;
    let a = a.trim().parse().map_err(|_| format!("bad window start {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad window end {b:?}"))?;
    Ok((a, b))
}

impl Flags {
    fn resolve(self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f { c.$f = v; }
            )*};
        }
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() { c.$f = self.$f; }
            )*};
        }
        set_opt!(map, stats, key, time_column, amin, amax, window, carto);
        set!(id_column, texture_k, scale, bdv_multiplier, max_iter, threshold, stagnation, strategy, frames_per_step, out_dir, format, coloring, densify_pixels, multipliers, carto_frame, watchdog_ceiling, exec);
        c.strict |= self.strict;
        c.seedless |= self.seedless;
        c.dump_textures |= self.dump_textures;
        c.tweens |= self.tweens;
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (flags, run): (Flags, fn(&RunConfig) -> cartogram::Result<CommandOutput>) = match cli.command {
        Command::Cartogram(f) => (f, cmd_cartogram),
        Command::Animate(f) => (f, cmd_animate),
        Command::SweepBdv(f) => (f, cmd_sweep_bdv),
        Command::Metrics(f) => (f, cmd_metrics),
    };
    let result = flags.resolve().and_then(|config| run(&config).map(|out| (out, config.strict)));
    match result {
        Ok((out, strict)) => {
            // a closed stdout (e.g. piped into head) must not abort the run
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", out.summary);
            for f in &out.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            let code = out.exit_code(strict);
            if code != 0 {
                eprintln!("error: run did not converge");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
