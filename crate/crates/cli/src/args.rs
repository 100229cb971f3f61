use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "pt-spectra", version, about = "Spectra of truncated PT-symmetric Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Follow the lowest levels of H3 across a coupling grid.
    #[command(name = "scan-h3")]
    ScanH3(ScanH3Args),
    /// Follow the lowest levels of H2 across a coupling grid.
    #[command(name = "scan-h2")]
    ScanH2(ScanH2Args),
    /// Scan one of the 2x2 models.
    #[command(name = "matrix2x2")]
    Matrix2x2(Matrix2x2Args),
    /// Perturbation series and radius estimates.
    Rspe(RspeArgs),
    /// Eigenvalues of the lowest levels at increasing truncation.
    Converge(ConvergeArgs),
    /// Bisect for the coupling where a pair of levels leaves the real axis.
    Threshold(ThresholdArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ScanH3(_) => "scan-h3",
            Command::ScanH2(_) => "scan-h2",
            Command::Matrix2x2(_) => "matrix2x2",
            Command::Rspe(_) => "rspe",
            Command::Converge(_) => "converge",
            Command::Threshold(_) => "threshold",
        }
    }

    pub fn output(&self) -> &OutputOpts {
        match self {
            Command::ScanH3(a) => &a.output,
            Command::ScanH2(a) => &a.output,
            Command::Matrix2x2(a) => &a.output,
            Command::Rspe(a) => &a.output,
            Command::Converge(a) => &a.output,
            Command::Threshold(a) => &a.output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputOpts {
    /// Output file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Trajectory output format (reports are always JSON).
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// File of `key = value` lines mirroring the long flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanOpts {
    /// Coupling grid as `start:stop:step` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: String,
    /// Number of lowest levels to follow.
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    #[arg(long, default_value_t = pt_spectra::scan::DEFAULT_REALITY_TOL)]
    pub reality_tol: f64,
    #[arg(long, default_value_t = pt_spectra::scan::DEFAULT_MATCH_TOL)]
    pub match_tol: f64,
    /// Skip the local grid refinement around reality flips.
    #[arg(long)]
    pub no_refine: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct H2Params {
    #[arg(long, default_value_t = 1.0)]
    pub omega1: f64,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    pub omega2: f64,
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    #[arg(long, default_value_t = 2)]
    pub s: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanH3Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub scan: ScanOpts,
    #[arg(long, default_value_t = 128)]
    pub trunc: usize,
    /// Initial quadrature order for the fractional powers (default 4N).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_order: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanH2Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub scan: ScanOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: H2Params,
    /// Product truncation `N1xN2`.
    #[arg(long, default_value = "32x32")]
    pub trunc: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoLevelKind {
    /// `[[e1, i eps], [i eps, e2]]`
    Gain,
    /// `[[e + i eps, b], [b, e - i eps]]`
    Detuned,
}

#[derive(Debug, Args, Serialize)]
pub struct TwoLevelParams {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct Matrix2x2Args {
    pub kind: TwoLevelKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: TwoLevelParams,
    /// Coupling grid as `start:stop:step` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: String,
    #[arg(long, default_value_t = pt_spectra::scan::DEFAULT_REALITY_TOL)]
    pub reality_tol: f64,
    #[arg(long, default_value_t = 10.0)]
    pub match_tol: f64,
    #[arg(long)]
    pub no_refine: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RspeFamily {
    /// Gain-coupling 2x2 model, `H0 = diag(e1, e2)`.
    TwoLevel,
    /// Closed-form series of the classical `lambda_pm`.
    LambdaPm,
    /// Truncated H2 about an unperturbed level.
    H2,
}

#[derive(Debug, Args, Serialize)]
pub struct RspeArgs {
    pub family: RspeFamily,
    #[arg(long, default_value_t = 40)]
    pub order: usize,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e2: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: H2Params,
    /// Product truncation for `h2`.
    #[arg(long, default_value = "16x16")]
    pub trunc: String,
    /// Level to expand: `n` for two-level, `(n1,n2)` for h2; all when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    H3,
    H2,
    Gain,
    Detuned,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub h2: H2Params,
    #[command(flatten)]
    #[serde(flatten)]
    pub two_level: TwoLevelParams,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_order: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvergeArgs {
    pub model: ModelKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ModelOpts,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: f64,
    /// Increasing truncations, e.g. `64,128,256` or `16x16,24x24`.
    #[arg(long)]
    pub sizes: String,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = pt_spectra::scan::DEFAULT_MATCH_TOL)]
    pub match_tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    pub model: ModelKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ModelOpts,
    /// Two level labels separated by `/`, e.g. `1/2` or `(0,1)/(1,0)`.
    #[arg(long)]
    pub pair: String,
    /// Coupling where the pair is real.
    #[arg(long, allow_hyphen_values = true)]
    pub real_at: f64,
    /// Coupling where the pair is complex.
    #[arg(long, allow_hyphen_values = true)]
    pub complex_at: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Truncation; the model default when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trunc: Option<String>,
    #[arg(long, default_value_t = pt_spectra::scan::DEFAULT_REALITY_TOL)]
    pub reality_tol: f64,
    #[arg(long, default_value_t = pt_spectra::scan::DEFAULT_MATCH_TOL)]
    pub match_tol: f64,
    /// Repeat the bisection at twice the truncation.
    #[arg(long)]
    pub check_refined: bool,
    /// Fail when the refined threshold moves further than this.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_refined_shift: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}
