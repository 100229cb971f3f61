use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pt_spectra::closed_forms::{threshold_detuned, threshold_gain_coupling, TwoLevelDetuned, TwoLevelGainCoupling};
use pt_spectra::hamiltonians::{h2_perturbation, ModelH2, ModelH3};
use pt_spectra::rspe::{rspe_matrix, series_lambda_pm, RspeSeries};
use pt_spectra::scan::{
    locate_threshold, scan, truncation_convergence, uniform_grid, DetunedFamily, GainCouplingFamily, Label,
    ScanConfig, SpectralModel, ThresholdOptions, Truncation,
};
use pt_spectra::{Complex64, DenseMatrix};
use serde_json::{json, Value};

use crate::args::{
    Command, ConvergeArgs, Format, H2Params, Matrix2x2Args, ModelKind, ModelOpts, OutputOpts, RspeArgs, RspeFamily,
    ScanOpts, ThresholdArgs, TwoLevelKind, TwoLevelParams,
};
use crate::output::{json_f64, trajectory_rows, write_csv, write_json, Header};
use crate::CliError;

/// `start:stop:step` or a comma-separated list of couplings.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("cannot parse {t:?} in grid {s:?}")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, c] => Ok(uniform_grid(num(a)?, num(b)?, num(c)?)?),
        [one] => one.split(',').map(num).collect(),
        _ => Err(CliError::Config(format!("grid {s:?} is neither start:stop:step nor a list"))),
    }
}

fn need(v: Option<f64>, name: &str, what: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("{what} needs --{name}")))
}

fn h2_model(p: &H2Params) -> Result<ModelH2, CliError> {
    Ok(ModelH2::new(p.omega1, p.omega2, p.r, p.s)?)
}

fn two_level_model(kind: TwoLevelKind, p: &TwoLevelParams) -> Result<Box<dyn SpectralModel>, CliError> {
    Ok(match kind {
        TwoLevelKind::Gain => {
            let (e1, e2) = (need(p.e1, "e1", "gain")?, need(p.e2, "e2", "gain")?);
            TwoLevelGainCoupling::new(e1, e2, 0.0)?;
            Box::new(GainCouplingFamily { e1, e2 })
        }
        TwoLevelKind::Detuned => {
            let (e, b) = (need(p.e, "e", "detuned")?, need(p.b, "b", "detuned")?);
            TwoLevelDetuned::new(e, b, 0.0)?;
            Box::new(DetunedFamily { e, b })
        }
    })
}

fn model_of(kind: ModelKind, p: &ModelOpts) -> Result<Box<dyn SpectralModel>, CliError> {
    Ok(match kind {
        ModelKind::H3 => Box::new(ModelH3 {
            quad_order: p.quad_order,
        }),
        ModelKind::H2 => Box::new(h2_model(&p.h2)?),
        ModelKind::Gain => two_level_model(TwoLevelKind::Gain, &p.two_level)?,
        ModelKind::Detuned => two_level_model(TwoLevelKind::Detuned, &p.two_level)?,
    })
}

fn truncation(s: &str) -> Result<Truncation, CliError> {
    Ok(s.parse::<Truncation>()?)
}

fn open_output(out: &OutputOpts) -> Result<Box<dyn Write>, CliError> {
    Ok(match &out.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn finish(out: &OutputOpts, result: std::io::Result<()>) -> Result<(), CliError> {
    let path = out.out.as_deref().unwrap_or(Path::new("<stdout>"));
    result.map_err(|e| io_error(path, e))
}

fn scan_config(grid: Vec<f64>, t: Truncation, opts: &ScanOpts) -> ScanConfig {
    let mut cfg = ScanConfig::new(grid, t, opts.levels);
    cfg.reality_tol = opts.reality_tol;
    cfg.doubling_tol = 10.0 * opts.reality_tol;
    cfg.match_tol = opts.match_tol;
    cfg.refine_flips = !opts.no_refine;
    cfg
}

fn emit_scan(
    model: &dyn SpectralModel,
    cfg: &ScanConfig,
    header: Header,
    out: &OutputOpts,
) -> Result<(), CliError> {
    let outcome = scan(model, cfg)?;
    let header = header.with("model", model.name()).with("grid-points", outcome.grid.len());
    let mut w = open_output(out)?;
    let result = match out.format {
        Format::Csv => write_csv(&mut w, &header.comment_lines(), &trajectory_rows(&outcome.trajectories)),
        Format::Json => {
            let body = json!({
                "trajectories": outcome.trajectories,
                "samples": outcome.samples,
            });
            write_json(&mut w, &header, body)
        }
    };
    finish(out, result.and_then(|_| w.flush()))
}

fn run_matrix2x2(a: &Matrix2x2Args, header: Header) -> Result<(), CliError> {
    let model = two_level_model(a.kind, &a.params)?;
    let threshold = match a.kind {
        TwoLevelKind::Gain => threshold_gain_coupling(&TwoLevelGainCoupling::new(
            a.params.e1.unwrap_or(0.0),
            a.params.e2.unwrap_or(0.0),
            0.0,
        )?),
        TwoLevelKind::Detuned => {
            threshold_detuned(&TwoLevelDetuned::new(a.params.e.unwrap_or(0.0), a.params.b.unwrap_or(0.0), 0.0)?)
        }
    };
    let opts = ScanOpts {
        eps: a.eps.clone(),
        levels: 2,
        reality_tol: a.reality_tol,
        match_tol: a.match_tol,
        no_refine: a.no_refine,
    };
    let cfg = scan_config(parse_grid(&a.eps)?, Truncation::Fixed, &opts);
    emit_scan(model.as_ref(), &cfg, header.with("threshold", threshold), &a.output)
}

fn series_json(s: &RspeSeries) -> Value {
    let coefficients: Vec<Value> = s
        .coefficients
        .iter()
        .map(|c| json!([json_f64(c.re), json_f64(c.im)]))
        .collect();
    json!({
        "label": s.label,
        "order": s.order(),
        "coefficients": coefficients,
        "radius_estimate": s.radius_estimate.map(json_f64),
    })
}

fn run_rspe(a: &RspeArgs, header: Header) -> Result<(), CliError> {
    let (series, threshold): (Vec<RspeSeries>, Option<f64>) = match a.family {
        RspeFamily::TwoLevel => {
            let (e1, e2) = (need(a.e1, "e1", "two-level")?, need(a.e2, "e2", "two-level")?);
            let m = TwoLevelGainCoupling::new(e1, e2, 0.0)?;
            let i = Complex64::new(0.0, 1.0);
            let z = Complex64::new(0.0, 0.0);
            let w = DenseMatrix::from_rows(&[vec![z, i], vec![i, z]])?;
            let levels = match &a.level {
                Some(l) => vec![l.parse::<usize>().map_err(|_| CliError::Config(format!("level {l:?} is not 0 or 1")))?],
                None => vec![0, 1],
            };
            let series = levels
                .into_iter()
                .map(|l| Ok(rspe_matrix(&[e1, e2], &w, l, a.order)?.with_radius()))
                .collect::<Result<_, CliError>>()?;
            (series, Some(threshold_gain_coupling(&m)))
        }
        RspeFamily::LambdaPm => {
            let (p, m) = series_lambda_pm(a.model.omega1, a.model.omega2, a.order)?;
            let d = (a.model.omega1.powi(2) - a.model.omega2.powi(2)).abs();
            (vec![p, m], Some(d))
        }
        RspeFamily::H2 => {
            let model = h2_model(&a.model)?;
            let Truncation::Product(n1, n2) = truncation(&a.trunc)? else {
                return Err(CliError::Config(format!("h2 needs an N1xN2 truncation, got {}", a.trunc)));
            };
            let label = match &a.level {
                Some(l) => l.parse::<Label>()?,
                None => Label::Modes(0, 0),
            };
            let Label::Modes(k1, k2) = label else {
                return Err(CliError::Config(format!("h2 levels are written (n1,n2), got {label}")));
            };
            if k1 >= n1 || k2 >= n2 {
                return Err(CliError::Config(format!("level {label} is outside the {n1}x{n2} truncation")));
            }
            let (diag, w) = h2_perturbation(&model, n1, n2)?;
            let mut s = rspe_matrix(&diag, &w, k1 * n2 + k2, a.order)?;
            s.label = label;
            (vec![s.with_radius()], None)
        }
    };
    let body = json!({
        "family": a.family,
        "threshold": threshold.map(json_f64),
        "series": series.iter().map(series_json).collect::<Vec<_>>(),
    });
    let mut w = open_output(&a.output)?;
    let result = write_json(&mut w, &header, body);
    finish(&a.output, result.and_then(|_| w.flush()))
}

fn parse_sizes(s: &str) -> Result<Vec<Truncation>, CliError> {
    s.split(',').map(|t| truncation(t.trim())).collect()
}

fn run_converge(a: &ConvergeArgs, header: Header) -> Result<(), CliError> {
    let model = model_of(a.model, &a.params)?;
    let sizes = parse_sizes(&a.sizes)?;
    let mut cfg = ScanConfig::new(vec![a.eps], sizes[0], a.levels);
    cfg.match_tol = a.match_tol;
    let table = truncation_convergence(model.as_ref(), a.eps, &sizes, a.levels, &cfg)?;
    let mut w = open_output(&a.output)?;
    let result = write_json(&mut w, &header.with("model", model.name()), json!({ "table": table }));
    finish(&a.output, result.and_then(|_| w.flush()))
}

fn run_threshold(a: &ThresholdArgs, header: Header) -> Result<(), CliError> {
    let model = model_of(a.model, &a.params)?;
    let (l0, l1) = a
        .pair
        .split_once('/')
        .ok_or_else(|| CliError::Config(format!("pair {:?} must look like A/B", a.pair)))?;
    let pair = (l0.parse::<Label>()?, l1.parse::<Label>()?);
    let t = match &a.trunc {
        Some(s) => truncation(s)?,
        None => model.default_truncation(),
    };
    let mut cfg = ScanConfig::new(vec![0.0], t, 2);
    cfg.reality_tol = a.reality_tol;
    cfg.doubling_tol = 10.0 * a.reality_tol;
    cfg.match_tol = a.match_tol;
    let opts = ThresholdOptions {
        check_refined: a.check_refined,
        max_refined_shift: a.max_refined_shift,
    };
    let report = locate_threshold(model.as_ref(), pair, (a.real_at, a.complex_at), a.tol, &cfg, opts)?;
    let mut w = open_output(&a.output)?;
    let result = write_json(&mut w, &header.with("model", model.name()), json!({ "report": report }));
    finish(&a.output, result.and_then(|_| w.flush()))
}

/// Execute one parsed command.
pub fn execute(command: &Command) -> Result<(), CliError> {
    let name = command.name();
    match command {
        Command::ScanH3(a) => {
            let model = ModelH3 {
                quad_order: a.quad_order,
            };
            let cfg = scan_config(parse_grid(&a.scan.eps)?, Truncation::Single(a.trunc), &a.scan);
            emit_scan(&model, &cfg, Header::new(name, a), &a.output)
        }
        Command::ScanH2(a) => {
            let model = h2_model(&a.model)?;
            let cfg = scan_config(parse_grid(&a.scan.eps)?, truncation(&a.trunc)?, &a.scan);
            emit_scan(&model, &cfg, Header::new(name, a), &a.output)
        }
        Command::Matrix2x2(a) => run_matrix2x2(a, Header::new(name, a)),
        Command::Rspe(a) => run_rspe(a, Header::new(name, a)),
        Command::Converge(a) => run_converge(a, Header::new(name, a)),
        Command::Threshold(a) => run_threshold(a, Header::new(name, a)),
    }
}
