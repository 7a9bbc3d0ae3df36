//! The subcommands.

use std::path::Path;

use conetrace::expansion::{self, ExpansionBasis, FitReport};
use conetrace::oracle::{self, Contour, EigenvalueList, HeatTraceSample, ModelCone};
use conetrace::spectral::{self, BoundarySpectrumEntry, EllipticityReport, WeightLine};
use conetrace::weakly_parametric::{self, RemainderOrder};
use conetrace::{CrossSection, FuchsOperator};
use serde::Serialize;

use crate::config::{EigenSource, RunConfig};
use crate::output::{num, Output};
use crate::CliError;

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub base: &'a Path,
    pub out: &'a Output,
}

impl Context<'_> {
    fn setup(&self) -> Result<(CrossSection, FuchsOperator), CliError> {
        let cs = self.config.cross_section_value()?;
        let op = self.config.operator_value(&cs, self.base)?;
        Ok((cs, op))
    }
}

#[derive(Serialize)]
struct SpectrumEntry {
    re: f64,
    im: f64,
    mode_index: usize,
    multiplicity: usize,
}

impl From<&BoundarySpectrumEntry> for SpectrumEntry {
    fn from(e: &BoundarySpectrumEntry) -> Self {
        SpectrumEntry { re: e.z.re, im: e.z.im, mode_index: e.mode_index, multiplicity: e.algebraic_multiplicity }
    }
}

#[derive(Serialize)]
struct SpectrumReport {
    operator: String,
    gamma: f64,
    weight_line: f64,
    strip: [f64; 2],
    entries: Vec<SpectrumEntry>,
    elliptic: bool,
    /// Distance from the weight line to the spectrum; `null` when none exists.
    margin: Option<f64>,
}

pub fn spectrum(ctx: &Context) -> Result<(), CliError> {
    let (cs, op) = ctx.setup()?;
    let line = WeightLine::new(ctx.config.gamma, cs.dim).real_part;
    let strip = ctx.config.strip.unwrap_or([line - 4.0, line + 4.0]);
    ctx.out.log(format!("boundary spectrum of {} on [{}, {}]", op.label, strip[0], strip[1]));
    let entries = spectral::boundary_spectrum(&op, &cs, (strip[0], strip[1]), ctx.config.mode_cap)?;
    let (elliptic, margin) = spectral::check_weight_ellipticity(&op, &cs, ctx.config.gamma)?;
    let report = SpectrumReport {
        operator: op.label.clone(),
        gamma: ctx.config.gamma,
        weight_line: line,
        strip,
        entries: entries.iter().map(SpectrumEntry::from).collect(),
        elliptic,
        margin: margin.is_finite().then_some(margin),
    };
    ctx.out.write_csv("spectrum.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["re", "im", "mode_index", "multiplicity"])?;
        for e in &entries {
            w.write_record([num(e.z.re), num(e.z.im), e.mode_index.to_string(), e.algebraic_multiplicity.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    ctx.out.write_json("spectrum.json", "spectrum", &report)?;
    println!(
        "{}: {} boundary-spectrum points in [{}, {}]; {} for gamma = {} (margin {})",
        op.label,
        entries.len(),
        strip[0],
        strip[1],
        if elliptic { "elliptic" } else { "not elliptic" },
        ctx.config.gamma,
        margin
    );
    Ok(())
}

pub fn ellipticity(ctx: &Context) -> Result<(), CliError> {
    let (cs, op) = ctx.setup()?;
    let sector = ctx.config.sector_value()?;
    let mut sampling = ctx.config.sampling.clone();
    if sampling.mode_cap.is_none() {
        sampling.mode_cap = ctx.config.mode_cap;
    }
    let report: EllipticityReport =
        spectral::check_parameter_ellipticity(&op, &cs, &sector, ctx.config.gamma, &sampling)?;
    ctx.out.write_json("ellipticity.json", "ellipticity", &report)?;
    println!(
        "{}: parameter-elliptic = {} ({:?}); margins i = {}, ii = {}, iii = {}",
        op.label,
        report.overall,
        report.overall_status,
        report.condition_i.margin,
        report.condition_ii.margin,
        report.condition_iii.margin
    );
    Ok(())
}

fn eigenvalues(ctx: &Context, cs: CrossSection, op: FuchsOperator) -> Result<EigenvalueList, CliError> {
    let t = &ctx.config.trace;
    match t.eigenvalues {
        EigenSource::Exact => {
            let model = ModelCone::new(cs, op)?;
            ctx.out.log(format!("exact-cone eigenvalues up to {}", t.lambda_max));
            Ok(oracle::eigenvalues_exact_cone(&model, t.lambda_max)?)
        }
        EigenSource::Fd => {
            let model = ModelCone::new(cs, op)?;
            ctx.out.log(format!("finite-difference eigenvalues: {} on {} cells", t.fd_count, t.fd_grid));
            let fd = oracle::eigenvalues_fd(&model, t.fd_grid, t.fd_count)?;
            let top = fd.iter().map(|f| f.value).fold(0.0, f64::max);
            Ok(EigenvalueList::complete_below(fd.iter().map(|f| (f.value, f.multiplicity)).collect(), top))
        }
        EigenSource::List => {
            let path = ctx.base.join(t.eigenvalue_file.as_ref().expect("validated"));
            EigenvalueList::read_csv(&path, t.list_lambda_max)
                .map_err(|e| CliError::Config(format!("eigenvalue file {}: {e}", path.display())))
        }
    }
}

struct TraceRow {
    sample: HeatTraceSample,
    tail_ok: bool,
    dunford: Option<oracle::DunfordValue>,
}

fn trace_rows(ctx: &Context) -> Result<Vec<TraceRow>, CliError> {
    let (cs, op) = ctx.setup()?;
    let eigs = eigenvalues(ctx, cs, op)?;
    let t = &ctx.config.trace;
    let contour = match (t.dunford, eigs.smallest()) {
        (false, _) | (true, None) => None,
        (true, Some(l0)) => {
            let s = t.contour.unwrap_or(ctx.config.sector);
            let delta = if t.contour.is_some() { s.delta } else { s.delta.min(0.5 * l0) };
            Some(Contour { phi: s.phi, delta })
        }
    };
    let times = ctx.config.t_values();
    ctx.out.log(format!("heat trace at {} times", times.len()));
    let mut rows = Vec::with_capacity(times.len());
    for &time in &times {
        let sample = oracle::heat_trace_sum(&eigs, time, None)?;
        let dunford = match &contour {
            Some(c) => Some(oracle::dunford_heat_trace(&eigs, c, time)?),
            None => None,
        };
        rows.push(TraceRow { tail_ok: sample.tail_bound <= t.tail_tolerance, sample, dunford });
    }
    Ok(rows)
}

fn write_trace(ctx: &Context, rows: &[TraceRow]) -> Result<(), CliError> {
    let with_dunford = rows.iter().any(|r| r.dunford.is_some());
    ctx.out.write_csv("trace.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        let mut header = vec!["t", "value", "tail_bound", "status"];
        if with_dunford {
            header.extend(["dunford", "dunford_error", "dunford_difference"]);
        }
        w.write_record(&header)?;
        for r in rows {
            let mut rec = vec![
                num(r.sample.t),
                num(r.sample.value),
                num(r.sample.tail_bound),
                if r.tail_ok { "ok" } else { "tail_exceeded" }.to_string(),
            ];
            if let Some(d) = &r.dunford {
                rec.extend([num(d.value), num(d.error_estimate), num((d.value - r.sample.value).abs())]);
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    let failed = rows.iter().filter(|r| !r.tail_ok).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} rows exceed the tail tolerance; raise trace.lambda_max", rows.len());
    }
    Ok(())
}

pub fn trace(ctx: &Context) -> Result<(), CliError> {
    let rows = trace_rows(ctx)?;
    write_trace(ctx, &rows)?;
    let worst = rows
        .iter()
        .filter_map(|r| r.dunford.map(|d| (d.value - r.sample.value).abs()))
        .fold(0.0, f64::max);
    println!("heat trace at {} times; largest Dunford difference {worst:e}", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct FitOutput {
    basis: ExpansionBasis,
    weighting: expansion::Weighting,
    keep: Option<usize>,
    report: FitReport,
}

fn fit_samples(ctx: &Context, samples: &[HeatTraceSample]) -> Result<(), CliError> {
    let spec = &ctx.config.fit;
    let cs = ctx.config.cross_section_value()?;
    let m = match spec.m {
        Some(m) => m,
        None => ctx.config.operator_value(&cs, ctx.base)?.order(),
    };
    let basis = ExpansionBasis::new(m, spec.n.unwrap_or(cs.dim), spec.k, spec.k_log)?;
    let fit = expansion::fit_heat_trace(samples, &basis, spec.weighting)?;
    let residual = expansion::residual_order(samples, &fit, spec.keep)?;
    let report = FitReport::new(&fit, residual);
    ctx.out.write_csv("fit.csv", |f| fit.write_csv_to(f))?;
    ctx.out.write_json("fit.json", "fit", &FitOutput { basis, weighting: spec.weighting, keep: spec.keep, report: report.clone() })?;
    let lead = report.coefficients.first().copied().unwrap_or(0.0);
    println!(
        "fitted {} columns (condition {:.3e}); leading coefficient {lead}; residual order {:?}",
        fit.columns.len(),
        fit.condition,
        report.residual_slope
    );
    Ok(())
}

pub fn fit(ctx: &Context) -> Result<(), CliError> {
    let path = match &ctx.config.fit.trace_file {
        Some(p) => ctx.base.join(p),
        None => ctx.out.dir().join("trace.csv"),
    };
    let samples = oracle::read_heat_trace_csv(&path)
        .map_err(|e| CliError::Config(format!("heat-trace table {}: {e}", path.display())))?;
    fit_samples(ctx, &samples)
}

pub fn report(ctx: &Context) -> Result<(), CliError> {
    let rows = trace_rows(ctx)?;
    write_trace(ctx, &rows)?;
    let samples: Vec<HeatTraceSample> = rows.iter().map(|r| r.sample).collect();
    fit_samples(ctx, &samples)
}

#[derive(Serialize)]
struct RemainderEntry {
    point: usize,
    terms: usize,
    expected_slope: f64,
    order: RemainderOrder,
}

#[derive(Serialize)]
struct WpOutput {
    symbol: String,
    shift: f64,
    anisotropy: u32,
    ray_theta: f64,
    terms: usize,
    all_converged: bool,
    remainders: Vec<RemainderEntry>,
}

pub fn wp(ctx: &Context) -> Result<(), CliError> {
    let spec = &ctx.config.wp;
    let sym = ctx.config.symbol_value()?;
    let ray = ctx.config.ray_value(&sym)?;
    let points = ctx.config.points();
    let table = weakly_parametric::wp_coefficients(&sym, spec.terms, &ray, &points)?;
    let mut remainders = Vec::new();
    for p in 0..points.len() {
        for &n in &spec.remainder_terms {
            if n > spec.terms {
                return Err(CliError::Config(format!("remainder with {n} terms exceeds wp.terms = {}", spec.terms)));
            }
            let order = weakly_parametric::wp_remainder_order(&sym, &table, p, n, &ray, &spec.lambda_abs)?;
            let expected_slope = -(n as f64 + sym.shift) / sym.anisotropy as f64;
            remainders.push(RemainderEntry { point: p, terms: n, expected_slope, order });
        }
    }
    ctx.out.write_csv("wp_coefficients.csv", |f| table.write_csv_to(f))?;
    let out = WpOutput {
        symbol: sym.label.clone(),
        shift: sym.shift,
        anisotropy: sym.anisotropy,
        ray_theta: ray.theta,
        terms: spec.terms,
        all_converged: table.entries.iter().all(|e| e.converged),
        remainders,
    };
    ctx.out.write_json("wp.json", "wp", &out)?;
    println!("{}: {} coefficients at {} points", sym.label, spec.terms, points.len());
    for r in &out.remainders {
        match r.order {
            RemainderOrder::Slope { slope, .. } => {
                println!("  point {} N = {}: remainder slope {slope:.4} (bound {})", r.point, r.terms, r.expected_slope)
            }
            RemainderOrder::Saturated { max_remainder } => {
                println!("  point {} N = {}: remainder saturated (max {max_remainder:e})", r.point, r.terms)
            }
        }
    }
    Ok(())
}
