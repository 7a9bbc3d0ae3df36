//! Run configuration: one JSON document, validated before any computation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use conetrace::expansion::Weighting;
use conetrace::fuchs::OperatorDocument;
use conetrace::spectral::SamplingSpec;
use conetrace::weakly_parametric::{ParamSymbol, SymbolPoint, WRay};
use conetrace::{CrossSection, FuchsOperator, RadialSeries, Sector, SignConvention};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub operator: OperatorSpec,
    pub cross_section: CrossSectionSpec,
    #[serde(default)]
    pub sector: SectorSpec,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Real-part strip for the boundary spectrum; defaults to the weight
    /// line plus or minus four.
    #[serde(default)]
    pub strip: Option<[f64; 2]>,
    #[serde(default)]
    pub mode_cap: Option<usize>,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub wp: WpSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_gamma() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    ConeLaplacian {
        sign: SignConvention,
        #[serde(default = "unit_profile")]
        g_profile: Vec<f64>,
        #[serde(default = "one")]
        conformal: f64,
        #[serde(default = "default_truncation")]
        truncation_order: usize,
    },
    File {
        path: PathBuf,
    },
    Inline {
        document: OperatorDocument,
    },
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec::ConeLaplacian {
            sign: SignConvention::Geometer,
            g_profile: unit_profile(),
            conformal: 1.0,
            truncation_order: default_truncation(),
        }
    }
}

fn unit_profile() -> Vec<f64> {
    vec![1.0]
}

fn one() -> f64 {
    1.0
}

fn default_truncation() -> usize {
    16
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CrossSectionSpec {
    Circle { c: f64 },
    Explicit { dim: usize, modes: Vec<(f64, usize)> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    pub phi: f64,
    pub delta: f64,
}

impl Default for SectorSpec {
    fn default() -> Self {
        SectorSpec { phi: PI / 4.0, delta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenSource {
    Exact,
    Fd,
    List,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSpec {
    pub eigenvalues: EigenSource,
    pub lambda_max: f64,
    pub fd_grid: usize,
    pub fd_count: usize,
    pub eigenvalue_file: Option<PathBuf>,
    /// Completeness bound of the eigenvalue file; absent means a finite spectrum.
    pub list_lambda_max: Option<f64>,
    pub t_grid: TGrid,
    /// Explicit times, overriding `t_grid`.
    pub t_values: Option<Vec<f64>>,
    pub dunford: bool,
    /// Contour for the Dunford column; defaults to the run sector with
    /// `delta` capped at half the smallest eigenvalue.
    pub contour: Option<SectorSpec>,
    pub tail_tolerance: f64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec {
            eigenvalues: EigenSource::Exact,
            lambda_max: 40000.0,
            fd_grid: 4096,
            fd_count: 200,
            eigenvalue_file: None,
            list_lambda_max: None,
            t_grid: TGrid { t_min: 1e-3, t_max: 0.05, count: 40 },
            t_values: None,
            dunford: true,
            contour: None,
            tail_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSpec {
    /// Heat-trace table to fit; defaults to `trace.csv` in the output directory.
    pub trace_file: Option<PathBuf>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub k: usize,
    pub k_log: usize,
    pub weighting: Weighting,
    /// Leading power terms kept when measuring the residual order.
    pub keep: Option<usize>,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec { trace_file: None, m: None, n: None, k: 6, k_log: 0, weighting: Weighting::Relative, keep: Some(3) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolSpec {
    Resolvent {
        #[serde(default = "one_u32")]
        power: u32,
        #[serde(default)]
        shift: f64,
    },
    InverseLambda,
    Constant {
        value: f64,
    },
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub xi: Vec<f64>,
    #[serde(default)]
    pub rho: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WpSpec {
    pub symbol: SymbolSpec,
    pub terms: usize,
    pub points: Vec<PointSpec>,
    /// Ray angle in the `w = lambda^{-1/d}` plane; defaults to the ray onto
    /// the negative reals.
    pub ray_theta: Option<f64>,
    pub remainder_terms: Vec<usize>,
    pub lambda_abs: Vec<f64>,
}

impl Default for WpSpec {
    fn default() -> Self {
        WpSpec {
            symbol: SymbolSpec::Resolvent { power: 1, shift: 0.0 },
            terms: 6,
            points: vec![PointSpec { xi: vec![2f64.sqrt()], rho: 0.0 }],
            ray_theta: None,
            remainder_terms: vec![0, 2],
            lambda_abs: (0..7).map(|i| 50.0 * 10f64.powf(i as f64 / 3.0)).collect(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !self.gamma.is_finite() {
            return Err(invalid("gamma must be finite"));
        }
        if let Some([a, b]) = self.strip {
            if !(a <= b) {
                return Err(invalid(format!("strip [{a}, {b}] is empty")));
            }
        }
        self.sector_value()?;
        let t = &self.trace;
        if t.t_values.is_none() && !(t.t_grid.t_min > 0.0 && t.t_grid.t_max > t.t_grid.t_min && t.t_grid.count >= 2) {
            return Err(invalid("trace.t_grid needs 0 < t_min < t_max and count >= 2"));
        }
        if let Some(v) = &t.t_values {
            if v.is_empty() || v.iter().any(|t| !(*t > 0.0)) {
                return Err(invalid("trace.t_values must be positive"));
            }
        }
        if t.eigenvalues == EigenSource::List && t.eigenvalue_file.is_none() {
            return Err(invalid("trace.eigenvalues = list needs trace.eigenvalue_file"));
        }
        if !(t.lambda_max > 0.0) || !(t.tail_tolerance > 0.0) {
            return Err(invalid("trace.lambda_max and trace.tail_tolerance must be positive"));
        }
        if self.fit.k + self.fit.k_log == 0 {
            return Err(invalid("fit basis is empty"));
        }
        if self.wp.points.is_empty() {
            return Err(invalid("wp.points is empty"));
        }
        if self.wp.lambda_abs.iter().any(|l| !(*l > 1.0)) {
            return Err(invalid("wp.lambda_abs entries must exceed 1"));
        }
        Ok(())
    }

    pub fn sector_value(&self) -> Result<Sector, CliError> {
        Sector::new(self.sector.phi, self.sector.delta).map_err(|e| invalid(e.to_string()))
    }

    pub fn cross_section_value(&self) -> Result<CrossSection, CliError> {
        match &self.cross_section {
            CrossSectionSpec::Circle { c } => CrossSection::circle(*c),
            CrossSectionSpec::Explicit { dim, modes } => CrossSection::explicit(*dim, modes.clone()),
        }
        .map_err(|e| invalid(e.to_string()))
    }

    pub fn operator_value(&self, cs: &CrossSection, base: &Path) -> Result<FuchsOperator, CliError> {
        match &self.operator {
            OperatorSpec::ConeLaplacian { sign, g_profile, conformal, truncation_order } => {
                let g = RadialSeries::scalar(g_profile, *truncation_order).map_err(|e| invalid(e.to_string()))?;
                Ok(FuchsOperator::cone_laplacian(cs, &g, *sign, *conformal)?)
            }
            OperatorSpec::File { path } => {
                let p = base.join(path);
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| invalid(format!("operator file {}: {e}", p.display())))?;
                FuchsOperator::from_json(&text).map_err(|e| invalid(format!("operator file {}: {e}", p.display())))
            }
            OperatorSpec::Inline { document } => {
                FuchsOperator::from_document(document).map_err(|e| invalid(format!("inline operator: {e}")))
            }
        }
    }

    pub fn t_values(&self) -> Vec<f64> {
        match &self.trace.t_values {
            Some(v) => v.clone(),
            None => {
                let g = &self.trace.t_grid;
                conetrace::expansion::geometric_grid(g.t_min, g.t_max, g.count).expect("validated grid")
            }
        }
    }

    pub fn symbol_value(&self) -> Result<ParamSymbol, CliError> {
        let sector = self.sector_value()?;
        match &self.wp.symbol {
            SymbolSpec::Resolvent { power, shift } => ParamSymbol::resolvent(*power, *shift, sector),
            SymbolSpec::InverseLambda => ParamSymbol::inverse_lambda(sector),
            SymbolSpec::Constant { value } => ParamSymbol::constant(*value, sector),
        }
        .map_err(|e| invalid(e.to_string()))
    }

    pub fn ray_value(&self, sym: &ParamSymbol) -> Result<WRay, CliError> {
        match self.wp.ray_theta {
            None => WRay::central(sym.anisotropy, &sym.sector),
            Some(theta) => {
                let radii = (0..12).map(|j| 0.5f64.powi(j)).collect();
                WRay::new(theta, radii, sym.anisotropy, &sym.sector)
            }
        }
        .map_err(|e| invalid(e.to_string()))
    }

    pub fn points(&self) -> Vec<SymbolPoint> {
        self.wp.points.iter().map(|p| SymbolPoint { xi: p.xi.clone(), rho: p.rho }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::parse(r#"{"cross_section": {"circle": {"c": 1.0}}}"#).unwrap();
        assert_eq!(cfg.gamma, 0.5);
        assert_eq!(cfg.t_values().len(), 40);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse(r#"{"cross_section": {"circle": {"c": 1.0}}, "gama": 1}"#).is_err());
        assert!(RunConfig::parse(r#"{"cross_section": {"circle": {"c": 1.0}}, "trace": {"lamda_max": 3}}"#).is_err());
        assert!(RunConfig::parse(
            r#"{"cross_section": {"circle": {"c": 1.0}}, "operator": {"kind": "cone_laplacian", "sign": "geometer", "extra": 1}}"#
        )
        .is_err());
    }

    #[test]
    fn list_mode_needs_file() {
        assert!(RunConfig::parse(r#"{"cross_section": {"circle": {"c": 1.0}}, "trace": {"eigenvalues": "list"}}"#).is_err());
    }
}
