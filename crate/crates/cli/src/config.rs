//! Run configuration: one TOML file, every section optional. Missing
//! sections and keys fall back to the reference parameter set.

use std::fs;
use std::path::{Path, PathBuf};

use liquidation_core::signal::DeterministicRate;
use liquidation_core::{ModelParams, OuSignalParams, SignalModel, TimeGrid};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub lambda: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub rho: f64,
    pub varrho: f64,
    pub phi: f64,
    pub horizon: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::baseline();
        Self {
            lambda: p.lambda,
            gamma: p.gamma,
            kappa: p.kappa,
            rho: p.rho,
            varrho: p.varrho,
            phi: p.phi,
            horizon: p.horizon,
            x0: p.x0,
            y0: p.y0,
        }
    }
}

impl ModelSection {
    /// Unvalidated parameters, for callers that treat `κ = 0` specially.
    pub fn raw(&self) -> ModelParams {
        ModelParams {
            lambda: self.lambda,
            gamma: self.gamma,
            kappa: self.kappa,
            rho: self.rho,
            varrho: self.varrho,
            phi: self.phi,
            horizon: self.horizon,
            x0: self.x0,
            y0: self.y0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Ou,
    Deterministic,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalSection {
    #[serde(rename = "type")]
    pub kind: SignalKind,
    pub iota: f64,
    pub beta: f64,
    pub sigma: f64,
    /// CSV with columns `t,rate`; relative paths are resolved against the
    /// configuration file. Without a table a deterministic signal is
    /// `iota·e^{−beta·t}`.
    pub rate_table: Option<PathBuf>,
}

impl Default for SignalSection {
    fn default() -> Self {
        let ou = OuSignalParams::baseline();
        Self {
            kind: SignalKind::Ou,
            iota: ou.iota,
            beta: ou.beta,
            sigma: ou.sigma,
            rate_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_steps: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_steps: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_paths: usize,
    pub seed: u64,
    /// Volatility of the price's martingale part; when positive, `simulate`
    /// also reconciles the full cost with the reduced one.
    pub martingale_vol: f64,
    /// Per-strategy cap on the number of path CSVs written.
    pub path_files: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            seed: 1,
            martingale_vol: 0.0,
            path_files: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    /// Steps of the dense oracle and the Gâteaux check (at most 2000).
    pub n_steps: usize,
    /// Stationarity tolerance at the oracle optimum.
    pub tol: f64,
    /// Steps of the forward-backward and Liouville checks.
    pub fbsde_steps: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            n_steps: 800,
            tol: 1e-8,
            fbsde_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Gnuplot,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub signal: SignalSection,
    pub grid: GridSection,
    pub mc: McSection,
    pub oracle: OracleSection,
    pub output: OutputSection,
    /// Directory relative paths inside the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything except the model parameters, which commands
    /// validate themselves (`verify` treats `κ = 0` as a boundary case).
    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.n_steps < 2 {
            return Err(CliError::Config("grid.n_steps must be at least 2".into()));
        }
        if self.mc.n_paths < 1 {
            return Err(CliError::Config("mc.n_paths must be at least 1".into()));
        }
        if !(self.mc.martingale_vol >= 0.0 && self.mc.martingale_vol.is_finite()) {
            return Err(CliError::Config("mc.martingale_vol must be finite and non-negative".into()));
        }
        if self.oracle.n_steps < 2 || self.oracle.fbsde_steps < 2 {
            return Err(CliError::Config("oracle.n_steps and oracle.fbsde_steps must be at least 2".into()));
        }
        if self.oracle.tol.is_nan() || self.oracle.tol <= 0.0 {
            return Err(CliError::Config("oracle.tol must be positive".into()));
        }
        if self.signal.kind == SignalKind::Ou {
            OuSignalParams::new(self.signal.iota, self.signal.beta, self.signal.sigma)?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let p = self.model.raw();
        if p.kappa == 0.0 {
            return Err(CliError::Config(
                "model.kappa = 0 is outside the closed form; use a small positive kappa such as 1e-4".into(),
            ));
        }
        p.validate()?;
        Ok(p)
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::uniform(self.model.horizon, self.grid.n_steps)?)
    }

    pub fn signal(&self) -> Result<SignalModel, CliError> {
        let s = &self.signal;
        Ok(match s.kind {
            SignalKind::Zero => SignalModel::Zero,
            SignalKind::Ou => SignalModel::OrnsteinUhlenbeck(OuSignalParams::new(s.iota, s.beta, s.sigma)?),
            SignalKind::Deterministic => match &s.rate_table {
                Some(table) => SignalModel::Deterministic(self.read_rate_table(table)?),
                None => SignalModel::Deterministic(DeterministicRate::Exponential {
                    initial: s.iota,
                    decay: s.beta,
                }),
            },
        })
    }

    fn read_rate_table(&self, table: &Path) -> Result<DeterministicRate, CliError> {
        let path = if table.is_absolute() { table.to_path_buf() } else { self.base_dir.join(table) };
        let rows = crate::output::read_table(&path)?;
        if rows.header != ["t", "rate"] {
            return Err(CliError::Config(format!("{}: header must be t,rate", path.display())));
        }
        let times = rows.column(0);
        let values = rows.column(1);
        Ok(DeterministicRate::table(times, values)?)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_setup() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.params().unwrap(), ModelParams::baseline());
        assert_eq!(c.signal().unwrap(), SignalModel::OrnsteinUhlenbeck(OuSignalParams::baseline()));
    }

    #[test]
    fn sections_override_defaults() {
        let c = RunConfig::parse(
            "[model]\nkappa = 2.5\n[signal]\ntype = \"zero\"\n[grid]\nn_steps = 40\n[output]\nformats = [\"csv\", \"gnuplot\"]\n",
        )
        .unwrap();
        assert_eq!(c.params().unwrap().kappa, 2.5);
        assert_eq!(c.signal().unwrap(), SignalModel::Zero);
        assert_eq!(c.grid().unwrap().n_steps(), 40);
        assert!(c.wants(Format::Gnuplot));
    }

    #[test]
    fn bad_input_is_a_config_error() {
        for text in [
            "[model]\nlamda = 1.0\n",
            "[grid]\nn_steps = 1\n",
            "[signal]\ntype = \"brownian\"\n",
            "[mc]\nn_paths = 0\n",
            "[signal]\nbeta = -1.0\n",
            "not toml at all [",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(CliError::Config(_))), "{text}");
        }
        let c = RunConfig::parse("[model]\nphi = -1.0\n").unwrap();
        assert!(matches!(c.params(), Err(CliError::Config(_))));
    }

    #[test]
    fn deterministic_without_table_is_exponential() {
        let c = RunConfig::parse("[signal]\ntype = \"deterministic\"\niota = 2.0\nbeta = 0.5\n").unwrap();
        assert_eq!(
            c.signal().unwrap(),
            SignalModel::Deterministic(DeterministicRate::Exponential { initial: 2.0, decay: 0.5 })
        );
    }
}
