//! Pipeline configuration, read from and written to TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::changepoint::BocdConfig;
use crate::error::{Error, Result};
use crate::estimators::MultiQuantileConfig;
use crate::heston::ExperimentConfig;
use crate::maxima::RollingWindow;
use crate::returns::{FilterRules, SessionSpec, StandardizeOptions};
use crate::risk::{GateConfig, MonitorConfig};
use crate::var::{RebalancePlan, Strategy, DEFAULT_VAR_LEVEL};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MarketProfile {
    /// Shenzhen calendar, 23 returns a day, 123-maxima windows.
    #[default]
    Cn,
    /// NYSE calendar, 38 returns a day, 126-maxima windows.
    Us,
    /// Calendar given in `market.session`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    pub profile: MarketProfile,
    pub session: Option<SessionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSection {
    pub block_span_days: usize,
    /// Maxima per window; the profile default when absent.
    pub window_k: Option<usize>,
    pub step_blocks: usize,
    pub var_level: f64,
    pub estimator: MultiQuantileConfig,
    pub gate: GateConfig,
}

impl Default for MonitorSection {
    fn default() -> Self {
        Self {
            block_span_days: 2,
            window_k: None,
            step_blocks: 1,
            var_level: DEFAULT_VAR_LEVEL,
            estimator: MultiQuantileConfig::default(),
            gate: GateConfig::default(),
        }
    }
}

/// Sample the Normal-VaR is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalInput {
    /// The window's block maxima, as for GEV-VaR.
    #[default]
    Maxima,
    /// Every |SLR| in the window.
    AbsSlr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    pub plan: RebalancePlan,
    pub strategies: Vec<Strategy>,
    pub normal_input: NormalInput,
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            plan: RebalancePlan::default(),
            strategies: vec![Strategy::Gev, Strategy::Normal, Strategy::Equal],
            normal_input: NormalInput::Maxima,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangepointSection {
    pub bocd: BocdConfig,
    /// Use every `thinning`-th fit.
    pub thinning: usize,
}

impl Default for ChangepointSection {
    fn default() -> Self {
        Self { bocd: BocdConfig::default(), thinning: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub filter: FilterRules,
    #[serde(default)]
    pub standardize: StandardizeOptions,
    #[serde(default)]
    pub monitor: MonitorSection,
    #[serde(default)]
    pub backtest: BacktestSection,
    #[serde(default)]
    pub changepoint: ChangepointSection,
    #[serde(default)]
    pub simulate: ExperimentConfig,
}

fn default_seed() -> u64 {
    2024
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            market: MarketConfig::default(),
            filter: FilterRules::default(),
            standardize: StandardizeOptions::default(),
            monitor: MonitorSection::default(),
            backtest: BacktestSection::default(),
            changepoint: ChangepointSection::default(),
            simulate: ExperimentConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn session(&self) -> Result<SessionSpec> {
        match (self.market.profile, &self.market.session) {
            (MarketProfile::Custom, Some(s)) => Ok(s.clone()),
            (MarketProfile::Custom, None) => Err(Error::Config("custom market profile needs market.session".into())),
            (MarketProfile::Cn, None) => Ok(SessionSpec::cn()),
            (MarketProfile::Us, None) => Ok(SessionSpec::us()),
            (_, Some(_)) => Err(Error::Config("market.session is only allowed with the custom profile".into())),
        }
    }

    pub fn window_k(&self) -> usize {
        self.monitor.window_k.unwrap_or(match self.market.profile {
            MarketProfile::Us => 126,
            MarketProfile::Cn | MarketProfile::Custom => 123,
        })
    }

    pub fn monitor_config(&self) -> Result<MonitorConfig> {
        Ok(MonitorConfig {
            window: RollingWindow::new(self.window_k(), self.monitor.step_blocks)?,
            estimator: self.monitor.estimator.clone(),
            gate: self.monitor.gate,
            var_level: self.monitor.var_level,
        })
    }

    /// Checks every section; any violation is reported as a config error.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.session()?.validate()?;
        if self.monitor.block_span_days == 0 {
            return Err(Error::Config("monitor.block_span_days must be at least 1".into()));
        }
        if self.standardize.k == 0 {
            return Err(Error::Config("standardize.k must be positive".into()));
        }
        self.monitor_config()?.validate()?;
        self.backtest.plan.validate()?;
        if self.backtest.strategies.is_empty() {
            return Err(Error::Config("backtest.strategies is empty".into()));
        }
        let b = &self.changepoint.bocd;
        if self.changepoint.thinning == 0 || !(b.hazard_lambda > 1.0) || !(0.0..=1.0).contains(&b.min_posterior) {
            return Err(Error::Config("changepoint thinning must be positive, hazard lambda above 1 and min_posterior in [0,1]".into()));
        }
        self.simulate.validate()?;
        Ok(())
    }
}
