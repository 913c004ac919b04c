//! Flag values merged with an optional `key=value` config file. Flags win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use evalcomplexity::io::read_config;
use evalcomplexity::methods::MethodConfig;
use evalcomplexity::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let values = match path {
            Some(p) => read_config(p)?.into_iter().map(|(k, v)| (normalize(&k), v)).collect(),
            None => BTreeMap::new(),
        };
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    /// `flag` if given, else the config value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.parse(key),
        }
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.pick(flag, key)?.ok_or_else(|| Error::InvalidConfig(format!("missing required setting `{key}`")))
    }

    /// Comma-separated list from a flag or the config.
    pub fn list(&self, flag: &[f64], key: &str) -> Result<Vec<f64>> {
        if !flag.is_empty() {
            return Ok(flag.to_vec());
        }
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("config key `{key}`: cannot parse `{item}`")))
                })
                .collect(),
        }
    }

    /// Applies method parameters present in the config file.
    pub fn apply_method_params(&self, cfg: &mut MethodConfig) -> Result<()> {
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = self.parse($key)? {
                    $field = v;
                }
            };
        }
        set!("budget", cfg.budget);
        set!("shift", cfg.newton.shift);
        set!("sigma0", cfg.reg.sigma0);
        set!("sigma_min", cfg.reg.sigma_min);
        set!("eta1", cfg.reg.eta1);
        set!("gamma_inc", cfg.reg.gamma_inc);
        set!("gamma_dec", cfg.reg.gamma_dec);
        set!("omega0", cfg.gqt.omega0);
        set!("omega_min", cfg.gqt.omega_min);
        set!("gqt_gamma1", cfg.gqt.gamma1);
        set!("gqt_eta1", cfg.gqt.eta1);
        set!("delta0", cfg.trust_region.delta0);
        set!("delta_max", cfg.trust_region.delta_max);
        set!("tr_eta", cfg.trust_region.eta);
        set!("tr_gamma1", cfg.trust_region.gamma1);
        set!("tr_gamma2", cfg.trust_region.gamma2);
        set!("mu1", cfg.goldstein.mu1);
        set!("mu2", cfg.goldstein.mu2);
        set!("rw_eta", cfg.royer_wright.eta);
        set!("backtrack", cfg.royer_wright.backtrack);
        if let Some(v) = self.parse::<f64>("lipschitz_gradient")? {
            cfg.reg.lipschitz_gradient = Some(v);
        }
        Ok(())
    }
}
