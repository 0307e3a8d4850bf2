//! Flat `key = value` experiment configuration with dotted namespaces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::data::{AdmmConfig, AuxInit, HyperParams};
use crate::error::{JpsaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Raw,
    Pca,
    Lpp,
    Jpsa,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Pca => "pca",
            Method::Lpp => "lpp",
            Method::Jpsa => "jpsa",
        }
    }
}

impl FromStr for Method {
    type Err = JpsaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Method::Raw),
            "pca" => Ok(Method::Pca),
            "lpp" => Ok(Method::Lpp),
            "jpsa" => Ok(Method::Jpsa),
            _ => Err(JpsaError::Config(format!("unknown method '{s}' (raw, pca, lpp, jpsa)"))),
        }
    }
}

/// Parameters of the generated benchmark scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub n_classes: usize,
    /// Amplitude of the class-specific spectral features.
    pub separation: f64,
    /// Std of i.i.d. per-band noise.
    pub noise: f64,
    /// Side of the square tiles classes are painted on.
    pub blob: usize,
    /// Std of the spatially smooth nuisance factors shared by all classes.
    pub nuisance: f64,
    pub nuisance_dims: usize,
    /// Relative spread of the per-pixel brightness factor.
    pub illumination: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            width: 48,
            height: 48,
            bands: 60,
            n_classes: 6,
            separation: 1.0,
            noise: 0.1,
            blob: 8,
            nuisance: 0.6,
            nuisance_dims: 24,
            illumination: 0.1,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.bands == 0 || self.n_classes == 0 || self.blob == 0 {
            return Err(JpsaError::Config("synthetic width, height, bands, classes and blob must be positive".into()));
        }
        for (k, v) in [
            ("separation", self.separation),
            ("noise", self.noise),
            ("nuisance", self.nuisance),
            ("illumination", self.illumination),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(JpsaError::Config(format!("synthetic.{k} must be a nonnegative real, got {v}")));
            }
        }
        Ok(())
    }
}

/// Where the scene comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Files {
        header: PathBuf,
        payload: PathBuf,
        labels: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_per_class: usize,
    /// Share of the remaining labeled pixels used for testing.
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub method: Method,
    pub data: DataSource,
    pub split: SplitSpec,
    pub hp: HyperParams,
    pub admm: AdmmConfig,
    pub slic_compactness: f64,
    pub slic_iters: usize,
    pub include_unlabeled: bool,
    /// Cap on unlabeled columns added to the training graph.
    pub max_unlabeled: usize,
    /// Candidate values per config key; the product forms the search grid.
    pub grid: BTreeMap<String, Vec<String>>,
    pub cv_folds: usize,
    pub grid_budget: Option<usize>,
    pub sweep_m: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out: PathBuf::from("runs/default"),
            method: Method::Jpsa,
            data: DataSource::Synthetic(SyntheticSpec::default()),
            split: SplitSpec {
                train_per_class: 10,
                test_fraction: 1.0,
            },
            hp: HyperParams::default(),
            admm: AdmmConfig::default(),
            slic_compactness: crate::superpixel::DEFAULT_COMPACTNESS,
            slic_iters: crate::superpixel::DEFAULT_SLIC_ITERS,
            include_unlabeled: false,
            max_unlabeled: 200,
            grid: BTreeMap::new(),
            cv_folds: 10,
            grid_budget: None,
            sweep_m: vec![1, 2, 3, 4],
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| JpsaError::Config(format!("{key}: cannot parse '{value}'")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Apply `key = value` lines on top of the current values. `#` starts a
    /// comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| JpsaError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| JpsaError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    fn synthetic_mut(&mut self) -> &mut SyntheticSpec {
        if !matches!(self.data, DataSource::Synthetic(_)) {
            self.data = DataSource::Synthetic(SyntheticSpec::default());
        }
        match &mut self.data {
            DataSource::Synthetic(s) => s,
            DataSource::Files { .. } => unreachable!(),
        }
    }

    fn files_mut(&mut self) -> (&mut PathBuf, &mut PathBuf, &mut PathBuf) {
        if !matches!(self.data, DataSource::Files { .. }) {
            self.data = DataSource::Files {
                header: PathBuf::new(),
                payload: PathBuf::new(),
                labels: PathBuf::new(),
            };
        }
        match &mut self.data {
            DataSource::Files {
                header,
                payload,
                labels,
            } => (header, payload, labels),
            DataSource::Synthetic(_) => unreachable!(),
        }
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if let Some(gk) = key.strip_prefix("grid.") {
            let vals: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            if vals.is_empty() {
                return Err(JpsaError::Config(format!("{key}: empty candidate list")));
            }
            // validate each candidate against a scratch copy
            let mut probe = self.clone();
            for c in &vals {
                probe.set(gk, c)?;
            }
            self.grid.insert(gk.to_string(), vals);
            return Ok(());
        }
        match key {
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "method" => self.method = v.parse()?,
            "data.header" => *self.files_mut().0 = PathBuf::from(v),
            "data.payload" => *self.files_mut().1 = PathBuf::from(v),
            "data.labels" => *self.files_mut().2 = PathBuf::from(v),
            "synthetic.width" => self.synthetic_mut().width = num(key, v)?,
            "synthetic.height" => self.synthetic_mut().height = num(key, v)?,
            "synthetic.bands" => self.synthetic_mut().bands = num(key, v)?,
            "synthetic.classes" => self.synthetic_mut().n_classes = num(key, v)?,
            "synthetic.separation" => self.synthetic_mut().separation = num(key, v)?,
            "synthetic.noise" => self.synthetic_mut().noise = num(key, v)?,
            "synthetic.blob" => self.synthetic_mut().blob = num(key, v)?,
            "synthetic.nuisance" => self.synthetic_mut().nuisance = num(key, v)?,
            "synthetic.nuisance_dims" => self.synthetic_mut().nuisance_dims = num(key, v)?,
            "synthetic.illumination" => self.synthetic_mut().illumination = num(key, v)?,
            "synthetic.seed" => self.synthetic_mut().seed = num(key, v)?,
            "split.train_per_class" => self.split.train_per_class = num(key, v)?,
            "split.test_fraction" => {
                let f: f64 = num(key, v)?;
                if !(f > 0.0 && f <= 1.0) {
                    return Err(JpsaError::Config(format!("{key} must lie in (0, 1], got {f}")));
                }
                self.split.test_fraction = f;
            }
            "jpsa.preset" => {
                let p = match v {
                    "indian_pines" => HyperParams::preset_indian_pines(),
                    "houston" => HyperParams::preset_houston(),
                    _ => return Err(JpsaError::Config(format!("unknown preset '{v}' (indian_pines, houston)"))),
                };
                self.hp = p;
            }
            "jpsa.alpha" => self.hp.alpha = num(key, v)?,
            "jpsa.beta" => self.hp.beta = num(key, v)?,
            "jpsa.gamma" => self.hp.gamma = num(key, v)?,
            "jpsa.eta" => self.hp.eta = num(key, v)?,
            "jpsa.m" => {
                let m: usize = num(key, v)?;
                let d = self.hp.dims.last().copied().unwrap_or(20);
                self.hp.m = m;
                self.hp.dims = vec![d; m];
            }
            "jpsa.d" => {
                let d: usize = num(key, v)?;
                self.hp.dims = vec![d; self.hp.m];
            }
            "jpsa.dims" => {
                let dims: Vec<usize> = list(key, v)?;
                self.hp.m = dims.len();
                self.hp.dims = dims;
            }
            "jpsa.k" => self.hp.knn_k = num(key, v)?,
            "jpsa.sigma" => self.hp.sigma = num(key, v)?,
            "jpsa.zeta" => self.hp.zeta = num(key, v)?,
            "jpsa.max_outer_iters" => self.hp.max_outer_iters = num(key, v)?,
            "jpsa.superpixel_fraction" => self.hp.superpixel_fraction = num(key, v)?,
            "jpsa.include_unlabeled_in_graph" => self.include_unlabeled = num(key, v)?,
            "jpsa.max_unlabeled" => self.max_unlabeled = num(key, v)?,
            "admm.mu0" => self.admm.mu0 = num(key, v)?,
            "admm.mu_max" => self.admm.mu_max = num(key, v)?,
            "admm.rho" => self.admm.rho = num(key, v)?,
            "admm.eps" => self.admm.eps = num(key, v)?,
            "admm.max_iters" => self.admm.max_iters = num(key, v)?,
            "admm.init" => {
                self.admm.init = match v {
                    "zero" => AuxInit::Zero,
                    "consensus" => AuxInit::Consensus,
                    _ => return Err(JpsaError::Config(format!("unknown admm.init '{v}' (zero, consensus)"))),
                }
            }
            "slic.compactness" => self.slic_compactness = num(key, v)?,
            "slic.iters" => self.slic_iters = num(key, v)?,
            "cv.folds" => self.cv_folds = num(key, v)?,
            "cv.budget" => self.grid_budget = Some(num(key, v)?),
            "sweep.m" => self.sweep_m = list(key, v)?,
            _ => return Err(JpsaError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate().map_err(|e| JpsaError::Config(e.to_string()))?;
        self.admm.validate().map_err(|e| JpsaError::Config(e.to_string()))?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        if self.split.train_per_class == 0 {
            return Err(JpsaError::Config("split.train_per_class must be at least 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(JpsaError::Config("cv.folds must be at least 2".into()));
        }
        Ok(())
    }

    /// Complete, re-parseable listing of the effective configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        kv("method", self.method.name().into());
        match &self.data {
            DataSource::Synthetic(sp) => {
                kv("synthetic.width", sp.width.to_string());
                kv("synthetic.height", sp.height.to_string());
                kv("synthetic.bands", sp.bands.to_string());
                kv("synthetic.classes", sp.n_classes.to_string());
                kv("synthetic.separation", sp.separation.to_string());
                kv("synthetic.noise", sp.noise.to_string());
                kv("synthetic.blob", sp.blob.to_string());
                kv("synthetic.nuisance", sp.nuisance.to_string());
                kv("synthetic.nuisance_dims", sp.nuisance_dims.to_string());
                kv("synthetic.illumination", sp.illumination.to_string());
                kv("synthetic.seed", sp.seed.to_string());
            }
            DataSource::Files {
                header,
                payload,
                labels,
            } => {
                kv("data.header", header.display().to_string());
                kv("data.payload", payload.display().to_string());
                kv("data.labels", labels.display().to_string());
            }
        }
        kv("split.train_per_class", self.split.train_per_class.to_string());
        kv("split.test_fraction", self.split.test_fraction.to_string());
        kv("jpsa.alpha", self.hp.alpha.to_string());
        kv("jpsa.beta", self.hp.beta.to_string());
        kv("jpsa.gamma", self.hp.gamma.to_string());
        kv("jpsa.eta", self.hp.eta.to_string());
        kv("jpsa.dims", join(&self.hp.dims));
        kv("jpsa.k", self.hp.knn_k.to_string());
        kv("jpsa.sigma", self.hp.sigma.to_string());
        kv("jpsa.zeta", self.hp.zeta.to_string());
        kv("jpsa.max_outer_iters", self.hp.max_outer_iters.to_string());
        kv("jpsa.superpixel_fraction", self.hp.superpixel_fraction.to_string());
        kv("jpsa.include_unlabeled_in_graph", self.include_unlabeled.to_string());
        kv("jpsa.max_unlabeled", self.max_unlabeled.to_string());
        kv("admm.mu0", self.admm.mu0.to_string());
        kv("admm.mu_max", self.admm.mu_max.to_string());
        kv("admm.rho", self.admm.rho.to_string());
        kv("admm.eps", self.admm.eps.to_string());
        kv("admm.max_iters", self.admm.max_iters.to_string());
        kv(
            "admm.init",
            match self.admm.init {
                AuxInit::Zero => "zero",
                AuxInit::Consensus => "consensus",
            }
            .into(),
        );
        kv("slic.compactness", self.slic_compactness.to_string());
        kv("slic.iters", self.slic_iters.to_string());
        kv("cv.folds", self.cv_folds.to_string());
        if let Some(b) = self.grid_budget {
            kv("cv.budget", b.to_string());
        }
        kv("sweep.m", join(&self.sweep_m));
        for (k, vals) in &self.grid {
            kv(&format!("grid.{k}"), vals.join(","));
        }
        s
    }
}

/// Grid used when the config declares none: the ranges searched for the
/// real scenes.
pub fn default_grid() -> BTreeMap<String, Vec<String>> {
    let decades: Vec<String> = ["0.01", "0.1", "1", "10", "100"].iter().map(|s| s.to_string()).collect();
    let tens: Vec<String> = (1..=5).map(|i| (10 * i).to_string()).collect();
    let mut g = BTreeMap::new();
    g.insert("jpsa.d".into(), tens.clone());
    g.insert("jpsa.k".into(), tens);
    for k in ["jpsa.sigma", "jpsa.alpha", "jpsa.beta", "jpsa.gamma"] {
        g.insert(k.into(), decades.clone());
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_echo_round_trip() {
        let text = "method = pca\njpsa.alpha=0.5 # comment\njpsa.m = 3\njpsa.d = 15\ngrid.jpsa.beta = 0.1, 1\nsynthetic.noise=0.3\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.method, Method::Pca);
        assert_eq!(cfg.hp.dims, vec![15, 15, 15]);
        assert_eq!(cfg.grid["jpsa.beta"], vec!["0.1", "1"]);
        let again = ExperimentConfig::parse(&cfg.echo()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ExperimentConfig::parse("seed = 1\nbogus.key = 2\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("bogus.key"), "{err}");
        assert!(ExperimentConfig::parse("grid.jpsa.alpha = x").is_err());
        assert!(ExperimentConfig::parse("grid.jpsa.alpha = ").is_err());
    }

    #[test]
    fn presets() {
        let cfg = ExperimentConfig::parse("jpsa.preset = houston").unwrap();
        assert_eq!(cfg.hp.dims, vec![30, 30, 30]);
        assert_eq!((cfg.hp.alpha, cfg.hp.beta, cfg.hp.gamma), (1.0, 0.1, 0.1));
    }

    #[test]
    fn default_grid_size() {
        let n: usize = default_grid().values().map(Vec::len).product();
        assert_eq!(n, 5usize.pow(6));
    }
}
