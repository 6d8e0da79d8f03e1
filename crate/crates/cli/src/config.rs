//! Experiment configuration: a compiled-in preset, overlaid by a flat
//! `key = value` file, overlaid by command-line flags.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use slqwave::presets::{example1_sigma, example1_target, tree_instance, EXAMPLE1_NOISE_DIM};
use slqwave::problem::{SpaceFn, SpaceTimeFn};
use slqwave::ProblemData;
use toml::Spanned;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Example1,
    Tree,
    Rates,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "example1" => Some(Self::Example1),
            "tree" => Some(Self::Tree),
            "rates" => Some(Self::Rates),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Tree => "tree",
            Self::Rates => "rates",
        }
    }
}

/// Named coefficient formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    Example1,
    Tree,
    Zero,
}

impl Formula {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "example1" => Some(Self::Example1),
            "tree" => Some(Self::Tree),
            "zero" => Some(Self::Zero),
            _ => None,
        }
    }
}

/// Where a resolved value came from; used to point errors at their cause.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Preset(&'static str),
    File { path: PathBuf, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Preset(p) => write!(f, "preset {p}"),
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag => write!(f, "command line"),
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub length: f64,
    pub horizon: f64,
    pub steps: usize,
    pub cells: usize,
    pub noise_dim: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `None` means additive noise in every component.
    pub gamma: Option<Vec<f64>>,
    pub sigma: Formula,
    pub noise_scale: f64,
    pub target: Formula,
    pub initial: Formula,
    /// `None` picks a step just above the Lipschitz bound.
    pub kappa: Option<f64>,
    pub iters: usize,
    pub residual_tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub probe_x: f64,
    /// Include the terminal term in the reported cost decay.
    pub report_terminal: bool,
    pub tau_levels: Vec<usize>,
    pub tau_reference: usize,
    pub h_levels: Vec<usize>,
    pub h_reference: usize,
    pub oracle_tol: f64,
    pub foc_tol: f64,
    pub out: PathBuf,
    origins: HashMap<&'static str, Origin>,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = Self {
            preset,
            length: 1.0,
            horizon: 1.0,
            steps: 60,
            cells: 100,
            noise_dim: EXAMPLE1_NOISE_DIM,
            alpha: 0.01,
            beta: 9.0,
            gamma: None,
            sigma: Formula::Example1,
            noise_scale: 1.0,
            target: Formula::Example1,
            initial: Formula::Example1,
            kappa: Some(2.8),
            iters: 10,
            residual_tol: 0.0,
            samples: 1000,
            seed: 0,
            probe_x: 0.5,
            report_terminal: true,
            tau_levels: vec![8, 16, 32, 64],
            tau_reference: 256,
            h_levels: vec![8, 16, 32],
            h_reference: 128,
            oracle_tol: 1e-8,
            foc_tol: 1e-10,
            out: PathBuf::from("out"),
            origins: HashMap::new(),
        };
        match preset {
            Preset::Example1 => base,
            Preset::Tree => Self {
                steps: 3,
                cells: 5,
                noise_dim: 1,
                sigma: Formula::Tree,
                target: Formula::Tree,
                initial: Formula::Tree,
                kappa: None,
                iters: 20_000,
                residual_tol: 1e-11,
                samples: 1,
                ..base
            },
            Preset::Rates => Self {
                steps: 64,
                cells: 32,
                alpha: 0.5,
                beta: 1.0,
                kappa: None,
                iters: 500,
                residual_tol: 1e-8,
                samples: 32,
                seed: 7,
                ..base
            },
        }
    }

    /// Origin of `key`, for error messages.
    pub fn origin(&self, key: &str) -> Origin {
        self.origins
            .get(key)
            .cloned()
            .unwrap_or(Origin::Preset(self.preset.name()))
    }

    fn invalid(&self, key: &'static str, msg: impl Into<String>) -> CliError {
        CliError::Config {
            origin: self.origin(key),
            msg: format!("{key}: {}", msg.into()),
        }
    }

    /// Applies the keys of a config file on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.apply_str(&text, path)
    }

    pub fn apply_str(&mut self, text: &str, path: &Path) -> Result<(), CliError> {
        let at = |offset: usize| Origin::File {
            path: path.to_path_buf(),
            line: text[..offset.min(text.len())].matches('\n').count() + 1,
        };
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config {
            origin: at(e.span().map_or(0, |s| s.start)),
            msg: e.message().trim().to_string(),
        })?;

        macro_rules! take {
            ($key:ident, $conv:expr) => {
                if let Some(v) = raw.$key {
                    let origin = at(v.span().start);
                    let conv: fn(_) -> Result<_, String> = $conv;
                    self.$key = conv(v.into_inner()).map_err(|msg| CliError::Config {
                        origin: origin.clone(),
                        msg: format!("{}: {msg}", stringify!($key)),
                    })?;
                    self.origins.insert(stringify!($key), origin);
                }
            };
        }
        take!(length, Ok);
        take!(horizon, Ok);
        take!(steps, Ok);
        take!(cells, Ok);
        take!(noise_dim, Ok);
        take!(alpha, Ok);
        take!(beta, Ok);
        take!(gamma, |g: Vec<f64>| Ok(Some(g)));
        take!(sigma, |s: String| Formula::parse(&s)
            .ok_or(format!("unknown formula `{s}`")));
        take!(noise_scale, Ok);
        take!(target, |s: String| Formula::parse(&s)
            .ok_or(format!("unknown formula `{s}`")));
        take!(initial, |s: String| Formula::parse(&s)
            .ok_or(format!("unknown formula `{s}`")));
        take!(kappa, |k: f64| Ok(Some(k)));
        take!(iters, Ok);
        take!(residual_tol, Ok);
        take!(samples, Ok);
        take!(seed, Ok);
        take!(probe_x, Ok);
        take!(report_terminal, Ok);
        take!(tau_levels, Ok);
        take!(tau_reference, Ok);
        take!(h_levels, Ok);
        take!(h_reference, Ok);
        take!(oracle_tol, Ok);
        take!(foc_tol, Ok);
        take!(out, Ok);
        Ok(())
    }

    /// Records a command-line override.
    pub fn set_flag<T>(
        &mut self,
        key: &'static str,
        value: Option<T>,
        slot: impl FnOnce(&mut Self, T),
    ) {
        if let Some(v) = value {
            slot(self, v);
            self.origins.insert(key, Origin::Flag);
        }
    }

    /// Range checks that do not need a solver.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |key, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(self.invalid(key, format!("must be positive and finite (got {v})")))
            }
        };
        let nonneg = |key, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(self.invalid(key, format!("must be non-negative and finite (got {v})")))
            }
        };
        positive("length", self.length)?;
        positive("horizon", self.horizon)?;
        positive("alpha", self.alpha)?;
        nonneg("beta", self.beta)?;
        nonneg("noise_scale", self.noise_scale)?;
        nonneg("residual_tol", self.residual_tol)?;
        positive("oracle_tol", self.oracle_tol)?;
        positive("foc_tol", self.foc_tol)?;
        if let Some(k) = self.kappa {
            positive("kappa", k)?;
        }
        if self.steps == 0 {
            return Err(self.invalid("steps", "must be at least 1"));
        }
        if self.cells < 2 {
            return Err(self.invalid("cells", "must be at least 2"));
        }
        if self.noise_dim == 0 {
            return Err(self.invalid("noise_dim", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(self.invalid("samples", "must be at least 1"));
        }
        if !(self.probe_x >= 0.0 && self.probe_x <= self.length) {
            return Err(self.invalid("probe_x", format!("must lie in [0, {}]", self.length)));
        }
        if let Some(g) = &self.gamma {
            if g.len() != self.noise_dim {
                return Err(self.invalid(
                    "gamma",
                    format!(
                        "has {} entries but noise_dim is {}",
                        g.len(),
                        self.noise_dim
                    ),
                ));
            }
        }
        if self.sigma == Formula::Tree && self.noise_dim != 1 {
            return Err(self.invalid("sigma", "the `tree` formula has a single component"));
        }
        Ok(())
    }

    /// Continuous problem data described by this configuration.
    pub fn problem_data(&self) -> ProblemData {
        let tree = tree_instance();
        let scale = self.noise_scale;
        let sigma = match self.sigma {
            Formula::Example1 => example1_sigma(self.noise_dim, scale),
            Formula::Tree => tree
                .sigma
                .iter()
                .map(|s| {
                    let s = Arc::clone(s);
                    Arc::new(move |t, x| scale * s(t, x)) as SpaceTimeFn
                })
                .collect(),
            Formula::Zero => (0..self.noise_dim)
                .map(|_| Arc::new(|_, _| 0.0) as SpaceTimeFn)
                .collect(),
        };
        let target = match self.target {
            Formula::Example1 => example1_target(),
            Formula::Tree => tree.target.clone(),
            Formula::Zero => Arc::new(|_, _| 0.0),
        };
        let (x10, x20): (SpaceFn, SpaceFn) = match self.initial {
            Formula::Example1 => (Arc::new(|x| x * x * (1.0 - x)), Arc::new(|_| 0.0)),
            Formula::Tree => (tree.x10.clone(), tree.x20.clone()),
            Formula::Zero => (Arc::new(|_| 0.0), Arc::new(|_| 0.0)),
        };
        // The formulas live on the unit interval; other lengths rescale x.
        let l = self.length;
        let (sigma, target, x10, x20) = if l == 1.0 {
            (sigma, target, x10, x20)
        } else {
            let sigma = sigma
                .into_iter()
                .map(|s| Arc::new(move |t, x: f64| s(t, x / l)) as SpaceTimeFn)
                .collect();
            (
                sigma,
                Arc::new(move |t, x: f64| target(t, x / l)) as SpaceTimeFn,
                Arc::new(move |x: f64| x10(x / l)) as SpaceFn,
                Arc::new(move |x: f64| x20(x / l)) as SpaceFn,
            )
        };
        ProblemData {
            length: self.length,
            horizon: self.horizon,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self
                .gamma
                .clone()
                .unwrap_or_else(|| vec![0.0; self.noise_dim]),
            sigma,
            target,
            x10,
            x20,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[allow(dead_code)]
    preset: Option<Spanned<String>>,
    length: Option<Spanned<f64>>,
    horizon: Option<Spanned<f64>>,
    steps: Option<Spanned<usize>>,
    cells: Option<Spanned<usize>>,
    noise_dim: Option<Spanned<usize>>,
    alpha: Option<Spanned<f64>>,
    beta: Option<Spanned<f64>>,
    gamma: Option<Spanned<Vec<f64>>>,
    sigma: Option<Spanned<String>>,
    noise_scale: Option<Spanned<f64>>,
    target: Option<Spanned<String>>,
    initial: Option<Spanned<String>>,
    kappa: Option<Spanned<f64>>,
    iters: Option<Spanned<usize>>,
    residual_tol: Option<Spanned<f64>>,
    samples: Option<Spanned<usize>>,
    seed: Option<Spanned<u64>>,
    probe_x: Option<Spanned<f64>>,
    report_terminal: Option<Spanned<bool>>,
    tau_levels: Option<Spanned<Vec<usize>>>,
    tau_reference: Option<Spanned<usize>>,
    h_levels: Option<Spanned<Vec<usize>>>,
    h_reference: Option<Spanned<usize>>,
    oracle_tol: Option<Spanned<f64>>,
    foc_tol: Option<Spanned<f64>>,
    out: Option<Spanned<PathBuf>>,
}

/// Reads only the `preset` key of a config file, so that the file can name
/// the base it overlays.
pub fn preset_in_file(path: &Path) -> Result<Option<Preset>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| CliError::Config {
        origin: Origin::File {
            path: path.to_path_buf(),
            line: text[..e.span().map_or(0, |s| s.start).min(text.len())]
                .matches('\n')
                .count()
                + 1,
        },
        msg: e.message().trim().to_string(),
    })?;
    match raw.preset {
        None => Ok(None),
        Some(p) => {
            let line = text[..p.span().start].matches('\n').count() + 1;
            Preset::parse(p.get_ref())
                .map(Some)
                .ok_or_else(|| CliError::Config {
                    origin: Origin::File {
                        path: path.to_path_buf(),
                        line,
                    },
                    msg: format!("preset: unknown preset `{}`", p.get_ref()),
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(text: &str) -> Result<ExperimentConfig, CliError> {
        let mut c = ExperimentConfig::preset(Preset::Example1);
        c.apply_str(text, Path::new("exp.cfg"))?;
        c.validate()?;
        Ok(c)
    }

    fn line_of(err: CliError) -> usize {
        match err {
            CliError::Config {
                origin: Origin::File { line, .. },
                ..
            } => line,
            other => panic!("expected a file error, got {other}"),
        }
    }

    #[test]
    fn example1_preset_matches_published_settings() {
        let c = ExperimentConfig::preset(Preset::Example1);
        assert_eq!((c.steps, c.cells, c.noise_dim, c.iters), (60, 100, 10, 10));
        assert_eq!((c.alpha, c.beta, c.kappa), (0.01, 9.0, Some(2.8)));
        assert_eq!(c.problem_data().gamma, vec![0.0; 10]);
    }

    #[test]
    fn file_keys_override_the_preset() {
        let c = apply("steps = 12\nalpha = 1\nsigma = \"zero\"\n").unwrap();
        assert_eq!(c.steps, 12);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.sigma, Formula::Zero);
        assert!(matches!(c.origin("steps"), Origin::File { line: 1, .. }));
        assert_eq!(c.origin("beta"), Origin::Preset("example1"));
    }

    #[test]
    fn syntax_errors_report_their_line() {
        assert_eq!(
            line_of(apply("steps = 12\n\nalpha = = 3\n").unwrap_err()),
            3
        );
    }

    #[test]
    fn unknown_keys_report_their_line() {
        assert_eq!(line_of(apply("steps = 12\nbogus = 1\n").unwrap_err()), 2);
    }

    #[test]
    fn type_errors_report_their_line() {
        assert_eq!(line_of(apply("# c\nsteps = \"many\"\n").unwrap_err()), 2);
    }

    #[test]
    fn range_errors_report_the_offending_key() {
        let err = apply("steps = 12\n\n\ncells = 1\n").unwrap_err();
        assert!(err.to_string().contains("cells"), "{err}");
        assert_eq!(line_of(err), 4);
        assert_eq!(
            line_of(apply("noise_dim = 2\ngamma = [0.0]\n").unwrap_err()),
            2
        );
        assert_eq!(line_of(apply("sigma = \"wiggly\"\n").unwrap_err()), 1);
    }

    #[test]
    fn flags_override_file_values() {
        let mut c = apply("samples = 5\n").unwrap();
        c.set_flag("samples", Some(9), |c, v| c.samples = v);
        assert_eq!(c.samples, 9);
        assert_eq!(c.origin("samples"), Origin::Flag);
    }

    #[test]
    fn tree_formula_needs_one_component() {
        let err = apply("sigma = \"tree\"\n").unwrap_err();
        assert_eq!(line_of(err), 1);
    }
}
