//! Flat `key = value` configuration. Values come from the defaults, then
//! an optional file, then `--set key=value` flags, later sources winning.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use odisal::geometry::{Interpolation, PitchSampling};
use odisal::metrics::MetricOptions;
use odisal::model::TrainConfig;
use odisal::nn::SgdConfig;
use odisal::pipeline::PipelineConfig;
use odisal::{Error, Result};

trait Value: Sized {
    fn parse_value(s: &str) -> Option<Self>;
    fn show(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse_value(s: &str) -> Option<Self> {
                s.parse().ok()
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

from_str_value!(usize, u64, bool);

impl Value for f64 {
    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok().filter(|v: &f64| v.is_finite())
    }
    fn show(&self) -> String {
        // shortest exact form, scientific for small rates
        if *self != 0.0 && self.abs() < 1e-3 {
            format!("{self:e}")
        } else {
            self.to_string()
        }
    }
}

impl Value for PitchSampling {
    fn parse_value(s: &str) -> Option<Self> {
        match s {
            "sphere" => Some(PitchSampling::SphereUniform),
            "angle" => Some(PitchSampling::AngleUniform),
            _ => None,
        }
    }
    fn show(&self) -> String {
        match self {
            PitchSampling::SphereUniform => "sphere",
            PitchSampling::AngleUniform => "angle",
        }
        .into()
    }
}

macro_rules! config {
    ($($key:ident : $t:ty = $default:expr, $doc:literal;)*) => {
        /// Every tunable of the command-line pipeline.
        #[derive(Debug, Clone, PartialEq)]
        pub struct Config {
            $(#[doc = $doc] pub $key: $t,)*
        }

        impl Default for Config {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl Config {
            /// `(key, default, description)` for every key.
            pub fn documented_keys() -> Vec<(&'static str, String, &'static str)> {
                let d = Self::default();
                vec![$((stringify!($key), d.$key.show(), $doc),)*]
            }

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let value = value.trim();
                match key.trim() {
                    $(stringify!($key) => {
                        self.$key = <$t>::parse_value(value).ok_or_else(|| {
                            Error::Config(format!("bad value {value:?} for {}", stringify!($key)))
                        })?;
                    })*
                    other => return Err(Error::Config(format!("unknown key {other:?}"))),
                }
                Ok(())
            }

            /// `key = value` lines for the current values.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(writeln!(s, "{} = {}", stringify!($key), self.$key.show()).unwrap();)*
                s
            }
        }
    };
}

config! {
    fov_deg: f64 = 90.0, "Field of view of each view, degrees";
    patch_w: usize = 256, "View width, pixels";
    patch_h: usize = 256, "View height, pixels";
    blur_kernel: usize = 64, "Gaussian kernel size for hole filling, pixels";
    lr: f64 = 1.3e-7, "Base learning rate";
    lr_gamma: f64 = 0.7, "Learning-rate multiplier per step";
    lr_step: usize = 500, "Iterations between learning-rate decays";
    weight_decay: f64 = 5e-4, "L2 weight decay";
    batch_size: usize = 5, "Mini-batch size";
    iterations: usize = 22000, "Training iterations";
    seed: u64 = 0, "Seed for network initialization and training-view sampling";
    split_seed: u64 = 0, "Seed for the train/test split and batch order";
    latitude_weighted: bool = true, "Weight KL and CC by cos(latitude)";
    test_fraction: f64 = 0.1, "Share of source images held out for the test loss";
    test_every: usize = 100, "Iterations between test-loss evaluations";
    n_per_odi: usize = 100, "Random training views per image (stage 2)";
    pitch_sampling: PitchSampling = PitchSampling::SphereUniform, "Random view pitch density: sphere or angle";
    train_w: usize = 0, "Stage-1 images are resized to this width (0 keeps the size)";
    train_h: usize = 0, "Stage-1 images are resized to this height (0 keeps the size)";
    whole_w: usize = 800, "Width of the whole-image scenario input";
    whole_h: usize = 400, "Height of the whole-image scenario input";
    fixation_percent: f64 = 1.0, "Top percentage of ground truth used as fixations when none are given";
    threads: usize = 1, "Worker threads for per-view inference";
}

impl Config {
    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then each `key=value` override.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply_text(&fs::read_to_string(path)?)?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::Config(format!("fov_deg {} not in (0, 180)", self.fov_deg)));
        }
        if self.patch_w == 0 || self.patch_h == 0 || self.whole_w == 0 || self.whole_h == 0 {
            return Err(Error::Config("image sizes must be positive".into()));
        }
        if (self.train_w == 0) != (self.train_h == 0) {
            return Err(Error::Config("set both train_w and train_h, or neither".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction {} not in (0, 1)", self.test_fraction)));
        }
        if self.test_every == 0 || self.n_per_odi == 0 || self.threads == 0 {
            return Err(Error::Config("test_every, n_per_odi and threads must be positive".into()));
        }
        self.sgd().validate()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            fov: self.fov_deg.to_radians(),
            patch_w: self.patch_w,
            patch_h: self.patch_h,
            blur_kernel: self.blur_kernel,
            interpolation: Interpolation::Bilinear,
            whole_w: self.whole_w,
            whole_h: self.whole_h,
            threads: self.threads,
        }
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            base_lr: self.lr,
            lr_gamma: self.lr_gamma,
            lr_step: self.lr_step,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            iterations: self.iterations,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            sgd: self.sgd(),
            test_fraction: self.test_fraction,
            test_every: self.test_every,
            seed: self.split_seed,
            ..TrainConfig::default()
        }
    }

    pub fn metrics(&self) -> MetricOptions {
        MetricOptions {
            latitude_weighted: self.latitude_weighted,
            fixation_percent: self.fixation_percent,
            ..MetricOptions::default()
        }
    }

    /// Help text listing every key with its default.
    pub fn help_text() -> String {
        let keys = Self::documented_keys();
        let width = keys.iter().map(|(k, d, _)| k.len() + d.len() + 3).max().unwrap_or(0);
        let mut s = String::from("Configuration keys (key = default):\n");
        for (k, d, doc) in keys {
            writeln!(s, "  {:<width$}  {doc}", format!("{k} = {d}")).unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::default();
        assert_eq!(c.fov_deg, 90.0);
        assert_eq!(c.blur_kernel, 64);
        assert_eq!(c.lr, 1.3e-7);
        assert_eq!(c.lr_gamma, 0.7);
        assert_eq!(c.lr_step, 500);
        assert_eq!(c.weight_decay, 5e-4);
        assert_eq!(c.batch_size, 5);
        assert_eq!(c.iterations, 22000);
        assert_eq!(c.test_fraction, 0.1);
        assert!(c.latitude_weighted);
        assert_eq!(c.pipeline().fov, std::f64::consts::FRAC_PI_2);
        let help = Config::help_text();
        for needle in ["fov_deg = 90", "lr = 1.3e-7", "lr_gamma = 0.7", "iterations = 22000", "blur_kernel = 64"] {
            assert!(help.contains(needle), "{needle}");
        }
    }

    #[test]
    fn precedence_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.txt");
        fs::write(&f, "# comment\nseed = 4\nlr = 0.5  # trailing\nbatch_size=2\n").unwrap();
        let c = Config::load(Some(&f), &["lr=0.25".into()]).unwrap();
        assert_eq!((c.seed, c.lr, c.batch_size), (4, 0.25, 2));

        let mut c = Config::default();
        assert!(matches!(c.set("nope", "1"), Err(Error::Config(_))));
        assert!(matches!(c.set("patch_w", "-3"), Err(Error::Config(_))));
        assert!(matches!(c.set("lr", "nan"), Err(Error::Config(_))));
        assert!(c.apply_text("seed 4").is_err());
        assert!(Config::load(None, &["test_fraction=1.5".into()]).is_err());
        assert!(matches!(Config::load(Some(&dir.path().join("missing")), &[]), Err(Error::Io(_))));
    }

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.set("pitch_sampling", "angle").unwrap();
        c.set("lr", "9.1e-8").unwrap();
        let mut d = Config::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }
}
