//! Flat `key = value` configuration files.
//!
//! ```text
//! # two RRHs at ten requests per frame each
//! lambda = 10, 10
//! max_concurrent = 25
//! frame_duration = 10
//! service_rate = 0.2
//! queue_truncation = 200
//! ```
//!
//! Every key is optional except `lambda` (alias `arrival_rates`). A single
//! `lambda` value is repeated for each RRH when `num_rrh` is given.
//! Blank lines and anything after `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use bbupool_core::config::DEFAULT_QUEUE_TRUNCATION;
use bbupool_core::{SystemConfig, Tolerances};

use crate::{AppError, Result};

pub const KEYS: &[&str] = &[
    "num_rrh",
    "max_concurrent",
    "frame_duration",
    "service_rate",
    "lambda",
    "queue_truncation",
    "quadrature_abs_tol",
    "poisson_tail_mass",
    "power_iter_tol",
    "percentile_tol",
];

/// Settings read from a file or flags, before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub num_rrh: Option<usize>,
    pub max_concurrent: Option<u32>,
    pub frame_duration: Option<f64>,
    pub service_rate: Option<f64>,
    pub lambda: Option<Vec<f64>>,
    pub queue_truncation: Option<u32>,
    pub quadrature_abs_tol: Option<f64>,
    pub poisson_tail_mass: Option<f64>,
    pub power_iter_tol: Option<f64>,
    pub percentile_tol: Option<f64>,
}

impl ConfigOverrides {
    /// Values set in `other` win.
    pub fn merge(mut self, other: &ConfigOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $(if other.$f.is_some() { self.$f = other.$f.clone(); })* };
        }
        take!(
            num_rrh,
            max_concurrent,
            frame_duration,
            service_rate,
            lambda,
            queue_truncation,
            quadrature_abs_tol,
            poisson_tail_mass,
            power_iter_tol,
            percentile_tol
        );
        self
    }

    pub fn build(&self) -> Result<SystemConfig> {
        let mut lambda = self
            .lambda
            .clone()
            .ok_or_else(|| AppError::Config("missing key `lambda`".into()))?;
        if let Some(n) = self.num_rrh {
            if lambda.len() == 1 && n > 1 {
                lambda = vec![lambda[0]; n];
            } else if lambda.len() != n {
                return Err(AppError::Config(format!(
                    "`num_rrh` is {n} but `lambda` lists {} rates",
                    lambda.len()
                )));
            }
        }
        let defaults = Tolerances::default();
        let cfg = SystemConfig {
            num_rrh: lambda.len(),
            max_concurrent: self.max_concurrent.unwrap_or(25),
            frame_duration: self.frame_duration.unwrap_or(10.0),
            service_rate: self.service_rate.unwrap_or(0.2),
            arrival_rates: lambda,
            queue_truncation: self.queue_truncation.unwrap_or(DEFAULT_QUEUE_TRUNCATION),
            tolerances: Tolerances {
                quadrature_abs_tol: self
                    .quadrature_abs_tol
                    .unwrap_or(defaults.quadrature_abs_tol),
                poisson_tail_mass: self.poisson_tail_mass.unwrap_or(defaults.poisson_tail_mass),
                power_iter_tol: self.power_iter_tol.unwrap_or(defaults.power_iter_tol),
                percentile_tol: self.percentile_tol.unwrap_or(defaults.percentile_tol),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| AppError::ConfigLine {
        line,
        message: format!("cannot parse `{}` as a value for `{key}`", value.trim()),
    })
}

pub fn parse_str(text: &str) -> Result<ConfigOverrides> {
    let mut out = ConfigOverrides::default();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(AppError::ConfigLine {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        let key = if key == "arrival_rates" {
            "lambda"
        } else {
            key
        };
        if !KEYS.contains(&key) {
            return Err(AppError::ConfigLine {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(AppError::ConfigLine {
                line,
                message: format!("key `{key}` given twice"),
            });
        }
        match key {
            "num_rrh" => out.num_rrh = Some(parse_num(line, key, value)?),
            "max_concurrent" => out.max_concurrent = Some(parse_num(line, key, value)?),
            "frame_duration" => out.frame_duration = Some(parse_num(line, key, value)?),
            "service_rate" => out.service_rate = Some(parse_num(line, key, value)?),
            "queue_truncation" => out.queue_truncation = Some(parse_num(line, key, value)?),
            "quadrature_abs_tol" => out.quadrature_abs_tol = Some(parse_num(line, key, value)?),
            "poisson_tail_mass" => out.poisson_tail_mass = Some(parse_num(line, key, value)?),
            "power_iter_tol" => out.power_iter_tol = Some(parse_num(line, key, value)?),
            "percentile_tol" => out.percentile_tol = Some(parse_num(line, key, value)?),
            "lambda" => {
                let rates = value
                    .split(',')
                    .map(|v| parse_num(line, key, v))
                    .collect::<Result<Vec<f64>>>()?;
                out.lambda = Some(rates);
            }
            _ => unreachable!("key list checked above"),
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<ConfigOverrides> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    parse_str(&text).map_err(|e| match e {
        AppError::ConfigLine { line, message } => {
            AppError::Config(format!("{}:{line}: {message}", path.display()))
        }
        other => other,
    })
}

/// The effective configuration in the file format. Reading it back gives
/// the same [`SystemConfig`] bit for bit.
pub fn dump(cfg: &SystemConfig) -> String {
    let mut s = String::new();
    let rates: Vec<String> = cfg.arrival_rates.iter().map(|l| format!("{l:?}")).collect();
    let t = &cfg.tolerances;
    writeln!(s, "num_rrh = {}", cfg.num_rrh).unwrap();
    writeln!(s, "lambda = {}", rates.join(", ")).unwrap();
    writeln!(s, "max_concurrent = {}", cfg.max_concurrent).unwrap();
    writeln!(s, "frame_duration = {:?}", cfg.frame_duration).unwrap();
    writeln!(s, "service_rate = {:?}", cfg.service_rate).unwrap();
    writeln!(s, "queue_truncation = {}", cfg.queue_truncation).unwrap();
    writeln!(s, "quadrature_abs_tol = {:?}", t.quadrature_abs_tol).unwrap();
    writeln!(s, "poisson_tail_mass = {:?}", t.poisson_tail_mass).unwrap();
    writeln!(s, "power_iter_tol = {:?}", t.power_iter_tol).unwrap();
    writeln!(s, "percentile_tol = {:?}", t.percentile_tol).unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_reference_file() {
        let cfg = parse_str("# reference\nlambda = 10,10\nmax_concurrent=25\nframe_duration = 10 # F\n\nservice_rate = 0.2\n")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cfg, SystemConfig::reference(vec![10.0, 10.0]).unwrap());
    }

    #[test]
    fn single_rate_is_repeated() {
        let cfg = parse_str("num_rrh = 3\narrival_rates = 4")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cfg.arrival_rates, vec![4.0; 3]);
        assert!(parse_str("num_rrh = 3\nlambda = 4, 5")
            .unwrap()
            .build()
            .is_err());
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = parse_str("lambda = 1\nlamda = 2\n").unwrap_err();
        assert!(
            matches!(&e, AppError::ConfigLine { line: 2, message } if message.contains("lamda"))
        );
        let e = parse_str("lambda = 1, x\n").unwrap_err();
        assert!(matches!(&e, AppError::ConfigLine { line: 1, message } if message.contains("`x`")));
        let e = parse_str("\nservice_rate\n").unwrap_err();
        assert!(matches!(e, AppError::ConfigLine { line: 2, .. }));
        let e = parse_str("lambda = 1\nlambda = 2\n").unwrap_err();
        assert!(matches!(e, AppError::ConfigLine { line: 2, .. }));
        assert!(matches!(
            parse_str("service_rate = 1").unwrap().build(),
            Err(AppError::Config(_))
        ));
        assert!(parse_str("lambda = -1").unwrap().build().is_err());
    }

    #[test]
    fn dump_round_trips() {
        let mut cfg = SystemConfig::reference(vec![0.1 + 0.2, 7.25, 1e-7]).unwrap();
        cfg.tolerances.quadrature_abs_tol = 3e-11;
        cfg.queue_truncation = 77;
        let back = parse_str(&dump(&cfg)).unwrap().build().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_win() {
        let file = parse_str("lambda = 1, 2\nframe_duration = 5").unwrap();
        let flags = ConfigOverrides {
            lambda: Some(vec![3.0, 3.0]),
            ..Default::default()
        };
        let cfg = file.merge(&flags).build().unwrap();
        assert_eq!(cfg.arrival_rates, vec![3.0, 3.0]);
        assert_eq!(cfg.frame_duration, 5.0);
    }
}
