//! Flag value parsers. Failures surface as usage errors.

use std::path::PathBuf;
use std::str::FromStr;

use sketchkit::calibration::CalibDistribution;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("expected positive dimensions in `{s}`"))
        };
        Ok(Shape {
            rows: parse(r)?,
            cols: parse(c)?,
        })
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Where calibration inputs come from.
#[derive(Clone, Debug, PartialEq)]
pub enum CalibSource {
    File(PathBuf),
    Synth {
        dist: CalibDistribution,
        samples: usize,
        seed: Option<u64>,
    },
}

impl FromStr for CalibSource {
    type Err = String;

    /// `synth:<gaussian|heavy_tail>:m=<samples>[:seed=<n>]`, anything else is
    /// a path.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some(rest) = s.strip_prefix("synth:") else {
            return Ok(CalibSource::File(PathBuf::from(s)));
        };
        let mut parts = rest.split(':');
        let dist = match parts.next() {
            Some("gaussian") => CalibDistribution::Gaussian,
            Some("heavy_tail") | Some("heavy-tail") => CalibDistribution::HeavyTail,
            other => return Err(format!("unknown synthetic distribution {:?}", other.unwrap_or(""))),
        };
        let mut samples = None;
        let mut seed = None;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value in `{part}`"))?;
            match key {
                "m" => {
                    samples = Some(
                        value
                            .parse::<usize>()
                            .ok()
                            .filter(|&m| m > 0)
                            .ok_or("m must be a positive integer")?,
                    )
                }
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| "seed must be an integer")?),
                other => return Err(format!("unknown synthetic calibration key `{other}`")),
            }
        }
        Ok(CalibSource::Synth {
            dist,
            samples: samples.ok_or("synthetic calibration needs m=<samples>")?,
            seed,
        })
    }
}

impl std::fmt::Display for CalibSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CalibSource::File(p) => write!(f, "{}", p.display()),
            CalibSource::Synth { dist, samples, seed } => {
                let name = match dist {
                    CalibDistribution::Gaussian => "gaussian",
                    CalibDistribution::HeavyTail => "heavy_tail",
                };
                write!(f, "synth:{name}:m={samples}")?;
                if let Some(s) = seed {
                    write!(f, ":seed={s}")?;
                }
                Ok(())
            }
        }
    }
}

/// Inclusive `start:stop:step` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaGrid {
    pub spec: String,
    pub values: Vec<f64>,
}

impl FromStr for EtaGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let nums: Vec<f64> = s
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number `{p}` in grid `{s}`"))
            })
            .collect::<Result<_, _>>()?;
        let values = match nums.as_slice() {
            [single] => vec![*single],
            [start, stop, step] if *step > 0.0 && stop >= start => {
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                // round to 12 decimals so 0.05-steps print as 0.15, not 0.15000000000000002
                (0..=count)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
            _ => return Err(format!("expected START:STOP:STEP with STEP > 0, got `{s}`")),
        };
        if let Some(bad) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(format!("eta values must lie in [0, 1), got {bad}"));
        }
        Ok(EtaGrid {
            spec: s.to_string(),
            values,
        })
    }
}

impl std::fmt::Display for EtaGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.spec)
    }
}
