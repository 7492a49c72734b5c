//! Parameter tables, `key=value` config files and flag > file > default
//! resolution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use super::CliError;

#[derive(Clone, Copy, Debug)]
pub struct Param {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
    /// Boolean switch on the command line (`true`/`false` in files).
    pub switch: bool,
    pub required: bool,
}

const fn opt(key: &'static str, default: &'static str, help: &'static str) -> Param {
    Param {
        key,
        default: Some(default),
        help,
        switch: false,
        required: false,
    }
}

const fn req(key: &'static str, help: &'static str) -> Param {
    Param {
        key,
        default: None,
        help,
        switch: false,
        required: true,
    }
}

const fn maybe(key: &'static str, help: &'static str) -> Param {
    Param {
        key,
        default: None,
        help,
        switch: false,
        required: false,
    }
}

const fn switch(key: &'static str, help: &'static str) -> Param {
    Param {
        key,
        default: Some("false"),
        help,
        switch: true,
        required: false,
    }
}

/// Keys that never reach a manifest.
pub const CONFIG: &str = "config";
pub const THREADS: &str = "threads";

const COMMON: &[Param] = &[
    maybe(CONFIG, "key=value file supplying defaults for any flag"),
    opt(THREADS, "0", "worker threads (0 = all cores); results do not depend on it"),
];

pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [Param],
}

pub const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "generate",
        about: "Synthesize a labelled frame file",
        params: &[
            req("out", "output SIGF file"),
            opt("classes", "all", "comma-separated modulations or `all`"),
            opt("snr", "-20:18:2", "SNR tags in dB as start:stop:step or a single value"),
            opt("frames", "1000", "frames per (class, SNR) pair"),
            opt("seed", "0", "random seed"),
            opt("sps", "4", "samples per symbol"),
            opt("length", "128", "complex samples per frame"),
            opt("random-phase", "true", "apply a uniform random carrier phase per frame"),
            opt("cfo-max", "0", "maximum carrier offset in cycles per sample"),
        ],
    },
    Subcommand {
        name: "split",
        about: "Split a frame file into training (known classes) and testing (all classes) files",
        params: &[
            req("input", "source SIGF file"),
            req("out", "output directory for train.sigf and test.sigf"),
            req("known-classes", "classes seen in training (comma-separated or `all`)"),
            maybe("classes", "classes of the test set (default: every class of the source)"),
            opt("train-fraction", "0.5", "share of each class assigned to training"),
            maybe("test-fraction", "share of each class assigned to testing (default: the rest)"),
            opt("seed", "0", "random seed"),
        ],
    },
    Subcommand {
        name: "train",
        about: "Train a model; writes a checkpoint after every epoch",
        params: &[
            req("train", "training SIGF file"),
            req("out", "output directory"),
            opt("channels", "dual", "iq, ap or dual"),
            opt("cells", "128", "cells per LSTM layer"),
            switch("bidirectional", "bidirectional LSTM layers"),
            switch("visualization", "insert the 2-neuron feature layer"),
            opt("loss", "center", "center (softmax + center loss) or softmax"),
            opt("lambda", "0.1", "center-loss weight"),
            opt("alpha", "0.5", "center update rate"),
            opt("lr", "0.01", "Adam learning rate"),
            opt("batch", "256", "mini-batch size"),
            opt("epochs", "70", "total epochs"),
            opt("seed", "0", "random seed"),
            switch("literal-eq5", "divide the amplitude by the frame RMS a second time"),
            switch("resume", "continue from the checkpoint in the output directory"),
        ],
    },
    Subcommand {
        name: "eval-close",
        about: "Close-set evaluation",
        params: &[
            req("model", "checkpoint"),
            req("test", "test SIGF file"),
            req("out", "output directory"),
        ],
    },
    Subcommand {
        name: "fit-weibull",
        about: "Fit per-class Weibull tails on correctly classified training examples",
        params: &[
            req("model", "checkpoint"),
            req("train", "training SIGF file"),
            req("out", "output directory for tails.csv and centers.csv"),
            opt("m-tail", "1000", "farthest examples per class used in the fit"),
        ],
    },
    Subcommand {
        name: "eval-open",
        about: "Open-set evaluation (slo, slwf or clwf)",
        params: &[
            req("model", "checkpoint"),
            req("test", "test SIGF file"),
            req("mode", "slo, slwf or clwf"),
            req("out", "output directory"),
            maybe("tails", "tails.csv from fit-weibull (not needed for slo)"),
            maybe("centers", "centers.csv (default: next to the tails file)"),
        ],
    },
    Subcommand {
        name: "export-features",
        about: "Write the 2-D features of a model with the visualization layer",
        params: &[
            req("model", "checkpoint"),
            req("input", "SIGF file"),
            req("out", "output CSV file"),
        ],
    },
    Subcommand {
        name: "plot",
        about: "Render an SVG chart from a CSV",
        params: &[
            req("kind", "snr (per_snr.csv), bars (scenario,model,accuracy) or features (features.csv)"),
            req("input", "input CSV"),
            req("out", "output SVG"),
            opt("title", "", "chart title"),
        ],
    },
];

pub fn subcommand(name: &str) -> Option<&'static Subcommand> {
    SUBCOMMANDS.iter().find(|s| s.name == name)
}

fn all_params(sub: &Subcommand) -> impl Iterator<Item = &'static Param> + '_ {
    COMMON.iter().chain(sub.params.iter())
}

pub fn command() -> Command {
    let mut cmd = Command::new("dclstm")
        .about("Open-set modulation recognition with a dual-channel LSTM")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SUBCOMMANDS {
        let mut sc = Command::new(sub.name).about(sub.about);
        for p in all_params(sub) {
            let mut help = p.help.to_string();
            if let Some(d) = p.default.filter(|d| !d.is_empty() && !p.switch) {
                help.push_str(&format!(" [default: {d}]"));
            }
            if p.required {
                help.push_str(" [required]");
            }
            let arg = Arg::new(p.key).long(p.key).help(help);
            sc = sc.arg(if p.switch {
                arg.action(ArgAction::SetTrue)
            } else {
                arg.value_name("VALUE").allow_hyphen_values(true)
            });
        }
        cmd = cmd.subcommand(sc);
    }
    cmd
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected key=value", origin.display(), i + 1))
        })?;
        let k = k.trim().trim_start_matches("--").to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("{}:{}: duplicate key `{k}`", origin.display(), i + 1)));
        }
    }
    Ok(out)
}

/// Effective values of one invocation.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub subcommand: &'static str,
    values: Vec<(&'static str, Option<String>)>,
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("--{key}: expected true or false, got `{v}`"))),
    }
}

impl Resolved {
    pub fn from_matches(sub: &'static Subcommand, m: &ArgMatches) -> Result<Self, CliError> {
        let file = match m.get_one::<String>(CONFIG) {
            Some(path) => {
                let p = PathBuf::from(path);
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text, &p)?
            }
            None => BTreeMap::new(),
        };
        for k in file.keys() {
            if k == CONFIG || !all_params(sub).any(|p| p.key == k) {
                return Err(CliError::Usage(format!("unknown config key `{k}` for `{}`", sub.name)));
            }
        }
        let mut values = Vec::new();
        for p in all_params(sub) {
            let from_cli = m.value_source(p.key) == Some(ValueSource::CommandLine);
            let v = if from_cli {
                Some(if p.switch {
                    "true".to_string()
                } else {
                    m.get_one::<String>(p.key).cloned().unwrap_or_default()
                })
            } else if let Some(v) = file.get(p.key) {
                if p.switch {
                    parse_bool(p.key, v)?;
                }
                Some(v.clone())
            } else {
                p.default.map(str::to_string)
            };
            if p.required && v.is_none() {
                return Err(CliError::Usage(format!("`{}` requires --{}", sub.name, p.key)));
            }
            values.push((p.key, v));
        }
        Ok(Resolved {
            subcommand: sub.name,
            values,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values
            .iter()
            .find(|(k, _)| *k == key)
            .unwrap_or_else(|| panic!("parameter `{key}` not declared for {}", self.subcommand))
            .1
            .as_deref()
    }

    /// A required or defaulted value.
    pub fn str(&self, key: &str) -> &str {
        self.get(key).unwrap_or_else(|| panic!("parameter `{key}` has neither value nor default"))
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.str(key))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.str(key);
        v.parse()
            .map_err(|e| CliError::Usage(format!("--{key}: cannot parse `{v}`: {e}")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        parse_bool(key, self.str(key))
    }

    /// Config-file text reproducing this stage.
    pub fn manifest(&self) -> String {
        let mut s = format!("# dclstm {}\n", self.subcommand);
        for (k, v) in &self.values {
            if *k == CONFIG || *k == THREADS {
                continue;
            }
            if let Some(v) = v {
                s.push_str(&format!("{k}={v}\n"));
            }
        }
        s
    }
}
