use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Args, Command, FromArgMatches};
use sparsedict::experiment::ExperimentConfig;

/// Short spellings accepted in addition to the canonical key.
const ALIASES: &[(&str, &str)] = &[("noise_sigma", "sigma"), ("c_max", "c"), ("t", "T")];

const HELP: &[(&str, &str)] = &[
    ("n", "Signal dimension"),
    ("m", "Number of dictionary columns"),
    ("k", "Support size"),
    ("c_max", "Bound on coefficient magnitudes"),
    ("value_dist", "rademacher | uniform_signed"),
    ("support_dist", "uniform_k_subset | correlated_blocks"),
    ("block_size", "Block width for correlated supports"),
    ("inflation", "Within-block co-occurrence inflation"),
    ("noise_sigma", "Per-entry Gaussian noise level"),
    ("seed", "Master seed"),
    ("p", "Number of samples"),
    (
        "target_mu",
        "Redraw the dictionary until its incoherence is at most this",
    ),
    (
        "orthonormalize",
        "Draw an orthonormal dictionary (needs m <= n)",
    ),
    ("tau", "Edge threshold on |<y_i, y_j>|"),
    ("cluster", "Clustering strategy: triplet | tuple"),
    ("ell", "Tuple size for the tuple strategy"),
    (
        "t",
        "Common-neighbour threshold; derived from p, k, m when unset",
    ),
    ("cluster_rounds", "Random rounds; derived when unset"),
    ("t_divisor", "Divisor constant in the derived threshold"),
    ("rounds_factor", "Multiplier in the derived round count"),
    (
        "trimming",
        "Trim candidate sets; on by default for correlated supports",
    ),
    (
        "recover",
        "Comma-separated recovery strategies: average, svd",
    ),
    ("label_cap", "Intermediate members used for sign labels"),
    ("power_tol", "Power iteration tolerance"),
    ("power_max_iter", "Power iteration cap"),
    ("refine_from", "Recovery whose estimate starts refinement"),
    ("refine_rounds", "Refinement rounds"),
    ("refine_batch", "Fresh samples per refinement round"),
    (
        "refine_tau",
        "Support inference threshold during refinement",
    ),
    (
        "target_error",
        "Stop refinement once the max column error is below this",
    ),
    (
        "refine_divergence_floor",
        "Round changes below this are ignored by the divergence check",
    ),
    (
        "stage",
        "Last stage: gen | graph | cluster | recover | refine | eval",
    ),
    ("out_dir", "Output directory"),
];

fn config_keys() -> Vec<&'static str> {
    ExperimentConfig::default().to_map().into_keys().collect()
}

/// One `--key value` flag per config key, plus `--config` and `--preset`.
#[derive(Debug, Clone, Default)]
pub struct ConfigArgs {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub overrides: Vec<(&'static str, String)>,
}

impl ConfigArgs {
    /// Defaults, then the config file (or `<out_dir>/config.txt` when no file
    /// is given and one exists), then flags, then the preset.
    pub fn resolve(&self) -> sparsedict::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_kv_text(&std::fs::read_to_string(path)?)?,
            None => match self
                .flag("out_dir")
                .map(|d| Path::new(d).join("config.txt"))
            {
                Some(p) if p.is_file() => {
                    ExperimentConfig::from_kv_text(&std::fs::read_to_string(p)?)?
                }
                _ => ExperimentConfig::default(),
            },
        };
        for (k, v) in &self.overrides {
            cfg.set(k, v)?;
        }
        if let Some(p) = &self.preset {
            cfg.set("preset", p)?;
        }
        Ok(cfg)
    }

    fn flag(&self, key: &str) -> Option<&str> {
        self.overrides
            .iter()
            .rev()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl FromArgMatches for ConfigArgs {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = ConfigArgs {
            config: m.get_one::<PathBuf>("config").cloned(),
            preset: m.get_one::<String>("preset").cloned(),
            overrides: Vec::new(),
        };
        for key in config_keys() {
            if let Some(v) = m.get_one::<String>(key) {
                out.overrides.push((key, v.clone()));
            }
        }
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}

impl Args for ConfigArgs {
    fn augment_args(cmd: Command) -> Command {
        let mut cmd = cmd
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("Flat key=value config file"),
            )
            .arg(
                Arg::new("preset")
                    .long("preset")
                    .value_name("NAME")
                    .help("Sample-count preset (theorem1), applied after the other settings"),
            );
        for key in config_keys() {
            let mut arg = Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .help_heading("Config keys");
            if let Some((_, h)) = HELP.iter().find(|(k, _)| *k == key) {
                arg = arg.help(*h);
            }
            if key.contains('_') {
                arg = arg.alias(key.replace('_', "-"));
            }
            for (k, a) in ALIASES {
                if *k == key {
                    arg = arg.alias(*a);
                }
            }
            cmd = cmd.arg(arg);
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}
