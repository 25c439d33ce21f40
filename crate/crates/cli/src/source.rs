//! Where a chain comes from: a JSON file or a named preset.

use std::path::PathBuf;

use clap::Args;
use metahit::models::{build_abc_model, build_h_model, AbcModelParams, HModelParams};
use metahit::{MarkovChain, ReferencePair};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Bumped whenever a preset's transition probabilities change.
pub const PRESET_VERSION: u32 = 1;

pub const PRESETS: [&str; 4] = ["h", "abc", "abc-ex1", "abc-ex2"];

/// Preset name plus its parameters; unused parameters are ignored.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetArgs {
    /// Preset model: h, abc, abc-ex1 or abc-ex2
    #[arg(long)]
    pub preset: Option<String>,
    /// h-model barrier parameter p
    #[arg(long)]
    pub p: Option<f64>,
    /// h-model height h
    #[arg(long)]
    pub h: Option<f64>,
    /// abc-model length L
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// abc-model exponent a
    #[arg(long)]
    pub a: Option<f64>,
    /// abc-model exponent b
    #[arg(long)]
    pub b: Option<f64>,
    /// abc-model exponent c
    #[arg(long)]
    pub c: Option<f64>,
}

impl PresetArgs {
    /// Fills every unset field from `other`.
    pub fn or(self, other: &PresetArgs) -> PresetArgs {
        PresetArgs {
            preset: self.preset.or_else(|| other.preset.clone()),
            p: self.p.or(other.p),
            h: self.h.or(other.h),
            l: self.l.or(other.l),
            a: self.a.or(other.a),
            b: self.b.or(other.b),
            c: self.c.or(other.c),
        }
    }

    pub fn h_params(&self) -> HModelParams {
        HModelParams { p: self.p.unwrap_or(0.01), h: self.h.unwrap_or(0.25) }
    }

    /// abc parameters with `L` supplied separately, for sweeps.
    pub fn abc_params(&self, name: &str, l: usize) -> Result<AbcModelParams, CliError> {
        match name {
            "abc-ex1" => Ok(AbcModelParams::example_one(l)),
            "abc-ex2" => Ok(AbcModelParams::example_two(l)),
            "abc" => {
                let need = |v: Option<f64>, n: &str| v.ok_or_else(|| CliError::Config(format!("preset abc needs --{n}")));
                Ok(AbcModelParams { l, a: need(self.a, "a")?, b: need(self.b, "b")?, c: need(self.c, "c")? })
            }
            other => Err(unknown_preset(other)),
        }
    }

    /// Builds the preset chain and its reference pair.
    pub fn build(&self) -> Result<(MarkovChain, ReferencePair), CliError> {
        let name = self.preset.as_deref().ok_or_else(|| CliError::Config("no preset given".into()))?;
        match name {
            "h" => Ok((build_h_model(self.h_params())?, HModelParams::pair())),
            "abc" | "abc-ex1" | "abc-ex2" => {
                let l = self.l.ok_or_else(|| CliError::Config(format!("preset {name} needs --L")))?;
                let params = self.abc_params(name, l)?;
                Ok((build_abc_model(params)?, params.pair()))
            }
            other => Err(unknown_preset(other)),
        }
    }

    /// Invariant weights in closed form, when the preset has them.
    pub fn weights(&self) -> Option<Vec<f64>> {
        match self.preset.as_deref()? {
            "h" => Some(metahit::models::h_model_weights(self.h_params()).to_vec()),
            name @ ("abc" | "abc-ex1" | "abc-ex2") => {
                let p = self.abc_params(name, self.l?).ok()?;
                Some((0..=p.l).map(|x| metahit::network::abc::weight(&p, x)).collect())
            }
            _ => None,
        }
    }
}

fn unknown_preset(name: &str) -> CliError {
    CliError::Config(format!("unknown preset {name:?}, expected one of {}", PRESETS.join(", ")))
}

/// A chain file or a preset, and an optional reference pair.
#[derive(Debug, Clone, Default, Args)]
pub struct ChainArgs {
    /// Chain JSON file
    #[arg(long, conflicts_with = "preset")]
    pub chain: Option<PathBuf>,
    #[command(flatten)]
    pub preset: PresetArgs,
    /// Reference state x0 (presets supply a default)
    #[arg(long)]
    pub x0: Option<usize>,
    /// Target set G, comma separated (presets supply a default)
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
}

/// A resolved chain with the pair to analyze.
pub struct Loaded {
    pub chain: MarkovChain,
    pub pair: ReferencePair,
    pub description: String,
    /// Closed-form invariant weights for presets.
    pub weights: Option<Vec<f64>>,
}

pub fn load(chain: Option<&PathBuf>, preset: &PresetArgs, x0: Option<usize>, target: Option<&[usize]>) -> Result<Loaded, CliError> {
    let (chain, default_pair, description, weights) = match (chain, &preset.preset) {
        (Some(path), None) => {
            let chain = MarkovChain::load(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            (chain, None, path.display().to_string(), None)
        }
        (None, Some(name)) => {
            let (chain, pair) = preset.build()?;
            (chain, Some(pair), format!("preset {name} v{PRESET_VERSION}"), preset.weights())
        }
        (Some(_), Some(_)) => return Err(CliError::Config("give either --chain or --preset, not both".into())),
        (None, None) => return Err(CliError::Config("no chain given: use --chain FILE or --preset NAME".into())),
    };
    chain.ensure_valid().map_err(|e| CliError::Config(format!("chain failed validation: {e}")))?;
    let pair = match (x0, target, default_pair) {
        (Some(x0), Some(t), _) => ReferencePair::new(x0, t.iter().copied())?,
        (x0, t, Some(d)) => ReferencePair::new(x0.unwrap_or(d.x0), t.map(|t| t.to_vec()).unwrap_or(d.target))?,
        _ => return Err(CliError::Config("a chain file needs --x0 and --target".into())),
    };
    pair.check_against(&chain)?;
    Ok(Loaded { chain, pair, description, weights })
}
