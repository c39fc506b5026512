//! TOML config files that mirror the command-line flags.
//!
//! Each subcommand reads its own table; keys are long flag names:
//!
//! ```toml
//! [train-ranker]
//! epochs = 8
//! ablate-delta-ndcg = true
//!
//! [serve]
//! checkpoint = ["full.ckpt", "blind.ckpt"]
//! ```
//!
//! Precedence, highest first: flags on the command line, environment
//! variables, the config file, built-in defaults.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::Cli;

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Index of the subcommand token, skipping `--config <path>`.
fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn scalar(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        other => bail!("config key '{key}': unsupported value {other}"),
    })
}

/// Returns `args` with the config file's settings for the chosen subcommand
/// spliced in ahead of the user's own flags.
pub fn merge_config_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(sub_at) = subcommand_index(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let doc: toml::Table = text
        .parse()
        .with_context(|| format!("malformed config {}", path.display()))?;
    let sub = args[sub_at].to_string_lossy().to_string();
    let Some(section) = doc.get(&sub) else {
        return Ok(args);
    };
    let section = section
        .as_table()
        .with_context(|| format!("config section [{sub}] must be a table"))?;

    let command = Cli::command();
    let sub_cmd = command.find_subcommand(&sub);
    let user_flags: Vec<String> = args[sub_at + 1..]
        .iter()
        .filter_map(|a| {
            let s = a.to_string_lossy();
            s.strip_prefix("--")
                .map(|f| f.split('=').next().unwrap_or_default().to_string())
        })
        .collect();

    let mut injected: Vec<OsString> = Vec::new();
    for (raw_key, value) in section {
        let key = raw_key.replace('_', "-");
        if user_flags.contains(&key) {
            continue;
        }
        let arg = sub_cmd.and_then(|c| c.get_arguments().find(|a| a.get_long() == Some(key.as_str())));
        let Some(arg) = arg else {
            bail!("config section [{sub}]: unknown setting '{raw_key}'");
        };
        if let Some(env) = arg.get_env() {
            if std::env::var_os(env).is_some() {
                continue;
            }
        }
        let flag = OsString::from(format!("--{key}"));
        match value {
            toml::Value::Boolean(true) => injected.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    injected.push(flag.clone());
                    injected.push(scalar(raw_key, item)?.into());
                }
            }
            other => {
                injected.push(flag);
                injected.push(scalar(raw_key, other)?.into());
            }
        }
    }
    let mut out = args[..=sub_at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub_at + 1..]);
    Ok(out)
}
