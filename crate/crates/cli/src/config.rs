//! Optional TOML config file. Values become command-line flags unless the
//! same flag was given explicitly.
//!
//! Top-level keys apply to every subcommand that accepts them; a
//! `[subcommand]` table applies only to that subcommand.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::CommandFactory;

use crate::{Cli, UsageError};

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn flag_given(argv: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let with_value = format!("{flag}=");
    argv.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&with_value)
    })
}

fn render(key: &str, value: &toml::Value) -> Result<Option<String>> {
    Ok(Some(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(_) => return Ok(None),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| render(key, v).map(|s| s.unwrap_or_default()))
            .collect::<Result<Vec<_>>>()?
            .join(","),
        other => {
            return Err(UsageError(format!("config key `{key}`: unsupported value {other}")).into());
        }
    }))
}

/// Expand `argv` with flags taken from the `--config` file, if any.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| prockb_core::Error::io(&path, e))
        .context("reading config file")?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config file `{}`", path.display()))?;

    let cmd = Cli::command();
    let sub_names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(sub) = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .find(|a| sub_names.contains(a))
    else {
        return Ok(argv);
    };
    let sub_cmd = cmd.find_subcommand(&sub).expect("name came from the command");
    let longs = |c: &clap::Command| -> Vec<(String, bool)> {
        c.get_arguments()
            .filter_map(|a| {
                let takes_value = a.get_action().takes_values();
                a.get_long().map(|l| (l.to_string(), takes_value))
            })
            .collect()
    };
    let mut known = longs(&cmd);
    known.extend(longs(sub_cmd));
    known.retain(|(l, _)| l != "config");

    let mut extra: Vec<OsString> = Vec::new();
    let mut apply = |key: &str, value: &toml::Value, strict: bool| -> Result<()> {
        let long = key.replace('_', "-");
        let Some((_, takes_value)) = known.iter().find(|(l, _)| *l == long) else {
            if strict {
                return Err(UsageError(format!("config key `{key}` is not a flag of `{sub}`")).into());
            }
            return Ok(());
        };
        if flag_given(&argv, &long) {
            return Ok(());
        }
        match (takes_value, value) {
            (false, toml::Value::Boolean(true)) => extra.push(format!("--{long}").into()),
            (false, toml::Value::Boolean(false)) => {}
            (false, _) => return Err(UsageError(format!("config key `{key}` must be a boolean")).into()),
            (true, v) => {
                let rendered = render(key, v)?
                    .ok_or_else(|| UsageError(format!("config key `{key}` needs a value, not a boolean")))?;
                extra.push(format!("--{long}").into());
                extra.push(rendered.into());
            }
        }
        Ok(())
    };

    for (key, value) in &table {
        match value {
            toml::Value::Table(section) => {
                if !sub_names.contains(key) {
                    return Err(UsageError(format!("config section `[{key}]` is not a subcommand")).into());
                }
                if *key == sub {
                    for (k, v) in section {
                        apply(k, v, true)?;
                    }
                }
            }
            v => apply(key, v, false)?,
        }
    }
    let mut out = argv;
    out.extend(extra);
    Ok(out)
}
