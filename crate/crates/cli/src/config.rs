//! Flat `key = value` run configuration.
//!
//! A config file is spliced into the argument list right after the
//! subcommand name, so anything given on the command line wins. Manifests
//! use the same format and can be fed back with `--config`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, ArgMatches, Command};

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", n + 1);
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Result<Option<(usize, usize, String)>> {
    for (k, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some((k, 1, p.to_string())));
        }
        if a == "--config" {
            let p = args.get(k + 1).context("--config needs a file")?;
            return Ok(Some((k, 2, p.clone())));
        }
    }
    Ok(None)
}

/// Returns `args` with the config file's entries spliced in as flags.
pub fn expand_config(cmd: &Command, args: Vec<String>) -> Result<Vec<String>> {
    let Some((at, len, path)) = config_path(&args)? else {
        return Ok(args);
    };
    let mut rest: Vec<String> = args[..at].to_vec();
    rest.extend_from_slice(&args[at + len..]);
    let Some(sub_pos) = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(rest);
    };
    let args = rest;
    let sub = cmd
        .find_subcommand(&args[sub_pos])
        .with_context(|| format!("unknown subcommand '{}'", args[sub_pos]))?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read config file {path}"))?;
    let mut injected = Vec::new();
    for (key, value) in parse_config(&text)? {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .with_context(|| format!("config key '{key}' is not an option of '{}'", sub.get_name()))?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" => injected.push(format!("--{key}")),
                "false" => {}
                other => bail!("config key '{key}' expects true or false, got '{other}'"),
            }
        } else {
            injected.push(format!("--{key}={value}"));
        }
    }
    let mut out = args;
    out.splice(sub_pos + 1..sub_pos + 1, injected);
    Ok(out)
}

const SKIP: [&str; 4] = ["config", "manifest", "help", "version"];

/// Every resolved option of the subcommand, as a config file.
pub fn manifest_text(sub: &Command, matches: &ArgMatches) -> String {
    let mut text = format!("# dtvct {} {}\n", sub.get_name(), env!("CARGO_PKG_VERSION"));
    for arg in sub.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if SKIP.contains(&id) {
            continue;
        }
        let Ok(Some(raw)) = matches.try_get_raw(id) else { continue };
        let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        let _ = writeln!(text, "{long} = {}", values.join(","));
    }
    text
}

pub fn write_manifest(path: &Path, sub: &Command, matches: &ArgMatches) -> Result<()> {
    std::fs::write(path, manifest_text(sub, matches)).with_context(|| format!("cannot write manifest {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let got = parse_config("# run\nsize = 64\n\n angle=20 \n").unwrap();
        assert_eq!(got, vec![("size".into(), "64".into()), ("angle".into(), "20".into())]);
        assert!(parse_config("size 64").is_err());
    }
}
