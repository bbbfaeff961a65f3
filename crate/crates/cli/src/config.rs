//! `--config FILE` support.
//!
//! The file holds `key=value` lines whose keys are long flag names. Each
//! entry the chosen subcommand accepts becomes `--key=value` inserted just
//! after the subcommand name, so flags given on the command line come later
//! and win.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Command;

/// Parse `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {line:?}", i + 1);
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Remove `--config FILE` (or `--config=FILE`) from `args`.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<PathBuf>> {
    let mut found = None;
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy().into_owned();
        if s == "--" {
            break;
        }
        if s == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file argument");
            }
            found = Some(PathBuf::from(args.remove(i + 1)));
            args.remove(i);
        } else if let Some(path) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(path));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

/// Rewrite raw arguments so config entries precede command-line flags.
pub fn expand(mut args: Vec<OsString>, cmd: &Command) -> Result<Vec<OsString>> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let entries = parse(&text).with_context(|| format!("in {}", path.display()))?;

    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).is_some())
        .map(|p| p + 1)
    else {
        // no subcommand: let clap report it
        return Ok(args);
    };
    let sub = cmd
        .find_subcommand(args[pos].to_string_lossy().as_ref())
        .expect("found above");

    let mut injected = Vec::new();
    for (key, value) in entries {
        let known_anywhere = cmd.get_subcommands().any(|s| {
            s.get_arguments()
                .any(|a| a.get_long() == Some(key.as_str()))
        });
        if !known_anywhere {
            bail!("config {}: unknown key {key:?}", path.display());
        }
        if sub
            .get_arguments()
            .any(|a| a.get_long() == Some(key.as_str()))
        {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }
    args.splice(pos + 1..pos + 1, injected);
    Ok(args)
}
