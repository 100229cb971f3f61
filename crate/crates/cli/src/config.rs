//! Flat `key = value` config files. Each line becomes `--key value` inserted
//! right after the subcommand, so flags given on the command line win.

use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

/// Flags that take no value; `true` enables them and `false` drops the line.
const SWITCHES: [&str; 2] = ["no-refine", "check-refined"];

pub fn parse_config(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value, got {line:?}", n + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(CliError::Config(format!("config line {}: invalid key {key:?}", n + 1)));
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" => out.push(format!("--{key}").into()),
                "false" => {}
                v => {
                    return Err(CliError::Config(format!(
                        "config line {}: {key} takes true or false, got {v:?}",
                        n + 1
                    )))
                }
            }
        } else {
            out.push(format!("--{key}").into());
            out.push(value.into());
        }
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Result<Option<OsString>, CliError> {
    let mut found = None;
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let p = it
                .next()
                .ok_or_else(|| CliError::Config("--config needs a path".into()))?;
            found = Some(p.clone());
        } else if let Some(p) = s.strip_prefix("--config=") {
            found = Some(p.into());
        }
    }
    Ok(found)
}

/// `args` with the contents of any `--config` file spliced in after the subcommand.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", Path::new(&path).display())))?;
    let extra = parse_config(&text)?;
    let at = args.len().min(2);
    let mut out = args;
    out.splice(at..at, extra);
    Ok(out)
}
