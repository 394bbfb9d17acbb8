//! Flat `key=value` config files and the resolved-config echo.

use std::fs;

use clap::CommandFactory;
use serde::Serialize;
use serde_json::Value;

use crate::args::Cli;
use crate::error::CliError;

/// Splices the contents of `--config FILE` into `argv` directly after the
/// subcommand, so that later command-line flags override file values.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let sub_name = argv.get(1).cloned().unwrap_or_default();
    let cmd = Cli::command();
    let sub = cmd
        .find_subcommand(&sub_name)
        .ok_or_else(|| CliError::Usage("--config must follow a subcommand".into()))?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;

    let mut inserted = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{path}:{}: expected key=value", n + 1)))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key == "config" {
            return Err(CliError::Usage(format!("{path}:{}: config files cannot nest", n + 1)));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| CliError::Usage(format!("{path}:{}: unknown key `{key}` for {sub_name}", n + 1)))?;
        if arg.get_action().takes_values() {
            inserted.push(format!("--{key}"));
            inserted.push(value.to_string());
        } else {
            match value {
                "true" => inserted.push(format!("--{key}")),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "{path}:{}: `{key}` expects true or false, got `{other}`",
                        n + 1
                    )))
                }
            }
        }
    }
    let mut out = argv[..2].to_vec();
    out.extend(inserted);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter().skip(2);
    let mut found = None;
    while let Some(a) = it.next() {
        if a == "--config" {
            found = it.next().cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            found = Some(p.to_string());
        }
    }
    found
}

/// `key=value` lines for every resolved setting, in key order.
pub fn echo<T: Serialize>(command: &str, args: &T) -> String {
    let mut out = format!("command={command}\n");
    if let Ok(Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            out.push_str(&format!("{k}={}\n", render(&v)));
        }
    }
    out
}

fn render(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(render).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}
