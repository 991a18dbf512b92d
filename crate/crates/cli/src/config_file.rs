//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names of the selected subcommand (`batch-size` or
//! `batch_size`). Blank lines and `#` comments are ignored. Entries are turned
//! into flag tokens placed ahead of the real command line, so explicit flags
//! take precedence.

use std::ffi::OsString;
use std::path::Path;

use clap::Command;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str, source: &Path) -> Result<Vec<Entry>, CliError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = match raw.find('#') {
            Some(at) => &raw[..at],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_error(source, line, "expected `key = value`"));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(config_error(source, line, "empty key"));
        }
        if let Some(previous) = entries.iter().find(|e| e.key == key) {
            return Err(config_error(
                source,
                line,
                &format!("duplicate key `{key}` (first set on line {})", previous.line),
            ));
        }
        entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(entries)
}

/// Converts entries into flag tokens understood by `command`.
pub fn to_tokens(entries: &[Entry], command: &Command, source: &Path) -> Result<Vec<OsString>, CliError> {
    let mut tokens = Vec::new();
    for entry in entries {
        if entry.key == "config" {
            return Err(config_error(
                source,
                entry.line,
                "config files cannot include other files",
            ));
        }
        let Some(arg) = command
            .get_arguments()
            .find(|a| a.get_long() == Some(entry.key.as_str()))
        else {
            return Err(config_error(
                source,
                entry.line,
                &format!("unknown key `{}` for `{}`", entry.key, command.get_name()),
            ));
        };
        let flag = format!("--{}", entry.key);
        if arg.get_action().takes_values() {
            tokens.push(OsString::from(flag));
            tokens.push(OsString::from(&entry.value));
        } else {
            match entry.value.as_str() {
                "true" => tokens.push(OsString::from(flag)),
                "false" => {}
                other => {
                    return Err(config_error(
                        source,
                        entry.line,
                        &format!("`{}` expects true or false, got `{other}`", entry.key),
                    ))
                }
            }
        }
    }
    Ok(tokens)
}

fn config_error(source: &Path, line: usize, msg: &str) -> CliError {
    CliError::Usage(format!("{}: line {line}: {msg}", source.display()))
}
