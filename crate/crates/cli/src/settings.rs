//! Flag tables, config files and the merged view of both.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::CliError;

/// One option accepted by a subcommand (and by its config file).
#[derive(Debug, Clone, Copy)]
pub struct Flag {
    pub name: &'static str,
    pub value: &'static str,
    pub help: &'static str,
    pub default: Option<&'static str>,
    /// Takes no value; present means `true`.
    pub switch: bool,
}

pub const fn opt(name: &'static str, value: &'static str, help: &'static str) -> Flag {
    Flag {
        name,
        value,
        help,
        default: None,
        switch: false,
    }
}

pub const fn dflt(
    name: &'static str,
    value: &'static str,
    default: &'static str,
    help: &'static str,
) -> Flag {
    Flag {
        name,
        value,
        help,
        default: Some(default),
        switch: false,
    }
}

pub const fn switch(name: &'static str, help: &'static str) -> Flag {
    Flag {
        name,
        value: "",
        help,
        default: None,
        switch: true,
    }
}

/// Joins two flag tables at compile time (`C` must equal `A + B`).
pub const fn concat<const A: usize, const B: usize, const C: usize>(a: [Flag; A], b: [Flag; B]) -> [Flag; C] {
    assert!(A + B == C);
    let mut out = [CONFIG; C];
    let mut i = 0;
    while i < A {
        out[i] = a[i];
        i += 1;
    }
    while i < C {
        out[i] = b[i - A];
        i += 1;
    }
    out
}

const CONFIG: Flag = opt(
    "config",
    "FILE",
    "Read key=value settings from FILE ('#' starts a comment); flags override it",
);

pub fn command(name: &'static str, about: &'static str, flags: &[Flag]) -> Command {
    let mut cmd = Command::new(name).about(about);
    for f in std::iter::once(&CONFIG).chain(flags) {
        let mut arg = Arg::new(f.name).long(f.name).help(f.help);
        if f.switch {
            arg = arg.action(ArgAction::SetTrue);
        } else {
            arg = arg.value_name(f.value).action(ArgAction::Set);
            if let Some(d) = f.default {
                // shown in --help only; defaults are applied after merging
                arg = arg.help(format!("{} [default: {d}]", f.help));
            }
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

/// Flags merged over the config file over built-in defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
    usage: String,
}

fn parse_config(text: &str, flags: &[Flag], path: &str) -> Result<BTreeMap<&'static str, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::config(format!("{path}:{}: expected key=value", i + 1)));
        };
        let key = k.trim().trim_start_matches("--");
        let Some(flag) = flags.iter().find(|f| f.name == key) else {
            return Err(CliError::config(format!(
                "{path}:{}: unknown setting {key:?}",
                i + 1
            )));
        };
        out.insert(flag.name, v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn from_matches(m: &ArgMatches, flags: &[Flag], usage: String) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for f in flags {
            if let Some(d) = f.default {
                values.insert(f.name, d.to_string());
            }
        }
        if let Some(path) = m.get_one::<String>("config") {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{path}: {e}")))?;
            values.extend(parse_config(&text, flags, path)?);
        }
        for f in flags {
            if m.value_source(f.name) != Some(ValueSource::CommandLine) {
                continue;
            }
            let v = if f.switch {
                "true".to_string()
            } else {
                m.get_one::<String>(f.name).cloned().unwrap_or_default()
            };
            values.insert(f.name, v);
        }
        Ok(Settings { values, usage })
    }

    /// The effective settings in config-file syntax.
    pub fn to_config(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    pub fn has(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn get<T>(&self, name: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(name) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::config(format!("--{name} {v:?}: {e}"))),
        }
    }

    pub fn require<T>(&self, name: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(name)?
            .ok_or_else(|| CliError::config(format!("missing required --{name}")).with_usage(&self.usage))
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.raw(name).map(PathBuf::from)
    }

    pub fn require_path(&self, name: &str) -> Result<PathBuf, CliError> {
        self.require::<String>(name).map(PathBuf::from)
    }

    pub fn flag(&self, name: &str) -> Result<bool, CliError> {
        Ok(self.get::<bool>(name)?.unwrap_or(false))
    }

    pub fn usage(&self) -> &str {
        &self.usage
    }
}
