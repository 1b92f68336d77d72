//! `key = value` configuration files mirroring the long flags.

use std::fs;

use crate::run::CliError;

/// Parses a config file body into `--key value` tokens. `true` becomes a
/// bare switch and `false` drops the entry.
pub fn config_tokens(text: &str) -> Result<Vec<(String, Vec<String>)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", n + 1)));
        }
        let flag = format!("--{key}");
        match value {
            "true" => out.push((key, vec![flag])),
            "false" => {}
            v => out.push((key, vec![flag, v.to_string()])),
        }
    }
    Ok(out)
}

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(k, _)| k))
}

/// Removes `--config FILE` from `argv` and splices the file's entries in
/// after the subcommand, skipping keys given explicitly on the command line.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a file".into()))?);
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let explicit: Vec<String> = rest.iter().filter_map(|a| flag_name(a)).map(str::to_string).collect();
    let injected: Vec<String> = config_tokens(&text)?
        .into_iter()
        .filter(|(key, _)| !explicit.contains(key))
        .flat_map(|(_, tokens)| tokens)
        .collect();
    // the subcommand is the first non-flag argument after the program name
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map_or(rest.len(), |i| i + 2);
    rest.splice(at..at, injected);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_lines() {
        let t = config_tokens("# loop\ntau1 = 2\n\nslope_k=0.7\njson = true\ndeterministic = false\n").unwrap();
        let flat: Vec<String> = t.into_iter().flat_map(|(_, x)| x).collect();
        assert_eq!(flat, v(&["--tau1", "2", "--slope-k", "0.7", "--json"]));
        assert!(config_tokens("tau1 2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "tau2 = 3\nk0 = 5\n").unwrap();
        let argv = merge_config(v(&["prog", "lockin", "--config", path.to_str().unwrap(), "--k0=7"])).unwrap();
        assert_eq!(argv, v(&["prog", "lockin", "--tau2", "3", "--k0=7"]));
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = merge_config(v(&["prog", "lockin", "--config", "/nonexistent/x.conf"])).unwrap_err();
        assert!(matches!(e, CliError::Io(_)));
    }
}
