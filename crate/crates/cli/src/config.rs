//! `key = value` configuration merged into the argument list.

use std::fs;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("{path}:{line}: boolean key {key} takes true or false, got {value:?}")]
    Bool { path: String, line: usize, key: String, value: String },
    #[error("--config needs a path")]
    MissingPath,
}

const BOOLEAN_KEYS: &[&str] = &["factored"];
/// Keys that exclude each other; giving one on the command line drops all of
/// them from the config.
const EXCLUSIVE: &[&[&str]] = &[&["radius", "radius-exp"]];

pub fn parse(text: &str, path: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { path: path.into(), line: i + 1 })?;
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax { path: path.into(), line: i + 1 });
        }
        let value = v.trim().trim_matches('"').to_string();
        if BOOLEAN_KEYS.contains(&key.as_str()) && value != "true" && value != "false" {
            return Err(ConfigError::Bool { path: path.into(), line: i + 1, key, value });
        }
        out.push((key, value));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Result<Option<String>, ConfigError> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned().map(Some).ok_or(ConfigError::MissingPath);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
    }
    Ok(None)
}

fn given_keys(args: &[String]) -> Vec<String> {
    args.iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect()
}

/// Inserts the config entries that the command line does not set right
/// after the subcommand name.
pub fn merge(args: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path)).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
    let entries = parse(&text, &path)?;
    let given = given_keys(&args);
    let blocked = |key: &str| {
        given.iter().any(|g| g == key)
            || EXCLUSIVE.iter().any(|group| group.contains(&key) && group.iter().any(|k| given.iter().any(|g| g == k)))
    };
    let mut extra = Vec::new();
    for (key, value) in entries {
        if key == "config" || blocked(&key) {
            continue;
        }
        if BOOLEAN_KEYS.contains(&key.as_str()) {
            if value == "true" {
                extra.push(format!("--{key}"));
            }
        } else {
            extra.push(format!("--{key}={value}"));
        }
    }
    let Some(sub) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 1) else {
        return Ok(args);
    };
    let mut merged = args[..=sub].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[sub + 1..]);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_flat_pairs() {
        let e = parse("# comment\nsamples = 500\n\nseed=3\nfactored = true\n", "c").unwrap();
        assert_eq!(e, vec![("samples".into(), "500".into()), ("seed".into(), "3".into()), ("factored".into(), "true".into())]);
        assert!(parse("samples 500", "c").is_err());
        assert!(parse("factored = yes", "c").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "samples = 500\nseed = 3\nradius-exp = 2\n").unwrap();
        let args = argv(&format!("lerwlab es --seed 9 --radius 4 --config {}", path.display()));
        let merged = merge(args).unwrap();
        assert_eq!(merged[..3], argv("lerwlab es --samples=500")[..]);
        assert!(!merged.iter().any(|a| a.starts_with("--seed=") || a.starts_with("--radius-exp")));
        assert!(merged.contains(&"9".to_string()));
    }

    #[test]
    fn no_config_is_identity() {
        let args = argv("lerwlab es --radius 2");
        assert_eq!(merge(args.clone()).unwrap(), args);
        assert!(matches!(merge(argv("lerwlab es --config")), Err(ConfigError::MissingPath)));
    }
}
