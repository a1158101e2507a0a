//! Flat `key = value` configuration files.
//!
//! Each entry becomes a `--key value` flag inserted right after the
//! subcommand name, so flags given on the command line (which come later)
//! take precedence. `key = true` becomes a bare `--key`; `key = false` is
//! dropped. Blank lines and lines starting with `#` are ignored.

use std::ffi::OsString;
use std::path::Path;

pub const SUBCOMMANDS: [&str; 7] = [
    "generate",
    "discover",
    "tune-beta",
    "validate",
    "baseline",
    "evaluate",
    "stability",
];

/// Parses a config file body into flag tokens.
pub fn parse(text: &str, origin: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{origin}:{}: expected `key = value`, got `{line}`", i + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("{origin}:{}: empty key", i + 1));
        }
        if key == "config" {
            return Err(format!("{origin}:{}: config files cannot include other config files", i + 1));
        }
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            return Some(v.into());
        }
    }
    None
}

/// Returns `args` with the entries of the `--config` file, if any, spliced in
/// after the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let flags = parse(&text, &path.display().to_string())?;
    let Some(at) = args.iter().position(|a| SUBCOMMANDS.iter().any(|s| a == *s)) else {
        return Ok(args);
    };
    let mut out = args[..=at].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_booleans_and_comments() {
        let text = "# comment\nbeta = 0.25\nsample_split = true\nverbose = false\n\nrule = \"drug_possession == 1\"\n";
        assert_eq!(
            parse(text, "f").unwrap(),
            vec!["--beta", "0.25", "--sample-split", "--rule", "drug_possession == 1"]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("beta 0.2", "f").is_err());
        assert!(parse("= 3", "f").is_err());
        assert!(parse("config = other.cfg", "f").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "seed = 3\n").unwrap();
        let args: Vec<OsString> = ["regionvar", "--jobs", "2", "discover", "--config", cfg.to_str().unwrap(), "--seed", "5"]
            .iter()
            .map(OsString::from)
            .collect();
        let out = expand(args).unwrap();
        let out: Vec<&str> = out.iter().map(|s| s.to_str().unwrap()).collect();
        assert_eq!(&out[..6], &["regionvar", "--jobs", "2", "discover", "--seed", "3"]);
        assert_eq!(&out[8..], &["--seed", "5"]);
    }
}
