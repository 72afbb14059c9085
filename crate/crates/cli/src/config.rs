//! `key = value` config files, turned into flags placed before the
//! command-line ones so that explicit flags win.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses a config file into `--key value` arguments.
///
/// Blank lines and `#` comments are skipped. Keys may use `_` or `-`;
/// `true` makes a bare switch and `false` drops it.
pub fn config_args(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("in config {}", path.display()))
}

fn parse(text: &str) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value", i + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("line {}: invalid key", i + 1);
        }
        let value = value.trim().trim_matches('"');
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            v => {
                args.push(format!("--{key}"));
                args.push(v.to_string());
            }
        }
    }
    Ok(args)
}

/// Pulls `--config PATH` out of `argv`, returning the rest and the path.
pub fn take_config_flag(argv: Vec<String>) -> (Vec<String>, Option<String>) {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    (rest, path)
}

/// Inserts config-derived flags right after the subcommand name, so that
/// later (command-line) occurrences override them.
pub fn merge(argv: Vec<String>, config: Vec<String>) -> Vec<String> {
    if config.is_empty() {
        return argv;
    }
    // The subcommand is the first argument not starting with `-`, skipping
    // the values of global options.
    let mut at = argv.len();
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if a == "--out" || a == "-o" || a == "--seed" {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            at = i + 1;
            break;
        }
        i += 1;
    }
    let mut out = argv[..at.min(argv.len())].to_vec();
    out.extend(config);
    out.extend(argv.into_iter().skip(at));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parses_pairs_switches_and_comments() {
        let args = parse("# detection\nbudget = 10\nentropy_threshold=0.5\nlinger = true\nquiet = false\n\n").unwrap();
        assert_eq!(args, s(&["--budget", "10", "--entropy-threshold", "0.5", "--linger"]));
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(parse("budget 10").is_err());
    }

    #[test]
    fn config_flag_is_removed() {
        let (rest, path) = take_config_flag(s(&["metadrift", "detect", "--config", "a.cfg", "--budget", "3"]));
        assert_eq!(rest, s(&["metadrift", "detect", "--budget", "3"]));
        assert_eq!(path.as_deref(), Some("a.cfg"));
        let (_, path) = take_config_flag(s(&["metadrift", "--config=b.cfg", "bench"]));
        assert_eq!(path.as_deref(), Some("b.cfg"));
    }

    #[test]
    fn config_goes_between_subcommand_and_flags() {
        let merged = merge(s(&["metadrift", "--out", "x", "detect", "--budget", "3"]), s(&["--budget", "10"]));
        assert_eq!(merged, s(&["metadrift", "--out", "x", "detect", "--budget", "10", "--budget", "3"]));
    }
}
