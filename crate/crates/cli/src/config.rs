//! Flat `key = value` config files, expanded into flags ahead of the command line.

use std::fs;

use crate::CliError;

/// Flags that take no value; `key = true` enables them, `key = false` drops them.
const SWITCHES: &[&str] = &["no-label", "no-bias"];

/// Replaces `--config PATH` with the file's settings, placed right after the
/// subcommand so that explicit flags (which come later) take precedence.
pub fn expand(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| CliError::Usage("--config needs a path".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io(path.clone(), e))?;
    let from_file = parse(&text).map_err(|m| CliError::Usage(format!("{path}: {m}")))?;
    // position 0 is the program, 1 the subcommand
    let at = rest.len().min(2);
    let mut out: Vec<String> = rest[..at].to_vec();
    out.extend(from_file);
    out.extend_from_slice(&rest[at..]);
    Ok(out)
}

fn parse(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        if SWITCHES.contains(&k.as_str()) {
            match v {
                "true" => out.push(format!("--{k}")),
                "false" => {}
                _ => return Err(format!("line {}: {k} takes true or false", n + 1)),
            }
        } else {
            out.push(format!("--{k}"));
            out.push(v.to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_pairs_and_switches() {
        let got = parse("# comment\nring_bits = 32\n\nno-label = true\nno-bias=false\npeer=a:1\n").unwrap();
        assert_eq!(got, args(&["--ring-bits", "32", "--no-label", "--peer", "a:1"]));
        assert!(parse("oops").is_err());
    }

    #[test]
    fn file_settings_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "iterations = 5\n").unwrap();
        let got = expand(args(&["securelr", "train", "--config", path.to_str().unwrap(), "--iterations", "7"])).unwrap();
        assert_eq!(got, args(&["securelr", "train", "--iterations", "5", "--iterations", "7"]));
    }
}
