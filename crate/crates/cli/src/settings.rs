//! Config file parsing: `key = value` lines, optional `[section]` headers
//! that prefix the following keys with `section.`, `#` comments.

use std::path::Path;

use ppd_laplace::{Error, Result};

/// Parses config text into ordered `(key, value)` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", i + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        let key = if section.is_empty() {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    parse_config_text(&std::fs::read_to_string(path)?)
}

/// Splits a `--set key=value` argument.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let text = "# header\nseed = 3\n\n[grid]\ncount = 101 # odd\n[hetero]\nn_train=50\n";
        let kv = parse_config_text(text).unwrap();
        assert_eq!(
            kv,
            vec![
                ("seed".to_string(), "3".to_string()),
                ("grid.count".to_string(), "101".to_string()),
                ("hetero.n_train".to_string(), "50".to_string()),
            ]
        );
        assert!(parse_config_text("just words").is_err());
        assert!(parse_config_text("[open").is_err());
        assert_eq!(parse_override("a.b=1,2").unwrap(), ("a.b".into(), "1,2".into()));
    }
}
