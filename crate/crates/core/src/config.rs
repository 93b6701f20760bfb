//! Plain-text `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors that
//! name the key.

use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("configuration key `{key}`: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("configuration key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

/// `(key, value)` pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

/// `none` or a value.
pub fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError> {
    if value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

pub fn format_optional<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |v| v.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_skip_comments_and_report_syntax() {
        let p = parse_pairs("# c\n a = 1 \n\nb=x # tail\n").unwrap();
        assert_eq!(p, vec![("a".into(), "1".into()), ("b".into(), "x".into())]);
        assert_eq!(
            parse_pairs("a = 1\noops\n"),
            Err(ConfigError::Syntax {
                line: 2,
                text: "oops".into()
            })
        );
        assert_eq!(parse_optional::<f64>("k", "None").unwrap(), None);
        assert!(matches!(parse_value::<u32>("k", "-1"), Err(ConfigError::BadValue { .. })));
    }
}
