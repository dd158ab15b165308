//! Minimal placeholder templates.
//!
//! `{{name}}` is replaced by the value bound to `name`; `\{{` renders a
//! literal `{{`. Names are lowercase ASCII letters, digits and underscores.
//! Substituted values are never re-scanned, and any `{{` they contain is
//! broken up so no placeholder-looking token survives into the output.

use std::collections::BTreeMap;

use super::PromptError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

#[derive(Debug, Clone)]
pub struct Template {
    pieces: Vec<Piece>,
}

impl Template {
    pub fn parse(src: &str) -> Result<Self, PromptError> {
        let mut pieces = Vec::new();
        let mut text = String::new();
        let mut rest = src;
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix("\\{{") {
                text.push_str("{{");
                rest = r;
            } else if let Some(r) = rest.strip_prefix("{{") {
                let end = r
                    .find("}}")
                    .ok_or_else(|| PromptError::Template("unterminated placeholder".into()))?;
                let name = &r[..end];
                if name.is_empty()
                    || !name
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
                {
                    return Err(PromptError::Template(format!("bad placeholder name {name:?}")));
                }
                if !text.is_empty() {
                    pieces.push(Piece::Text(std::mem::take(&mut text)));
                }
                pieces.push(Piece::Slot(name.to_string()));
                rest = &r[end + 2..];
            } else {
                let c = rest.chars().next().expect("non-empty");
                text.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
        if !text.is_empty() {
            pieces.push(Piece::Text(text));
        }
        Ok(Self { pieces })
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(s) => Some(s.as_str()),
            Piece::Text(_) => None,
        })
    }

    /// Every placeholder must be bound; extra bindings are an error too, so
    /// templates and callers cannot silently drift apart.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, PromptError> {
        for key in values.keys() {
            if !self.placeholders().any(|p| p == *key) {
                return Err(PromptError::Template(format!("unused binding {key:?}")));
            }
        }
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => {
                    let v = values
                        .get(name.as_str())
                        .ok_or_else(|| PromptError::Template(format!("unbound placeholder {name:?}")))?;
                    out.push_str(&v.replace("{{", "{ {"));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fills_and_escapes() {
        let t = Template::parse("a {{x}} b \\{{y}} {{x}}").unwrap();
        let mut v = BTreeMap::new();
        v.insert("x", "1".to_string());
        assert_eq!(t.render(&v).unwrap(), "a 1 b {{y}} 1");
    }

    #[test]
    fn unbound_and_unused_are_errors() {
        let t = Template::parse("{{x}}").unwrap();
        assert!(t.render(&BTreeMap::new()).is_err());
        let mut v = BTreeMap::new();
        v.insert("x", String::new());
        v.insert("y", String::new());
        assert!(t.render(&v).is_err());
    }

    #[test]
    fn values_cannot_inject_placeholders() {
        let t = Template::parse("[{{x}}]").unwrap();
        let mut v = BTreeMap::new();
        v.insert("x", "{{object_dictionary}}".to_string());
        assert!(!t.render(&v).unwrap().contains("{{"));
    }

    #[test]
    fn malformed_templates() {
        assert!(Template::parse("{{open").is_err());
        assert!(Template::parse("{{Bad Name}}").is_err());
    }
}
