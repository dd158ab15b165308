use serde_json::Value;

use super::RiskError;

/// Pulls a JSON document out of raw model output.
///
/// Strict parse first. Otherwise a single repair pass: take the first fenced
/// code block (or the outermost `[...]`/`{...}` span of surrounding prose),
/// drop `//` and `/* */` comments, and drop trailing commas.
pub fn extract_json(text: &str) -> Result<Value, RiskError> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Ok(v);
    }
    let candidate = fenced_block(trimmed)
        .or_else(|| outer_span(trimmed))
        .ok_or_else(|| RiskError::NotJson("no JSON array or object found".into()))?;
    let repaired = strip_trailing_commas(&strip_comments(candidate));
    serde_json::from_str(&repaired).map_err(|e| RiskError::NotJson(e.to_string()))
}

fn fenced_block(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    // Skip an info string such as `json`.
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    Some(body[..end].trim())
}

fn outer_span(text: &str) -> Option<&str> {
    let start = text.find(['[', '{'])?;
    let close = if text.as_bytes()[start] == b'[' { ']' } else { '}' };
    let end = text.rfind(close)?;
    (end > start).then(|| &text[start..=end])
}

/// Walks the text tracking string literals so that `//` inside a string
/// (a URL, say) is preserved.
fn strip_comments(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let mut chars = src.chars().peekable();
    let mut in_str = false;
    let mut escaped = false;
    while let Some(c) = chars.next() {
        if in_str {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match (c, chars.peek()) {
            ('"', _) => {
                in_str = true;
                out.push(c);
            }
            ('/', Some('/')) => {
                for n in chars.by_ref() {
                    if n == '\n' {
                        out.push('\n');
                        break;
                    }
                }
            }
            ('/', Some('*')) => {
                chars.next();
                let mut prev = '\0';
                for n in chars.by_ref() {
                    if prev == '*' && n == '/' {
                        break;
                    }
                    prev = n;
                }
            }
            _ => out.push(c),
        }
    }
    out
}

fn strip_trailing_commas(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len());
    let mut in_str = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        if c == '"' {
            in_str = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|n| !n.is_whitespace());
            if matches!(next, Some(']') | Some('}')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn plain_json_passes_through() {
        assert_eq!(extract_json(" [1, 2] ").unwrap(), json!([1, 2]));
    }

    #[test]
    fn fenced_block_with_prose() {
        let text = "Here is the analysis:\n```json\n[{\"a\": 1}]\n```\nLet me know!";
        assert_eq!(extract_json(text).unwrap(), json!([{"a": 1}]));
    }

    #[test]
    fn prose_around_bare_array() {
        let text = "Sure. [ {\"a\": \"x // y\"} ] Hope this helps.";
        assert_eq!(extract_json(text).unwrap(), json!([{"a": "x // y"}]));
    }

    #[test]
    fn trailing_commas_and_comments() {
        let text = "[{\"id\": 1, // the id\n \"v\": [1,2,],},]";
        assert_eq!(extract_json(text).unwrap(), json!([{"id": 1, "v": [1, 2]}]));
    }

    #[test]
    fn hopeless_input_is_not_json() {
        assert!(matches!(
            extract_json("I cannot help with that."),
            Err(RiskError::NotJson(_))
        ));
        assert!(matches!(extract_json("[{\"a\": }]"), Err(RiskError::NotJson(_))));
    }
}
