use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown placeholder `{0}`")]
    UnknownPlaceholder(String),
    #[error("unclosed `{{` at byte {0}")]
    Unclosed(usize),
}

enum Piece<'a> {
    Text(&'a str),
    Field(&'a str),
}

fn parse(template: &str) -> Result<Vec<Piece<'_>>, TemplateError> {
    let mut pieces = Vec::new();
    let bytes = template.as_bytes();
    let mut literal_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                pieces.push(Piece::Text(&template[literal_start..i + 1]));
                i += 2;
                literal_start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                pieces.push(Piece::Text(&template[literal_start..i + 1]));
                i += 2;
                literal_start = i;
            }
            b'{' => {
                let close = template[i + 1..].find('}').ok_or(TemplateError::Unclosed(i))?;
                pieces.push(Piece::Text(&template[literal_start..i]));
                pieces.push(Piece::Field(template[i + 1..i + 1 + close].trim()));
                i += close + 2;
                literal_start = i;
            }
            _ => i += 1,
        }
    }
    pieces.push(Piece::Text(&template[literal_start..]));
    Ok(pieces)
}

/// Placeholder names used by `template`, in order of appearance.
pub fn placeholders(template: &str) -> Result<Vec<String>, TemplateError> {
    Ok(parse(template)?
        .into_iter()
        .filter_map(|p| match p {
            Piece::Field(name) => Some(name.to_string()),
            Piece::Text(_) => None,
        })
        .collect())
}

fn render_value(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Fills `{field}` placeholders from `record`. Nulls render as empty strings
/// and `{{` / `}}` stand for literal braces.
pub fn render_prompt(template: &str, record: &Map<String, Value>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    for piece in parse(template)? {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Field(name) => match record.get(name) {
                Some(v) => out.push_str(&render_value(v)),
                None => return Err(TemplateError::UnknownPlaceholder(name.to_string())),
            },
        }
    }
    Ok(out)
}
