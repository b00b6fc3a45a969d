use std::sync::OnceLock;

use regex::Regex;

use crate::store::EntityType;

/// Characters removed from the end of a matched URL.
const URL_TRAILING: &[char] = &['.', ',', ';', ':', '!', '?', ')'];

fn long_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?P<url>https?://\S+)|(?P<email>[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})")
            .expect("valid url/email regex")
    })
}

fn short_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?P<hashtag>#[A-Za-z0-9_]+)|(?P<mention>@[A-Za-z0-9_]+)").expect("valid tag regex"))
}

/// A matched entity with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub entity_type: EntityType,
    pub start: usize,
    pub end: usize,
}

/// Non-overlapping entity matches in document order, with byte offsets.
///
/// URLs and emails are matched first; hashtags and mentions only in the text
/// between them, so the longer match wins wherever they would overlap
/// (`@anna@example.com` is one email, not a mention).
pub fn entity_spans(text: &str) -> Vec<EntitySpan> {
    let mut long = Vec::new();
    for caps in long_re().captures_iter(text) {
        if let Some(m) = caps.name("url") {
            let end = m.start() + m.as_str().trim_end_matches(URL_TRAILING).len();
            long.push(EntitySpan { entity_type: EntityType::Url, start: m.start(), end });
        } else if let Some(m) = caps.name("email") {
            long.push(EntitySpan { entity_type: EntityType::Email, start: m.start(), end: m.end() });
        }
    }

    let mut out = Vec::new();
    let mut cursor = 0;
    let gaps = long.iter().map(|s| (s.start, Some(s))).chain(std::iter::once((text.len(), None)));
    for (gap_end, span) in gaps {
        let gap = &text[cursor..gap_end];
        for caps in short_re().captures_iter(gap) {
            let (entity_type, m) = match (caps.name("hashtag"), caps.name("mention")) {
                (Some(m), _) => (EntityType::Hashtag, m),
                (None, Some(m)) => (EntityType::Mention, m),
                (None, None) => continue,
            };
            out.push(EntitySpan { entity_type, start: cursor + m.start(), end: cursor + m.end() });
        }
        if let Some(span) = span {
            cursor = span.end;
            out.push(span.clone());
        }
    }
    out
}

/// Hashtags, mentions, URLs and emails found in free text, left to right.
/// Duplicates are kept. Media keys never come from text.
pub fn extract_entities(text: &str) -> Vec<(EntityType, String)> {
    entity_spans(text)
        .into_iter()
        .map(|s| (s.entity_type, text[s.start..s.end].to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use EntityType::*;

    fn ents(text: &str) -> Vec<(EntityType, String)> {
        extract_entities(text)
    }

    fn e(t: EntityType, s: &str) -> (EntityType, String) {
        (t, s.to_string())
    }

    #[test]
    fn mixed_sentence() {
        assert_eq!(
            ents("see #vaalit2023 and @anna at https://a.io, mail b@c.org"),
            vec![
                e(Hashtag, "#vaalit2023"),
                e(Mention, "@anna"),
                e(Url, "https://a.io"),
                e(Email, "b@c.org"),
            ]
        );
    }

    #[test]
    fn empty_text() {
        assert!(ents("").is_empty());
    }

    #[test]
    fn doubled_hash_prefix() {
        assert_eq!(ents("##x"), vec![e(Hashtag, "#x")]);
    }

    #[test]
    fn email_beats_mention() {
        assert_eq!(ents("anna@example.com"), vec![e(Email, "anna@example.com")]);
    }

    #[test]
    fn duplicates_preserved() {
        assert_eq!(ents("#a #a"), vec![e(Hashtag, "#a"), e(Hashtag, "#a")]);
    }
}
