use std::sync::OnceLock;

use regex::Regex;

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(@[A-Z]+[0-9]*)|[\p{Alphabetic}\p{Nd}]+|[^\s\p{Alphabetic}\p{Nd}]")
            .expect("token pattern")
    })
}

/// Lowercased word tokens, with every punctuation character standing alone.
///
/// Anonymisation placeholders such as `@CAPS3` or `@PERSON` are kept verbatim.
pub fn tokenize(text: &str) -> Vec<String> {
    pattern()
        .captures_iter(text)
        .map(|cap| match cap.get(1) {
            Some(placeholder) => placeholder.as_str().to_string(),
            None => cap[0].to_lowercase(),
        })
        .collect()
}
