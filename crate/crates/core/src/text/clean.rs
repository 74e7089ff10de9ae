//! Two cleaning grades: a deep clean for the encoder and a near-raw
//! normalization for the feature counter.

use std::sync::OnceLock;

use regex::Regex;

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap())
}

/// Punctuation that survives deep cleaning.
fn is_kept_punct(c: char) -> bool {
    matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | '\'' | '"' | '-' | '(' | ')')
}

/// Punctuation whose repeated runs collapse to a single character.
fn is_run_punct(c: char) -> bool {
    matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | '-')
}

fn normalize_char(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{02bc}' => '\'',
        '\u{201c}' | '\u{201d}' => '"',
        '\u{2013}' | '\u{2014}' => '-',
        _ => c,
    }
}

fn collapse_runs(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    let mut prev_run = false;
    for c in token.chars() {
        let run = is_run_punct(c);
        if run && prev_run {
            continue;
        }
        prev_run = run;
        out.push(c);
    }
    out
}

/// A bare number: digits with optional separators, nothing alphabetic.
fn is_number(core: &str) -> bool {
    core.chars().any(|c| c.is_ascii_digit())
        && core
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | ':' | '/' | '-' | '%'))
}

/// Deep clean for the encoder.
///
/// Removes web links, bare numbers, symbols outside a small punctuation
/// set, repeated punctuation runs and tokens made only of punctuation.
/// Word order is preserved and the function is idempotent.
pub fn clean_for_encoder(text: &str) -> String {
    let no_urls = url_re().replace_all(text, " ");
    let filtered: String = no_urls
        .chars()
        .map(normalize_char)
        .map(|c| {
            if c.is_alphanumeric() || is_kept_punct(c) {
                c
            } else {
                ' '
            }
        })
        .collect();

    let mut out: Vec<String> = Vec::new();
    for raw in filtered.split_whitespace() {
        if url_re().is_match(raw) {
            continue;
        }
        let token = collapse_runs(raw);
        let core = token.trim_matches(is_kept_punct);
        if core.is_empty() || is_number(core) {
            continue;
        }
        out.push(token);
    }
    out.join(" ")
}

/// Near-raw normalization for the counter: control characters dropped,
/// whitespace runs collapsed to one space, ends trimmed. Punctuation,
/// symbols and casing are untouched.
pub fn clean_for_counter(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() || c == '\u{feff}' {
            continue;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encoder_examples() {
        assert_eq!(clean_for_encoder("see http://x.co now!!!"), "see now!");
        assert_eq!(clean_for_encoder(""), "");
        assert_eq!(clean_for_encoder("I like tea."), "I like tea.");
        assert_eq!(
            clean_for_encoder("5-10 matcha lattes, 8AM www.site.org ok :) <3 *sigh*"),
            "matcha lattes, 8AM ok sigh"
        );
        assert_eq!(clean_for_encoder("wait.... what?!? \u{201c}no\u{201d}"), "wait. what? \"no\"");
        assert_eq!(clean_for_encoder("it\u{2019}s 2015 - really"), "it's really");
    }

    #[test]
    fn counter_examples() {
        assert_eq!(clean_for_counter("I'm happy!! :)"), "I'm happy!! :)");
        assert_eq!(clean_for_counter("a\u{7}b"), "ab");
        assert_eq!(clean_for_counter("a\t\tb"), "a b");
        assert_eq!(clean_for_counter("  x \n y  "), "x y");
    }

    proptest! {
        #[test]
        fn encoder_clean_is_idempotent(s in "\\PC{0,80}") {
            let once = clean_for_encoder(&s);
            prop_assert_eq!(clean_for_encoder(&once), once);
        }

        #[test]
        fn encoder_clean_is_idempotent_on_wordy_text(
            s in "([a-zA-Z]{1,6}|[0-9]{1,3}|[.!?,:;'\"()*#@<>-]{1,3}|https?://[a-z.]{1,8}|www\\.[a-z]{1,4}|[ \t]){0,40}"
        ) {
            let once = clean_for_encoder(&s);
            prop_assert!(!once.contains("://"));
            prop_assert_eq!(clean_for_encoder(&once), once);
        }

        #[test]
        fn counter_clean_is_idempotent(s in "\\PC{0,80}") {
            let once = clean_for_counter(&s);
            prop_assert_eq!(clean_for_counter(&once), once);
        }
    }
}
