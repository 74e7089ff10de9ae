/// Lowercased word and punctuation tokens, in order.
///
/// A word is a maximal run of alphanumeric characters, possibly joined by
/// single apostrophes ("i'm", "don't"). Every other non-space character is
/// its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text
        .chars()
        .map(|c| if matches!(c, '\u{2019}' | '\u{2018}') { '\'' } else { c })
        .collect();
    let mut out = Vec::new();
    let mut word = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else if c == '\''
            && !word.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            word.push('\'');
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
        i += 1;
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// True for tokens produced from alphanumeric runs.
pub fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}
