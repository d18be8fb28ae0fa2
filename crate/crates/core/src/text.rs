//! Word tokenization shared by mention matching, embeddings and scoring.

/// Lowercase, split punctuation (`. , ? ! ; : ( ) "`) and the possessive
/// `'s` into their own tokens, then split on whitespace. A period between
/// two digits stays inside the number.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut spaced = String::with_capacity(lower.len() + 16);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let digit_at = |j: Option<usize>| j.and_then(|j| chars.get(j)).is_some_and(|d| d.is_ascii_digit());
        match c {
            '.' if digit_at(i.checked_sub(1)) && digit_at(Some(i + 1)) => spaced.push(c),
            '.' | ',' | '?' | '!' | ';' | ':' | '(' | ')' | '"' => {
                spaced.push(' ');
                spaced.push(c);
                spaced.push(' ');
            }
            '\'' if chars.get(i + 1) == Some(&'s')
                && chars.get(i + 2).is_none_or(|n| !n.is_alphanumeric()) =>
            {
                spaced.push_str(" 's ");
                i += 1;
            }
            _ => spaced.push(c),
        }
        i += 1;
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

/// `tokenize` joined back with single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}
