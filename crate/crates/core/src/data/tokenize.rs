use super::TokenSequence;

/// Splits text into tokens: maximal runs of alphanumeric characters stay
/// together, every other non-whitespace character becomes its own token.
/// Whitespace only separates; no case folding is applied. The terminal
/// period of a sentence therefore becomes its own token.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
        } else if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    TokenSequence::new(tokens)
}

const NO_SPACE_BEFORE: &[&str] = &[".", ",", "!", "?", ";", ":", ")", "]", "'", "%"];
const NO_SPACE_AFTER: &[&str] = &["(", "["];

/// Joins tokens back into text. Punctuation is re-attached so that the
/// output reads naturally; the result always tokenizes back to the same
/// sequence (`tokenize(detokenize(s)) == s` for tokenizer output).
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut suppress_space = true;
    for token in tokens {
        if !suppress_space && !NO_SPACE_BEFORE.contains(&token.as_str()) {
            out.push(' ');
        }
        out.push_str(token);
        suppress_space = NO_SPACE_AFTER.contains(&token.as_str());
    }
    out
}
