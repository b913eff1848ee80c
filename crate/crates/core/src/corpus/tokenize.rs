use super::Token;

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

/// Rule-based tokenizer.
///
/// Text is split on whitespace; every non-alphanumeric character becomes a
/// token of its own, except hyphens and apostrophes that sit between two
/// alphanumeric characters (`O'Brien-Smith` stays whole).
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;

    let flush = |tokens: &mut Vec<Token>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            tokens.push(Token::new(&text[s..end], s));
        }
    };

    for (i, &(offset, c)) in chars.iter().enumerate() {
        if c.is_whitespace() {
            flush(&mut tokens, &mut word_start, offset);
        } else if c.is_alphanumeric() {
            word_start.get_or_insert(offset);
        } else {
            let internal = is_joiner(c)
                && word_start.is_some()
                && chars.get(i + 1).is_some_and(|&(_, n)| n.is_alphanumeric());
            if !internal {
                flush(&mut tokens, &mut word_start, offset);
                tokens.push(Token::new(c.to_string(), offset));
            }
        }
    }
    flush(&mut tokens, &mut word_start, text.len());
    tokens
}
