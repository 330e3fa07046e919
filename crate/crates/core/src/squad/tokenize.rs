/// A lowercased token with its `[start, end)` character (code point) span
/// in the original text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Lowercase, split on whitespace, and emit every other non-alphanumeric
/// character as its own token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let flush = |cur: &mut Option<(usize, String)>, end: usize, out: &mut Vec<Token>| {
        if let Some((start, word)) = cur.take() {
            out.push(Token {
                text: word.to_lowercase(),
                char_start: start,
                char_end: end,
            });
        }
    };
    let mut pos = 0;
    for (i, c) in text.chars().enumerate() {
        pos = i + 1;
        if c.is_whitespace() {
            flush(&mut current, i, &mut out);
        } else if is_punct(c) {
            flush(&mut current, i, &mut out);
            out.push(Token {
                text: c.to_lowercase().collect(),
                char_start: i,
                char_end: i + 1,
            });
        } else {
            current.get_or_insert_with(|| (i, String::new())).1.push(c);
        }
    }
    flush(&mut current, pos, &mut out);
    out
}

/// Substring by character (code point) offsets.
pub fn slice_chars(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn tok(t: &str, s: usize, e: usize) -> Token {
        Token {
            text: t.into(),
            char_start: s,
            char_end: e,
        }
    }

    #[test]
    fn hello_world() {
        assert_eq!(
            tokenize("Hello, world!"),
            vec![tok("hello", 0, 5), tok(",", 5, 6), tok("world", 7, 12), tok("!", 12, 13)]
        );
    }

    #[test]
    fn empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
    }

    proptest! {
        #[test]
        fn offsets_slice_back_to_token(text in "\\PC{0,60}") {
            let toks = tokenize(&text);
            let mut last_end = 0;
            for t in toks {
                prop_assert_eq!(slice_chars(&text, t.char_start, t.char_end).to_lowercase(), t.text);
                prop_assert!(t.char_start >= last_end && t.char_end > t.char_start);
                last_end = t.char_end;
            }
        }
    }
}
