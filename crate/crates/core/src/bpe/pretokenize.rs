/// Iterator over whitespace-attached pre-tokens of a string.
///
/// A pre-token is a run of whitespace followed by a run of non-whitespace.
/// Splits happen only where a whitespace character follows a non-whitespace
/// one, so leading whitespace attaches forward and a trailing whitespace run
/// forms its own pre-token.
#[derive(Debug, Clone)]
pub struct PreTokens<'a> {
    rest: &'a str,
}

impl<'a> Iterator for PreTokens<'a> {
    type Item = &'a str;

    fn next(&mut self) -> Option<&'a str> {
        if self.rest.is_empty() {
            return None;
        }
        let mut seen_word = false;
        let mut end = self.rest.len();
        for (i, ch) in self.rest.char_indices() {
            if ch.is_whitespace() {
                if seen_word {
                    end = i;
                    break;
                }
            } else {
                seen_word = true;
            }
        }
        let (head, tail) = self.rest.split_at(end);
        self.rest = tail;
        Some(head)
    }
}

pub fn pretokenize_iter(text: &str) -> PreTokens<'_> {
    PreTokens { rest: text }
}

/// Split `text` into pre-tokens; concatenating the result gives back `text`.
pub fn pretokenize(text: &str) -> Vec<&str> {
    pretokenize_iter(text).collect()
}
