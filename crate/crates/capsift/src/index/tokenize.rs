/// Split text into terms: maximal runs of ASCII alphanumeric characters,
/// lowercased. Everything else — punctuation, whitespace, and any non-ASCII
/// byte — is a separator.
///
/// This one tokenizer is shared by document indexing, query parsing, and
/// binary string processing; the whole model depends on those three
/// vocabularies agreeing, so there is deliberately no other tokenizer in the
/// crate. Single-character tokens are kept: common short tokens end up with
/// huge overall document frequencies and the smoothing prior makes them weak
/// indicators without a special case here.
pub fn tokenize(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut terms = Vec::new();
    let mut start = None;
    for (i, &b) in bytes.iter().enumerate() {
        if b.is_ascii_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            terms.push(ascii_lower(&bytes[s..i]));
        }
    }
    if let Some(s) = start {
        terms.push(ascii_lower(&bytes[s..]));
    }
    terms
}

fn ascii_lower(run: &[u8]) -> String {
    // Runs are pure ASCII alphanumerics, so byte-level lowercasing is exact.
    String::from_utf8(run.to_ascii_lowercase()).expect("ascii run")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_non_alphanumerics_and_lowercases() {
        assert_eq!(
            tokenize("hdc_screen = GetDC(NULL)"),
            vec!["hdc", "screen", "getdc", "null"]
        );
    }

    #[test]
    fn single_token_passthrough() {
        assert_eq!(tokenize("PRIVMSG"), vec!["privmsg"]);
    }

    #[test]
    fn no_alphanumerics_yields_nothing() {
        assert!(tokenize("---").is_empty());
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n").is_empty());
    }

    #[test]
    fn digits_and_mixed_runs_kept_whole() {
        assert_eq!(tokenize("win32 2fa x86_64"), vec!["win32", "2fa", "x86", "64"]);
    }

    #[test]
    fn non_ascii_is_a_separator() {
        assert_eq!(tokenize("caf\u{e9}s touch\u{e9}"), vec!["caf", "s", "touch"]);
    }

    #[test]
    fn idempotent_on_joined_output_and_case_invariant() {
        let inputs = [
            "BitBlt(hdc_memory, bounds.x)",
            "PRIVMSG #chan :hello",
            "a-b_c d9 Z",
        ];
        for input in inputs {
            let once = tokenize(input);
            let again = tokenize(&once.join(" "));
            assert_eq!(once, again, "tokenize not idempotent for {input:?}");
            let upper = tokenize(&input.to_uppercase());
            assert_eq!(once, upper, "tokenize case-sensitive for {input:?}");
        }
    }
}
