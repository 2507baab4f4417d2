//! Text normalization and tokenization shared across modules.

use unicode_normalization::UnicodeNormalization;

/// Normalization applied to corpus text at load time.
///
/// Unicode NFC is always applied. Case is preserved by default; consumers
/// (embedders, scorers) decide their own casing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizeOptions {
    pub lowercase: bool,
    pub collapse_whitespace: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            lowercase: false,
            collapse_whitespace: true,
        }
    }
}

pub fn normalize(text: &str, opts: NormalizeOptions) -> String {
    let nfc: String = text.nfc().collect();
    let cased = if opts.lowercase {
        nfc.to_lowercase()
    } else {
        nfc
    };
    if opts.collapse_whitespace {
        cased.split_whitespace().collect::<Vec<_>>().join(" ")
    } else {
        cased
    }
}

/// Lowercase and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
