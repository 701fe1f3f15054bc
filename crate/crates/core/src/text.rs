//! Shared text normalization.
//!
//! Two normalizations exist and they are not interchangeable:
//!
//! * [`normalize_title`] produces the canonical lookup key for knowledge-base
//!   titles (`Above_(artist)` → `above (artist)`).
//! * [`tokenize`] produces the searchable token stream used by the entity
//!   linker, the query builder and the index (`above (artist)` → `[above, artist]`).

/// Lowercases, maps underscores to spaces, trims, and collapses internal whitespace.
pub fn normalize_title(raw: &str) -> String {
    let lowered = raw.to_lowercase().replace('_', " ");
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercases and splits on every non-alphanumeric character. Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        // Some lowercase mappings (e.g. U+0130) emit combining marks.
        .flat_map(|t| {
            if t.chars().all(char::is_alphanumeric) {
                vec![t]
            } else {
                tokenize(&t)
            }
        })
        .collect()
}

/// True when `token` is already in tokenizer output form.
pub fn is_normalized_token(token: &str) -> bool {
    !token.is_empty()
        && token.chars().all(char::is_alphanumeric)
        && token.to_lowercase() == token
}
