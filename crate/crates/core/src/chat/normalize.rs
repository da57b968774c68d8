use std::collections::BTreeSet;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Lowercases, folds diacritics, drops punctuation and splits on whitespace.
pub fn normalize(text: &str) -> Vec<String> {
    let mut folded = String::with_capacity(text.len());
    for c in text.nfd() {
        if is_combining_mark(c) || c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c == 'ß' {
            folded.push_str("ss");
        } else if c.is_alphanumeric() {
            folded.extend(c.to_lowercase());
        } else {
            folded.push(' ');
        }
    }
    folded.split_whitespace().map(str::to_owned).collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    normalize(text).into_iter().collect()
}

/// |a ∩ b| / |a ∪ b|, zero when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(normalize("Hello!"), ["hello"]);
        assert_eq!(
            normalize("Wo kann ich dich kaufen?"),
            ["wo", "kann", "ich", "dich", "kaufen"]
        );
        assert!(normalize("").is_empty());
        assert_eq!(normalize("Käse, Brötchen & Soße"), ["kase", "brotchen", "sosse"]);
        assert_eq!(normalize("I don't like mustard"), ["i", "dont", "like", "mustard"]);
    }

    #[test]
    fn jaccard_bounds() {
        let a = token_set("thank you");
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&a, &token_set("xyzzy")), 0.0);
        assert_eq!(jaccard(&a, &token_set("thank you so much")), 0.5);
        assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 0.0);
    }
}
