//! Rule-based lemmatizer: plural `-s`/`-es`, `-ing`, `-ed` and `-ly` suffix
//! stripping with a table of irregular forms.
//!
//! Rules are applied repeatedly until none fires, and every exception target is
//! itself a fixpoint, so `lemmatize` is idempotent.

use std::collections::HashMap;
use std::sync::OnceLock;

const EXCEPTIONS_SRC: &str = include_str!("../../data/lemma_exceptions.txt");

fn exceptions() -> &'static HashMap<&'static str, &'static str> {
    static TABLE: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    TABLE.get_or_init(|| {
        EXCEPTIONS_SRC
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once(char::is_whitespace))
            .map(|(form, lemma)| (form, lemma.trim()))
            .collect()
    })
}

/// The irregular-form table, `(form, lemma)`.
pub fn exception_pairs() -> impl Iterator<Item = (&'static str, &'static str)> {
    exceptions().iter().map(|(k, v)| (*k, *v))
}

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        c => c.is_ascii_alphabetic(),
    }
}

fn is_vowel(w: &[u8], i: usize) -> bool {
    w[i].is_ascii_alphabetic() && !is_consonant(w, i)
}

fn has_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| is_vowel(w, i))
}

/// Number of vowel-consonant runs, as in the Porter measure.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let v = is_vowel(w, i);
        if prev_vowel && !v {
            m += 1;
        }
        prev_vowel = v;
    }
    m
}

fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && is_vowel(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

/// Repairs a verb stem left behind by `-ing` / `-ed` removal.
fn repair_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if stem.ends_with("at") || stem.ends_with("bl") || stem.ends_with("iz") {
        return format!("{stem}e");
    }
    if n >= 2
        && b[n - 1] == b[n - 2]
        && is_consonant(b, n - 1)
        && !matches!(b[n - 1], b'l' | b's' | b'z')
    {
        return stem[..n - 1].to_string();
    }
    if measure(b) == 1 && ends_cvc(b) {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn strip_step(w: &str) -> Option<String> {
    let n = w.len();

    if n >= 4 && w.ends_with('s') {
        if w.ends_with("ies") && n >= 5 {
            return Some(format!("{}y", &w[..n - 3]));
        }
        if w.ends_with("sses")
            || w.ends_with("ches")
            || w.ends_with("shes")
            || w.ends_with("xes")
            || w.ends_with("zzes")
        {
            return Some(w[..n - 2].to_string());
        }
        if w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
            return None;
        }
        return Some(w[..n - 1].to_string());
    }

    if n >= 5 && w.ends_with("ing") {
        let stem = &w[..n - 3];
        if stem.len() >= 2 && has_vowel(stem.as_bytes()) {
            return Some(repair_stem(stem));
        }
        return None;
    }

    if n >= 4 && w.ends_with("ed") && !w.ends_with("eed") {
        if w.ends_with("ied") && n >= 5 {
            return Some(format!("{}y", &w[..n - 3]));
        }
        let stem = &w[..n - 2];
        if stem.len() >= 2 && has_vowel(stem.as_bytes()) {
            return Some(repair_stem(stem));
        }
        return None;
    }

    if n >= 5 && w.ends_with("ly") {
        if w.ends_with("ily") && n >= 6 {
            return Some(format!("{}y", &w[..n - 3]));
        }
        let stem = &w[..n - 2];
        if stem.len() >= 3 && has_vowel(stem.as_bytes()) {
            return Some(stem.to_string());
        }
        return None;
    }

    None
}

/// Reduces a lowercase token to its lemma.
pub fn lemmatize(token: &str) -> String {
    if !token.is_ascii() {
        return token.to_string();
    }
    let table = exceptions();
    let mut word = token.to_string();
    loop {
        if let Some(lemma) = table.get(word.as_str()) {
            return (*lemma).to_string();
        }
        match strip_step(&word) {
            Some(next) if next != word => word = next,
            _ => return word,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plurals() {
        assert_eq!(lemmatize("dogs"), "dog");
        assert_eq!(lemmatize("batteries"), "battery");
        assert_eq!(lemmatize("boxes"), "box");
        assert_eq!(lemmatize("watches"), "watch");
        assert_eq!(lemmatize("dresses"), "dress");
        assert_eq!(lemmatize("shoes"), "shoe");
        assert_eq!(lemmatize("sizes"), "size");
        assert_eq!(lemmatize("glass"), "glass");
        assert_eq!(lemmatize("bus"), "bus");
        assert_eq!(lemmatize("this"), "this");
        assert_eq!(lemmatize("gorgeous"), "gorgeous");
    }

    #[test]
    fn progressive_forms() {
        assert_eq!(lemmatize("running"), "run");
        assert_eq!(lemmatize("making"), "make");
        assert_eq!(lemmatize("hoping"), "hope");
        assert_eq!(lemmatize("shopping"), "shop");
        assert_eq!(lemmatize("falling"), "fall");
        assert_eq!(lemmatize("reading"), "read");
        assert_eq!(lemmatize("playing"), "play");
        assert_eq!(lemmatize("creating"), "create");
        assert_eq!(lemmatize("thing"), "thing");
        assert_eq!(lemmatize("string"), "string");
    }

    #[test]
    fn past_forms() {
        assert_eq!(lemmatize("stopped"), "stop");
        assert_eq!(lemmatize("worked"), "work");
        assert_eq!(lemmatize("loved"), "love");
        assert_eq!(lemmatize("tried"), "try");
        assert_eq!(lemmatize("created"), "create");
        assert_eq!(lemmatize("need"), "need");
        assert_eq!(lemmatize("speed"), "speed");
        assert_eq!(lemmatize("shed"), "shed");
    }

    #[test]
    fn adverbs() {
        assert_eq!(lemmatize("quickly"), "quick");
        assert_eq!(lemmatize("easily"), "easy");
        assert_eq!(lemmatize("really"), "real");
        assert_eq!(lemmatize("ugly"), "ugly");
        assert_eq!(lemmatize("family"), "family");
    }

    #[test]
    fn irregulars() {
        assert_eq!(lemmatize("children"), "child");
        assert_eq!(lemmatize("bought"), "buy");
        assert_eq!(lemmatize("knives"), "knife");
        assert_eq!(lemmatize("movies"), "movie");
    }

    #[test]
    fn chained_suffixes_reach_a_fixpoint() {
        assert_eq!(lemmatize("headings"), "head");
        assert_eq!(lemmatize("lovingly"), "love");
    }

    #[test]
    fn fixpoints() {
        for w in ["dog", "run", "", "a", "1990", "ok"] {
            assert_eq!(lemmatize(w), w);
        }
    }

    #[test]
    fn exception_targets_are_fixpoints() {
        assert!(exceptions().len() >= 200);
        for (form, lemma) in exception_pairs() {
            assert_eq!(lemmatize(lemma), lemma, "{form} -> {lemma} is not stable");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn idempotent(w in "[a-z0-9]{0,14}") {
                let once = lemmatize(&w);
                prop_assert_eq!(lemmatize(&once), once);
            }

            #[test]
            fn idempotent_on_suffixed_words(stem in "[a-z]{1,8}", suffix in prop::sample::select(vec!["s", "es", "ies", "ing", "ed", "ied", "ly", "ily", "ings", "edly"])) {
                let w = format!("{stem}{suffix}");
                let once = lemmatize(&w);
                prop_assert_eq!(lemmatize(&once), once);
            }
        }
    }
}
