//! String corruptions applied to duplicate records.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corruption {
    /// Keyboard slip: adjacent-key substitution, insertion, deletion or
    /// transposition.
    Typo,
    /// Character recognition confusion such as `o`/`0` or `rn`/`m`.
    Ocr,
    /// Sound-alike spelling such as `ph`/`f` or `ck`/`k`.
    Phonetic,
}

impl Corruption {
    pub const ALL: [Corruption; 3] = [Corruption::Typo, Corruption::Ocr, Corruption::Phonetic];
}

const KEYBOARD: [&str; 4] = ["1234567890", "qwertyuiop", "asdfghjkl", "zxcvbnm"];

const OCR: [(&str, &str); 14] = [
    ("o", "0"),
    ("0", "o"),
    ("s", "5"),
    ("5", "s"),
    ("l", "1"),
    ("1", "l"),
    ("i", "1"),
    ("b", "8"),
    ("8", "b"),
    ("g", "9"),
    ("z", "2"),
    ("rn", "m"),
    ("m", "rn"),
    ("cl", "d"),
];

const PHONETIC: [(&str, &str); 14] = [
    ("ph", "f"),
    ("f", "ph"),
    ("ck", "k"),
    ("c", "k"),
    ("k", "c"),
    ("ee", "ea"),
    ("ea", "ee"),
    ("ie", "y"),
    ("y", "ie"),
    ("th", "t"),
    ("dt", "t"),
    ("ou", "ow"),
    ("z", "s"),
    ("s", "z"),
];

fn neighbours(c: char) -> Vec<char> {
    for (r, row) in KEYBOARD.iter().enumerate() {
        if let Some(i) = row.find(c) {
            let mut out = Vec::new();
            let chars: Vec<char> = row.chars().collect();
            if i > 0 {
                out.push(chars[i - 1]);
            }
            if i + 1 < chars.len() {
                out.push(chars[i + 1]);
            }
            for other in [r.wrapping_sub(1), r + 1] {
                if let Some(o) = KEYBOARD.get(other) {
                    if let Some(ch) = o.chars().nth(i) {
                        out.push(ch);
                    }
                }
            }
            return out;
        }
    }
    Vec::new()
}

fn typo<R: Rng>(value: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = value.chars().collect();
    if chars.is_empty() {
        chars.push(*b"abcdefghijklmnopqrstuvwxyz".choose(rng).unwrap() as char);
        return chars.into_iter().collect();
    }
    let i = rng.gen_range(0..chars.len());
    let near = neighbours(chars[i]);
    match rng.gen_range(0..4) {
        0 if !near.is_empty() => chars[i] = *near.choose(rng).unwrap(),
        1 if !near.is_empty() => chars.insert(i, *near.choose(rng).unwrap()),
        2 if chars.len() > 1 => {
            chars.remove(i);
        }
        3 if chars.len() > 1 => {
            let j = if i + 1 < chars.len() { i + 1 } else { i - 1 };
            chars.swap(i, j);
        }
        _ => chars.insert(i, chars[i]),
    }
    chars.into_iter().collect()
}

fn rewrite<R: Rng>(value: &str, rules: &[(&str, &str)], rng: &mut R) -> Option<String> {
    let mut options = Vec::new();
    for (from, to) in rules {
        for (pos, _) in value.match_indices(from) {
            options.push((pos, *from, *to));
        }
    }
    let &(pos, from, to) = options.choose(rng)?;
    let mut out = String::with_capacity(value.len() + 2);
    out.push_str(&value[..pos]);
    out.push_str(to);
    out.push_str(&value[pos + from.len()..]);
    Some(out)
}

/// Applies one corruption. OCR and phonetic rewrites fall back to a typo
/// when no rule applies to the value.
pub fn corrupt<R: Rng>(value: &str, kind: Corruption, rng: &mut R) -> String {
    let out = match kind {
        Corruption::Typo => None,
        Corruption::Ocr => rewrite(value, &OCR, rng),
        Corruption::Phonetic => rewrite(value, &PHONETIC, rng),
    };
    match out {
        Some(v) if v != value => v,
        _ => typo(value, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn corruptions_change_the_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in Corruption::ALL {
            for v in ["stephen", "clarke", "42", "a", "", "rockhampton"] {
                assert_ne!(corrupt(v, kind, &mut rng), v, "{kind:?} {v}");
            }
        }
    }

    #[test]
    fn phonetic_rules_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = corrupt("ph", Corruption::Phonetic, &mut rng);
        assert_eq!(out, "f");
    }
}
