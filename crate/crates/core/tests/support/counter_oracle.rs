//! A from-scratch reference counter: slow, direct, exact.
//!
//! Shares nothing with the library counter except the slot layout. Lexicon
//! files are parsed here line by line, matching is a linear scan, and
//! weighted sums are accumulated exactly in 2^-70 fixed point and rounded
//! once at the end.

use std::collections::BTreeMap;

use adf_core::psycholex::{Block, FeatureSchema};

const SCALE_BITS: i32 = 70;

struct Entry {
    pattern: String,
    prefix: bool,
    category: String,
    weight: f64,
}

pub struct OracleLexicons {
    blocks: BTreeMap<String, Vec<Entry>>,
}

impl OracleLexicons {
    pub fn from_files(files: &[(&str, &str)]) -> Self {
        let mut blocks = BTreeMap::new();
        for (name, text) in files {
            let mut entries = Vec::new();
            for line in text.lines() {
                if line.trim().is_empty() || line.starts_with('#') || line.starts_with('%') {
                    continue;
                }
                let f: Vec<&str> = line.split('\t').collect();
                let weight = f.get(2).map_or(1.0, |w| w.trim().parse().unwrap());
                let (pattern, prefix) = match f[0].strip_suffix('*') {
                    Some(p) => (p.to_string(), true),
                    None => (f[0].to_string(), false),
                };
                for c in f[1].split(',') {
                    entries.push(Entry {
                        pattern: pattern.clone(),
                        prefix,
                        category: c.trim().to_string(),
                        weight,
                    });
                }
            }
            blocks.insert(name.to_string(), entries);
        }
        OracleLexicons { blocks }
    }

    pub fn demo() -> Self {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/lexicons/");
        let read = |n: &str| std::fs::read_to_string(format!("{dir}{n}.tsv")).unwrap();
        let (l, m, s, n) = (read("liwc"), read("mrc"), read("senticnet"), read("nrc"));
        Self::from_files(&[("liwc", &l), ("mrc", &m), ("senticnet", &s), ("nrc", &n)])
    }

    /// (category, weight) hits for `word` in `block`: for each category the
    /// most specific matching pattern wins (exact, then longer prefix).
    fn hits(&self, block: &str, word: &str) -> Vec<(String, f64)> {
        let mut best: BTreeMap<String, (usize, f64)> = BTreeMap::new();
        for e in &self.blocks[block] {
            let rank = if !e.prefix && word == e.pattern {
                usize::MAX
            } else if e.prefix && word.starts_with(&e.pattern) {
                e.pattern.len()
            } else {
                continue;
            };
            let slot = best.entry(e.category.clone()).or_insert((0, 0.0));
            if rank >= slot.0 {
                *slot = (rank, e.weight);
            }
        }
        best.into_iter().map(|(c, (_, w))| (c, w)).collect()
    }
}

fn fixed(w: f64) -> i128 {
    let scaled = w * 2f64.powi(SCALE_BITS);
    assert_eq!(scaled.fract(), 0.0, "weight {w} not representable at 2^-{SCALE_BITS}");
    scaled as i128
}

fn unfixed(x: i128) -> f64 {
    (x as f64) / 2f64.powi(SCALE_BITS)
}

fn words_and_tokens(text: &str) -> Vec<(String, bool)> {
    let chars: Vec<char> = text.chars().map(|c| if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c }).collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let next_alnum = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || (c == '\'' && !cur.is_empty() && next_alnum) {
            cur.push(c);
            continue;
        }
        if !cur.is_empty() {
            out.push((cur.to_lowercase(), true));
            cur.clear();
        }
        if !c.is_whitespace() {
            out.push((c.to_string(), false));
        }
    }
    if !cur.is_empty() {
        out.push((cur.to_lowercase(), true));
    }
    out
}

fn count_emoticons(text: &str) -> usize {
    let c: Vec<char> = text.chars().collect();
    let face = |x: char| "()[]DPpOo3/|*".contains(x);
    let (mut i, mut n) = (0, 0);
    while i < c.len() {
        if c[i] == '<' && c.get(i + 1) == Some(&'3') {
            n += 1;
            i += 2;
        } else if ":;=".contains(c[i]) {
            if matches!(c.get(i + 1), Some('-' | '\'')) && c.get(i + 2).is_some_and(|&x| face(x)) {
                n += 1;
                i += 3;
            } else if c.get(i + 1).is_some_and(|&x| face(x)) {
                n += 1;
                i += 2;
            } else {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    n
}

fn count_ellipses(text: &str) -> usize {
    let mut n = text.matches('\u{2026}').count();
    let mut run = 0;
    for c in text.chars().chain(" ".chars()) {
        if c == '.' {
            run += 1;
        } else {
            if run >= 3 {
                n += 1;
            }
            run = 0;
        }
    }
    n
}

/// Mean and population standard deviation of integer lengths; the variance
/// is the exact rational Σ(n·x − S)² / n³ rounded once.
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as i128;
    let total: i128 = xs.iter().map(|&x| x as i128).sum();
    let dev: i128 = xs.iter().map(|&x| (n * x as i128 - total).pow(2)).sum();
    ((total as f64) / (n as f64), ((dev as f64) / ((n * n * n) as f64)).sqrt())
}

fn punct_name(c: char) -> Option<&'static str> {
    match c {
        '.' => Some("period"),
        ',' => Some("comma"),
        ':' => Some("colon"),
        ';' => Some("semic"),
        '?' => Some("qmark"),
        '!' => Some("exclam"),
        '-' | '–' | '—' => Some("dash"),
        '"' | '“' | '”' => Some("quote"),
        '\'' | '‘' | '’' => Some("apostro"),
        '(' | ')' => Some("parenth"),
        _ => None,
    }
}

/// Reference feature vector of `text` in the slot order of `schema`.
pub fn oracle_features(text: &str, lex: &OracleLexicons, schema: &FeatureSchema) -> Vec<f64> {
    let tokens = words_and_tokens(text);
    let words: Vec<&String> = tokens.iter().filter(|(_, w)| *w).map(|(t, _)| t).collect();
    let wc = words.len() as f64;
    let per100 = |x: f64| if wc == 0.0 { 0.0 } else { 100.0 * x / wc };

    // sentences
    let mut lens: Vec<f64> = Vec::new();
    let (mut q, mut e, mut a) = (0.0, 0.0, 0.0);
    let mut run = 0.0;
    for (t, is_word) in &tokens {
        if *is_word {
            run += 1.0;
        } else if run > 0.0 && matches!(t.as_str(), "." | "?" | "!") {
            lens.push(run);
            match t.as_str() {
                "." => a += 1.0,
                "?" => q += 1.0,
                _ => e += 1.0,
            }
            run = 0.0;
        }
    }
    if run > 0.0 {
        lens.push(run);
    }
    let ns = lens.len() as f64;
    let per_sentence = |x: f64| if ns == 0.0 { 0.0 } else { 100.0 * x / ns };

    let mut v: BTreeMap<String, f64> = BTreeMap::new();
    let mut put = |k: &str, x: f64| {
        v.insert(k.to_string(), x);
    };

    // character statistics
    let nonspace: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let letters = nonspace.iter().filter(|c| c.is_alphabetic()).count() as f64;
    let upper = nonspace.iter().filter(|c| c.is_alphabetic() && c.is_uppercase()).count() as f64;
    let puncts: Vec<char> = nonspace.iter().copied().filter(|c| !c.is_alphanumeric()).collect();
    let mut named = 0.0;
    for key in ["period", "comma", "colon", "semic", "qmark", "exclam", "dash", "quote", "apostro", "parenth"] {
        let n = puncts.iter().filter(|&&c| punct_name(c) == Some(key)).count() as f64;
        named += n;
        put(&format!("liwc_{key}"), per100(n));
    }
    put("liwc_allpct", per100(puncts.len() as f64));
    put("liwc_otherp", per100(puncts.len() as f64 - named));
    put("liwc_wc", wc);
    put("liwc_wps", if ns == 0.0 { 0.0 } else { wc / ns });
    let wl: Vec<f64> = words.iter().map(|w| w.chars().count() as f64).collect();
    put("liwc_sixltr", per100(wl.iter().filter(|&&l| l > 6.0).count() as f64));
    put("liwc_numerals", per100(words.iter().filter(|w| w.chars().all(|c| c.is_ascii_digit())).count() as f64));

    put("prosodic_sentence_count", ns);
    put("prosodic_char_count", nonspace.len() as f64);
    let (ms, ss) = mean_sd(&lens);
    put("prosodic_mean_sentence_len", ms);
    put("prosodic_sd_sentence_len", ss);
    put("prosodic_min_sentence_len", if lens.is_empty() { 0.0 } else { lens.iter().copied().fold(f64::INFINITY, f64::min) });
    put("prosodic_max_sentence_len", lens.iter().copied().fold(0.0, f64::max));
    let (mw, sw) = mean_sd(&wl);
    put("prosodic_mean_word_len", mw);
    put("prosodic_sd_word_len", sw);
    put("prosodic_question_rate", per_sentence(q));
    put("prosodic_exclamation_rate", per_sentence(e));
    put("prosodic_assertion_rate", per_sentence(a));
    put("prosodic_uppercase_rate", if letters == 0.0 { 0.0 } else { 100.0 * upper / letters });
    let elongated = words
        .iter()
        .filter(|w| {
            let c: Vec<char> = w.chars().collect();
            (2..c.len()).any(|i| c[i].is_alphabetic() && c[i] == c[i - 1] && c[i] == c[i - 2])
        })
        .count();
    put("prosodic_elongation_rate", per100(elongated as f64));
    put("prosodic_ellipsis_rate", per100(count_ellipses(text) as f64));
    put("prosodic_emoticon_rate", per100(count_emoticons(text) as f64));
    for z in ["pitch_mean", "intensity_mean", "speech_rate"] {
        put(&format!("prosodic_{z}"), 0.0);
    }

    // lexicons
    let mut sums: BTreeMap<String, (i128, u64)> = BTreeMap::new();
    let mut dic = 0.0;
    for w in &words {
        for block in ["liwc", "mrc", "senticnet", "nrc"] {
            let hits = lex.hits(block, w);
            if block == "liwc" && !hits.is_empty() {
                dic += 1.0;
            }
            for (c, wt) in hits {
                let s = sums.entry(format!("{block}_{c}")).or_insert((0, 0));
                s.0 += fixed(wt);
                s.1 += 1;
            }
        }
    }
    put("liwc_dic", per100(dic));
    for block in [Block::Liwc, Block::Mrc, Block::Senticnet, Block::Nrc] {
        for c in schema.lexicon_categories(block) {
            let key = format!("{}_{c}", block.name());
            let (s, n) = sums.get(&key).copied().unwrap_or((0, 0));
            let total = unfixed(s);
            let x = match block {
                Block::Mrc => {
                    if n == 0 {
                        0.0
                    } else {
                        total / n as f64
                    }
                }
                Block::Senticnet => total,
                _ => per100(total),
            };
            put(&key, x);
        }
    }

    schema
        .names()
        .iter()
        .map(|n| *v.get(n).unwrap_or_else(|| panic!("oracle has no value for {n}")))
        .collect()
}
