/// Substitutions whose normalized character edit distance is at or below this
/// count toward coverage (with partial credit).
pub const FUZZY_MAX_DISTANCE: f64 = 0.34;

fn is_dash(c: char) -> bool {
    matches!(c, '\u{2010}'..='\u{2015}' | '\u{2212}')
}

/// Case-fold, split on whitespace and typographic dashes, strip leading and
/// trailing punctuation, drop empties. Inner apostrophes and hyphens survive.
pub fn tokenize_normalized(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || is_dash(c))
        .flat_map(|t| t.split("--"))
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

fn char_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Coverage credit for aligning ASR token `asr` against reference token `reference`:
/// 1 for equality, `1 - d` for a near miss (`d` = character edit distance over
/// the longer length, `d <= FUZZY_MAX_DISTANCE`), 0 otherwise.
pub fn token_similarity_credit(asr: &str, reference: &str) -> f64 {
    if asr == reference {
        return 1.0;
    }
    let a: Vec<char> = asr.chars().collect();
    let b: Vec<char> = reference.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    let d = char_distance(&a, &b) as f64 / longest as f64;
    if d <= FUZZY_MAX_DISTANCE {
        1.0 - d
    } else {
        0.0
    }
}
