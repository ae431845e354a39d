use crate::error::{Error, Result};

/// Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the reference length.
pub fn error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::validation("error rate needs a non-empty reference"));
    }
    Ok(edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Lowercases, drops punctuation other than apostrophes and collapses
/// whitespace.
pub fn normalize_text(text: &str) -> String {
    let kept: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .flat_map(char::to_lowercase)
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn prepare(text: &str, normalize: bool) -> String {
    if normalize {
        normalize_text(text)
    } else {
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Word error rate over whitespace-separated words.
pub fn wer(reference: &str, hypothesis: &str, normalize: bool) -> Result<f64> {
    let r = prepare(reference, normalize);
    let h = prepare(hypothesis, normalize);
    let rw: Vec<&str> = r.split(' ').filter(|w| !w.is_empty()).collect();
    let hw: Vec<&str> = h.split(' ').filter(|w| !w.is_empty()).collect();
    error_rate(&rw, &hw)
}

/// Character error rate; single spaces between words count as characters.
pub fn cer(reference: &str, hypothesis: &str, normalize: bool) -> Result<f64> {
    let rc: Vec<char> = prepare(reference, normalize).chars().collect();
    let hc: Vec<char> = prepare(hypothesis, normalize).chars().collect();
    error_rate(&rc, &hc)
}
