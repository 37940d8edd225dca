use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STOPWORDS_VERSION: &str = "en-v1";
const STOPWORDS: &str = include_str!("stopwords_en.txt");
pub const IDF_VARIANT: &str = "smooth:ln((1+N)/(1+df))+1;tf=raw;l2";

fn stopwords() -> BTreeSet<&'static str> {
    STOPWORDS.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

/// Lowercases, splits on non-alphanumeric runs, drops pure-digit tokens and stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    let stop = stopwords();
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !t.chars().all(|c| c.is_ascii_digit()))
        .filter(|t| !stop.contains(t.as_str()))
        .collect()
}

fn ngrams(tokens: &[String], ngram_max: usize) -> Vec<String> {
    let mut out = tokens.to_vec();
    for n in 2..=ngram_max {
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub min_df: usize,
    pub max_df: f64,
    pub ngram_max: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig { min_df: 2, max_df: 0.95, ngram_max: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    pub config: TfidfConfig,
    /// Sorted lexicographically.
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub num_documents: usize,
    pub stopwords: String,
    pub variant: String,
}

impl TfidfVectorizer {
    pub fn fit<S: AsRef<str>>(docs: &[S], config: TfidfConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Empty("TF-IDF training corpus"));
        }
        if !(1..=2).contains(&config.ngram_max) {
            return Err(Error::invalid(format!("ngram_max {} not in 1..=2", config.ngram_max)));
        }
        if !(0.0..=1.0).contains(&config.max_df) || config.max_df == 0.0 {
            return Err(Error::invalid(format!("max_df {} not in (0, 1]", config.max_df)));
        }
        let n = docs.len();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in docs {
            let terms: BTreeSet<String> = ngrams(&tokenize(d.as_ref()), config.ngram_max).into_iter().collect();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        let max_count = config.max_df * n as f64;
        let (vocabulary, idf) = df
            .into_iter()
            .filter(|&(_, c)| c >= config.min_df && c as f64 <= max_count)
            .map(|(t, c)| (t, ((1.0 + n as f64) / (1.0 + c as f64)).ln() + 1.0))
            .unzip();
        Ok(TfidfVectorizer {
            config,
            vocabulary,
            idf,
            num_documents: n,
            stopwords: STOPWORDS_VERSION.into(),
            variant: IDF_VARIANT.into(),
        })
    }

    pub fn transform<S: AsRef<str>>(&self, docs: &[S]) -> Array2<f32> {
        let index: HashMap<&str, usize> = self.vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut x = Array2::zeros((docs.len(), self.vocabulary.len()));
        let mut row = vec![0.0f64; self.vocabulary.len()];
        for (r, d) in docs.iter().enumerate() {
            row.iter_mut().for_each(|v| *v = 0.0);
            for t in ngrams(&tokenize(d.as_ref()), self.config.ngram_max) {
                if let Some(&j) = index.get(t.as_str()) {
                    row[j] += 1.0;
                }
            }
            row.iter_mut().zip(&self.idf).for_each(|(v, w)| *v *= w);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (j, v) in row.iter().enumerate() {
                    x[[r, j]] = (v / norm) as f32;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("The FREE offer, 2024 only! e-mail x2"), vec!["free", "offer", "e", "mail", "x2"]);
    }

    #[test]
    fn document_frequency_bounds() {
        let docs = ["alpha beta", "alpha gamma", "alpha beta delta", "alpha"];
        let v = TfidfVectorizer::fit(&docs, TfidfConfig::default()).unwrap();
        // alpha is in 4/4 > 0.95, gamma and delta in one document each
        assert_eq!(v.vocabulary, vec!["beta"]);
        assert!((v.idf[0] - (5.0f64 / 3.0).ln() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bigrams_and_normalization() {
        let docs = ["spam offer now", "spam offer today", "ham meeting", "ham meeting today", "x"];
        let v = TfidfVectorizer::fit(&docs, TfidfConfig { ngram_max: 2, ..Default::default() }).unwrap();
        assert!(v.vocabulary.contains(&"spam offer".to_string()));
        assert!(v.vocabulary.windows(2).all(|w| w[0] < w[1]));
        let x = v.transform(&docs);
        for r in 0..4 {
            let n: f32 = x.row(r).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-6);
        }
        assert!(x.row(4).iter().all(|&v| v == 0.0));
    }
}
