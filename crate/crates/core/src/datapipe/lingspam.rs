use std::path::{Path, PathBuf};

use log::warn;
use walkdir::WalkDir;

use super::dataset::{DatasetSplit, Part};
use super::split::{class_weights, stratified_holdout};
use super::tfidf::{TfidfConfig, TfidfVectorizer};
use crate::error::{Error, Result};
use crate::persist;

pub const DEFAULT_VARIANT: &str = "bare";

pub fn is_spam(file_name: &str) -> bool {
    file_name.starts_with("spmsg")
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub paths: Vec<PathBuf>,
    pub texts: Vec<String>,
    pub labels: Vec<u8>,
    pub skipped: usize,
}

/// Every regular file under `root/variant` (or `root` when that subdirectory is absent), sorted by path.
pub fn corpus_files(root: &Path, variant: &str) -> Result<Vec<PathBuf>> {
    let base = if root.join(variant).is_dir() { root.join(variant) } else { root.to_path_buf() };
    if !base.is_dir() {
        return Err(Error::io(&base, std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory missing")));
    }
    let mut files: Vec<PathBuf> = WalkDir::new(&base)
        .into_iter()
        .filter_map(|e| match e {
            Ok(e) => Some(e),
            Err(err) => {
                warn!("skipping unreadable entry: {err}");
                None
            }
        })
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    Ok(files)
}

/// Reads the corpus listed by [`corpus_files`]. Unreadable files are skipped and counted.
pub fn read_corpus(root: &Path, variant: &str) -> Result<Corpus> {
    let files = corpus_files(root, variant)?;
    let mut corpus = Corpus { paths: Vec::new(), texts: Vec::new(), labels: Vec::new(), skipped: 0 };
    for path in files {
        match std::fs::read(&path) {
            Ok(bytes) => {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                corpus.labels.push(u8::from(is_spam(&name)));
                corpus.texts.push(String::from_utf8_lossy(&bytes).into_owned());
                corpus.paths.push(path);
            }
            Err(err) => {
                warn!("skipping {}: {err}", path.display());
                corpus.skipped += 1;
            }
        }
    }
    if corpus.texts.is_empty() {
        return Err(Error::Empty("Ling-Spam corpus"));
    }
    Ok(corpus)
}

pub struct LingSpam {
    pub split: DatasetSplit,
    pub vectorizer: TfidfVectorizer,
    pub skipped: usize,
}

fn part(corpus: &Corpus, rows: Vec<usize>, v: &TfidfVectorizer) -> Part {
    let texts: Vec<&str> = rows.iter().map(|&i| corpus.texts[i].as_str()).collect();
    let y: Vec<u8> = rows.iter().map(|&i| corpus.labels[i]).collect();
    Part {
        x: v.transform(&texts),
        categories: y.iter().map(|&l| if l == 1 { "spam" } else { "ham" }.to_string()).collect(),
        y,
        source_index: rows,
    }
}

/// Stratified test holdout, then a stratified validation holdout of the remainder;
/// TF-IDF is fitted on the training documents only.
pub fn load_lingspam(
    root: &Path,
    variant: &str,
    test_fraction: f64,
    val_fraction: f64,
    seed: u64,
    ngram_max: usize,
) -> Result<LingSpam> {
    let corpus = read_corpus(root, variant)?;
    let (rest, test_idx) = stratified_holdout(&corpus.labels, test_fraction, seed)?;
    let rest_labels: Vec<u8> = rest.iter().map(|&i| corpus.labels[i]).collect();
    let (train_pos, val_pos) = stratified_holdout(&rest_labels, val_fraction, seed.wrapping_add(1))?;
    let train_idx: Vec<usize> = train_pos.iter().map(|&p| rest[p]).collect();
    let val_idx: Vec<usize> = val_pos.iter().map(|&p| rest[p]).collect();
    let train_docs: Vec<&str> = train_idx.iter().map(|&i| corpus.texts[i].as_str()).collect();
    let vectorizer = TfidfVectorizer::fit(&train_docs, TfidfConfig { ngram_max, ..Default::default() })?;
    let train = part(&corpus, train_idx, &vectorizer);
    let weights = class_weights(&train.y)?;
    let mut source_hashes = Vec::with_capacity(corpus.paths.len());
    for p in &corpus.paths {
        let rel = p.strip_prefix(root).unwrap_or(p);
        source_hashes.push((rel.display().to_string(), persist::sha256_file(p)?));
    }
    let split = DatasetSplit {
        name: "lingspam".into(),
        val: part(&corpus, val_idx, &vectorizer),
        test: part(&corpus, test_idx, &vectorizer),
        train,
        feature_names: vectorizer.vocabulary.clone(),
        class_weights: weights,
        seed,
        source_hashes,
    };
    Ok(LingSpam { split, vectorizer, skipped: corpus.skipped })
}
