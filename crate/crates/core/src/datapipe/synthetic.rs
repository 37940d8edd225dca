//! Synthetic stand-ins written in the real on-disk formats, for tests and offline demos.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

struct Category {
    name: &'static str,
    share: f64,
    protocol: &'static str,
    services: &'static [&'static str],
    flag: &'static str,
    /// (column, mean) shifts on top of unit noise.
    shifts: &'static [(usize, f64)],
}

const TRAIN_CATEGORIES: [Category; 7] = [
    Category {
        name: "normal",
        share: 0.53,
        protocol: "tcp",
        services: &["http", "smtp", "ftp_data", "domain_u"],
        flag: "SF",
        shifts: &[(4, 2.0), (11, 1.0), (28, 1.5)],
    },
    Category {
        name: "neptune",
        share: 0.25,
        protocol: "tcp",
        services: &["private", "http"],
        flag: "S0",
        shifts: &[(22, 3.0), (24, 2.5), (37, 2.5)],
    },
    Category {
        name: "smurf",
        share: 0.08,
        protocol: "icmp",
        services: &["ecr_i"],
        flag: "SF",
        shifts: &[(4, 1.0), (22, 3.0)],
    },
    Category {
        name: "satan",
        share: 0.05,
        protocol: "tcp",
        services: &["private", "other"],
        flag: "REJ",
        shifts: &[(26, 2.5), (29, 2.0)],
    },
    Category {
        name: "ipsweep",
        share: 0.04,
        protocol: "icmp",
        services: &["eco_i"],
        flag: "SF",
        shifts: &[(31, -2.0), (30, 2.0)],
    },
    Category {
        name: "portsweep",
        share: 0.04,
        protocol: "tcp",
        services: &["private"],
        flag: "RSTR",
        shifts: &[(26, 2.0), (35, 2.0)],
    },
    Category {
        name: "guess_passwd",
        share: 0.01,
        protocol: "tcp",
        services: &["telnet"],
        flag: "SF",
        shifts: &[(10, 3.0), (9, 2.0)],
    },
];

/// Attack only present in the test file.
const TEST_ONLY: Category = Category {
    name: "mscan",
    share: 0.03,
    protocol: "tcp",
    services: &["gopher", "private"],
    flag: "S0",
    shifts: &[(22, 2.0), (29, 2.0)],
};

fn nslkdd_line(cat: &Category, noise: &Normal<f64>, rng: &mut Rng, out: &mut String) {
    let mut numeric = [0.0f64; 41];
    for v in numeric.iter_mut() {
        *v = noise.sample(rng);
    }
    for &(col, mean) in cat.shifts {
        numeric[col] += mean;
    }
    // one constant column, as in the real file
    numeric[19] = 0.0;
    let service = cat.services[rng.random_range(0..cat.services.len())];
    for (i, v) in numeric.iter().enumerate() {
        match i {
            1 => out.push_str(cat.protocol),
            2 => out.push_str(service),
            3 => out.push_str(cat.flag),
            _ => write!(out, "{v:.5}").unwrap(),
        }
        out.push(',');
    }
    writeln!(out, "{},{}", cat.name, rng.random_range(0..22)).unwrap();
}

fn pick<'a>(cats: &'a [&'a Category], rng: &mut Rng) -> &'a Category {
    let total: f64 = cats.iter().map(|c| c.share).sum();
    let mut u = rng.random_range(0.0..total);
    for c in cats {
        if u < c.share {
            return c;
        }
        u -= c.share;
    }
    cats[cats.len() - 1]
}

/// Writes `KDDTrain+.txt` and `KDDTest+.txt` with 43 columns. `noise` is the per-feature
/// standard deviation; larger values blur the classes.
pub fn write_nslkdd(dir: &Path, n_train: usize, n_test: usize, noise: f64, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let normal = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
    let train_cats: Vec<&Category> = TRAIN_CATEGORIES.iter().collect();
    let mut test_cats = train_cats.clone();
    test_cats.push(&TEST_ONLY);
    for (name, n, cats, s) in [("KDDTrain+.txt", n_train, &train_cats, 0), ("KDDTest+.txt", n_test, &test_cats, 1)] {
        let mut rng = rng_from_seed(derive_seed(seed, &[s]));
        let mut text = String::new();
        for _ in 0..n {
            nslkdd_line(pick(cats, &mut rng), &normal, &mut rng, &mut text);
        }
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

const SPAM_WORDS: [&str; 24] = [
    "free",
    "offer",
    "money",
    "click",
    "order",
    "cash",
    "guarantee",
    "winner",
    "credit",
    "investment",
    "income",
    "bonus",
    "discount",
    "sales",
    "profit",
    "limited",
    "save",
    "opportunity",
    "million",
    "dollars",
    "marketing",
    "unsubscribe",
    "cheap",
    "buy",
];
const HAM_WORDS: [&str; 24] = [
    "linguistics",
    "language",
    "syntax",
    "semantics",
    "conference",
    "paper",
    "university",
    "grammar",
    "corpus",
    "phonology",
    "morphology",
    "abstract",
    "workshop",
    "journal",
    "theory",
    "verb",
    "lexical",
    "dialect",
    "analysis",
    "research",
    "department",
    "submission",
    "speaker",
    "discourse",
];
const SHARED_WORDS: [&str; 20] = [
    "information",
    "email",
    "address",
    "list",
    "please",
    "send",
    "week",
    "message",
    "contact",
    "time",
    "new",
    "people",
    "world",
    "program",
    "call",
    "number",
    "internet",
    "year",
    "reply",
    "mail",
];

/// Writes a Ling-Spam-shaped tree `dir/bare/part1..part10` with `n` messages, `spam_share` of them spam.
/// `overlap` in [0, 1] is the chance each content word is drawn from the other class's vocabulary.
pub fn write_lingspam(dir: &Path, n: usize, spam_share: f64, overlap: f64, seed: u64) -> Result<()> {
    let mut rng = rng_from_seed(seed);
    for i in 0..n {
        let spam = rng.random_bool(spam_share);
        let part = dir.join("bare").join(format!("part{}", i % 10 + 1));
        std::fs::create_dir_all(&part).map_err(|e| Error::io(&part, e))?;
        let name = if spam { format!("spmsg{i:05}.txt") } else { format!("{}-{}msg{}.txt", i % 9 + 1, i, i % 3 + 1) };
        let (own, other) = if spam { (&SPAM_WORDS, &HAM_WORDS) } else { (&HAM_WORDS, &SPAM_WORDS) };
        let mut text = String::from("Subject: ");
        let len = rng.random_range(20..60);
        for k in 0..len {
            let w = match rng.random_range(0.0..1.0) {
                u if u < 0.4 => SHARED_WORDS[rng.random_range(0..SHARED_WORDS.len())],
                _ if rng.random_bool(overlap) => other[rng.random_range(0..other.len())],
                _ => own[rng.random_range(0..own.len())],
            };
            text.push_str(w);
            text.push(if k % 12 == 11 { '\n' } else { ' ' });
        }
        write!(text, " ref{i}x {}", rng.random_range(0..10000)).unwrap();
        let path = part.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
