//! Regenerates the bundled toy corpora under `crates/core/data`.
//!
//! ```text
//! cargo run -p synthsearch --example make_toy_corpora
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

const FILLER: &[&str] = &[
    "please", "help", "today", "again", "still", "urgent", "issue", "problem", "since", "morning", "team", "user",
    "request", "ticket", "after", "update", "cannot", "working", "error", "need", "thanks", "office", "remote", "new",
];

struct Class {
    name: &'static str,
    words: &'static [&'static str],
}

const FIFTEEN: &[Class] = &[
    Class { name: "access", words: &["permission", "folder", "share", "denied", "grant", "role", "drive", "rights"] },
    Class { name: "backup", words: &["restore", "snapshot", "archive", "retention", "tape", "recover", "nightly", "copy"] },
    Class { name: "billing", words: &["invoice", "charge", "refund", "payment", "receipt", "card", "subscription", "cost"] },
    Class { name: "database", words: &["query", "table", "schema", "index", "sql", "replica", "deadlock", "migration"] },
    Class { name: "email", words: &["mailbox", "outlook", "inbox", "attachment", "calendar", "spam", "forward", "smtp"] },
    Class { name: "hardware", words: &["laptop", "monitor", "keyboard", "battery", "dock", "mouse", "screen", "charger"] },
    Class { name: "license", words: &["activation", "seat", "renewal", "key", "expired", "vendor", "trial", "entitlement"] },
    Class { name: "network", words: &["wifi", "router", "latency", "dns", "switch", "cable", "packet", "bandwidth"] },
    Class { name: "onboarding", words: &["starter", "orientation", "badge", "welcome", "equipment", "hire", "account", "desk"] },
    Class { name: "password", words: &["reset", "locked", "login", "expire", "mfa", "token", "credentials", "unlock"] },
    Class { name: "printer", words: &["toner", "paper", "jam", "tray", "scanner", "cartridge", "queue", "duplex"] },
    Class { name: "security", words: &["phishing", "malware", "breach", "virus", "suspicious", "firewall", "audit", "quarantine"] },
    Class { name: "server", words: &["reboot", "cpu", "disk", "outage", "cluster", "uptime", "memory", "patch"] },
    Class { name: "software", words: &["install", "crash", "version", "plugin", "upgrade", "bug", "freeze", "app"] },
    Class { name: "vpn", words: &["tunnel", "client", "connect", "gateway", "certificate", "split", "disconnect", "profile"] },
];

/// `tokens` words per message: own-class words with probability `own`,
/// words of `other` classes with probability `cross`, filler otherwise.
fn message(rng: &mut ChaCha8Rng, own_words: &[&str], other: &[&[&str]], own: f64, cross: f64, tokens: usize) -> String {
    let mut out: Vec<&str> = Vec::with_capacity(tokens);
    while out.len() < tokens {
        let r: f64 = rng.gen();
        let w = if r < own {
            own_words.choose(rng).unwrap()
        } else if r < own + cross && !other.is_empty() {
            other.choose(rng).unwrap().choose(rng).unwrap()
        } else {
            FILLER.choose(rng).unwrap()
        };
        out.push(w);
    }
    // guarantee one own-class word so no message is pure noise
    if !out.iter().any(|w| own_words.contains(w)) {
        out[0] = own_words.choose(rng).unwrap();
    }
    out.join(" ")
}

fn tsv(rows: &[(String, String, String)]) -> String {
    let mut s = String::from("id\tlabel\ttext\n");
    for (id, label, text) in rows {
        writeln!(s, "{id}\t{label}\t{text}").unwrap();
    }
    s
}

fn fifteen(rng: &mut ChaCha8Rng) -> String {
    let mut rows = Vec::new();
    for (ci, c) in FIFTEEN.iter().enumerate() {
        let neighbor = FIFTEEN[(ci + 1) % FIFTEEN.len()].words;
        for i in 0..40 {
            let n = rng.gen_range(4..=7);
            rows.push((format!("{}-{i:03}", c.name), c.name.to_string(), message(rng, c.words, &[neighbor], 0.45, 0.3, n)));
        }
    }
    tsv(&rows)
}

fn two_class(rng: &mut ChaCha8Rng) -> String {
    let (a, b) = (&FIFTEEN[5], &FIFTEEN[13]);
    let mut rows = Vec::new();
    for i in 0..60 {
        let n = rng.gen_range(4..=6);
        rows.push((format!("hw-{i:03}"), a.name.to_string(), message(rng, a.words, &[b.words], 0.4, 0.35, n)));
        let n = rng.gen_range(4..=6);
        rows.push((format!("sw-{i:03}"), b.name.to_string(), message(rng, b.words, &[a.words], 0.4, 0.35, n)));
    }
    tsv(&rows)
}

fn separable(rng: &mut ChaCha8Rng) -> String {
    let (a, b) = (&FIFTEEN[10], &FIFTEEN[9]);
    let mut rows = Vec::new();
    for i in 0..30 {
        for c in [a, b] {
            let mut words: Vec<&str> = c.words.to_vec();
            words.shuffle(rng);
            rows.push((format!("{}-{i:03}", c.name), c.name.to_string(), words[..4].join(" ")));
        }
    }
    tsv(&rows)
}

/// 950 routine tickets and 50 escalations whose vocabulary overlaps heavily.
fn imbalanced(rng: &mut ChaCha8Rng) -> String {
    let routine: &[&str] = &["reset", "install", "laptop", "printer", "mailbox", "wifi", "license", "monitor", "toner", "login"];
    let escalation: &[&str] = &["outage", "breach", "critical", "executive", "deadline", "production", "customers", "down"];
    let mut rows = Vec::new();
    for i in 0..1000 {
        let n = rng.gen_range(5..=8);
        if i % 20 == 7 {
            rows.push((format!("t{i:04}"), "escalation".to_string(), message(rng, escalation, &[routine], 0.3, 0.45, n)));
        } else {
            rows.push((format!("t{i:04}"), "routine".to_string(), message(rng, routine, &[escalation], 0.6, 0.06, n)));
        }
    }
    tsv(&rows)
}

/// Synonyms within each class vocabulary (plus a few fillers), so replacement
/// keeps a message's class signal.
fn synonyms() -> String {
    let mut s = String::from("# word\tsynonym\n");
    let mut groups: Vec<&[&str]> = FIFTEEN.iter().map(|c| c.words).collect();
    groups.push(&["outage", "breach", "critical", "executive", "deadline", "production", "customers", "down"]);
    groups.push(&["reset", "install", "laptop", "printer", "mailbox", "wifi", "license", "monitor", "toner", "login"]);
    for g in groups {
        for (i, w) in g.iter().enumerate() {
            for d in 1..=2 {
                writeln!(s, "{w}\t{}", g[(i + d) % g.len()]).unwrap();
            }
        }
    }
    for pair in [("urgent", "critical"), ("help", "assist"), ("issue", "problem"), ("cannot", "unable"), ("need", "require")] {
        writeln!(s, "{}\t{}", pair.0, pair.1).unwrap();
    }
    s
}

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20240607);
    fs::write(dir.join("fifteen.tsv"), fifteen(&mut rng))?;
    fs::write(dir.join("two_class.tsv"), two_class(&mut rng))?;
    fs::write(dir.join("separable.tsv"), separable(&mut rng))?;
    fs::write(dir.join("imbalanced.tsv"), imbalanced(&mut rng))?;
    fs::write(dir.join("synonyms.tsv"), synonyms())?;
    println!("wrote toy corpora to {}", dir.display());
    Ok(())
}
