//! Self-contained synthetic benchmark: a corpus with planted
//! term↔capability signal, binaries that embed (or don't) those signature
//! terms, and ground-truth labels — everything the end-to-end pipeline
//! needs, generated from a single seed.
//!
//! Construction. Each capability gets `signature_terms_per_capability`
//! dedicated signature terms drawn from a pronounceable CVCVCV vocabulary,
//! plus a shared pool of `noise_vocab_size` noise terms. Every capability
//! document contains *all* of its capability's signature terms and
//! [`NOISE_DRAWS_PER_CAP_DOC`] random noise terms; every noise document
//! contains [`NOISE_DRAWS_PER_NOISE_DOC`] random noise terms. Positive
//! binaries embed a random 2–5 term subset of their capability's signature
//! terms between runs of non-printable bytes; negative binaries embed
//! [`NOISE_TERMS_PER_NEGATIVE`] noise terms the same way. The result: the
//! learner should assign signature terms a sharply higher probability than
//! noise terms, positives should score well above the default threshold,
//! and negatives should hover near the prior — close enough to zero to be
//! rejected, far enough from it that a threshold sweep still has shape.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::capability::CapabilityConfigEntry;
use crate::corpus::{DocKind, Document};
use crate::eval::{Label, LabeledSample};
use crate::{Error, Result};

/// Noise terms mixed into every capability document.
pub const NOISE_DRAWS_PER_CAP_DOC: usize = 2;
/// Noise terms in every noise (off-topic) document.
pub const NOISE_DRAWS_PER_NOISE_DOC: usize = 8;
/// Noise terms embedded in every negative binary.
pub const NOISE_TERMS_PER_NEGATIVE: usize = 8;
/// Positive binaries embed between 2 and 5 of their capability's
/// signature terms (clamped to however many exist).
const SIG_EMBED_MIN: usize = 2;
const SIG_EMBED_MAX: usize = 5;
/// Gap runs between embedded terms: 1..=8 bytes drawn from the
/// non-printable pool (0x00–0x1F and 0x7F).
const GAP_MAX: usize = 8;

const NONPRINTABLE: [u8; 33] = {
    let mut pool = [0u8; 33];
    let mut i = 0;
    while i < 32 {
        pool[i] = i as u8;
        i += 1;
    }
    pool[32] = 0x7F;
    pool
};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
/// Distinct CVCVCV words the syllable alphabet can produce.
const VOCAB_SPACE: usize =
    CONSONANTS.len() * VOWELS.len() * CONSONANTS.len() * VOWELS.len() * CONSONANTS.len() * VOWELS.len();

/// Shape of one synthetic benchmark. Serializable so a benchmark is fully
/// described by a small JSON file plus the seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_capabilities: usize,
    pub docs_per_capability: usize,
    pub signature_terms_per_capability: usize,
    pub noise_docs: usize,
    pub noise_vocab_size: usize,
    /// Positive binaries per capability; the same count of negatives is
    /// generated alongside.
    pub binaries_per_class: usize,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let fields = [
            ("n_capabilities", self.n_capabilities),
            ("docs_per_capability", self.docs_per_capability),
            ("signature_terms_per_capability", self.signature_terms_per_capability),
            ("noise_docs", self.noise_docs),
            ("noise_vocab_size", self.noise_vocab_size),
            ("binaries_per_class", self.binaries_per_class),
        ];
        for (name, value) in fields {
            if value == 0 {
                return Err(Error::Synth { message: format!("{name} must be at least 1") });
            }
        }
        let min_vocab = NOISE_DRAWS_PER_CAP_DOC
            .max(NOISE_DRAWS_PER_NOISE_DOC)
            .max(NOISE_TERMS_PER_NEGATIVE);
        if self.noise_vocab_size < min_vocab {
            return Err(Error::Synth {
                message: format!(
                    "noise_vocab_size must be at least {min_vocab} so documents and \
                     negative binaries can draw distinct noise terms"
                ),
            });
        }
        let needed = self
            .n_capabilities
            .checked_mul(self.signature_terms_per_capability)
            .and_then(|sig| sig.checked_add(self.noise_vocab_size))
            .ok_or_else(|| Error::Synth { message: "vocabulary size overflows".to_owned() })?;
        if needed > VOCAB_SPACE {
            return Err(Error::Synth {
                message: format!(
                    "spec needs {needed} distinct terms but the generated vocabulary \
                     has only {VOCAB_SPACE} possible words"
                ),
            });
        }
        Ok(())
    }
}

/// Everything one benchmark run produces, in memory. [`LabeledSample`]
/// sample ids use the same `binaries/<name>` relative paths as the
/// `binaries` entries, so writing the bundle into a directory yields a
/// self-consistent evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthBundle {
    pub documents: Vec<Document>,
    pub config: Vec<CapabilityConfigEntry>,
    pub labels: Vec<LabeledSample>,
    /// (relative path, file bytes) pairs, e.g. `binaries/pos_cap00_000.bin`.
    pub binaries: Vec<(String, Vec<u8>)>,
}

impl SynthBundle {
    /// The corpus as ingestible JSONL.
    pub fn corpus_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for doc in &self.documents {
            let line = serde_json::to_string(doc)
                .map_err(|e| Error::Synth { message: format!("serializing corpus: {e}") })?;
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }

    /// The capability config as JSON.
    pub fn config_json(&self) -> Result<String> {
        let mut out = serde_json::to_string_pretty(&self.config)
            .map_err(|e| Error::Synth { message: format!("serializing config: {e}") })?;
        out.push('\n');
        Ok(out)
    }

    /// The ground-truth labels as JSONL.
    pub fn labels_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for label in &self.labels {
            let line = serde_json::to_string(label)
                .map_err(|e| Error::Synth { message: format!("serializing labels: {e}") })?;
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Generate the benchmark for `spec`. Deterministic: the same spec (seed
/// included) produces a byte-identical bundle.
pub fn generate_synthetic_benchmark(spec: &SynthSpec) -> Result<SynthBundle> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    // 1. Vocabulary: per-capability signature terms, then the noise pool,
    //    all globally distinct.
    let total_terms =
        spec.n_capabilities * spec.signature_terms_per_capability + spec.noise_vocab_size;
    let vocab = distinct_words(&mut rng, total_terms)?;
    let (sig_flat, noise_vocab) =
        vocab.split_at(spec.n_capabilities * spec.signature_terms_per_capability);
    let signatures: Vec<&[String]> =
        sig_flat.chunks(spec.signature_terms_per_capability).collect();

    let cap_name = |i: usize| format!("cap{i:02}");

    // 2. Corpus: capability threads first, then noise threads. Sequential
    //    doc ids, one question per thread.
    let mut documents = Vec::with_capacity(
        spec.n_capabilities * spec.docs_per_capability + spec.noise_docs,
    );
    let mut doc_id = 0u64;
    for (i, sig) in signatures.iter().enumerate() {
        let name = cap_name(i);
        for m in 0..spec.docs_per_capability {
            doc_id += 1;
            let mut terms: Vec<&str> = sig.iter().map(String::as_str).collect();
            for idx in sample(&mut rng, spec.noise_vocab_size, NOISE_DRAWS_PER_CAP_DOC) {
                terms.push(&noise_vocab[idx]);
            }
            documents.push(Document {
                doc_id,
                thread_id: doc_id,
                kind: DocKind::Question,
                title: format!("{name} thread {m}"),
                tags: vec![name.clone()],
                body: terms.join(" "),
            });
        }
    }
    for m in 0..spec.noise_docs {
        doc_id += 1;
        let terms: Vec<&str> = sample(&mut rng, spec.noise_vocab_size, NOISE_DRAWS_PER_NOISE_DOC)
            .iter()
            .map(|idx| noise_vocab[idx].as_str())
            .collect();
        documents.push(Document {
            doc_id,
            thread_id: doc_id,
            kind: DocKind::Question,
            title: format!("noise thread {m}"),
            tags: vec!["noise".to_owned()],
            body: terms.join(" "),
        });
    }

    // 3. Capability config: one tag query per capability.
    let config: Vec<CapabilityConfigEntry> = (0..spec.n_capabilities)
        .map(|i| CapabilityConfigEntry {
            name: cap_name(i),
            query: format!("tags:{}", cap_name(i)),
            alpha: None,
            beta: None,
        })
        .collect();

    // 4. Binaries and labels, per capability: positives embedding that
    //    capability's signature terms, then negatives embedding only noise.
    let mut binaries = Vec::with_capacity(spec.n_capabilities * spec.binaries_per_class * 2);
    let mut labels = Vec::with_capacity(binaries.capacity());
    for (i, sig) in signatures.iter().enumerate() {
        let name = cap_name(i);
        for b in 0..spec.binaries_per_class {
            let lo = SIG_EMBED_MIN.min(sig.len());
            let hi = SIG_EMBED_MAX.min(sig.len());
            let k = rng.random_range(lo..=hi);
            let terms: Vec<&str> =
                sample(&mut rng, sig.len(), k).iter().map(|idx| sig[idx].as_str()).collect();
            let path = format!("binaries/pos_{name}_{b:03}.bin");
            binaries.push((path.clone(), embed_terms(&mut rng, &terms)));
            labels.push(LabeledSample {
                sample_id: path,
                capability: name.clone(),
                label: Label::Positive,
            });
        }
        for b in 0..spec.binaries_per_class {
            let terms: Vec<&str> =
                sample(&mut rng, spec.noise_vocab_size, NOISE_TERMS_PER_NEGATIVE)
                    .iter()
                    .map(|idx| noise_vocab[idx].as_str())
                    .collect();
            let path = format!("binaries/neg_{name}_{b:03}.bin");
            binaries.push((path.clone(), embed_terms(&mut rng, &terms)));
            labels.push(LabeledSample {
                sample_id: path,
                capability: name.clone(),
                label: Label::Negative,
            });
        }
    }

    Ok(SynthBundle { documents, config, labels, binaries })
}

/// Draw `count` distinct CVCVCV words. Rejection-sampled with a generous
/// attempt budget so pathological collision streaks fail loudly instead of
/// spinning.
fn distinct_words(rng: &mut ChaCha12Rng, count: usize) -> Result<Vec<String>> {
    let mut seen = HashSet::with_capacity(count);
    let mut words = Vec::with_capacity(count);
    let budget = 1000 + count.saturating_mul(100);
    let mut attempts = 0usize;
    while words.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Synth {
                message: format!(
                    "could not draw {count} distinct vocabulary words in {budget} attempts"
                ),
            });
        }
        let mut word = String::with_capacity(6);
        for _ in 0..3 {
            word.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
            word.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        }
        if seen.insert(word.clone()) {
            words.push(word);
        }
    }
    Ok(words)
}

/// Lay terms out as printable runs separated (and bracketed) by 1..=8
/// non-printable bytes, imitating string constants inside a stripped
/// binary.
fn embed_terms(rng: &mut ChaCha12Rng, terms: &[&str]) -> Vec<u8> {
    let mut bytes = Vec::new();
    let gap = |bytes: &mut Vec<u8>, rng: &mut ChaCha12Rng| {
        let len = rng.random_range(1..=GAP_MAX);
        for _ in 0..len {
            bytes.push(NONPRINTABLE[rng.random_range(0..NONPRINTABLE.len())]);
        }
    };
    for term in terms {
        gap(&mut bytes, rng);
        bytes.extend_from_slice(term.as_bytes());
    }
    gap(&mut bytes, rng);
    bytes
}
