//! Seeded synthetic corpora.
//!
//! `general_corpus` is pseudo-English prose for training a base tokenizer.
//! `clinical_corpus` is note-style text built from templates, Zipf-ranked
//! compositional terms, drug orders and random measurements. The same seed
//! always gives the same documents; the clinical lexicon itself does not
//! depend on the seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::bpe::train::{train, TrainerConfig};
use crate::bpe::BaseTokenizer;
use crate::error::Result;

pub const DEFAULT_SEED: u64 = 20240917;
const LEXICON_SEED: u64 = 0x6c6578;

const COMMON: &[&str] = &[
    "the", "of", "and", "to", "a", "in", "is", "was", "for", "that", "with", "on", "as", "by", "at", "from",
    "this", "be", "are", "or", "not", "it", "an", "his", "her", "they", "which", "were", "had", "has", "have",
    "but", "one", "two", "three", "all", "there", "their", "more", "when", "no", "after", "before", "into",
    "over", "under", "some", "then", "than", "also", "new", "time", "year", "day", "days", "week", "home",
    "left", "right", "upper", "lower", "will", "would", "should", "may", "can", "other", "first", "last",
    "without", "about", "because", "while", "during", "through", "each", "most", "many", "any", "per", "well",
    "history", "family", "work", "water", "small", "large", "long", "short", "high", "low", "normal", "start",
    "continue", "given", "noted", "seen", "found", "shows", "showed", "increase", "decrease", "place", "part",
];

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "br", "cr", "dr",
    "fl", "gr", "pl", "pr", "sh", "st", "th", "tr", "ch", "sp", "qu",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou", "io", "y"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "t", "l", "m", "nd", "st", "ng", "ck", "x"];

const ROOTS: &[&str] = &[
    "cardi", "pulmon", "hepat", "nephr", "gastr", "neur", "oste", "derm", "hemat", "arthr", "bronch", "col",
    "cyst", "encephal", "my", "angi", "lymph", "thromb", "pancreat", "esophag", "laryng", "rhin", "ophthalm",
    "endocrin", "vascul", "ventricul", "atri", "myocardi", "pleur", "periton", "append", "cholecyst", "splen",
    "thyr", "adren", "glomerul", "pyel", "mening", "cellul", "diverticul",
];
const SUFFIXES: &[&str] = &[
    "itis", "osis", "opathy", "ectomy", "algia", "emia", "oma", "ostomy", "ogram", "omegaly", "oplasty", "uria",
    "otomy", "ogenic",
];
const MODIFIERS: &[&str] = &[
    "acute", "chronic", "bilateral", "left", "right", "severe", "mild", "moderate", "recurrent", "primary",
    "secondary", "congestive", "obstructive", "ischemic", "diabetic", "hypertensive", "atrial", "ventricular",
    "pulmonary", "renal", "hepatic", "cerebral", "coronary", "deep", "superficial", "anterior", "posterior",
    "distal", "proximal", "community acquired", "end stage", "non-ST elevation", "decompensated", "metastatic",
];
const HEADS: &[&str] = &[
    "failure", "disease", "infection", "insufficiency", "syndrome", "fracture", "embolism", "stenosis",
    "hemorrhage", "fibrillation", "thrombosis", "edema", "effusion", "obstruction", "injury", "lesion", "mass",
    "ulcer", "pain", "carcinoma", "pneumonia", "myocardial infarction", "artery disease", "vein thrombosis",
];
const DRUG_STEMS: &[&str] = &[
    "lisino", "metop", "atorva", "amoxi", "ceftri", "vanco", "furo", "hepar", "warfa", "insul", "predni",
    "panto", "ondan", "losar", "amlo", "levo", "cipro", "doxy", "gaba", "sertra",
];
const DRUG_SUFFIXES: &[&str] = &[
    "pril", "rolol", "statin", "cillin", "axone", "mycin", "semide", "in", "rin", "ine", "sone", "prazole",
    "setron", "tan", "dipine", "floxacin", "cycline", "pentin", "line",
];
const ROUTES: &[&str] = &["PO", "IV", "SC", "IM", "PR"];
const FREQS: &[&str] = &["daily", "BID", "TID", "q6h", "q8h", "nightly", "PRN", "once"];
const LABS: &[(&str, &str, u32, u32)] = &[
    ("sodium", "mmol/L", 125, 150),
    ("potassium", "mmol/L", 30, 60),
    ("creatinine", "mg/dL", 5, 60),
    ("hemoglobin", "g/dL", 60, 170),
    ("white blood cell count", "K/uL", 20, 250),
    ("platelet count", "K/uL", 50, 450),
    ("troponin", "ng/mL", 1, 90),
    ("lactate", "mmol/L", 5, 80),
    ("glucose", "mg/dL", 60, 400),
    ("total bilirubin", "mg/dL", 2, 90),
];
const SITES: &[&str] = &[
    "chest", "abdomen", "pelvis", "head", "left lower extremity", "right lower extremity", "lumbar spine",
    "right upper quadrant", "left lung base", "right lung base",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(1..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(NUCLEI.choose(rng).unwrap());
        w.push_str(CODAS.choose(rng).unwrap());
    }
    w
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Pseudo-English prose, one paragraph per document, until roughly
/// `target_bytes` have been produced.
pub fn general_corpus(seed: u64, target_bytes: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x67656e);
    let lexicon: Vec<String> = (0..20_000).map(|_| pseudo_word(&mut rng)).collect();
    let zipf = Zipf::new(lexicon.len() as u64, 1.05).unwrap();
    let mut docs = Vec::new();
    let mut total = 0;
    while total < target_bytes {
        let mut doc = String::new();
        for s in 0..rng.gen_range(2..8) {
            if s > 0 {
                doc.push(' ');
            }
            let n = rng.gen_range(6..20);
            for i in 0..n {
                let w: String = if rng.gen_bool(0.45) {
                    COMMON.choose(&mut rng).unwrap().to_string()
                } else if rng.gen_bool(0.03) {
                    rng.gen_range(0..2000).to_string()
                } else {
                    lexicon[zipf.sample(&mut rng) as usize - 1].clone()
                };
                if i == 0 {
                    doc.push_str(&capitalize(&w));
                } else {
                    doc.push(' ');
                    doc.push_str(&w);
                }
                if i + 1 < n && rng.gen_bool(0.06) {
                    doc.push(',');
                }
            }
            doc.push('.');
        }
        total += doc.len() + 1;
        docs.push(doc);
    }
    docs
}

const MED_ONSETS: &[&str] = &[
    "ph", "th", "ch", "rh", "ps", "pn", "gl", "hy", "my", "cy", "ly", "xy", "br", "cr", "tr", "st", "sp", "sc",
    "c", "d", "g", "l", "m", "n", "p", "r", "s", "t", "v",
];
const MED_NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "y", "ae", "oe", "eu"];
const MED_CODAS: &[&str] = &["", "", "l", "n", "r", "s", "t", "x", "ph", "th"];
const MED_ENDINGS: &[&str] = &[
    "itis", "osis", "emia", "oma", "ectomy", "al", "ic", "ine", "ase", "ide", "ia", "ous", "ary", "ism",
];

fn med_word(rng: &mut ChaCha8Rng) -> String {
    let mut w = String::new();
    for _ in 0..rng.gen_range(1..=3) {
        w.push_str(MED_ONSETS.choose(rng).unwrap());
        w.push_str(MED_NUCLEI.choose(rng).unwrap());
        w.push_str(MED_CODAS.choose(rng).unwrap());
    }
    w.push_str(MED_ENDINGS.choose(rng).unwrap());
    w
}

struct ClinicalLexicon {
    words: Vec<String>,
    terms: Vec<String>,
    drugs: Vec<String>,
}

impl ClinicalLexicon {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut words: Vec<String> = ROOTS
            .iter()
            .flat_map(|r| SUFFIXES.iter().map(move |s| format!("{r}{s}")))
            .collect();
        words.extend(HEADS.iter().map(|h| h.to_string()));
        words.extend(MODIFIERS.iter().map(|m| m.to_string()));
        words.extend((0..6000).map(|_| med_word(rng)));
        words.sort();
        words.dedup();
        words.shuffle(rng);

        let mut terms = Vec::new();
        for m in MODIFIERS {
            for h in HEADS {
                terms.push(format!("{m} {h}"));
            }
        }
        let word_z = Zipf::new(words.len() as u64, 1.0).unwrap();
        for _ in 0..12_000 {
            let w = &words[word_z.sample(rng) as usize - 1];
            let t = match rng.gen_range(0..3) {
                0 => format!("{} {w}", MODIFIERS.choose(rng).unwrap()),
                1 => format!("{w} {}", HEADS.choose(rng).unwrap()),
                _ => format!("{} {w} {}", MODIFIERS.choose(rng).unwrap(), HEADS.choose(rng).unwrap()),
            };
            terms.push(t);
        }
        terms.sort();
        terms.dedup();
        terms.shuffle(rng);

        let mut drugs: Vec<String> = DRUG_STEMS
            .iter()
            .flat_map(|s| DRUG_SUFFIXES.iter().map(move |x| format!("{s}{x}")))
            .collect();
        for _ in 0..1500 {
            let mut d = String::new();
            for _ in 0..rng.gen_range(1..=2) {
                d.push_str(MED_ONSETS.choose(rng).unwrap());
                d.push_str(MED_NUCLEI.choose(rng).unwrap());
            }
            d.push_str(DRUG_SUFFIXES.choose(rng).unwrap());
            drugs.push(d);
        }
        drugs.sort();
        drugs.dedup();
        drugs.shuffle(rng);
        Self { words, terms, drugs }
    }
}

/// Note-style clinical text, one note per document, until roughly
/// `target_bytes` have been produced.
pub fn clinical_corpus(seed: u64, target_bytes: usize) -> Vec<String> {
    let lex = ClinicalLexicon::new(&mut ChaCha8Rng::seed_from_u64(LEXICON_SEED));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636c696e);
    let z = Samplers {
        word: Zipf::new(lex.words.len() as u64, 1.0).unwrap(),
        term: Zipf::new(lex.terms.len() as u64, 1.0).unwrap(),
        drug: Zipf::new(lex.drugs.len() as u64, 1.1).unwrap(),
        common: Zipf::new(COMMON.len() as u64, 0.8).unwrap(),
    };
    let mut docs = Vec::new();
    let mut total = 0;
    while total < target_bytes {
        let doc = note(&mut rng, &lex, &z);
        total += doc.len() + 1;
        docs.push(doc);
    }
    docs
}

struct Samplers {
    word: Zipf<f64>,
    term: Zipf<f64>,
    drug: Zipf<f64>,
    common: Zipf<f64>,
}

fn narrative(rng: &mut ChaCha8Rng, lex: &ClinicalLexicon, z: &Samplers) -> String {
    let n = rng.gen_range(6..18);
    let mut words: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        let roll: f64 = rng.gen();
        let w = if roll < 0.45 {
            COMMON[z.common.sample(rng) as usize - 1].to_string()
        } else if roll < 0.78 {
            lex.words[z.word.sample(rng) as usize - 1].clone()
        } else if roll < 0.93 {
            lex.terms[z.term.sample(rng) as usize - 1].clone()
        } else if roll < 0.97 {
            lex.drugs[z.drug.sample(rng) as usize - 1].clone()
        } else {
            rng.gen_range(0..500).to_string()
        };
        words.push(w);
    }
    let mut s = capitalize(&words.join(" "));
    s.push('.');
    s
}

fn note(rng: &mut ChaCha8Rng, lex: &ClinicalLexicon, z: &Samplers) -> String {
    let term = |rng: &mut ChaCha8Rng| lex.terms[z.term.sample(rng) as usize - 1].as_str();
    let drug = |rng: &mut ChaCha8Rng| lex.drugs[z.drug.sample(rng) as usize - 1].as_str();
    let mut out: Vec<String> = Vec::new();
    let sex = if rng.gen_bool(0.5) { "male" } else { "female" };
    out.push(format!(
        "Patient is a {}-year-old {sex} with a history of {} and {}.",
        rng.gen_range(18..96),
        term(rng),
        term(rng)
    ));
    for _ in 0..rng.gen_range(3..18) {
        if rng.gen_bool(0.5) {
            out.push(narrative(rng, lex, z));
            continue;
        }
        let s = match rng.gen_range(0..10) {
            0 => format!("Presents with {}.", term(rng)),
            1 => format!(
                "Vital signs: BP {}/{} mmHg, HR {} bpm, RR {}, SpO2 {}% on room air, temperature {}.{} C.",
                rng.gen_range(85..190),
                rng.gen_range(45..110),
                rng.gen_range(45..140),
                rng.gen_range(10..32),
                rng.gen_range(84..101),
                rng.gen_range(35..40),
                rng.gen_range(0..10)
            ),
            2 => format!(
                "Started on {} {} mg {} {}.",
                drug(rng),
                [5, 10, 20, 25, 40, 50, 100, 250, 500, 1000][rng.gen_range(0..10)],
                ROUTES.choose(rng).unwrap(),
                FREQS.choose(rng).unwrap()
            ),
            3 => {
                let (name, unit, lo, hi) = LABS.choose(rng).unwrap();
                let v = rng.gen_range(*lo..=*hi);
                format!("Labs notable for {name} {}.{} {unit}.", v / 10, v % 10)
            }
            4 => format!("Assessment and plan: {}, continue {}.", term(rng), drug(rng)),
            5 => format!("Imaging of the {} showed {}.", SITES.choose(rng).unwrap(), term(rng)),
            6 => format!("No evidence of {}.", term(rng)),
            7 => format!("Differential diagnosis includes {} versus {}.", term(rng), term(rng)),
            8 => format!("Follow up in {} weeks for {}.", rng.gen_range(1..9), term(rng)),
            _ => "Discharged home in stable condition.".to_string(),
        };
        out.push(s);
    }
    out.join(" ")
}

/// Base tokenizer trained on `general_corpus(seed, train_bytes)` mixed with
/// `domain_bytes` of clinical text sampled under a different seed.
pub fn general_tokenizer(seed: u64, train_bytes: usize, domain_bytes: usize, vocab_size: usize) -> Result<BaseTokenizer> {
    let mut docs = general_corpus(seed, train_bytes);
    if domain_bytes > 0 {
        docs.extend(clinical_corpus(seed.wrapping_add(0x9e37_79b9), domain_bytes));
    }
    let cfg = TrainerConfig {
        vocab_size,
        ..TrainerConfig::default()
    };
    train(docs.iter().map(String::as_str), &cfg)
}
