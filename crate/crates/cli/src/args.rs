use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tpe_core::corpus::CorpusFormat;
use tpe_core::synth::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(name = "tpe", version, about = "Extend a byte-level BPE tokenizer with mined multi-token merges")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Tokenizer file (base or extended, depending on the command)
    #[arg(long, global = true)]
    pub tokenizer: Option<PathBuf>,
    /// Corpus file
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Corpus layout: `lines` or `jsonl`
    #[arg(long, global = true, default_value = "lines")]
    pub format: CorpusFormat,
    /// Output path; stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 2)]
    pub n_max: usize,
    /// Number of tokens to replace
    #[arg(long, global = true, default_value_t = 5000)]
    pub budget: usize,
    #[arg(long, global = true, default_value_t = 2)]
    pub min_freq: u64,
    /// Norm scale for new embedding rows
    #[arg(long, global = true, default_value_t = 0.5)]
    pub alpha: f64,
    /// Worker threads; all cores when omitted
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for the corpus generator
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count N-grams of a base tokenizer over a corpus and write the candidate table
    Mine,
    /// Mine, replace and write an extended tokenizer
    Build,
    /// Encode text to ids
    Encode {
        /// Input text file; stdin when omitted
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write an MTPE binary frame instead of whitespace-separated ids
        #[arg(long)]
        binary: bool,
    },
    /// Decode ids (text or MTPE frame) back to text
    Decode {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Replace invalid UTF-8 instead of failing
        #[arg(long)]
        lossy: bool,
    },
    /// Compression report over a corpus
    Report {
        /// Task prompt appended to every document
        #[arg(long)]
        prompt_file: Option<PathBuf>,
        /// Count the prompt in the compression rate
        #[arg(long)]
        include_prompt: bool,
        /// Record encoding wall time (makes the report non-reproducible)
        #[arg(long)]
        timing: bool,
        /// Print a short table instead of JSON
        #[arg(long)]
        table: bool,
    },
    /// Compression rate over a grid of N-gram limits and budgets
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        n_max_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "100,500,1000,5000")]
        budgets: Vec<usize>,
        /// Also write the grid as TSV
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Most frequent inserted tokens in the encoded corpus
    Stats {
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Initialize embedding rows for inserted tokens
    InitEmbeddings {
        #[arg(long)]
        embeddings_in: PathBuf,
        /// Newline-separated trainable row ids
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Plain-text copy of the output matrix
        #[arg(long)]
        text_out: Option<PathBuf>,
        /// Use the first constituent's direction when constituents cancel
        #[arg(long)]
        fallback_first: bool,
    },
    /// Encoding throughput at several input sizes
    Bench {
        /// Sizes in bytes
        #[arg(long, value_delimiter = ',', default_value = "1048576,2097152,4194304,8388608")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
    /// Write a seeded synthetic clinical corpus
    GenCorpus {
        /// Approximate corpus size in bytes
        #[arg(long, default_value_t = 10 << 20)]
        bytes: usize,
        /// Emit general prose instead of clinical notes
        #[arg(long)]
        general: bool,
        /// Also train and write a base tokenizer here
        #[arg(long)]
        base_out: Option<PathBuf>,
        #[arg(long, default_value_t = 32768)]
        base_vocab: usize,
        /// General prose bytes used for base training
        #[arg(long, default_value_t = 4 << 20)]
        base_general_bytes: usize,
        /// Clinical bytes (drawn under another seed) mixed into base training
        #[arg(long, default_value_t = 4 << 20)]
        base_domain_bytes: usize,
    },
}
