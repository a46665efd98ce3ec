mod args;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Parser;
use tpe_core::codec::{read_frame, write_frame, FRAME_MAGIC};
use tpe_core::corpus::ingest_corpus;
use tpe_core::embeddings::{apply_surgery_to_matrix_with, build_split, DegeneratePolicy, EmbeddingMatrix};
use tpe_core::eval::{bench, budget_sweep, compression_report, token_stats, ReportOptions};
use tpe_core::mining::count_ngrams;
use tpe_core::surgery::build;
use tpe_core::{synth, BaseTokenizer, Error, MiningConfig, TokenId, TpeVocabulary};

use args::{Cli, Command, Global};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<Error>())
                .map_or(3, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn need<'a>(opt: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    opt.as_deref()
        .ok_or_else(|| Error::Config(format!("{flag} is required")).into())
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn read_input(path: &Option<PathBuf>) -> Result<Vec<u8>> {
    match path {
        Some(p) => fs::read(p).map_err(|e| Error::Io { path: p.clone(), source: e }.into()),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn corpus(g: &Global) -> Result<Vec<String>> {
    Ok(ingest_corpus(need(&g.corpus, "--corpus")?, g.format)?)
}

fn base_tokenizer(g: &Global) -> Result<Arc<BaseTokenizer>> {
    Ok(Arc::new(BaseTokenizer::load(need(&g.tokenizer, "--tokenizer")?)?))
}

fn extended(g: &Global) -> Result<TpeVocabulary> {
    Ok(TpeVocabulary::load(need(&g.tokenizer, "--tokenizer")?)?)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Mine => {
            let cfg = MiningConfig::new(g.n_max, g.budget, g.min_freq)?;
            let base = base_tokenizer(g)?;
            let table = count_ngrams(&base, &corpus(g)?, &cfg)?;
            emit(&g.out, table.to_tsv(&base).as_bytes())
        }
        Command::Build => {
            let cfg = MiningConfig::new(g.n_max, g.budget, g.min_freq)?;
            let base = base_tokenizer(g)?;
            let v = build(base, &corpus(g)?, &cfg)?;
            emit(&g.out, v.to_json_string().as_bytes())
        }
        Command::Encode { input, binary } => {
            let v = extended(g)?;
            let bytes = read_input(input)?;
            let text = String::from_utf8(bytes)
                .map_err(|e| Error::InvalidUtf8 { offset: e.utf8_error().valid_up_to() })?;
            let ids = v.encode(&text).ids;
            if *binary {
                emit(&g.out, &write_frame(&ids))
            } else {
                let mut s = ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
                s.push('\n');
                emit(&g.out, s.as_bytes())
            }
        }
        Command::Decode { input, lossy } => {
            let v = extended(g)?;
            let bytes = read_input(input)?;
            let ids = if bytes.starts_with(FRAME_MAGIC) {
                read_frame(&bytes)?
            } else {
                parse_ids(&bytes)?
            };
            let text = if *lossy { v.decode_lossy(&ids)? } else { v.decode(&ids)? };
            emit(&g.out, text.as_bytes())
        }
        Command::Report {
            prompt_file,
            include_prompt,
            timing,
            table,
        } => {
            let v = extended(g)?;
            let prompt = match prompt_file {
                Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?),
                None => None,
            };
            let opts = ReportOptions {
                prompt,
                include_prompt: *include_prompt,
                timing: *timing,
            };
            let r = compression_report(&v, &corpus(g)?, &opts);
            let text = if *table { r.to_table() } else { r.to_json_string() };
            emit(&g.out, text.as_bytes())
        }
        Command::Sweep { n_max_list, budgets, tsv } => {
            let base = base_tokenizer(g)?;
            let r = budget_sweep(base, &corpus(g)?, n_max_list, budgets, g.min_freq)?;
            if let Some(p) = tsv {
                fs::write(p, r.to_tsv()).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(&g.out, r.to_json_string().as_bytes())
        }
        Command::Stats { top_k } => {
            let v = extended(g)?;
            let rows = token_stats(&v, &corpus(g)?, *top_k)?;
            let mut out = String::from("rank\tid\ttoken\tcount\n");
            for (i, r) in rows.iter().enumerate() {
                out.push_str(&format!("{}\t{}\t{}\t{}\n", i + 1, r.id, v.vocab().display(r.id), r.count));
            }
            emit(&g.out, out.as_bytes())
        }
        Command::InitEmbeddings {
            embeddings_in,
            manifest,
            text_out,
            fallback_first,
        } => {
            let v = extended(g)?;
            let e = EmbeddingMatrix::load(embeddings_in)?;
            let policy = if *fallback_first {
                DegeneratePolicy::FirstConstituent
            } else {
                DegeneratePolicy::Error
            };
            let out = apply_surgery_to_matrix_with(&e, &v, g.alpha, policy)?;
            let path = need(&g.out, "--out")?;
            out.save(path)?;
            if let Some(m) = manifest {
                fs::write(m, build_split(&v).manifest()).with_context(|| format!("writing {}", m.display()))?;
            }
            if let Some(t) = text_out {
                fs::write(t, out.to_text()).with_context(|| format!("writing {}", t.display()))?;
            }
            Ok(())
        }
        Command::Bench { sizes, runs } => {
            let v = extended(g)?;
            let pool = match &g.corpus {
                Some(_) => corpus(g)?.join("\n"),
                None => synth::clinical_corpus(g.seed, 1 << 20).join("\n"),
            };
            let mut out = String::from("bytes\ttokens\tseconds\ttokens_per_sec\n");
            for r in bench(&v, &pool, sizes, *runs) {
                out.push_str(&format!("{}\t{}\t{:.6}\t{:.0}\n", r.bytes, r.tokens, r.seconds, r.tokens_per_sec));
            }
            emit(&g.out, out.as_bytes())
        }
        Command::GenCorpus {
            bytes,
            general,
            base_out,
            base_vocab,
            base_general_bytes,
            base_domain_bytes,
        } => {
            let docs = if *general {
                synth::general_corpus(g.seed, *bytes)
            } else {
                synth::clinical_corpus(g.seed, *bytes)
            };
            let mut text = docs.join("\n");
            text.push('\n');
            emit(&g.out, text.as_bytes())?;
            if let Some(p) = base_out {
                let base = synth::general_tokenizer(g.seed, *base_general_bytes, *base_domain_bytes, *base_vocab)?;
                base.save(p)?;
            }
            Ok(())
        }
    }
}

fn parse_ids(bytes: &[u8]) -> Result<Vec<TokenId>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 { offset: e.valid_up_to() })?;
    text.split_whitespace()
        .map(|t| {
            t.parse::<TokenId>()
                .map_err(|_| Error::Format(format!("not a token id: {t:?}")).into())
        })
        .collect()
}
