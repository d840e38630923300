//! Subcommand implementations.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coherent_core::domain::{read_corpus, write_corpus};
use coherent_core::eval::report::{cv_table, per_label_table, transfer_table};
use coherent_core::eval::{
    cross_domain, domain_tags, evaluate, kfold_with, run_cv, synth_generate, CvReport, FusionTrainer, SynthProfile,
};
use coherent_core::fusion::{checkpoint, train, FusionModel, ModelConfig, TrainConfig};
use coherent_core::prompt::prompt_for;
use coherent_core::{build_graph, Document, Variant};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::provenance::provenance;

fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let f = File::open(path).with_context(|| format!("opening corpus {}", path.display()))?;
    let docs = read_corpus(BufReader::new(f)).with_context(|| format!("reading corpus {}", path.display()))?;
    if docs.is_empty() {
        warn!("{}: corpus is empty", path.display());
    }
    Ok(docs)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn build_graph_cmd(args: &BuildGraphArgs) -> Result<()> {
    let prov = provenance("build-graph", args)?;
    let docs = load_corpus(&args.corpus)?;
    let mut w = create(&args.out)?;
    serde_json::to_writer(&mut w, &json!({ "provenance": prov }))?;
    w.write_all(b"\n")?;
    let (mut n_ent, mut n_rel) = (0, 0);
    for doc in &docs {
        let g = build_graph(doc)?;
        n_ent += g.entity_edges.len();
        n_rel += g.relation_edges.len();
        serde_json::to_writer(&mut w, &g)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    println!("documents: {}  entity edges: {n_ent}  relation edges: {n_rel}", docs.len());
    Ok(())
}

pub fn emit_prompts_cmd(args: &EmitPromptsArgs) -> Result<()> {
    let prov = provenance("emit-prompts", args)?;
    let docs = load_corpus(&args.corpus)?;
    let mut seen = BTreeSet::new();
    for d in &docs {
        if d.id.is_empty() || d.id.contains(['/', '\\']) || d.id.starts_with('.') {
            bail!("document id {:?} cannot be used as a file name", d.id);
        }
        if !seen.insert(d.id.as_str()) {
            bail!("duplicate document id {:?}", d.id);
        }
    }
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut rows = Vec::new();
    for doc in &docs {
        let graph = build_graph(doc)?;
        for &variant in &args.variants {
            let p = prompt_for(doc, &graph, variant, args.char_budget)?;
            if let Some(t) = &p.truncation {
                warn!(
                    "{} ({variant}): prompt of {} chars exceeds budget {}, dropped {} triples",
                    doc.id, t.original_chars, args.char_budget, t.dropped_triples
                );
            }
            write_text(&args.out_dir.join(p.file_name()), &p.text)?;
            rows.push((p.doc_id.clone(), variant.to_string(), p.char_count(), p.triples_used.len()));
        }
    }
    rows.sort();
    let mut index = format!("# provenance {}\ndoc_id\tvariant\tchar_count\ttriple_count\n", serde_json::to_string(&prov)?);
    for (id, v, chars, triples) in &rows {
        index.push_str(&format!("{id}\t{v}\t{chars}\t{triples}\n"));
    }
    write_text(&args.out_dir.join("index.tsv"), &index)?;
    println!("prompts written: {}", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct TrainRun<'a> {
    corpus: &'a Path,
    model: &'a ModelConfig,
    train: &'a TrainConfig,
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let (model_cfg, train_cfg) = resolve(&args.model, &args.train)?;
    let prov = provenance(
        "train",
        &TrainRun {
            corpus: &args.corpus,
            model: &model_cfg,
            train: &train_cfg,
        },
    )?;
    let docs = load_corpus(&args.corpus)?;
    if docs.is_empty() {
        bail!("cannot train on an empty corpus");
    }
    info!(
        "training {} (d_model {}, {} heads, {} layers) on {} documents for {} epochs",
        model_cfg.variant,
        model_cfg.d_model,
        model_cfg.n_heads,
        model_cfg.n_layers,
        docs.len(),
        train_cfg.epochs
    );
    let outcome = train(FusionModel::new(model_cfg)?, &docs, &train_cfg)?;
    for e in &outcome.epochs {
        info!("epoch {:>2}  loss {:.4}  acc {:.4}  {} ms", e.epoch, e.loss, e.accuracy, e.wall_ms);
    }
    let prov_value = serde_json::to_value(&prov)?;
    let mut w = create(&args.out)?;
    checkpoint::save_with_provenance(&outcome.model, Some(&prov_value), &mut w)?;
    w.flush()?;

    let metrics_path = args
        .metrics
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.metrics.jsonl", args.out.display())));
    let mut m = create(&metrics_path)?;
    serde_json::to_writer(&mut m, &json!({ "provenance": prov }))?;
    m.write_all(b"\n")?;
    for e in &outcome.epochs {
        serde_json::to_writer(&mut m, e)?;
        m.write_all(b"\n")?;
    }
    m.flush()?;
    if let Some(last) = outcome.epochs.last() {
        println!("final epoch: loss {:.4}  training accuracy {:.4}", last.loss, last.accuracy);
    }
    Ok(())
}

pub fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let f = File::open(&args.checkpoint).with_context(|| format!("opening checkpoint {}", args.checkpoint.display()))?;
    let (model, ckpt_prov) = checkpoint::load_with_provenance(BufReader::new(f))
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    if args.model.is_set() {
        let requested = args.model.apply(model.config.clone(), None)?;
        let diff = model.config.diff(&requested);
        if !diff.is_empty() {
            bail!(
                "checkpoint config does not match the requested flags (checkpoint vs requested):\n  {}",
                diff.join("\n  ")
            );
        }
    }
    let prov = provenance(
        "eval",
        &json!({ "corpus": args.corpus, "checkpoint": args.checkpoint, "model": model.config }),
    )?;
    let docs = load_corpus(&args.corpus)?;
    if docs.is_empty() {
        bail!("cannot evaluate on an empty corpus");
    }
    let report = evaluate(&model, &docs)?;
    println!(
        "documents: {}  accuracy: {:.4}  macro-F1: {:.4}  range: {:.4}",
        report.n, report.accuracy, report.macro_f1, report.range
    );
    if let Some(out) = &args.out {
        write_json(
            out,
            &json!({ "provenance": prov, "checkpoint_provenance": ckpt_prov, "report": report }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CvRun<'a> {
    corpus: &'a Path,
    k: usize,
    fold_seed: u64,
    stratified: bool,
    variants: &'a [Variant],
    model: &'a ModelConfig,
    train: &'a TrainConfig,
}

pub fn cv_cmd(args: &CvArgs) -> Result<()> {
    let (model_cfg, train_cfg) = resolve(&args.model, &args.train)?;
    let variants: Vec<Variant> = match (&args.variants[..], args.model.variant) {
        ([], Some(v)) => vec![v],
        ([], None) => Variant::ALL.to_vec(),
        (vs, _) => vs.to_vec(),
    };
    let prov = provenance(
        "cv",
        &CvRun {
            corpus: &args.corpus,
            k: args.k,
            fold_seed: args.fold_seed,
            stratified: !args.plain_folds,
            variants: &variants,
            model: &model_cfg,
            train: &train_cfg,
        },
    )?;
    let docs = load_corpus(&args.corpus)?;
    let plan = kfold_with(&docs, args.k, args.fold_seed, !args.plain_folds)?;
    let base = FusionTrainer::new(model_cfg, train_cfg);
    let mut reports: Vec<CvReport> = Vec::new();
    for v in variants {
        info!("cross-validating {v} over {} folds", plan.k);
        let mut r = run_cv(&docs, &plan, &base.with_variant(v))?;
        // Per-epoch histories carry wall-clock time; keep reports byte-stable.
        for f in &mut r.folds {
            f.history.clear();
        }
        reports.push(r);
    }
    let tables = format!("{}\n{}", cv_table(&reports), per_label_table(&reports));
    print!("{tables}");
    fs::create_dir_all(&args.out_dir)?;
    write_json(
        &args.out_dir.join("cv.json"),
        &json!({ "provenance": prov, "fold_sizes": plan.fold_sizes(), "reports": reports }),
    )?;
    write_text(
        &args.out_dir.join("cv.md"),
        &format!("<!-- config_hash {} -->\n{tables}", prov.config_hash),
    )?;
    Ok(())
}

pub fn xdomain_cmd(args: &XdomainArgs) -> Result<()> {
    let (model_cfg, train_cfg) = resolve(&args.model, &args.train)?;
    let docs = load_corpus(&args.corpus)?;
    let test_tags: Vec<String> = if args.test_tags.is_empty() {
        domain_tags(&docs).into_iter().filter(|t| *t != args.train_tag).collect()
    } else {
        args.test_tags.clone()
    };
    let prov = provenance(
        "xdomain",
        &json!({
            "corpus": args.corpus,
            "train_tag": args.train_tag,
            "test_tags": test_tags,
            "model": model_cfg,
            "train": train_cfg,
        }),
    )?;
    let trainer = FusionTrainer::new(model_cfg, train_cfg);
    let baseline = trainer.with_variant(Variant::TextOnly);
    let report = cross_domain(&args.train_tag, &test_tags, &docs, &trainer, &baseline)?;
    let table = transfer_table(&report);
    print!("{table}");
    fs::create_dir_all(&args.out_dir)?;
    write_json(&args.out_dir.join("xdomain.json"), &json!({ "provenance": prov, "report": report }))?;
    write_text(
        &args.out_dir.join("xdomain.md"),
        &format!("<!-- config_hash {} -->\n{table}", prov.config_hash),
    )?;
    Ok(())
}

pub fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let profile = SynthProfile {
        domain: args.domain.clone(),
        text_signal: args.text_signal,
        min_sentences: args.min_sentences,
        max_sentences: args.max_sentences,
        ..Default::default()
    };
    let prov = provenance("synth", &json!({ "n_docs": args.n_docs, "seed": args.seed, "profile": profile }))?;
    let docs = synth_generate(args.n_docs, args.seed, &profile)?;
    let mut w = create(&args.out)?;
    write_corpus(&mut w, &docs)?;
    w.flush()?;
    // The corpus itself must stay readable as a corpus, so provenance goes alongside.
    write_json(&PathBuf::from(format!("{}.provenance.json", args.out.display())), &prov)?;
    println!("documents: {}", docs.len());
    Ok(())
}
