use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use legalret_core::bm25::Bm25Index;
use legalret_core::dataset::{
    filter_qa, generate_pairs, load_corpus, load_questions, read_pairs_jsonl, split_dev,
    write_pairs_jsonl, ArticleKey, PreparedCorpus, Question,
};
use legalret_core::eval::evaluate_run;
use legalret_core::lm::{filter_scored, train_lm, NGramLm, ScoreStream};
use legalret_core::pipeline::{
    read_submission, run_pipeline, vote, write_submission, ExternalScorer, LexicalScorer,
    Predictions, RunResult, Scorer,
};
use legalret_core::Analyzer;
use serde_json::json;

use crate::config::{Paths, RunConfig};
use crate::mock_scorer::MockScorerArgs;
use crate::output::{finish, OutputDir, Summary};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Normalize text lines (one input line per output line).
    Normalize(NormalizeArgs),
    /// Build a BM25 index over the corpus articles.
    BuildIndex(CorpusArgs),
    /// Top-k BM25 articles for ad-hoc queries or a questions file.
    Search(SearchArgs),
    /// Split every article into token-window passages.
    Segment(CorpusArgs),
    /// Labelled (question, passage) training pairs with BM25 hard negatives.
    GenPairs(GenPairsArgs),
    /// Question-disjoint train/dev split of a pairs file.
    Split(SplitArgs),
    /// Train an n-gram LM on sentences (one per line).
    BuildLm(BuildLmArgs),
    /// Perplexity of each input sentence.
    Ppl(PplArgs),
    /// Keep sentences whose perplexity falls within the selection threshold.
    SelectIndomain(SelectArgs),
    /// Retrieve, score passages, aggregate and select articles per question.
    RunPipeline(RunPipelineArgs),
    /// Combine several runs by weighted score averaging.
    Vote(VoteArgs),
    /// Precision, recall, F1 and F2 of a run against gold questions.
    Evaluate(EvaluateArgs),
    /// Drop QA records with long or article-list answers.
    FilterQa(FilterQaArgs),
    /// Reference implementation of the external scorer protocol.
    #[command(hide = true)]
    MockScorer(MockScorerArgs),
}

#[derive(Args, Debug, Default)]
pub struct CorpusArgs {
    /// Corpus JSON file.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Passage window in tokens.
    #[arg(long)]
    window: Option<usize>,
    /// Passage stride in tokens.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args, Debug)]
pub struct NormalizeArgs {
    /// Text file, or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    /// Emit analyzed tokens (compounds joined with `_`) instead of
    /// normalized text.
    #[arg(long)]
    tokens: bool,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Saved index; built from the corpus when absent.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Query text; repeatable.
    #[arg(long = "query")]
    queries: Vec<String>,
    /// Questions file whose texts are used as queries.
    #[arg(long)]
    questions: Option<PathBuf>,
    /// Hits per query [default: pipeline.k_retrieve].
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenPairsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    /// Retrieved articles per question.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_question_tokens: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Pairs JSONL file.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    dev_fraction: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BuildLmArgs {
    /// Sentence file, or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long)]
    unk_threshold: Option<u32>,
}

#[derive(Args, Debug)]
pub struct PplArgs {
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Sentence file, or `-` for stdin.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Sentence file scored with the LM.
    #[arg(long, conflicts_with = "scored")]
    input: Option<PathBuf>,
    /// Pre-scored TSV (`perplexity<TAB>sentence`), e.g. the output of `ppl`.
    #[arg(long)]
    scored: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    min_perplexity: Option<f64>,
}

#[derive(Args, Debug)]
pub struct RunPipelineArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    k_retrieve: Option<usize>,
    /// `top1` or `threshold:<tau>`.
    #[arg(long)]
    selection: Option<String>,
    /// Per-batch timeout for an external scorer.
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// External scorer command, after `--`. Uses the builtin lexical
    /// scorer when absent.
    #[arg(last = true)]
    scorer_cmd: Vec<String>,
}

#[derive(Args, Debug)]
pub struct VoteArgs {
    /// Run files written by `run-pipeline` or `vote`.
    #[arg(long = "run", required = true, num_args = 1..)]
    runs: Vec<PathBuf>,
    /// One weight per run [default: all 1].
    #[arg(long = "weight", num_args = 1..)]
    weights: Vec<f64>,
    #[arg(long)]
    selection: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Submission, run file or questions file to score.
    #[arg(long)]
    run: PathBuf,
    /// Gold questions file.
    #[arg(long)]
    questions: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FilterQaArgs {
    /// QA records in the questions format.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    max_answer_words: Option<usize>,
}

fn set<T>(slot: &mut T, value: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = value {
        *slot = v.clone();
    }
}

fn set_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

fn check_input(path: &Path) -> Result<()> {
    if path != Path::new("-") && !path.exists() {
        bail!("input {} does not exist", path.display());
    }
    Ok(())
}

impl CorpusArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set_path(&mut cfg.paths.corpus, &self.corpus);
        set(&mut cfg.bm25.k1, &self.k1);
        set(&mut cfg.bm25.b, &self.b);
        set(&mut cfg.segmentation.window, &self.window);
        set(&mut cfg.segmentation.stride, &self.stride);
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Normalize(_) => "normalize",
            Command::BuildIndex(_) => "build-index",
            Command::Search(_) => "search",
            Command::Segment(_) => "segment",
            Command::GenPairs(_) => "gen-pairs",
            Command::Split(_) => "split",
            Command::BuildLm(_) => "build-lm",
            Command::Ppl(_) => "ppl",
            Command::SelectIndomain(_) => "select-indomain",
            Command::RunPipeline(_) => "run-pipeline",
            Command::Vote(_) => "vote",
            Command::Evaluate(_) => "evaluate",
            Command::FilterQa(_) => "filter-qa",
            Command::MockScorer(_) => "mock-scorer",
        }
    }

    /// Fold subcommand flags into the config; flags win.
    pub fn apply_overrides(&self, cfg: &mut RunConfig) -> Result<()> {
        match self {
            Command::BuildIndex(a) | Command::Segment(a) => a.apply(cfg),
            Command::Search(a) => {
                a.corpus.apply(cfg);
                set_path(&mut cfg.paths.index, &a.index);
                set_path(&mut cfg.paths.questions, &a.questions);
            }
            Command::GenPairs(a) => {
                a.corpus.apply(cfg);
                set_path(&mut cfg.paths.questions, &a.questions);
                set_path(&mut cfg.paths.index, &a.index);
                set(&mut cfg.pairs.k, &a.k);
                set(&mut cfg.pairs.max_question_tokens, &a.max_question_tokens);
            }
            Command::Split(a) => set(&mut cfg.pairs.dev_fraction, &a.dev_fraction),
            Command::BuildLm(a) => {
                set(&mut cfg.lm.order, &a.order);
                set(&mut cfg.lm.discount, &a.discount);
                set(&mut cfg.lm.unk_threshold, &a.unk_threshold);
            }
            Command::Ppl(a) => set_path(&mut cfg.paths.lm, &a.lm),
            Command::SelectIndomain(a) => {
                set_path(&mut cfg.paths.lm, &a.lm);
                set(&mut cfg.selection.threshold, &a.threshold);
                if a.min_perplexity.is_some() {
                    cfg.selection.min_perplexity = a.min_perplexity;
                }
            }
            Command::RunPipeline(a) => {
                a.corpus.apply(cfg);
                set_path(&mut cfg.paths.questions, &a.questions);
                set_path(&mut cfg.paths.index, &a.index);
                set(&mut cfg.pipeline.k_retrieve, &a.k_retrieve);
                set(&mut cfg.pipeline.selection, &a.selection);
                set(&mut cfg.pipeline.timeout_secs, &a.timeout_secs);
                if !a.scorer_cmd.is_empty() {
                    cfg.pipeline.scorer_cmd.clone_from(&a.scorer_cmd);
                }
            }
            Command::Vote(a) => set(&mut cfg.pipeline.selection, &a.selection),
            Command::Evaluate(a) => set_path(&mut cfg.paths.questions, &a.questions),
            Command::FilterQa(a) => {
                set_path(&mut cfg.paths.questions, &a.input);
                set(&mut cfg.qa.max_answer_words, &a.max_answer_words);
            }
            Command::Normalize(_) | Command::MockScorer(_) => {}
        }
        Ok(())
    }

    /// Checks that need the resolved config but no real work: required
    /// inputs are present.
    pub fn preflight(&self, cfg: &RunConfig) -> Result<()> {
        let p = &cfg.paths;
        match self {
            Command::Normalize(a) => check_input(&a.input)?,
            Command::BuildIndex(_) | Command::Segment(_) => {
                Paths::require(&p.corpus, "corpus")?;
            }
            Command::Search(a) => {
                if p.index.is_none() {
                    Paths::require(&p.corpus, "corpus")?;
                }
                if a.queries.is_empty() && p.questions.is_none() {
                    bail!("search needs --query or --questions");
                }
                if a.k == Some(0) {
                    bail!("--k must be >= 1");
                }
            }
            Command::GenPairs(_) | Command::RunPipeline(_) => {
                Paths::require(&p.corpus, "corpus")?;
                Paths::require(&p.questions, "questions")?;
            }
            Command::Split(a) => check_input(&a.pairs)?,
            Command::BuildLm(a) => check_input(&a.input)?,
            Command::Ppl(a) => {
                Paths::require(&p.lm, "lm")?;
                check_input(&a.input)?;
            }
            Command::SelectIndomain(a) => match (&a.input, &a.scored) {
                (Some(input), None) => {
                    Paths::require(&p.lm, "lm")?;
                    check_input(input)?;
                }
                (None, Some(scored)) => check_input(scored)?,
                _ => bail!("select-indomain needs exactly one of --input (with an LM) or --scored"),
            },
            Command::Vote(a) => {
                for r in &a.runs {
                    check_input(r)?;
                }
                if !a.weights.is_empty() && a.weights.len() != a.runs.len() {
                    bail!(
                        "{} weights given for {} runs",
                        a.weights.len(),
                        a.runs.len()
                    );
                }
            }
            Command::Evaluate(a) => {
                check_input(&a.run)?;
                Paths::require(&p.questions, "questions")?;
            }
            Command::FilterQa(_) => {
                Paths::require(&p.questions, "input")?;
            }
            Command::MockScorer(_) => {}
        }
        Ok(())
    }

    pub fn execute(
        &self,
        cfg: &RunConfig,
        out: &mut OutputDir,
        summary: &mut Summary,
    ) -> Result<()> {
        match self {
            Command::Normalize(a) => normalize(a, cfg, out, summary),
            Command::BuildIndex(_) => build_index(cfg, out, summary),
            Command::Search(a) => search(a, cfg, out, summary),
            Command::Segment(_) => segment(cfg, out, summary),
            Command::GenPairs(_) => gen_pairs(cfg, out, summary),
            Command::Split(a) => split(a, cfg, out, summary),
            Command::BuildLm(a) => build_lm(a, cfg, out, summary),
            Command::Ppl(a) => ppl(a, cfg, out, summary),
            Command::SelectIndomain(a) => select_indomain(a, cfg, out, summary),
            Command::RunPipeline(_) => run(cfg, out, summary),
            Command::Vote(a) => vote_runs(a, cfg, out, summary),
            Command::Evaluate(a) => evaluate(a, cfg, out, summary),
            Command::FilterQa(_) => filter(cfg, out, summary),
            Command::MockScorer(_) => unreachable!("handled before config loading"),
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(BufReader::new(std::io::stdin()))
    } else {
        let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Box::new(BufReader::new(f))
    };
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.with_context(|| format!("{}: line {}", path.display(), i + 1)))
        .collect()
}

fn prepare_corpus(
    cfg: &RunConfig,
    analyzer: &Analyzer,
    summary: &mut Summary,
) -> Result<PreparedCorpus> {
    let path = Paths::require(&cfg.paths.corpus, "corpus")?;
    let corpus = summary.time("load_corpus", || load_corpus(path))?;
    summary.count("articles", corpus.len());
    summary.count("laws", corpus.n_laws());
    let seg = cfg.segmentation()?;
    let prepared = summary.time("analyze", || PreparedCorpus::new(corpus, analyzer, seg))?;
    summary.count("passages", prepared.n_passages());
    Ok(prepared)
}

fn index_for(
    cfg: &RunConfig,
    prepared: Option<&PreparedCorpus>,
    summary: &mut Summary,
) -> Result<Bm25Index> {
    if let Some(path) = &cfg.paths.index {
        return Ok(summary.time("load_index", || Bm25Index::load(path))?);
    }
    let prepared = prepared.context("no index given and no corpus to build one from")?;
    let params = cfg.bm25_params()?;
    Ok(summary.time("build_index", || prepared.build_index(params))?)
}

fn load_gold(cfg: &RunConfig) -> Result<Vec<Question>> {
    Ok(load_questions(Paths::require(
        &cfg.paths.questions,
        "questions",
    )?)?)
}

fn normalize(
    a: &NormalizeArgs,
    cfg: &RunConfig,
    out: &mut OutputDir,
    summary: &mut Summary,
) -> Result<()> {
    let analyzer = cfg.analyzer()?;
    let lines = read_lines(&a.input)?;
    let mut w = out.writer("normalized.txt")?;
    summary.time("normalize", || -> Result<()> {
        for line in &lines {
            let analyzed = analyzer.analyze(line);
            if a.tokens {
                writeln!(w, "{}", analyzed.tokens.tokens().join(" "))?;
            } else {
                writeln!(w, "{}", analyzed.text)?;
            }
        }
        Ok(())
    })?;
    finish(w)?;
    summary.count("lines", lines.len());
    Ok(())
}

fn build_index(cfg: &RunConfig, out: &mut OutputDir, summary: &mut Summary) -> Result<()> {
    let analyzer = cfg.analyzer()?;
    let prepared = prepare_corpus(cfg, &analyzer, summary)?;
    let params = cfg.bm25_params()?;
    let index = summary.time("build_index", || prepared.build_index(params))?;
    index.save(&out.path("index.json"))?;
    summary.count("docs", index.n_docs());
    summary.count("terms", index.n_terms());
    summary.count("avg_doc_len", index.avg_doc_len());
    Ok(())
}

fn search(
    a: &SearchArgs,
    cfg: &RunConfig,
    out: &mut OutputDir,
    summary: &mut Summary,
) -> Result<()> {
    let analyzer = cfg.analyzer()?;
    let prepared = match cfg.paths.index {
        Some(_) => None,
        None => Some(prepare_corpus(cfg, &analyzer, summary)?),
    };
    let index = index_for(cfg, prepared.as_ref(), summary)?;
    let mut queries: Vec<(String, String)> = a
        .queries
        .iter()
        .enumerate()
        .map(|(i, q)| (format!("query{i}"), q.clone()))
        .collect();
    if let Some(path) = &cfg.paths.questions {
        queries.extend(
            load_questions(path)?
                .into_iter()
                .map(|q| (q.question_id, q.text)),
        );
    }
    let k = a.k.unwrap_or(cfg.pipeline.k_retrieve);
    let tokens: Vec<Vec<String>> = queries
        .iter()
        .map(|(_, t)| analyzer.tokens(t).into_tokens())
        .collect();
    let hits = summary.time("search", || index.top_k_batch(&tokens, k));
    let mut w = out.writer("search.jsonl")?;
    let mut n_hits = 0;
    for ((qid, _), hits) in queries.iter().zip(hits) {
        for (rank, h) in hits.iter().enumerate() {
            let key = ArticleKey::from_doc_id(&h.doc_id);
            let (law, article) = match &key {
                Some(k) => (k.law_id.as_str(), k.article_id.as_str()),
                None => ("", h.doc_id.as_str()),
            };
            let line = json!({"query_id": qid, "rank": rank + 1, "law_id": law, "article_id": article, "score": h.score});
            writeln!(w, "{line}")?;
            n_hits += 1;
        }
    }
    finish(w)?;
    summary.count("queries", queries.len());
    summary.count("hits", n_hits);
    Ok(())
}

fn segment(cfg: &RunConfig, out: &mut OutputDir, summary: &mut Summary) -> Result<()> {
    let analyzer = cfg.analyzer()?;
    let prepared = prepare_corpus(cfg, &analyzer, summary)?;
    let mut w = out.writer("passages.jsonl")?;
    for (pos, article) in prepared.corpus().articles().iter().enumerate() {
        for p in prepared.passages(pos) {
            let line = json!({
                "law_id": article.law_id,
                "article_id": article.article_id,
                "passage_index": p.passage_index,
                "token_offset": p.token_offset,
                "n_tokens": p.len(),
                "text": prepared.passage_text(pos, p.passage_index),
            });
            writeln!(w, "{line}")?;
        }
    }
    finish(w)
}

fn gen_pairs(cfg: &RunConfig, out: &mut OutputDir, summary: &mut Summary) -> Result<()> {
    let analyzer = cfg.analyzer()?;
    let questions = load_gold(cfg)?;
    let prepared = prepare_corpus(cfg, &analyzer, summary)?;
    prepared.corpus().check_questions(&questions)?;
    let index = index_for(cfg, Some(&prepared), summary)?;
    let pair_cfg = cfg.pair_config()?;
    let set = summary.time("generate", || {
        generate_pairs(&questions, &prepared, &index, &analyzer, &pair_cfg)
    })?;
    let mut w = out.writer("pairs.jsonl")?;
    write_pairs_jsonl(&mut w, &set.pairs)?;
    finish(w)?;
    summary.count("questions", set.stats.questions);
    summary.count("skipped_long", set.stats.skipped_long);
    summary.count("positives", set.stats.positives);
    summary.count("negatives", set.stats.negatives);
    summary.count("pairs", set.pairs.len());
    Ok(())
}

fn split(a: &SplitArgs, cfg: &RunConfig, out: &mut OutputDir, summary: &mut Summary) -> Result<()> {
    let pairs = read_pairs_jsonl(&a.pairs)?;
    let (train, dev) = split_dev(pairs, cfg.pairs.dev_fraction, cfg.seed)?;
    let questions = |ps: &[legalret_core::TrainingPair]| {
        ps.iter()
            .map(|p| p.question_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    };
    summary.count("train_pairs", train.len());
    summary.count("dev_pairs", dev.len());
    summary.count("train_questions", questions(&train));
    summary.count("dev_questions", questions(&dev));
    for (name, part) in [("train.jsonl", &train), ("dev.jsonl", &dev)] {
        let mut w = out.writer(name)?;
        write_pairs_jsonl(&mut w, part)?;
        finish(w)?;
    }
    Ok(())
}

fn build_lm(
    a: &BuildLmArgs,
    cfg: &RunConfig,
    out: &mut OutputDir,
    summary: &mut Summary,
) -> Result<()> {
    let analyzer = cfg.analyzer()?;
    let lines = read_lines(&a.input)?;
    let sentences: Vec<Vec<String>> = summary.time("analyze", || {
        lines
            .iter()
            .map(|l| analyzer.tokens(l).into_tokens())
            .collect()
    });
    let lm_cfg = cfg.lm_config()?;
    let lm = summary.time("train", || train_lm(&sentences, lm_cfg))?;
    lm.save(&out.path("lm.json"))?;
    summary.count("sentences", sentences.len());
    summary.count("tokens", sentences.iter().map(Vec::len).sum::<usize>());
    summary.count("vocab", lm.vocab().len());
    summary.count("contexts", lm.n_contexts());
    Ok(())
}

fn load_lm(cfg: &RunConfig) -> Result<NGramLm> {
    Ok(NGramLm::load(Paths::require(&cfg.paths.lm, "lm")?)?)
}

/// Lines paired with their perplexity, scored in parallel chunks.
fn scored_lines<'a>(
    lm: &'a NGramLm,
    analyzer: &'a Analyzer,
    lines: Vec<String>,
) -> impl Iterator<Item = legalret_core::Result<(String, f64)>> + 'a {
    ScoreStream::new(lines.into_iter().map(Ok), 4096, move |line: &String| {
        lm.perplexity(analyzer.tokens(line).tokens())
    })
}

fn ppl(a: &PplArgs, cfg: &RunConfig, out: &mut OutputDir, summary: &mut Summary) -> Result<()> {
    let analyzer = cfg.analyzer()?;
    let lm = load_lm(cfg)?;
    let lines = read_lines(&a.input)?;
    let n = lines.len();
    let mut w = out.writer("ppl.tsv")?;
    summary.time("score", || -> Result<()> {
        for item in scored_lines(&lm, &analyzer, lines) {
            let (line, pp) = item?;
            writeln!(w, "{pp}\t{line}")?;
        }
        Ok(())
    })?;
    finish(w)?;
    summary.count("sentences", n);
    Ok(())
}

fn parse_scored(path: &Path) -> Result<Vec<(String, f64)>> {
    read_lines(path)?
        .into_iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (score, sentence) = l.split_once('\t').with_context(|| {
                format!(
                    "{}: line {}: expected `score<TAB>sentence`",
                    path.display(),
                    i + 1
                )
            })?;
            let score: f64 = score.trim().parse().with_context(|| {
                format!("{}: line {}: bad score {score:?}", path.display(), i + 1)
            })?;
            Ok((sentence.to_string(), score))
        })
        .collect()
}

fn select_indomain(
    a: &SelectArgs,
    cfg: &RunConfig,
    out: &mut OutputDir,
    summary: &mut Summary,
) -> Result<()> {
    let sel = cfg.selection_config()?;
    let scored: Vec<(String, f64)> = match (&a.input, &a.scored) {
        (Some(input), _) => {
            let analyzer = cfg.analyzer()?;
            let lm = load_lm(cfg)?;
            let lines = read_lines(input)?;
            summary.time("score", || {
                scored_lines(&lm, &analyzer, lines).collect::<Result<_, _>>()
            })?
        }
        (None, Some(path)) => parse_scored(path)?,
        (None, None) => unreachable!("checked in preflight"),
    };
    let total = scored.len();
    let mut w = out.writer("selected.tsv")?;
    let mut kept = 0;
    for (sentence, pp) in filter_scored(scored, sel) {
        writeln!(w, "{pp}\t{sentence}")?;
        kept += 1;
    }
    finish(w)?;
    summary.count("sentences", total);
    summary.count("kept", kept);
    summary.count("dropped", total - kept);
    Ok(())
}

fn write_run(out: &mut OutputDir, run: &RunResult, summary: &mut Summary) -> Result<()> {
    run.save(&out.path("run.json"))?;
    write_submission(&out.path("submission.json"), run)?;
    summary.count("questions", run.questions.len());
    summary.count(
        "selected",
        run.questions
            .iter()
            .map(|q| q.selected.len())
            .sum::<usize>(),
    );
    summary.count(
        "empty_predictions",
        run.questions
            .iter()
            .filter(|q| q.selected.is_empty())
            .count(),
    );
    Ok(())
}

fn run(cfg: &RunConfig, out: &mut OutputDir, summary: &mut Summary) -> Result<()> {
    let analyzer = cfg.analyzer()?;
    let questions = load_gold(cfg)?;
    let prepared = prepare_corpus(cfg, &analyzer, summary)?;
    let index = index_for(cfg, Some(&prepared), summary)?;
    let mut scorer: Box<dyn Scorer> = if cfg.pipeline.scorer_cmd.is_empty() {
        Box::new(LexicalScorer::new(analyzer.clone(), cfg.bm25_params()?))
    } else {
        let timeout = Duration::from_secs(cfg.pipeline.timeout_secs);
        Box::new(ExternalScorer::spawn(&cfg.pipeline.scorer_cmd, timeout)?)
    };
    let pipeline = cfg.pipeline_config()?;
    let result = summary.time("pipeline", || {
        run_pipeline(
            &questions,
            &prepared,
            &index,
            &analyzer,
            &pipeline,
            scorer.as_mut(),
        )
    })?;
    write_run(out, &result, summary)
}

fn vote_runs(
    a: &VoteArgs,
    cfg: &RunConfig,
    out: &mut OutputDir,
    summary: &mut Summary,
) -> Result<()> {
    let runs: Vec<RunResult> = a
        .runs
        .iter()
        .map(|p| RunResult::load(p).with_context(|| format!("loading run {}", p.display())))
        .collect::<Result<_>>()?;
    let weights = if a.weights.is_empty() {
        vec![1.0; runs.len()]
    } else {
        a.weights.clone()
    };
    let result = vote(&runs, &weights, cfg.selection_policy()?)?;
    summary.count("runs", runs.len());
    write_run(out, &result, summary)
}

/// A run file, submission file or questions file as predictions.
fn read_predictions(path: &Path) -> Result<Predictions> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    if value.is_object() {
        let run: RunResult = serde_json::from_value(value)
            .with_context(|| format!("{}: not a run file", path.display()))?;
        return Ok(run.predictions());
    }
    Ok(read_submission(path)?)
}

fn evaluate(
    a: &EvaluateArgs,
    cfg: &RunConfig,
    out: &mut OutputDir,
    summary: &mut Summary,
) -> Result<()> {
    let gold = load_gold(cfg)?;
    let predictions = read_predictions(&a.run)?;
    let report = evaluate_run(&predictions, &gold)?;
    let table = report.render_table();
    out.write_json("eval.json", &report)?;
    out.write("eval.txt", table.as_bytes())?;
    print!("{table}");
    summary.count("questions", report.n_questions);
    summary.count("empty_predictions", report.empty_predictions);
    summary.count("macro_precision", report.macro_avg.precision);
    summary.count("macro_recall", report.macro_avg.recall);
    summary.count("macro_f1", report.macro_avg.f1);
    summary.count("macro_f2", report.macro_avg.f2);
    Ok(())
}

fn filter(cfg: &RunConfig, out: &mut OutputDir, summary: &mut Summary) -> Result<()> {
    let records = load_gold(cfg)?;
    let total = records.len();
    let (kept, stats) = filter_qa(records, cfg.qa.max_answer_words);
    out.write_json("qa_filtered.json", &kept)?;
    summary.count("records", total);
    summary.count("kept", stats.kept);
    summary.count("dropped_missing_answer", stats.dropped_missing_answer);
    summary.count("dropped_long_answer", stats.dropped_long_answer);
    summary.count("dropped_article_list", stats.dropped_article_list);
    Ok(())
}
