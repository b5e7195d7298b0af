"""Command-line interface for the corpus, training, and serving pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import generation
from .errors import PictopredError, VersionMismatchError


def _make_encoder(spec: str):
    """Encoder factory: ``tiny[:SEED]`` or ``hf:MODEL_NAME``."""
    if spec.startswith("tiny"):
        from .training import EncoderConfig, TinyTextBackend

        seed = int(spec.split(":", 1)[1]) if ":" in spec else 0
        # Encode-dependent operations (senses, coverage) read the last four
        # layers, so the handle variant carries four.
        return TinyTextBackend(config=EncoderConfig(num_layers=4), seed=seed)
    if spec.startswith("hf:"):
        from .encoders import HFTextEncoder

        return HFTextEncoder(spec.split(":", 1)[1])
    raise click.BadParameter(f"unknown encoder spec {spec!r} (use tiny[:SEED] or hf:NAME)")


@click.group()
def main():
    """Pictogram prediction toolkit."""


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def ingest(in_path, out_path):
    """Ingest collected sentences (CSV/JSONL) into the corpus format."""
    sentences = corpus_mod.ingest_collected(in_path)
    corpus_mod.save_corpus_jsonl(sentences, out_path)
    click.echo(f"ingested {len(sentences)} unique sentences -> {out_path}")


@main.command()
@click.option("--strategy", type=click.Choice(["examples", "vocab"]), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--fixture", type=click.Path(), required=True,
              help="Replay fixture (JSONL keyed by prompt sha256).")
@click.option("--collected", type=click.Path(exists=True), required=True,
              help="Human-composed sentences (corpus JSONL).")
@click.option("--vocab", "vocab_path", type=click.Path(exists=True),
              help="Vocabulary (normalized JSONL); required for --strategy vocab.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--live-url", help="Completion endpoint; records to the fixture.")
@click.option("--live-model", default="text-davinci-002")
@click.option("--parallelism", type=int, default=1)
def augment(strategy, seed, fixture, collected, vocab_path, out_path, live_url,
            live_model, parallelism):
    """Generate synthetic sentences from few-shot prompts."""
    pool = corpus_mod.load_corpus_jsonl(collected)
    if strategy == "examples":
        prompts = generation.example_prompts(pool, rng_seed=seed)
    else:
        if not vocab_path:
            raise click.UsageError("--strategy vocab requires --vocab")
        from .vocabulary import load_vocabulary

        vocab = load_vocabulary(vocab_path, fmt="jsonl")
        prompts = generation.vocab_prompts(sorted(vocab.term_index), pool, rng_seed=seed)
    if live_url:
        client = generation.RecordingClient(
            generation.HTTPCompletionClient(live_url, model=live_model), fixture
        )
    else:
        client = generation.ReplayClient(fixture)
    sentences = generation.augment(client, prompts, parallelism=parallelism)
    corpus_mod.save_corpus_jsonl(sentences, out_path)
    click.echo(f"{len(prompts)} prompts -> {len(sentences)} generated sentences -> {out_path}")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--ppl-scorer", default="none",
              help="'none' (skip the quartile filter) or hf:MODEL_NAME.")
@click.option("--vocab", "vocab_path", type=click.Path(exists=True),
              help="Count tokens with the MWE tokenizer of this vocabulary.")
@click.option("--min-len", type=int, default=3)
@click.option("--max-len", type=int, default=11)
def clean(in_path, out_path, ppl_scorer, vocab_path, min_len, max_len):
    """Clean a raw sentence file (dedup, toxicity, perplexity quartile, length)."""
    sentences = corpus_mod.load_corpus_jsonl(in_path)
    token_counter = None
    if vocab_path:
        from .lemmatizer import lemmatize
        from .textpicto import tokenize_mwe
        from .vocabulary import load_vocabulary

        vocab = load_vocabulary(vocab_path, fmt="jsonl")
        token_counter = lambda text: len(tokenize_mwe(text, vocab.mwe_lexicon, lemmatize))
    if ppl_scorer == "none":
        click.echo("warning: no perplexity scorer configured; quartile filter is a no-op",
                   err=True)
        scorer = lambda text: 0.0
    elif ppl_scorer.startswith("hf:"):
        from .hf_backend import hf_sentence_ppl_scorer

        scorer = hf_sentence_ppl_scorer(ppl_scorer.split(":", 1)[1])
    else:
        raise click.BadParameter(f"unknown scorer {ppl_scorer!r} (use 'none' or hf:NAME)")
    cleaned = corpus_mod.clean(
        sentences, scorer, corpus_mod.allow_all_toxicity,
        min_len=min_len, max_len=max_len, token_counter=token_counter,
    )
    corpus_mod.save_corpus_jsonl(cleaned, out_path)
    click.echo(f"kept {len(cleaned)}/{len(sentences)} sentences -> {out_path}")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True))
@click.option("--plots", "plots_dir", type=click.Path())
@click.option("--top", type=int, default=20, help="Bars per frequency chart.")
def stats(in_path, stopwords_path, plots_dir, top):
    """Corpus summary statistics and frequency charts."""
    sentences = corpus_mod.load_corpus_jsonl(in_path)
    stopwords = corpus_mod.load_stopwords(stopwords_path)
    result = corpus_mod.corpus_stats(sentences, stopwords)
    summary = {
        "total_words": result.total_words,
        "unique_words": result.unique_words,
        "total_sentences": result.total_sentences,
        "max_length": result.length_max,
        "min_length": result.length_min,
        "mean_length": round(result.length_mean, 2),
        "most_frequent_length": f"{result.length_mode} ({result.length_mode_count} times)",
    }
    click.echo(json.dumps(summary, indent=2, ensure_ascii=False))
    if plots_dir:
        _frequency_charts(result, Path(plots_dir), top)
        click.echo(f"charts written to {plots_dir}")


def _frequency_charts(stats_result, out_dir: Path, top: int) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir.mkdir(parents=True, exist_ok=True)
    charts = {
        "word_frequency.png": (stats_result.word_freq, "Words frequency"),
        "stopword_frequency.png": (stats_result.stopword_freq, "Stop-words frequency"),
        "bigram_frequency.png": (stats_result.bigram_freq, "Bigram frequency"),
        "trigram_frequency.png": (stats_result.trigram_freq, "Trigram frequency"),
    }
    for filename, (counter, title) in charts.items():
        pairs = counter.most_common(top)
        if not pairs:
            continue
        labels = [" ".join(k) if isinstance(k, tuple) else k for k, _ in pairs]
        values = [v for _, v in pairs]
        fig, ax = plt.subplots(figsize=(10, 4))
        ax.bar(range(len(values)), values)
        ax.set_xticks(range(len(values)))
        ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(out_dir / filename, dpi=120)
        plt.close(fig)


@main.command()
@click.option("--target", required=True, type=click.Path(exists=True))
@click.option("--reference", required=True, type=click.Path(exists=True))
@click.option("--k-range", default="10:200:10", help="START:STOP:STEP cluster counts.")
@click.option("--seed", type=int, default=0)
@click.option("--encoder", "encoder_spec", default="tiny")
def coverage(target, reference, k_range, seed, encoder_spec):
    """Cluster coverage of the target corpus over the reference corpus
    (both directions are reported)."""
    from .coverage import coverage_curve
    from .encoders import sentence_embedding

    encoder = _make_encoder(encoder_spec)
    embedder = lambda text: sentence_embedding(encoder, text)
    target_sents = corpus_mod.load_corpus_jsonl(target)
    reference_sents = corpus_mod.load_corpus_jsonl(reference)
    start, stop, step = (int(x) for x in k_range.split(":"))
    ks = [k for k in range(start, stop + 1, step)]
    ks = [k for k in ks if k <= len(target_sents) + len(reference_sents)]
    forward = coverage_curve(target_sents, reference_sents, embedder, ks, rng_seed=seed)
    backward = coverage_curve(reference_sents, target_sents, embedder, ks, rng_seed=seed)
    click.echo(json.dumps(
        {
            "target_over_reference": {str(k): v for k, v in forward.items()},
            "reference_over_target": {str(k): v for k, v in backward.items()},
        },
        indent=2,
    ))


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--proportions", default="0.68,0.16,0.16")
def split(in_path, seed, out_dir, proportions):
    """Split a corpus into train/test/validation JSONL files."""
    sentences = corpus_mod.load_corpus_jsonl(in_path)
    props = tuple(float(x) for x in proportions.split(","))
    result = corpus_mod.split(sentences, proportions=props, rng_seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in corpus_mod.SPLITS:
        corpus_mod.save_corpus_jsonl(result.subset(name), out / f"{name}.jsonl")
    click.echo(json.dumps(result.sizes()))


@main.command(name="text2picto")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--sense-cache", "cache_path", type=click.Path())
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--encoder", "encoder_spec", default="tiny")
def text2picto(vocab_path, cache_path, in_path, out_path, encoder_spec):
    """Convert natural-language sentences to pictogram-id sequences."""
    from .textpicto import load_sense_cache, save_picto_corpus, save_sense_cache, sentence_to_picto
    from .vocabulary import load_vocabulary

    vocab = load_vocabulary(vocab_path, fmt="jsonl")
    encoder = _make_encoder(encoder_spec)
    cache = {}
    if cache_path and Path(cache_path).exists():
        cache, cache_encoder, _h = load_sense_cache(cache_path)
        if cache_encoder != encoder.encoder_id:
            raise click.ClickException(
                f"sense cache was built with {cache_encoder}, not {encoder.encoder_id}"
            )
    sentences = corpus_mod.load_corpus_jsonl(in_path)
    converted = [sentence_to_picto(s.text, vocab, encoder, cache) for s in sentences]
    save_picto_corpus(converted, out_path)
    if cache_path:
        save_sense_cache(cache, cache_path, encoder.encoder_id, encoder.hidden_size)
    click.echo(f"converted {len(converted)} sentences -> {out_path}")


@main.command(name="build-embeddings")
@click.option("--strategy", required=True)
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--images", "images_dir", type=click.Path(exists=True))
@click.option("--fallback", type=click.Choice(["caption", "zero"]), default="caption")
@click.option("--encoder", "encoder_spec", default="tiny")
def build_embeddings(strategy, vocab_path, out_path, images_dir, fallback, encoder_spec):
    """Build the replacement embedding matrix for a strategy."""
    from .embeddings import build_embedding_matrix, save_matrix
    from .vocabulary import load_vocabulary

    vocab = load_vocabulary(vocab_path, fmt="jsonl")
    encoder = _make_encoder(encoder_spec)
    img_encoder = None
    if strategy.startswith("image"):
        from .encoders import HFImageEncoder

        img_encoder = HFImageEncoder()
    matrix, report = build_embedding_matrix(
        vocab, strategy, encoder, img_encoder, fallback=fallback, images_dir=images_dir
    )
    save_matrix(matrix, out_path)
    click.echo(
        f"built {len(matrix)} vectors (h={matrix.h}), "
        f"{report.failure_count} fallbacks -> {out_path}"
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True),
              help="Picto-corpus JSONL.")
@click.option("--embeddings", "matrix_path", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--tiny", is_flag=True, help="Use the desk-scale 2-layer encoder.")
@click.option("--split-seed", type=int, default=0)
def finetune(config_path, corpus_path, matrix_path, vocab_path, out_dir, tiny, split_seed):
    """Swap the vocabulary into the encoder and fine-tune on the corpus."""
    from .embeddings import load_matrix
    from .textpicto import load_picto_corpus
    from .training import (
        TinyTextBackend,
        TrainingConfig,
        build_token_table,
        finetune as run_finetune,
        save_checkpoint,
        swap_vocabulary,
    )
    from .vocabulary import load_vocabulary

    vocab = load_vocabulary(vocab_path, fmt="jsonl")
    matrix = load_matrix(matrix_path)
    picto_sentences = load_picto_corpus(corpus_path)
    if config_path:
        config = TrainingConfig.from_file(config_path)
    elif tiny:
        config = TrainingConfig(
            learning_rate=1e-3, batch_sequences=32, epochs=30, rng_seed=split_seed
        )
    else:
        config = TrainingConfig.paper_defaults(matrix.strategy)
    if tiny:
        base = TinyTextBackend(seed=config.rng_seed)
    else:
        from .hf_backend import HFBaseBackend

        base = HFBaseBackend()
    table = build_token_table(picto_sentences, vocab)
    adapted = swap_vocabulary(base, table, matrix, rng_seed=config.rng_seed)
    tokenized = [s.token_strings() for s in picto_sentences]
    assignment = corpus_mod.split(tokenized, rng_seed=split_seed)
    train = assignment.subset("train")
    val = assignment.subset("validation")
    test = assignment.subset("test")
    result = run_finetune(adapted, train, val, config, checkpoint_dir=out_dir)
    out = Path(out_dir)
    save_checkpoint(adapted, out / "final", epoch=config.epochs)
    (out / "test_split.json").write_text(json.dumps(test, ensure_ascii=False))
    (out / "loss_history.json").write_text(
        json.dumps({"train": result.train_losses, "val": result.val_losses})
    )
    click.echo(
        f"trained {config.epochs} epochs; "
        f"final train loss {result.train_losses[-1]:.4f}, "
        f"val loss {result.val_losses[-1]:.4f}; checkpoint -> {out / 'final'}"
    )


@main.command()
@click.option("--checkpoint", "checkpoint_dir", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True),
              help="test_split.json or picto-corpus JSONL.")
@click.option("--grid-sizes", default="1,9,18,25,36")
@click.option("--out", "out_path", type=click.Path())
@click.option("--reference", is_flag=True, help="Attach full-scale reference values.")
def evaluate(checkpoint_dir, test_path, grid_sizes, out_path, reference):
    """Evaluate a checkpoint: pseudo-perplexity and grid-size accuracies."""
    from .evaluation import evaluate as run_evaluate
    from .training import load_checkpoint

    adapted = load_checkpoint(checkpoint_dir)
    path = Path(test_path)
    if path.suffix == ".json":
        sentences = json.loads(path.read_text(encoding="utf-8"))
    else:
        from .textpicto import load_picto_corpus

        sentences = [s.token_strings() for s in load_picto_corpus(path)]
    ns = tuple(int(x) for x in grid_sizes.split(","))
    report = run_evaluate(adapted, sentences, ns=ns, attach_reference=reference)
    click.echo(report.to_json())
    if out_path:
        Path(out_path).write_text(report.to_json(), encoding="utf-8")


@main.command()
@click.option("--checkpoint", "checkpoint_dir", required=True, type=click.Path(exists=True))
@click.option("--prefix", default="", help="Space-separated token strings.")
@click.option("--k", type=int, default=6)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True))
def demo(checkpoint_dir, prefix, k, vocab_path):
    """Print the top-k next-pictogram predictions for a prefix."""
    from .evaluation import render_predictions
    from .training import load_checkpoint

    adapted = load_checkpoint(checkpoint_dir)
    vocab = None
    if vocab_path:
        from .vocabulary import load_vocabulary

        vocab = load_vocabulary(vocab_path, fmt="jsonl")
    tokens = prefix.split() if prefix else []
    for item in render_predictions(adapted, tokens, k=k, vocab=vocab):
        click.echo(f"{item.probability:8.5f}  {item.token:>8}  {item.caption}")


@main.command()
@click.option("--checkpoint", "checkpoint_dir", required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--images", "images_dir", type=click.Path(exists=True))
@click.option("--image-base-url")
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--max-concurrency", type=int, default=4)
@click.option("--cors", "cors_origins", multiple=True)
def serve(checkpoint_dir, vocab_path, images_dir, image_base_url, port, host,
          max_concurrency, cors_origins):
    """Serve predictions over HTTP (fails fast on vocabulary mismatch)."""
    from .service import create_app

    try:
        app = create_app(
            checkpoint_dir,
            vocab_path,
            images_dir=images_dir,
            image_base_url=image_base_url,
            cors_origins=tuple(cors_origins),
            max_concurrency=max_concurrency,
        )
    except VersionMismatchError as exc:
        click.echo(f"refusing to start: {exc}", err=True)
        sys.exit(2)
    except PictopredError as exc:
        click.echo(f"refusing to start: {exc}", err=True)
        sys.exit(2)
    import uvicorn

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
