"""Command-line entry point: serve models, build tiny checkpoints, fine-tune."""

from __future__ import annotations

import json
from pathlib import Path

import click


@click.group()
def main() -> None:
    """HTTP model server and fine-tuning scripts for the KBP toolkit backends."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help='JSON: {"capabilities": {"entailment": "path-or-hub-id", ...}}.')
@click.option("--model", "models", multiple=True,
              help="capability=path pairs, e.g. --model entailment=./ckpt")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(config_path: str | None, models: tuple[str, ...], host: str, port: int) -> None:
    """Serve any subset of /fill-mask /entail /ner /qa /relext (+ /health)."""
    import uvicorn

    from model_server.app import create_app_from_config

    model_paths: dict[str, str] = {}
    if config_path:
        doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        model_paths.update(doc.get("capabilities", {}))
    for spec in models:
        capability, _, path = spec.partition("=")
        if not path:
            raise click.BadParameter(f"expected capability=path, got {spec!r}")
        model_paths[capability] = path
    if not model_paths:
        raise click.UsageError("no capabilities configured; pass --config or --model")
    app = create_app_from_config(model_paths)
    uvicorn.run(app, host=host, port=port)


@main.command("make-tiny")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--corpus", "corpus_files", multiple=True, type=click.Path(exists=True),
              help="Text files whose words form the vocabulary (JSONL or plain text).")
@click.option("--seed", default=0, type=int)
def make_tiny(out_dir: str, corpus_files: tuple[str, ...], seed: int) -> None:
    """Build tiny random checkpoints for every capability (offline smoke models)."""
    from model_server.tiny import build_tiny_checkpoints

    texts: list[str] = []
    for path in corpus_files:
        texts.extend(Path(path).read_text(encoding="utf-8").splitlines())
    if not texts:
        texts = ["the quick brown fox jumps over the lazy dog"]
    paths = build_tiny_checkpoints(out_dir, texts, seed=seed)
    click.echo(json.dumps(paths, indent=2))


def _train_options(fn):
    fn = click.option("--train", "train_file", required=True, type=click.Path(exists=True))(fn)
    fn = click.option("--model", "model_path", required=True)(fn)
    fn = click.option("--out", "out_dir", required=True, type=click.Path())(fn)
    fn = click.option("--epochs", default=None, type=int)(fn)
    fn = click.option("--lr", default=None, type=float)(fn)
    fn = click.option("--batch-size", default=None, type=int)(fn)
    fn = click.option("--optimizer", default="adamw",
                      type=click.Choice(["adamw", "adafactor"]))(fn)
    fn = click.option("--seed", default=0, type=int)(fn)
    return fn


def _kwargs(**values) -> dict:
    return {k: v for k, v in values.items() if v is not None}


@main.command("train-entailment")
@_train_options
@click.option("--max-seq-len", default=None, type=int)
@click.option("--grad-accum", default=None, type=int)
def cmd_train_entailment(train_file, model_path, out_dir, epochs, lr, batch_size,
                         optimizer, seed, max_seq_len, grad_accum) -> None:
    """Fine-tune a premise/hypothesis classifier on traingen entailment output."""
    from model_server.train import train_entailment

    result = train_entailment(
        train_file, model_path, out_dir, optimizer=optimizer, seed=seed,
        **_kwargs(epochs=epochs, lr=lr, batch_size=batch_size,
                  max_seq_len=max_seq_len, grad_accum=grad_accum),
    )
    click.echo(json.dumps(result.metrics, indent=2))


@main.command("train-mlm")
@_train_options
@click.option("--dev", "dev_file", default=None, type=click.Path(exists=True))
def cmd_train_mlm(train_file, model_path, out_dir, epochs, lr, batch_size,
                  optimizer, seed, dev_file) -> None:
    """Further pretrain a masked LM on traingen prompt/target output."""
    from model_server.train import train_mlm

    result = train_mlm(
        train_file, model_path, out_dir, dev_file=dev_file, optimizer=optimizer,
        seed=seed, **_kwargs(epochs=epochs, lr=lr, batch_size=batch_size),
    )
    click.echo(json.dumps(result.metrics, indent=2))


@main.command("train-qa")
@_train_options
@click.option("--max-seq-len", default=None, type=int)
def cmd_train_qa(train_file, model_path, out_dir, epochs, lr, batch_size,
                 optimizer, seed, max_seq_len) -> None:
    """Fine-tune an extractive QA model on traingen question/answer output."""
    from model_server.train import train_qa

    result = train_qa(
        train_file, model_path, out_dir, optimizer=optimizer, seed=seed,
        **_kwargs(epochs=epochs, lr=lr, batch_size=batch_size, max_seq_len=max_seq_len),
    )
    click.echo(json.dumps(result.metrics, indent=2))


@main.command("train-re")
@_train_options
def cmd_train_re(train_file, model_path, out_dir, epochs, lr, batch_size,
                 optimizer, seed) -> None:
    """Fine-tune the triple generator on traingen text/triples output."""
    from model_server.train import train_re

    result = train_re(
        train_file, model_path, out_dir, optimizer=optimizer, seed=seed,
        **_kwargs(epochs=epochs, lr=lr, batch_size=batch_size),
    )
    click.echo(json.dumps(result.metrics, indent=2))


if __name__ == "__main__":
    main()
