"""Command line for the embedding adapter.

``outlook-adapter embed`` turns a JSONL file of texts into a vector
store in the pipeline's exchange format; ``outlook-adapter prompts``
prints one anchor-generation prompt. The main pipeline forwards its
``embed-adapter`` subcommand here verbatim.
"""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from .core import EmbedRequest, ModelError, embed_batch
from .prompts import POLARITIES, SECTORS, prompt_template

logger = logging.getLogger("outlook_adapter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outlook-adapter",
        description="Text-to-vector export and anchor prompt templates.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    embed = sub.add_parser("embed", help="embed a JSONL file of texts into a vector store")
    embed.add_argument("--in", dest="input", required=True, help="JSONL with article_id/text[/language]")
    embed.add_argument("--out", dest="output", required=True, help="vector store to write")
    embed.add_argument("--model", default="hash:64", help="model tag, e.g. hash:64 or hash:64:7")

    prompts = sub.add_parser("prompts", help="print one anchor-generation prompt")
    prompts.add_argument("--sector", required=True, choices=SECTORS)
    prompts.add_argument("--polarity", required=True, choices=POLARITIES)
    return parser


def read_requests(path: str | Path) -> list[EmbedRequest]:
    """Parse the embed input file; corrupt lines are fatal, not skipped."""
    requests = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                requests.append(
                    EmbedRequest(
                        article_id=record["article_id"],
                        text=record["text"],
                        language=record.get("language", "de"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}, line {line_no}: {exc}") from None
    return requests


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "embed":
            requests = read_requests(args.input)
            summary = embed_batch(requests, args.model, args.output)
            logger.info(
                "wrote %d vectors (dim %d) to %s", summary.written, summary.dimension, args.output
            )
            for article_id, reason in summary.omitted:
                logger.warning("omitted article %d: %s", article_id, reason)
            return 0
        if args.command == "prompts":
            print(prompt_template(args.sector, args.polarity))
            return 0
    except (ModelError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return 1
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
