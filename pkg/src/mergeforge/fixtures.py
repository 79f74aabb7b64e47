"""Access to the bundled corpus of reference merge programs."""

from __future__ import annotations

from importlib import resources

from .dsl import MergeProgram, compile_program


def corpus_names() -> list[str]:
    root = resources.files("mergeforge.corpus")
    return sorted(p.name[:-len(".merge")] for p in root.iterdir() if p.name.endswith(".merge"))


def load_corpus_source(name: str) -> str:
    return resources.files("mergeforge.corpus").joinpath(f"{name}.merge").read_text()


def load_corpus_program(name: str) -> MergeProgram:
    return compile_program(load_corpus_source(name), provenance=(0, "corpus"))
