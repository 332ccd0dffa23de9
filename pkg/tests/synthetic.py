"""Synthetic separable corpora for training-behavior tests.

The generated statements carry two independent class signals:

* a token pattern (80% of statements): words drawn from a credible or a
  suspicious vocabulary bank, visible to the lexical branch;
* digit density (the other 20%): those statements use neutral filler
  words only, and the class shows solely in the length of one numeric
  token.  Numeric tokens stay out of the embedding vocabulary, so every
  number collapses onto the same OOV bucket vector and the lexical
  branch cannot see digit counts at all.

Token-decided statements carry a short label-independent number, so
digit density tells the syntactic branch nothing about them.  A model
using both feature families can therefore beat a lexical-only model by
roughly the digit-decided share, while count features alone top out
near 60% accuracy.
"""

from __future__ import annotations

import numpy as np

from mpsc.corpus import Label, LabeledStatement, Source

FILLERS = (
    "report city council budget meeting member plan state local group office "
    "program public record project against review board street school water road "
    "market company worker family matter system measure notice update study panel "
    "detail summary account period region sector agenda survey"
).split()
CREDIBLE_BANK = (
    "approve confirm publish schedule review adopt audit certify document "
    "outline present propose release renew submit verify allocate assess "
    "consider describe"
).split()
SUSPICIOUS_BANK = (
    "shocking miracle secret exposed banned hoax scandal coverup scheme "
    "outrage conspiracy stunning explosive hidden fraud leaked bizarre "
    "alarming sinister reveal"
).split()

DIGIT_DECIDED_SHARE = 0.2
BANK_WORD_RATE = 0.4


def make_statement(rng: np.random.Generator) -> LabeledStatement:
    digit_decided = rng.random() < DIGIT_DECIDED_SHARE
    suspicious = rng.random() < 0.5
    n_words = int(rng.integers(8, 13))
    words = []
    for _ in range(n_words):
        if not digit_decided and rng.random() < BANK_WORD_RATE:
            bank = SUSPICIOUS_BANK if suspicious else CREDIBLE_BANK
            words.append(bank[rng.integers(0, len(bank))])
        else:
            words.append(FILLERS[rng.integers(0, len(FILLERS))])
    if digit_decided:
        n_digits = int(rng.integers(9, 15)) if suspicious else int(rng.integers(1, 4))
    else:
        n_digits = int(rng.integers(1, 5))
    number = "".join(str(rng.integers(0, 10)) for _ in range(n_digits))
    words.insert(int(rng.integers(0, len(words) + 1)), number)
    text = " ".join(words).capitalize() + "."
    label = Label.SUSPICIOUS if suspicious else Label.CREDIBLE
    return LabeledStatement(text, label, Source.LIAR)


def make_corpus(n: int, seed: int) -> list[LabeledStatement]:
    rng = np.random.default_rng(seed)
    return [make_statement(rng) for _ in range(n)]
