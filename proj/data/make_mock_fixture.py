#!/usr/bin/env python3
"""Regenerates mock_mlm.fixture from mini_corpus.txt.

Two sense axes: dimension 0 carries the exam reading of "closed book",
dimension 1 the mystery reading. Remaining dimensions hold small fixed
features so that rows are not exact duplicates.
"""

import pathlib
import re
import unicodedata

HERE = pathlib.Path(__file__).resolve().parent
D = 8

EXAM = """exam exams test tests quiz quizzes midterm final physics chemistry math
statistics law course professor teacher students student notes formulas formula
questions answers calculators calculators pencils grader lecture papers proofs
definitions problems practice practised memorize studied class essay oral section
portion cover twenty short format permitted open term""".split()
MYSTERY = """past feelings stranger father war motives friends family history quiet
neighbor village private life press childhood children colleague colleagues man
intentions spy interviews inner thoughts uncle money affair decades reasons leaving
marriage silent boy secret biographer emotions mysterious landlord tenants
reclusive author fans heart suitor mother youth case detectives director shy
grandfather country nobody read mystery remain remains remained""".split()

EXAM_CANDS = "exam test quiz midterm final oral written timed strict proctored unaided memory".split()
MYST_CANDS = "mystery enigma secret puzzle riddle stranger unknown private hidden sealed cipher shadow".split()
SPLIT_PLURALS = {"students": "student", "exams": "exam", "tests": "test"}


def words_of(line):
    out = []
    for raw in line.lower().split():
        for piece in re.split(r"(\W)", raw):
            if piece and not piece.isspace():
                out.append(piece)
    return out


def feature(i, j):
    return ((i * 37 + j * 11) % 17 - 8) / 400.0


def fmt(v):
    return " ".join(f"{x:.4f}".rstrip("0").rstrip(".") if x != 0 else "0" for x in v)


def main():
    corpus = (HERE / "mini_corpus.txt").read_text(encoding="utf-8").splitlines()
    vocab = []
    for line in corpus:
        for w in words_of(line):
            w = SPLIT_PLURALS.get(w, w)
            if w not in vocab:
                vocab.append(w)
    for w in EXAM_CANDS + MYST_CANDS + ["student", "##s", "note"]:
        if w not in vocab:
            vocab.append(w)
    exam, myst = set(EXAM) | set(EXAM_CANDS), set(MYSTERY) | set(MYST_CANDS)
    assert not exam & myst, exam & myst

    lines = [
        "# Generated by make_mock_fixture.py; edit the script, not this file.",
        "checkpoint mock-closed-book",
        f"hidden_size {D}",
        "max_length 64",
        "special [PAD] [UNK] [CLS] [SEP] [MASK]",
    ]
    for i in range(0, len(vocab), 12):
        lines.append("vocab " + " ".join(vocab[i:i + 12]))
    lines.append("slot 0 " + fmt([0.05, 0.05, 0.3, 0, 0, 0, 0, 0]))
    lines.append("slot 1 " + fmt([0.05, 0.05, 0, 0.3, 0, 0, 0, 0]))
    for i, w in enumerate(vocab):
        if not any(c.isalpha() for c in w) or w == "##s":
            continue
        v = [0.0, 0.0] + [feature(i, j) for j in range(2, D)]
        if w in exam:
            v[0] = 1.0
        elif w in myst:
            v[1] = 1.0
        lines.append(f"embed {w} {fmt(v)}")
    for k, w in enumerate(EXAM_CANDS):
        lines.append(f"output {w} 0 {fmt([2.0 - 0.08 * k, -0.5] + [0.0] * (D - 2))}")
    for k, w in enumerate(MYST_CANDS):
        lines.append(f"output {w} 0 {fmt([-0.5, 2.0 - 0.08 * k] + [0.0] * (D - 2))}")
    lines.append(f"output book 0.5 {fmt([0.3, 0.3] + [0.0] * (D - 2))}")
    for w in vocab:
        if w in exam or w in myst:
            lines.append(f"salience {w} 1.5")
        elif len(w) <= 3 or not w.isalpha():
            lines.append(f"salience {w} 0.3")
    (HERE / "mock_mlm.fixture").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
