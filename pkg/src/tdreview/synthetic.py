"""Keyword-planted corpora: every label owns a few marker words that no other
label uses, so any reasonable bag-of-words learner can separate them."""

from __future__ import annotations

import random

from .corpus import ALL_LABELS, LabeledSentence, RawComment

MARKERS = {
    "non_td": ["thanks", "congratulations", "welcome"],
    "documentation": ["vignette", "readme", "roxygen"],
    "code": ["refactor", "lintr", "duplication"],
    "design": ["interface", "abstraction", "coupling"],
    "defect": ["bug", "crash", "segfault"],
    "requirement": ["feature", "requirement", "scope"],
    "test": ["testthat", "coverage", "unittest"],
    "architecture": ["architecture", "modular", "layering"],
    "build": ["travis", "makefile", "compilation"],
    "usability": ["usability", "ergonomic", "intuitive"],
    "versioning": ["semver", "changelog", "deprecation"],
}

FILLER = (
    "package review maybe later function please could also look check think "
    "author reviewer currently seems issue point note comment approach part "
    "data user example output input small minor another general overall"
).split()

PLATFORMS = ("ropensci", "bioconductor")


def keyword_corpus(n_per_label: int = 200, seed: int = 7, n_packages: int = 20) -> list[LabeledSentence]:
    rng = random.Random(seed)
    out = []
    for label in ALL_LABELS:
        for i in range(n_per_label):
            words = rng.sample(FILLER, rng.randint(3, 7))
            words.insert(rng.randrange(len(words) + 1), rng.choice(MARKERS[label]))
            text = " ".join(words).capitalize() + "."
            pkg = rng.randrange(n_packages)
            year = 2016 + rng.randrange(5)
            out.append(
                LabeledSentence(
                    text=text,
                    label=label,
                    comment_id=f"{label}-{i}",
                    package=f"pkg{pkg:02d}",
                    platform=PLATFORMS[pkg % 2],
                    created_at=f"{year}-0{1 + rng.randrange(9)}-1{rng.randrange(10)}T12:00:00Z",
                )
            )
    return out


def as_comments(sentences: list[LabeledSentence], per_comment: int = 3, seed: int = 0) -> list[RawComment]:
    """Group sentences of the same package into comments, for crawl-free demos."""
    rng = random.Random(seed)
    by_pkg: dict[str, list[LabeledSentence]] = {}
    for s in sentences:
        by_pkg.setdefault(s.package, []).append(s)
    out = []
    for pkg in sorted(by_pkg):
        items = by_pkg[pkg]
        rng.shuffle(items)
        for k in range(0, len(items), per_comment):
            chunk = items[k : k + per_comment]
            n = len(out) + 1
            out.append(
                RawComment(
                    platform=chunk[0].platform,
                    package=pkg,
                    issue_number=1 + sum(map(ord, pkg)) % 500,
                    comment_id=f"c{n}",
                    created_at=min(s.created_at for s in chunk),
                    body=" ".join(s.text for s in chunk),
                    url=f"https://github.com/example/software-review/issues/{pkg}#issuecomment-{n}",
                )
            )
    return out
