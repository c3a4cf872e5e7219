"""Deterministic train / public-test / private-test partitioning.

The pool is split 2:1 into train and test, and the test side 3:7 into the
public and private parts (sizes rounded with exact rational arithmetic, so
1500 videos give 1000/150/350).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .types import ValidationError


@dataclass(frozen=True)
class DatasetSplit:
    seed: int
    train: tuple[str, ...]
    public_test: tuple[str, ...]
    private_test: tuple[str, ...]

    def subset_of(self, video_id: str) -> str:
        if video_id in set(self.train):
            return "train"
        if video_id in set(self.public_test):
            return "public_test"
        return "private_test"


def split_sizes(n: int) -> tuple[int, int, int]:
    n_train = round(Fraction(2, 3) * n)
    n_public = round(Fraction(3, 10) * (n - n_train))
    return int(n_train), int(n_public), n - int(n_train) - int(n_public)


def split_dataset(video_ids: list[str], seed: int) -> DatasetSplit:
    if len(set(video_ids)) != len(video_ids):
        dupes = sorted({v for v in video_ids if video_ids.count(v) > 1})
        raise ValidationError(f"duplicate video ids: {dupes}")
    if len(video_ids) < 3:
        raise ValidationError("need at least 3 videos to split")
    ids = sorted(video_ids)
    random.Random(seed).shuffle(ids)
    n_train, n_public, _ = split_sizes(len(ids))
    return DatasetSplit(
        seed=seed,
        train=tuple(ids[:n_train]),
        public_test=tuple(ids[n_train : n_train + n_public]),
        private_test=tuple(ids[n_train + n_public :]),
    )
