"""Argmax accuracy of matching attention against correspondences."""
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from pairedit.attention.attention import AttentionRecord
from pairedit.interfaces.sample_pair import Correspondence, correspondence_for_grid
from pairedit.numerics.tensor import as_tensor


@dataclass
class MatchingScore:
    """Matching accuracy and the number of visible target tokens it was measured on."""

    accuracy: float
    """Mean over records of the per-record accuracy, NaN if no record has a visible token."""

    count: int
    """Visible target tokens summed over records."""


def record_hits(record: AttentionRecord, correspondence: Correspondence) -> tuple[int, int]:
    """Return (correct, visible) token counts of one record."""
    a_match = as_tensor(record.a_match).data
    visible = correspondence.visible
    predicted = np.argmax(a_match, axis=1)
    correct = int(np.count_nonzero(predicted[visible] == correspondence.source_index[visible]))
    return correct, int(np.count_nonzero(visible))


def matching_accuracy(
    records: Sequence[AttentionRecord], correspondences: Mapping[int, Correspondence]
) -> MatchingScore:
    """Fraction of visible target tokens whose attention argmax is the corresponding source token.

    The accuracy of every record with visible tokens is averaged over those records; without any
    visible token the accuracy is NaN with count 0.
    """
    accuracies, total = [], 0
    for record in records:
        corr = correspondence_for_grid(correspondences, record.height_tokens, record.width_tokens)
        correct, visible = record_hits(record, corr)
        if visible:
            accuracies.append(correct / visible)
            total += visible
    if not accuracies:
        return MatchingScore(math.nan, 0)
    return MatchingScore(math.fsum(sorted(accuracies)) / len(accuracies), total)
