"""Evaluation metrics: RMSE/MAE, HR@k, NDCG@k, BLEU-n, ROUGE-1/2/L.

Text metrics share one tokenizer (casefold, split on whitespace and
punctuation boundaries) so scores are reproducible within this repo.
BLEU uses uniform weights over orders 1..n, clipped n-gram precision, a
brevity penalty, and add-one smoothing applied to zero-count orders;
orders for which the candidate has no n-grams at all are dropped from
the geometric mean. ROUGE F-scores use beta = 1.2. All text metrics are
in [0, 1] internally; report rendering scales them by 100.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import EmptyInput, EmptyReference

ROUGE_BETA = 1.2

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.casefold())


# -- rating metrics -----------------------------------------------------------

def rmse_mae(pairs: list[tuple[float, float]]) -> tuple[float, float]:
    """Root mean square error and mean absolute error over (predicted, truth)."""
    if not pairs:
        raise EmptyInput("no prediction pairs")
    sq = sum((p - t) ** 2 for p, t in pairs) / len(pairs)
    ab = sum(abs(p - t) for p, t in pairs) / len(pairs)
    return math.sqrt(sq), ab


# -- ranking metrics -----------------------------------------------------------

def hr_ndcg_at_k(ranked: list[str], positive: str, k: int) -> tuple[float, float]:
    """Hit ratio and NDCG at k for a single-positive ranking.

    With one relevant item, NDCG@k reduces to 1/log2(rank + 1) for a
    1-based rank within the cutoff, and 0 otherwise.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(set(ranked)) != len(ranked):
        raise ValueError("ranked list contains duplicates")
    top = ranked[:k]
    if positive not in top:
        return 0.0, 0.0
    rank = top.index(positive) + 1
    return 1.0, 1.0 / math.log2(rank + 1)


def ndcg_at_k(ranked: list[str], relevances: dict[str, float], k: int) -> float:
    """General graded-relevance NDCG@k (unused by the single-positive harness)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = sum(
        relevances.get(item, 0.0) / math.log2(i + 2)
        for i, item in enumerate(ranked[:k])
    )
    ideal = sorted(relevances.values(), reverse=True)[:k]
    idcg = sum(rel / math.log2(i + 2) for i, rel in enumerate(ideal))
    return dcg / idcg if idcg > 0 else 0.0


# -- text metrics ----------------------------------------------------------------

def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(candidate: str, reference: str, n: int) -> float:
    """BLEU with uniform weights over orders 1..n.

    Precision for each order is clipped against the reference counts;
    an order with zero matches is smoothed to (0+1)/(possible+1); an
    order the candidate is too short to populate is excluded and the
    remaining orders reweighted. Brevity penalty: exp(1 - r/c) when the
    candidate is shorter than the reference.
    """
    if n not in (1, 2, 3, 4):
        raise ValueError("n must be in 1..4")
    ref_tokens = tokenize(reference)
    if not ref_tokens:
        raise EmptyReference("reference tokenizes to nothing")
    cand_tokens = tokenize(candidate)
    if not cand_tokens:
        return 0.0

    log_precisions = []
    for order in range(1, n + 1):
        possible = len(cand_tokens) - order + 1
        if possible <= 0:
            continue
        cand_counts = _ngrams(cand_tokens, order)
        ref_counts = _ngrams(ref_tokens, order)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        if clipped == 0:
            precision = 1.0 / (possible + 1)
        else:
            precision = clipped / possible
        log_precisions.append(math.log(precision))
    if not log_precisions:
        return 0.0

    geo_mean = math.exp(sum(log_precisions) / len(log_precisions))
    c, r = len(cand_tokens), len(ref_tokens)
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * geo_mean


def _fscore(precision: float, recall: float, beta: float = ROUGE_BETA) -> float:
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (recall + b2 * precision)


def _lcs_length(a: list[str], b: list[str]) -> int:
    # Iterative DP over a rolling row.
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge(candidate: str, reference: str, variant: str) -> float:
    """ROUGE-1/2 n-gram F1 or ROUGE-L LCS F1, beta = 1.2."""
    if variant not in ("R1", "R2", "RL"):
        raise ValueError(f"unknown variant {variant!r}")
    ref_tokens = tokenize(reference)
    if not ref_tokens:
        raise EmptyReference("reference tokenizes to nothing")
    cand_tokens = tokenize(candidate)
    if not cand_tokens:
        return 0.0

    if variant == "RL":
        lcs = _lcs_length(cand_tokens, ref_tokens)
        precision = lcs / len(cand_tokens)
        recall = lcs / len(ref_tokens)
        return _fscore(precision, recall)

    order = 1 if variant == "R1" else 2
    cand_counts = _ngrams(cand_tokens, order)
    ref_counts = _ngrams(ref_tokens, order)
    if not cand_counts or not ref_counts:
        return 0.0
    overlap = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    precision = overlap / sum(cand_counts.values())
    recall = overlap / sum(ref_counts.values())
    return _fscore(precision, recall)


# -- aggregate report -------------------------------------------------------------

@dataclass
class MetricReport:
    """Per-task aggregate scores keyed by metric name.

    Text-metric values are stored internally in [0, 1]; rendering scales
    them. Construction enforces the value-range invariants.
    """

    task: str
    metric_values: dict[str, float] = field(default_factory=dict)
    n_evaluated: int = 0
    n_failed: int = 0

    def __post_init__(self) -> None:
        for name, value in self.metric_values.items():
            base = name.split("@")[0]
            if base in ("HR", "NDCG") and not 0.0 <= value <= 1.0 + 1e-12:
                raise ValueError(f"{name}={value} outside [0, 1]")
            if base in ("RMSE", "MAE") and value < 0.0:
                raise ValueError(f"{name}={value} negative")
        rmse = self.metric_values.get("RMSE")
        mae = self.metric_values.get("MAE")
        if rmse is not None and mae is not None and rmse < mae - 1e-12:
            raise ValueError(f"RMSE {rmse} < MAE {mae}")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metric_values": dict(self.metric_values),
            "n_evaluated": self.n_evaluated,
            "n_failed": self.n_failed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(
            task=data["task"],
            metric_values=dict(data["metric_values"]),
            n_evaluated=data["n_evaluated"],
            n_failed=data["n_failed"],
        )
